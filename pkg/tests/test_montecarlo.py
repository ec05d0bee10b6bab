import dataclasses

import numpy as np
import pytest

from rdpginfer import montecarlo as mc
from rdpginfer.errors import ExperimentError


def tiny_config(**overrides):
    defaults = dict(curve="hardy-weinberg", s=3, m=80, tau0=0.3, tau_star=0.5,
                    alpha=0.1, replicates=8, radius=1.0, base_seed=99)
    defaults.update(overrides)
    return mc.PowerConfig(**defaults)


class TestPowerConfig:
    def test_defaults_are_example_scale(self):
        cfg = mc.PowerConfig()
        assert (cfg.s, cfg.m, cfg.alpha) == (5, 1000, 0.05)

    @pytest.mark.parametrize("bad", [
        dict(alpha=0.0), dict(alpha=1.0), dict(s=0), dict(m=0),
        dict(tau0=-0.1), dict(tau_star=1.2), dict(radius=0.0),
        dict(community_sd=-1.0), dict(aux_density="beta"), dict(replicates=0),
    ])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            tiny_config(**bad)

    def test_curve_spec_frozen_to_tuples(self):
        cfg = tiny_config(curve=[[0, 1], [1, -1]])
        assert cfg.curve == ((0, 1), (1, -1))
        assert hash(cfg)  # usable as a cache key


class TestReplicateStatistics:
    def test_bit_identical_repeat(self):
        cfg = tiny_config()
        a = mc.replicate_statistics(cfg, "null", 2)
        b = mc.replicate_statistics(cfg, "null", 2)
        assert a == b

    def test_values_finite_nonnegative(self):
        cfg = tiny_config()
        r = mc.replicate_statistics(cfg, "alternative", 0)
        for value in (r.t_k, r.t_1, r.t_1hat):
            assert value is not None and np.isfinite(value) and value >= 0.0

    def test_indices_differ(self):
        cfg = tiny_config()
        assert (mc.replicate_statistics(cfg, "null", 0)
                != mc.replicate_statistics(cfg, "null", 1))

    def test_arms_differ(self):
        cfg = tiny_config()
        a = mc.replicate_statistics(cfg, "null", 0)
        b = mc.replicate_statistics(cfg, "alternative", 0)
        assert a != b

    def test_compute_subset_consistency(self):
        # the adjacency draw must not depend on which statistics are computed
        cfg = tiny_config()
        full = mc.replicate_statistics(cfg, "null", 4)
        partial = mc.replicate_statistics(cfg, "null", 4, compute=("Tk", "T1"))
        assert partial.t_k == full.t_k
        assert partial.t_1 == full.t_1
        assert partial.t_1hat is None

    def test_invalid_arm(self):
        with pytest.raises(ValueError, match="arm"):
            mc.replicate_statistics(tiny_config(), "bogus", 0)

    def test_community_spread_option(self):
        cfg = tiny_config(community_sd=0.05)
        r = mc.replicate_statistics(cfg, "null", 0)
        assert np.isfinite(r.t_k)
        out = mc.replicate_outcomes(cfg, "null", 0)
        tau_hat = np.asarray(out["T1"].diagnostics["tau_hat"])
        assert np.all((tau_hat >= 0) & (tau_hat <= 1))
        # a spread community should not collapse to a single projection
        assert np.unique(np.round(tau_hat, 6)).size > 1

    def test_outcomes_expose_diagnostics(self):
        out = mc.replicate_outcomes(tiny_config(), "null", 1)
        assert out["T1hat"].diagnostics["iterations"] >= 1
        assert len(out["T1hat"].diagnostics["z"]) == 80 + 3 + 1


@pytest.mark.slow
class TestNullVersusAlternative:
    def test_true_manifold_statistic_separates_arms(self):
        # Example-1 configuration, 200 replicates per arm, T1 only
        cfg = mc.PowerConfig(base_seed=31)
        nulls, alts = [], []
        for i in range(200):
            nulls.append(mc.replicate_statistics(cfg, "null", i, compute=("T1",)).t_1)
            alts.append(mc.replicate_statistics(cfg, "alternative", i, compute=("T1",)).t_1)
        assert np.mean(nulls) < np.mean(alts)


class TestCriticalValues:
    def _stats(self, values):
        return [mc.ReplicateStats(t_k=v, t_1=v, t_1hat=v) for v in values]

    def test_order_statistic_convention(self):
        crit = mc.critical_values(self._stats(np.arange(1.0, 101.0)), alpha=0.05)
        assert crit.t_k == 95.0

    def test_constant_sample(self):
        crit = mc.critical_values(self._stats([3.3] * 50), alpha=0.05)
        assert crit.t_1 == 3.3

    def test_uniform_quantile_oracle(self):
        rng = np.random.default_rng(12)
        values = rng.uniform(0, 1, 1000)
        crit = mc.critical_values(self._stats(values), alpha=0.05)
        assert crit.t_k == pytest.approx(0.95, abs=0.02)
        # matches an independent order-statistic computation
        assert crit.t_k == np.sort(values)[int(np.ceil(0.95 * 1000)) - 1]

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(13)
        stats = self._stats(rng.uniform(0, 1, 200))
        crits = [mc.critical_values(stats, a).t_k for a in (0.01, 0.05, 0.1, 0.3)]
        assert all(b <= a for a, b in zip(crits, crits[1:]))

    def test_failed_replicates_excluded(self):
        stats = self._stats(np.arange(1.0, 11.0))
        stats[-1] = dataclasses.replace(stats[-1], t_1hat=None, failure="disconnected")
        crit = mc.critical_values(stats, alpha=0.1)
        assert crit.t_k == 9.0     # ceil(0.9 * 10) = 9th of 10
        assert crit.t_1hat == 9.0  # ceil(0.9 * 9) = 9th of 9, values 1..9

    def test_empty_error(self):
        with pytest.raises(ValueError):
            mc.critical_values([], alpha=0.05)


class TestPowerEstimate:
    def _stats(self, values):
        return [mc.ReplicateStats(t_k=v, t_1=v, t_1hat=v) for v in values]

    def test_total_separation(self):
        crit = mc.CriticalValues(t_k=1.0, t_1=1.0, t_1hat=1.0)
        power = mc.power_estimate(self._stats([2.0, 3.0, 1.0]), crit)
        assert power.t_k == 1.0  # >= is a rejection

    def test_no_rejections(self):
        crit = mc.CriticalValues(t_k=1.0, t_1=1.0, t_1hat=1.0)
        power = mc.power_estimate(self._stats([0.1, 0.5]), crit)
        assert power.t_1 == 0.0

    def test_failures_excluded_from_denominator(self):
        stats = self._stats([2.0, 2.0, 0.0, 2.0])
        stats[1] = dataclasses.replace(stats[1], t_1hat=None, failure="disconnected")
        crit = mc.CriticalValues(t_k=1.0, t_1=1.0, t_1hat=1.0)
        power = mc.power_estimate(stats, crit)
        assert power.t_k == pytest.approx(0.75)
        assert power.t_1hat == pytest.approx(2.0 / 3.0)
        assert power.counts == {"Tk": 4, "T1": 4, "T1hat": 3}


class TestRunPowerExperiment:
    def test_report_shape_and_determinism(self):
        cfg = tiny_config()
        a = mc.run_power_experiment(cfg, n_jobs=1)
        b = mc.run_power_experiment(cfg, n_jobs=2)
        assert a.null_stats == b.null_stats
        assert a.alt_stats == b.alt_stats
        assert a.critical == b.critical
        assert a.power == b.power
        assert len(a.null_stats) == cfg.replicates
        assert a.to_json_dict() == b.to_json_dict()

    def test_size_equals_level_tiny(self):
        # tau_star == tau0 makes both arms identically distributed
        cfg = tiny_config(tau_star=0.3, replicates=25, alpha=0.2)
        report = mc.run_power_experiment(cfg)
        for name in mc.STAT_NAMES:
            se = np.sqrt(0.2 * 0.8 / 25)
            assert abs(report.power.get(name) - 0.2) <= 4 * se + 1 / 25

    def test_too_many_failures(self):
        cfg = tiny_config(radius=0.02, replicates=5)
        with pytest.raises(ExperimentError, match="replicates failed"):
            mc.run_power_experiment(cfg)

    def test_failures_recorded_not_fatal_below_threshold(self):
        # radius large enough that only Tk/T1 are meaningful everywhere but a
        # sliver of replicates may disconnect; just exercise the happy path
        cfg = tiny_config(replicates=4)
        report = mc.run_power_experiment(cfg)
        assert report.power.counts["Tk"] == 4


@pytest.mark.slow
class TestConvergencePowerGap:
    def test_learnt_test_dominates_across_m(self):
        # at these sample sizes the learnt-curve test is at least as powerful
        # as the known-curve test for every m (the known-curve test suffers a
        # finite-sample projection bias that embedding avoids)
        cfg = mc.PowerConfig(s=5, m=60, tau0=0.3, tau_star=0.35, alpha=0.05,
                             replicates=150, radius=1.0, base_seed=71)
        rows = mc.convergence_study(cfg, [60, 150, 400], n_jobs=2)
        B = cfg.replicates
        for row in rows:
            se = np.sqrt(sum(p * (1 - p) / B
                             for p in (row.power_t_1, row.power_t_1hat)))
            assert row.power_t_1hat >= row.power_t_1 - 2 * se, rows
        # more auxiliary vertices sharpen the learnt-curve test
        assert rows[-1].power_t_1hat > rows[0].power_t_1hat, rows


class TestConvergenceStudy:
    def test_single_m_matches_experiment(self):
        cfg = tiny_config(replicates=6)
        rows = mc.convergence_study(cfg, [80])
        report = mc.run_power_experiment(dataclasses.replace(cfg, m=80))
        assert rows[0].power_t_1 == report.power.t_1
        assert rows[0].power_t_1hat == report.power.t_1hat
        assert rows[0].gap == abs(report.power.t_1hat - report.power.t_1)

    def test_deterministic_table(self):
        cfg = tiny_config(replicates=4)
        a = mc.convergence_study(cfg, [60, 90])
        b = mc.convergence_study(cfg, [60, 90])
        assert a == b

    def test_requires_increasing_m(self):
        with pytest.raises(ValueError, match="increasing"):
            mc.convergence_study(tiny_config(), [100, 100])
        with pytest.raises(ValueError, match="non-empty"):
            mc.convergence_study(tiny_config(), [])


class TestSerializationHelpers:
    def test_replicates_csv(self, tmp_path):
        cfg = tiny_config(replicates=3)
        report = mc.run_power_experiment(cfg)
        path = tmp_path / "reps.csv"
        mc.write_replicates_csv(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "arm,index,Tk,T1,T1hat,failed"
        assert len(lines) == 1 + 2 * 3
        assert lines[1].startswith("null,0,")

    def test_convergence_csv(self, tmp_path):
        rows = [mc.ConvergenceRow(m=10, power_t_1=0.5, power_t_1hat=0.625)]
        path = tmp_path / "conv.csv"
        mc.write_convergence_csv(rows, path)
        assert path.read_text().splitlines()[1] == "10,0.5,0.625,0.125"

    def test_report_json_excludes_wall_clock(self):
        report = mc.run_power_experiment(tiny_config(replicates=2))
        doc = report.to_json_dict()
        assert "wall_clock" not in str(doc)
        assert doc["schema_version"] == 1
