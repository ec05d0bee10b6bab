"""Command-line front end: graph simulation, spectral embedding, curve
learning, single-replicate statistics, and Monte Carlo power experiments.

Exit codes: 0 success, 1 usage/config error, 2 numerical or connectivity error.
Every output file is a pure function of (config, seed); timing and progress
go to stderr only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as _config
from . import curve as _curve
from . import inference as _inference
from . import manifold as _manifold
from . import montecarlo as _mc
from . import rdpg as _rdpg
from .errors import NumericalError

OUT_ENV_VAR = "RDPGINFER_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad arguments; remap to this tool's usage exit code 1
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rdpginfer",
                     description="Latent-curve tests on random dot product graphs.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    descriptions = {
        "simulate": "sample a graph whose latent positions lie on a curve",
        "ase": "spectral embedding of an adjacency edge list",
        "isomap": "learn a 1-D embedding of a point cloud",
        "test": "statistics of a single simulated replicate",
        "power": "Monte Carlo power experiment",
        "converge": "power gap of the learnt-curve test across auxiliary counts",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc, description=desc,
                           epilog=_config.schema_help(name),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--out", default=None,
                       help=f"output directory (default ./out, or ${OUT_ENV_VAR})")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing output files")
        p.add_argument("--verbose", "-v", action="store_true",
                       help="progress messages on stderr")
        if name in ("simulate", "test", "power", "converge"):
            p.add_argument("--seed", type=int, default=None,
                           help="override the config seed")
        if name in ("power", "converge"):
            p.add_argument("--threads", type=int, default=None,
                           help="replicate parallelism (default: all cores); "
                                "results do not depend on it")
    return parser


def _out_dir(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV_VAR, "out"))


def _prepare_outputs(args) -> Path:
    outdir = _out_dir(args)
    outdir.mkdir(parents=True, exist_ok=True)
    existing = [str(outdir / f) for f in _config.OUTPUTS[args.command]
                if (outdir / f).exists()]
    if existing and not args.force:
        raise UsageError(f"output file(s) already exist (use --force): {', '.join(existing)}")
    return outdir


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _log(args, message) -> None:
    if args.verbose:
        print(message, file=sys.stderr)


def _power_config(cfg: dict, args, m=None) -> _mc.PowerConfig:
    seed = args.seed if getattr(args, "seed", None) is not None else cfg["seed"]
    return _mc.PowerConfig(
        curve=cfg["curve"], s=cfg["s"], m=cfg["m"] if m is None else m,
        tau0=cfg["tau0"], tau_star=cfg["tau_star"],
        alpha=cfg.get("alpha", 0.05), replicates=cfg.get("replicates", 1),
        radius=cfg["radius"], community_sd=cfg["community_sd"],
        aux_density=cfg["aux_density"], metric=cfg["metric"], base_seed=seed,
        embed=_mc.EmbedParams(max_iters=cfg["embed_max_iters"], tol=cfg["embed_tol"]),
    )


def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            raise UsageError(f"--threads must be >= 1, got {args.threads}")
        return args.threads
    return os.cpu_count() or 1


# -- subcommand handlers ------------------------------------------------------

def _cmd_simulate(cfg, args, outdir: Path):
    crv = _curve.make_curve(cfg["curve"])
    if not _curve.validate_latent_support(crv):
        raise ValueError("curve is not a valid latent support: inner products leave [0, 1]")
    seed = args.seed if args.seed is not None else cfg["seed"]
    rng = np.random.default_rng(seed)
    taus = np.concatenate([np.full(cfg["s"], cfg["tau"]), rng.uniform(0.0, 1.0, cfg["m"])])
    lat = _rdpg.LatentMatrix(crv.evaluate(taus), cfg["s"])
    adj = _rdpg.sample_adjacency(lat, rng)
    _rdpg.write_adjacency_csv(adj, outdir / "adjacency.csv")
    _rdpg.write_embedding_csv(lat.X, outdir / "latent.csv")
    _log(args, f"simulated {adj.n} vertices, {int(adj.matrix.sum() // 2)} edges")


def _cmd_ase(cfg, args, outdir: Path):
    adj = _rdpg.read_adjacency_csv(cfg["input"], cfg["n"])
    emb = _rdpg.ase(adj.matrix, cfg["rank"])
    _rdpg.write_embedding_csv(emb.points, outdir / "embedding.csv")
    _log(args, f"embedded {adj.n} vertices into R^{cfg['rank']}; "
               f"top eigenvalue {emb.eigenvalues[0]:.4g}")


def _cmd_isomap(cfg, args, outdir: Path):
    points = _rdpg.read_embedding_csv(cfg["input"])
    if cfg["rule"] == "epsilon":
        graph = _manifold.build_epsilon_graph(points, cfg["radius"])
    elif cfg["rule"] == "knn":
        graph = _manifold.build_knn_graph(points, cfg["neighbors"])
    else:
        raise ValueError(f"rule must be 'epsilon' or 'knn', got {cfg['rule']!r}")
    delta = _manifold.shortest_path_matrix(graph, largest_component=cfg["largest_component"])
    emb = _manifold.embed_line(delta, max_iters=cfg["embed_max_iters"], tol=cfg["embed_tol"])
    _manifold.write_line_embedding_csv(emb, outdir / "line_embedding.csv",
                                       vertex_ids=delta.vertex_ids)
    summary = {
        "schema_version": 1,
        "n_points": int(points.shape[0]),
        "n_embedded": int(emb.coords.size),
        "rule": graph.rule,
        "param": graph.param,
        "n_edges": int(graph.n_edges),
        "stress": emb.stress,
        "iterations": emb.iterations,
        "restricted_to_largest_component": delta.vertex_ids is not None,
    }
    _write_json(summary, outdir / "isomap_summary.json")
    _log(args, f"stress {emb.stress:.4g} after {emb.iterations} iterations")


def _cmd_test(cfg, args, outdir: Path):
    pcfg = _power_config(cfg, args)
    out = _mc.replicate_outcomes(pcfg, cfg["arm"], cfg["index"])
    doc = {
        "schema_version": 1,
        "arm": cfg["arm"],
        "index": cfg["index"],
        "statistics": {name: (out[name].to_json_dict() if out[name] is not None else None)
                       for name in _mc.STAT_NAMES},
        "failure": out["failure"],
    }
    _write_json(doc, outdir / "statistics.json")
    values = {n: (out[n].value if out[n] is not None else None) for n in _mc.STAT_NAMES}
    _log(args, f"statistics: {values}")


def _cmd_power(cfg, args, outdir: Path):
    pcfg = _power_config(cfg, args)
    report = _mc.run_power_experiment(pcfg, n_jobs=_threads(args))
    _write_json(report.to_json_dict(), outdir / "power_report.json")
    _mc.write_replicates_csv(report, outdir / "replicates.csv")
    print(f"power: Tk={report.power.t_k} T1={report.power.t_1} "
          f"T1hat={report.power.t_1hat} ({len(report.failures)} failures, "
          f"{report.wall_clock:.1f}s)", file=sys.stderr)


def _cmd_converge(cfg, args, outdir: Path):
    pcfg = _power_config(cfg, args, m=cfg["m_values"][0])
    rows = _mc.convergence_study(pcfg, cfg["m_values"], n_jobs=_threads(args))
    _mc.write_convergence_csv(rows, outdir / "convergence.csv")
    for row in rows:
        print(f"m={row.m}: T1 power {row.power_t_1}, T1hat power {row.power_t_1hat}, "
              f"gap {row.gap}", file=sys.stderr)


_HANDLERS = {
    "simulate": _cmd_simulate,
    "ase": _cmd_ase,
    "isomap": _cmd_isomap,
    "test": _cmd_test,
    "power": _cmd_power,
    "converge": _cmd_converge,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (see --help)")
        cfg = _config.load_config(args.config, args.command)
        outdir = _prepare_outputs(args)
        _HANDLERS[args.command](cfg, args, outdir)
    except (UsageError, _config.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
