"""One-sample location tests on random dot product graphs whose latent
positions lie on a 1-D curve: simulation, spectral embedding, curve learning,
and Monte Carlo power comparison of unrestricted vs curve-restricted tests.
"""

__version__ = "0.1.0"

from . import curve, inference, manifold, montecarlo, rdpg  # noqa: F401
