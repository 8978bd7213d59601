"""Numerical laboratory for xi-submanifold geometry.

Core layers: chart-based differential geometry (`geometry`), the exact example
catalog (`catalog`), soliton-identity and conformal checks (`soliton`),
weighted-volume functionals and variations (`functionals`), stability
operators and spectra (`stability`, `hermite`), and planar soliton curves
(`curves`). The FastAPI service in `xilab.service` wraps these; `xilab.cli`
is a thin client over the same handlers.
"""

__version__ = "0.1.0"
