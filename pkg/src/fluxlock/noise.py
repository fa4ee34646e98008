"""Elementary stochastic inputs: white records, random walks, vacuum ports.

Spectral convention used throughout the package: densities are two-sided
in angular frequency with measure dW/2pi, so a flat density ``S`` means a
per-sample variance of ``S/dt`` on a grid with step ``dt``, and the
numbers read directly against two-sided per-hertz densities.
"""

from __future__ import annotations

import numpy as np

from .core import ConfigurationError, FieldTrace, RealTrace, SeedStream, TimeGrid

__all__ = ["white_noise", "wiener_process", "vacuum_field"]


def white_noise(grid: TimeGrid, psd: float, seed: SeedStream) -> RealTrace:
    """Stationary Gaussian white record with flat two-sided density ``psd``."""
    if psd < 0:
        raise ConfigurationError(f"white noise density must be >= 0, got {psd!r}")
    scale = np.sqrt(psd / grid.dt)
    return RealTrace(grid, scale * seed.normals(grid.n))


def wiener_process(grid: TimeGrid, drive: float, seed: SeedStream) -> RealTrace:
    """Random walk whose derivative is white with density ``drive``.

    The walk starts at zero on the first sample, so ``Var(W(t)) = drive * t``
    measured from the start of the record.  Increments can be recovered
    exactly with ``np.diff(samples, prepend=0.0)``.
    """
    if drive < 0:
        raise ConfigurationError(f"wiener drive must be >= 0, got {drive!r}")
    steps = np.sqrt(drive * grid.dt) * seed.normals(grid.n - 1)
    path = np.concatenate([[0.0], np.cumsum(steps)])
    return RealTrace(grid, path)


def vacuum_field(grid: TimeGrid, seed: SeedStream, psd: float = 0.25) -> FieldTrace:
    """Zero-mean field whose quadratures are independent whites of density ``psd``.

    The default level of one quarter reproduces the symmetric-ordered
    fluctuations of an empty port.
    """
    if psd < 0:
        raise ConfigurationError(f"vacuum quadrature density must be >= 0, got {psd!r}")
    scale = np.sqrt(psd / grid.dt)
    q1 = scale * seed.child("q1").normals(grid.n)
    q2 = scale * seed.child("q2").normals(grid.n)
    return FieldTrace(grid, q1 + 1j * q2, mean_amplitude=0.0)
