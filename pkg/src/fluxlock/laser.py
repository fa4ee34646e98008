"""Source models: linearized fluctuation form and the saturable oscillator.

The linearized source is a carrier ``r0`` dressed with Gaussian quadrature
fluctuations: the in-phase quadrature is white with density 1/4, and the
out-of-phase quadrature carries the same white floor plus a random walk
driven at density ``drift_rate**2 / 4``.  Its out-of-phase density is
therefore ``(W^2 + drift_rate^2) / (4 W^2)`` at angular frequency ``W``,
and the carrier phase wanders with variance growing at
``drift_rate**2 / (4 r0**2)`` per unit time.

The saturable oscillator evolves the full complex amplitude down the
gradient of a Mexican-hat potential with additive white noise, and is the
nonlinear counterpart used to check how far the linearized picture holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (
    ConfigurationError,
    FieldTrace,
    NumericalInstabilityError,
    SeedStream,
    TimeGrid,
)
from .noise import white_noise, wiener_process

__all__ = [
    "LinearLaserSpec",
    "PotentialLaserSpec",
    "linearized_laser",
    "phasor_laser",
    "nonlinear_laser",
    "nonlinear_laser_ensemble",
    "potential_value",
    "steady_state_amplitude",
    "phase_variance_rate",
    "DiffusionEstimate",
    "phase_diffusion_coefficient",
]

QUADRATURE_PSD = 0.25  # white floor on each quadrature of the linearized source


@dataclass(frozen=True)
class LinearLaserSpec:
    """Linearized source: carrier plus Gaussian quadrature records.

    ``drift_rate`` sets the random-walk drive on the out-of-phase
    quadrature; zero gives an ideal coherent source with no phase wander.
    """

    mean_amplitude: float
    drift_rate: float = 0.0

    def __post_init__(self):
        if not (self.mean_amplitude > 0 and math.isfinite(self.mean_amplitude)):
            raise ConfigurationError(f"mean_amplitude must be positive, got {self.mean_amplitude!r}")
        if not (self.drift_rate >= 0 and math.isfinite(self.drift_rate)):
            raise ConfigurationError(f"drift_rate must be >= 0, got {self.drift_rate!r}")


@dataclass(frozen=True)
class PotentialLaserSpec:
    """Saturable oscillator: gradient flow in a Mexican-hat potential.

    The complex amplitude obeys

        da = ((gain - loss)/4 - (saturation/2) |a|^2) a dt + xi dt

    with ``xi`` white at density ``noise_psd`` on each quadrature.  Above
    threshold the radial steady state sits at
    ``|a|^2 = (gain - loss) / (2 saturation)``.
    """

    gain: float
    loss: float
    saturation: float
    noise_psd: float

    def __post_init__(self):
        for name in ("gain", "loss", "saturation", "noise_psd"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ConfigurationError(f"{name} must be finite, got {v!r}")
        if self.loss < 0:
            raise ConfigurationError(f"loss must be >= 0, got {self.loss!r}")
        if self.saturation <= 0:
            raise ConfigurationError(f"saturation must be positive, got {self.saturation!r}")
        if self.noise_psd < 0:
            raise ConfigurationError(f"noise_psd must be >= 0, got {self.noise_psd!r}")
        if self.gain <= self.loss:
            raise ConfigurationError(
                f"oscillator below threshold: gain={self.gain!r} must exceed loss={self.loss!r}"
            )


def linearized_laser(spec: LinearLaserSpec, grid: TimeGrid, seed: SeedStream) -> FieldTrace:
    """Sample one record of the linearized source on ``grid``.

    The quadratures are strictly additive: the random walk rides on the
    out-of-phase axis and never rotates the carrier.  That keeps every
    downstream quantity an exact linear combination of Gaussians with the
    stated spectra at any record length, at the price that the record
    cannot exhibit coherence decay - the accumulated walk is a phase
    in name only.  Use :func:`phasor_laser` when the wrapping of the
    phase is the point.
    """
    q1 = white_noise(grid, QUADRATURE_PSD, seed.child("q1"))
    q2 = white_noise(grid, QUADRATURE_PSD, seed.child("q2"))
    walk = wiener_process(grid, spec.drift_rate**2 / 4.0, seed.child("walk"))
    samples = spec.mean_amplitude + q1.samples + 1j * (q2.samples + walk.samples)
    return FieldTrace(grid, samples, mean_amplitude=spec.mean_amplitude)


def phasor_laser(spec: LinearLaserSpec, grid: TimeGrid, seed: SeedStream) -> FieldTrace:
    """Sample one record with a genuinely rotating carrier phase.

    The same white dressing as :func:`linearized_laser`, but the random
    walk is exponentiated: ``(r0 + w1 + i w2) exp(i W / r0)``.  Agrees
    with the additive form to first order in the accumulated phase and,
    unlike it, loses coherence once the phase wanders by a radian - its
    field correlation decays at half the rate returned by
    :func:`phase_variance_rate`.  Drawn from the same labelled streams,
    so the two forms of one source share their noise realization.
    """
    q1 = white_noise(grid, QUADRATURE_PSD, seed.child("q1"))
    q2 = white_noise(grid, QUADRATURE_PSD, seed.child("q2"))
    walk = wiener_process(grid, spec.drift_rate**2 / 4.0, seed.child("walk"))
    theta = walk.samples / spec.mean_amplitude
    samples = (spec.mean_amplitude + q1.samples + 1j * q2.samples) * np.exp(1j * theta)
    return FieldTrace(grid, samples, mean_amplitude=spec.mean_amplitude)


def steady_state_amplitude(spec: PotentialLaserSpec) -> float:
    """Radial position of the potential minimum."""
    return math.sqrt((spec.gain - spec.loss) / (2.0 * spec.saturation))


def potential_value(spec: PotentialLaserSpec, amplitude) -> np.ndarray:
    """Potential whose negative Wirtinger gradient is the deterministic drift."""
    mag2 = np.abs(np.asarray(amplitude)) ** 2
    lin = (spec.gain - spec.loss) / 4.0
    return -lin * mag2 + (spec.saturation / 4.0) * mag2**2


def _ensemble_noise(spec, grid, seed, members):
    scale = math.sqrt(spec.noise_psd * grid.dt)
    z = seed.normals(2 * members * grid.n)
    re = z[: members * grid.n].reshape(members, grid.n)
    im = z[members * grid.n :].reshape(members, grid.n)
    return scale * (re + 1j * im)


def nonlinear_laser(
    spec: PotentialLaserSpec,
    grid: TimeGrid,
    seed: SeedStream,
    initial: complex | None = None,
) -> FieldTrace:
    """Integrate one path of the saturable oscillator (Euler-Maruyama).

    Starts at the steady-state amplitude unless ``initial`` is given.
    Raises :class:`NumericalInstabilityError` when the step size lets the
    cubic term overshoot and the amplitude runs away.
    """
    a_ss = steady_state_amplitude(spec)
    a_init = complex(a_ss if initial is None else initial)
    noise = _ensemble_noise(spec, grid, seed, 1)[0]
    lin = (spec.gain - spec.loss) / 4.0
    sat = spec.saturation / 2.0
    guard = max(100.0 * a_ss**2, 100.0 * abs(a_init) ** 2)
    out, bad = _kernels.nonlinear_path(a_init, noise, lin, sat, grid.dt, guard)
    if bad >= 0:
        raise NumericalInstabilityError(
            f"oscillator amplitude ran away at t={grid.t0 + bad * grid.dt:g}; reduce the step",
            grid.dt,
        )
    return FieldTrace(grid, out, mean_amplitude=a_ss)


def nonlinear_laser_ensemble(
    spec: PotentialLaserSpec,
    grid: TimeGrid,
    seed: SeedStream,
    members: int,
) -> np.ndarray:
    """Integrate ``members`` independent paths; returns complex (members, n).

    All members start at the steady-state amplitude.  Raw arrays rather
    than traces, since ensembles exist to be reduced immediately.
    """
    if members < 1:
        raise ConfigurationError(f"members must be >= 1, got {members!r}")
    a_ss = steady_state_amplitude(spec)
    noise = _ensemble_noise(spec, grid, seed, members)
    init = np.full(members, a_ss, np.complex128)
    lin = (spec.gain - spec.loss) / 4.0
    sat = spec.saturation / 2.0
    out, bad = _kernels.nonlinear_path_batch(init, noise, lin, sat, grid.dt, 100.0 * a_ss**2)
    if np.any(bad >= 0):
        j = int(np.argmax(bad >= 0))
        raise NumericalInstabilityError(
            f"oscillator member {j} ran away at t={grid.t0 + bad[j] * grid.dt:g}; reduce the step",
            grid.dt,
        )
    return out


def phase_variance_rate(spec) -> float:
    """Growth rate of the carrier phase variance (rad^2 per unit time).

    The field correlation of a freely drifting source decays like
    ``exp(-rate * tau / 2)``, so ``2 / rate`` is its coherence time.
    """
    if isinstance(spec, LinearLaserSpec):
        return spec.drift_rate**2 / (4.0 * spec.mean_amplitude**2)
    if isinstance(spec, PotentialLaserSpec):
        return spec.noise_psd / steady_state_amplitude(spec) ** 2
    raise ConfigurationError(f"unsupported spec type: {type(spec).__name__}")


@dataclass(frozen=True)
class DiffusionEstimate:
    """Linear fit of ensemble phase variance against time."""

    variance_slope: float
    intercept: float
    r_squared: float

    @property
    def decay_rate(self) -> float:
        """Implied decay rate of the field correlation."""
        return self.variance_slope / 2.0


def phase_diffusion_coefficient(
    fields,
    grid: TimeGrid | None = None,
    fit_start: float = 0.0,
) -> DiffusionEstimate:
    """Estimate the phase variance growth rate from an ensemble of records.

    ``fields`` is either a list of :class:`FieldTrace` on a common grid or
    a complex array of shape (members, n) with ``grid`` given.  Each
    member's phase is unwrapped and referenced to its own start, the
    across-ensemble variance is computed per sample, and a straight line
    is fitted for t >= ``fit_start``.  A white measurement floor shows up
    in the intercept, not the slope.
    """
    if isinstance(fields, np.ndarray):
        if grid is None:
            raise ConfigurationError("grid is required when passing a bare array")
        samples = fields
    else:
        fields = list(fields)
        if not fields:
            raise ConfigurationError("need at least one record")
        grid = fields[0].grid
        for f in fields[1:]:
            if f.grid != grid:
                raise ConfigurationError("ensemble members must share one grid")
        samples = np.stack([f.samples for f in fields])
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ConfigurationError(f"need a (members >= 2, n) ensemble, got shape {samples.shape}")

    phases = np.unwrap(np.angle(samples), axis=1)
    phases = phases - phases[:, :1]
    var_t = phases.var(axis=0)
    rel_t = grid.dt * np.arange(grid.n)
    keep = rel_t >= fit_start
    if keep.sum() < 3:
        raise ConfigurationError("fit window holds fewer than three samples")
    t, v = rel_t[keep], var_t[keep]
    slope, intercept = np.polyfit(t, v, 1)
    resid = v - (slope * t + intercept)
    total = v - v.mean()
    ss_tot = float(total @ total)
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 0.0
    return DiffusionEstimate(float(slope), float(intercept), r2)
