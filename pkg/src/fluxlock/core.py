"""Core containers, deterministic seeding, and the error taxonomy.

Everything downstream works in a rotating frame at the master optical
frequency, on a uniform time grid.  Traces are immutable: samples are
frozen numpy arrays attached to the :class:`TimeGrid` they were drawn on,
so grid mismatches fail loudly instead of broadcasting silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

__all__ = [
    "TimeGrid",
    "SeedStream",
    "RealTrace",
    "FieldTrace",
    "PhotocurrentTrace",
    "ModeSampleSeries",
    "FluxlockError",
    "ConfigurationError",
    "GridMismatchError",
    "NumericalInstabilityError",
    "ActuatorRangeError",
    "FeedbackInstabilityError",
    "ScenarioValidationError",
    "require_same_grid",
]


# --------------------------------------------------------------------------
# errors


class FluxlockError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(FluxlockError, ValueError):
    """A parameter value is outside the domain the model is defined on."""


class GridMismatchError(FluxlockError, ValueError):
    """Two traces that must share a time grid do not."""


class NumericalInstabilityError(FluxlockError, RuntimeError):
    """An integration step produced non-finite or runaway values.

    Carries the step size so the caller can tell a resolution problem from
    a parameter problem.
    """

    def __init__(self, message: str, dt: float):
        super().__init__(f"{message} (dt={dt:g})")
        self.dt = dt


class ActuatorRangeError(FluxlockError, RuntimeError):
    """A commanded correction left the small-signal range of the actuator."""

    def __init__(self, message: str, first_failure_time: float):
        super().__init__(f"{message} (first exceeded at t={first_failure_time:g})")
        self.first_failure_time = first_failure_time


class FeedbackInstabilityError(FluxlockError, RuntimeError):
    """The closed loop diverged; carries the estimated ring frequency."""

    def __init__(self, message: str, oscillation_frequency: float):
        super().__init__(message)
        self.oscillation_frequency = oscillation_frequency


class ScenarioValidationError(FluxlockError, ValueError):
    """A scenario file failed validation.  ``errors`` lists every problem."""

    def __init__(self, errors: list[str]):
        super().__init__(
            "invalid scenario ({} problem{}):\n  - {}".format(
                len(errors), "s" if len(errors) != 1 else "", "\n  - ".join(errors)
            )
        )
        self.errors = list(errors)


# --------------------------------------------------------------------------
# time grid


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid: ``n`` samples spaced ``dt`` starting at ``t0``."""

    dt: float
    n: int
    t0: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive and finite, got {self.dt!r}")
        if self.n < 1:
            raise ConfigurationError(f"grid needs at least one sample, got n={self.n!r}")

    @property
    def duration(self) -> float:
        return self.n * self.dt

    @property
    def times(self) -> np.ndarray:
        """Sample times, computed on demand."""
        return self.t0 + self.dt * np.arange(self.n)

    def window_slice(self, t_start: float, t_stop: float) -> slice:
        """Index slice of samples with ``t_start <= t < t_stop``.

        Boundaries are resolved with a small tolerance so windows specified
        as exact multiples of ``dt`` land on the intended sample.
        """
        eps = 1e-9
        i0 = int(np.ceil((t_start - self.t0) / self.dt - eps))
        i1 = int(np.ceil((t_stop - self.t0) / self.dt - eps))
        return slice(max(i0, 0), min(max(i1, 0), self.n))

    def shifted(self, t0: float) -> "TimeGrid":
        return TimeGrid(self.dt, self.n, t0)


def require_same_grid(*traces) -> TimeGrid:
    """Return the shared grid of the given traces, or raise.

    Accepts anything with a ``.grid`` attribute or bare :class:`TimeGrid`
    instances.
    """
    grids = [t if isinstance(t, TimeGrid) else t.grid for t in traces]
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise GridMismatchError(f"incompatible time grids: {first} vs {g}")
    return first


# --------------------------------------------------------------------------
# seeding

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _label_key(label) -> int:
    """Map a child label to a 64-bit key (FNV-1a for strings)."""
    if isinstance(label, str):
        h = _FNV_OFFSET
        for byte in label.encode("utf-8"):
            h = ((h ^ byte) * _FNV_PRIME) & _MASK64
        return h
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ConfigurationError(f"integer stream labels must be >= 0, got {label}")
        return int(label)
    raise ConfigurationError(f"stream labels must be str or int, got {type(label).__name__}")


@dataclass(frozen=True)
class SeedStream:
    """A node in a deterministic tree of random streams.

    Every stochastic input in the package draws from its own labelled
    child, so results are reproducible bit for bit from ``master_seed``
    alone and independent of evaluation order.  The raw generator is
    counter-based (Philox), and normal/uniform variates go through a fixed
    inverse-CDF transform so the sampled values are part of the contract,
    not an implementation detail of numpy's distribution code.
    """

    master_seed: int
    path: tuple = ()

    def __post_init__(self):
        if not isinstance(self.master_seed, (int, np.integer)) or self.master_seed < 0:
            raise ConfigurationError(f"master_seed must be a non-negative int, got {self.master_seed!r}")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))

    def child(self, *labels) -> "SeedStream":
        """Derive a sub-stream; labels may be strings or non-negative ints."""
        if not labels:
            raise ConfigurationError("child() needs at least one label")
        return SeedStream(self.master_seed, self.path + tuple(_label_key(l) for l in labels))

    def _words(self, count: int) -> np.ndarray:
        seq = np.random.SeedSequence([self.master_seed, *self.path])
        gen = np.random.Generator(np.random.Philox(seq))
        return gen.integers(0, 2**64, size=count, dtype=np.uint64)

    def uniforms(self, count: int) -> np.ndarray:
        """Open-interval uniforms on (0, 1), 53-bit resolution."""
        k = self._words(count) >> np.uint64(11)
        return (k.astype(np.float64) + 0.5) * 2.0**-53

    def normals(self, count: int) -> np.ndarray:
        """Standard normal variates via the inverse CDF."""
        return ndtri(self.uniforms(count))


# --------------------------------------------------------------------------
# traces


def _frozen_array(values, dtype, n: int, what: str) -> np.ndarray:
    raw = np.asarray(values)
    if raw.dtype.kind == "c" and np.dtype(dtype).kind != "c":
        # refuse rather than let numpy silently drop the imaginary part
        raise ConfigurationError(f"{what} must be real-valued, got complex data")
    arr = raw.astype(dtype, copy=False)
    if arr.shape != (n,):
        raise ConfigurationError(f"{what} must have shape ({n},), got {arr.shape}")
    if arr.flags.writeable:
        # Copy so the caller's buffer stays writable and the trace immutable.
        arr = arr.copy()
        arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RealTrace:
    """A real-valued sample record on a time grid."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_array(self.samples, np.float64, self.grid.n, "samples"))

    def __len__(self) -> int:
        return self.grid.n


@dataclass(frozen=True)
class FieldTrace:
    """A complex field envelope in the rotating frame.

    ``mean_amplitude`` is the deterministic carrier the record fluctuates
    around; it is propagated through the optical elements so downstream
    code can split any record into carrier plus fluctuation without
    re-estimating the mean.
    """

    grid: TimeGrid
    samples: np.ndarray
    mean_amplitude: complex = 0.0 + 0.0j

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_array(self.samples, np.complex128, self.grid.n, "samples"))
        object.__setattr__(self, "mean_amplitude", complex(self.mean_amplitude))

    def __len__(self) -> int:
        return self.grid.n

    @property
    def fluctuation(self) -> np.ndarray:
        """Samples with the carrier removed."""
        return self.samples - self.mean_amplitude

    def quadratures(self) -> tuple[RealTrace, RealTrace]:
        """Fluctuation quadratures relative to the carrier phase.

        The in-phase quadrature is measured along the carrier, the
        out-of-phase quadrature orthogonal to it.  A record with zero
        carrier (vacuum) uses the frame axes directly.
        """
        mean = self.mean_amplitude
        rot = np.conj(mean) / abs(mean) if mean != 0 else 1.0
        delta = self.fluctuation * rot
        return (
            RealTrace(self.grid, delta.real),
            RealTrace(self.grid, delta.imag),
        )


@dataclass(frozen=True)
class PhotocurrentTrace:
    """A detected flux record (photons per unit time) on a time grid."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_array(self.samples, np.float64, self.grid.n, "samples"))

    def __len__(self) -> int:
        return self.grid.n


@dataclass(frozen=True)
class ModeSampleSeries:
    """Per-window integrals of a record, one value per temporal mode.

    ``values[i]`` integrates the source over
    ``[start_times[i], start_times[i] + mode_duration)``.
    """

    mode_duration: float
    start_times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        starts = np.asarray(self.start_times, dtype=np.float64)
        vals = np.asarray(self.values)
        if vals.dtype.kind not in "fc":
            vals = vals.astype(np.float64)
        if starts.ndim != 1 or vals.shape != starts.shape:
            raise ConfigurationError(
                f"start_times and values must be 1-d and equal length, got {starts.shape} vs {vals.shape}"
            )
        if self.mode_duration <= 0:
            raise ConfigurationError(f"mode_duration must be positive, got {self.mode_duration!r}")
        n = starts.shape[0]
        object.__setattr__(self, "start_times", _frozen_array(starts, np.float64, n, "start_times"))
        object.__setattr__(self, "values", _frozen_array(vals, vals.dtype, n, "values"))

    def __len__(self) -> int:
        return len(self.values)
