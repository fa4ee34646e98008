"""Detection: flux records, balanced beats, error signals, mode integrals.

Balanced measurements are defined through the same splitter convention as
the optics module: a 50/50 mix of signal and local oscillator followed by
subtraction of the two detected fluxes.  The quadratic noise terms cancel
identically in the difference, which is why the balanced beat of two
records equals ``2 Re(conj(signal) * lo)`` sample by sample.
"""

from __future__ import annotations

import numpy as np

from .core import (
    ConfigurationError,
    FieldTrace,
    ModeSampleSeries,
    PhotocurrentTrace,
    RealTrace,
    SeedStream,
    require_same_grid,
)
from .optics import delay, phase_shift, time_gate

__all__ = [
    "photocurrent",
    "linearized_flux",
    "balanced_homodyne",
    "error_signal",
    "mode_integrate",
    "delayed_two_mode_homodyne",
]


def photocurrent(field: FieldTrace) -> PhotocurrentTrace:
    """Detected flux, the exact squared modulus of the field record."""
    return PhotocurrentTrace(field.grid, np.abs(field.samples) ** 2)


def linearized_flux(field: FieldTrace) -> PhotocurrentTrace:
    """First-order flux: carrier power plus the beat with the fluctuation.

    Drops the fluctuation-squared term of :func:`photocurrent`.  On a
    sampled grid that quadratic term carries an ordering artifact (a mean
    offset and excess variance that grow as the step shrinks), so photon
    statistics of a bright beam are taken from this record.
    """
    mean = field.mean_amplitude
    samples = abs(mean) ** 2 + 2.0 * np.real(np.conj(mean) * field.fluctuation)
    return PhotocurrentTrace(field.grid, samples)


def balanced_homodyne(signal: FieldTrace, lo: FieldTrace) -> RealTrace:
    """Difference flux of a balanced mix: ``2 Re(conj(signal) * lo)``."""
    grid = require_same_grid(signal, lo)
    return RealTrace(grid, 2.0 * np.real(np.conj(signal.samples) * lo.samples))


def error_signal(tap: FieldTrace, reference: FieldTrace) -> RealTrace:
    """In-quadrature beat of a tap against a reference arm.

    The tap is advanced a quarter turn and balanced against the reference,
    and the difference current is normalized to half scale:
    ``Im(conj(tap) * reference)`` per sample.  Zero when the tap and the
    reference are in phase; the sign follows the tap's phase lag.
    """
    grid = require_same_grid(tap, reference)
    beat = balanced_homodyne(phase_shift(tap, np.pi / 2.0), reference)
    return RealTrace(grid, 0.5 * beat.samples)


def mode_integrate(record, mode_duration: float, t_start: float | None = None) -> ModeSampleSeries:
    """Integrate a record over consecutive windows of ``mode_duration``.

    The duration must be an exact multiple of the grid step.  Windows are
    laid back to back from ``t_start`` (default: start of the record); a
    trailing partial window is discarded.  Values are plain integrals
    (sum times dt), complex when the record is complex.
    """
    grid = record.grid
    steps_f = mode_duration / grid.dt
    steps = int(round(steps_f))
    if steps < 1 or abs(steps_f - steps) > 1e-6:
        raise ConfigurationError(
            f"mode_duration {mode_duration!r} is not a positive multiple of the grid step {grid.dt!r}"
        )
    if t_start is None:
        t_start = grid.t0
    first = grid.window_slice(t_start, t_start + mode_duration).start
    count = (grid.n - first) // steps
    if count < 1:
        raise ConfigurationError("record too short for a single mode window")
    block = record.samples[first : first + count * steps].reshape(count, steps)
    values = block.sum(axis=1) * grid.dt
    starts = grid.t0 + (first + steps * np.arange(count)) * grid.dt
    return ModeSampleSeries(mode_duration, starts, values)


def delayed_two_mode_homodyne(
    source: FieldTrace,
    lo: FieldTrace,
    t_start: float,
    lag: float,
    mode_duration: float,
    seed: SeedStream,
) -> float:
    """Beat a gated, delayed slice of ``source`` against a later slice of ``lo``.

    A window of ``mode_duration`` starting at ``t_start`` is cut from the
    source and delayed by ``lag``; the local oscillator is gated to the
    matching window ``[t_start + lag, t_start + lag + mode_duration)``.
    The two are balanced with the source arm advanced a quarter turn, and
    the difference current is integrated over the overlap window.  Passing
    the same record as both inputs compares the record with its own past.
    """
    require_same_grid(source, lo)
    if lag < mode_duration:
        raise ConfigurationError(
            f"lag {lag!r} must be at least the mode duration {mode_duration!r} so the slices do not overlap"
        )
    arm1 = delay(time_gate(source, (t_start, t_start + mode_duration), seed.child("gate1")), lag, seed.child("line"))
    arm2 = time_gate(lo, (t_start + lag, t_start + lag + mode_duration), seed.child("gate2"))
    beat = balanced_homodyne(phase_shift(arm1, np.pi / 2.0), arm2)
    window = source.grid.window_slice(t_start + lag, t_start + lag + mode_duration)
    return float(beat.samples[window].sum() * source.grid.dt)
