"""Passive elements: splitters, phase shifters, delay lines, gates."""

from __future__ import annotations

import numpy as np

from .core import ConfigurationError, FieldTrace, SeedStream, require_same_grid
from .noise import vacuum_field

__all__ = ["beam_splitter", "phase_shift", "delay", "time_gate"]


def beam_splitter(in_a: FieldTrace, in_b: FieldTrace, mixing_angle: float) -> tuple[FieldTrace, FieldTrace]:
    """Two-port mixer with ``r = sin(mixing_angle)``, ``t = cos(mixing_angle)``.

    Outputs ``(r a + t b, t a - r b)``; the transfer matrix is its own
    inverse, so feeding the outputs back through the same element restores
    the inputs.
    """
    grid = require_same_grid(in_a, in_b)
    r = np.sin(mixing_angle)
    t = np.cos(mixing_angle)
    out_a = FieldTrace(grid, r * in_a.samples + t * in_b.samples, r * in_a.mean_amplitude + t * in_b.mean_amplitude)
    out_b = FieldTrace(grid, t * in_a.samples - r * in_b.samples, t * in_a.mean_amplitude - r * in_b.mean_amplitude)
    return out_a, out_b


def phase_shift(field: FieldTrace, phi, linearized: bool = False) -> FieldTrace:
    """Rotate a record by ``phi`` radians (scalar or per-sample array).

    ``linearized=True`` applies the small-angle form ``1 + i phi`` instead
    of the exact rotation.  A scalar shift rotates the carrier with the
    samples; a per-sample shift is treated as small-signal actuation and
    leaves the stated carrier unchanged.
    """
    phi_arr = np.asarray(phi, dtype=np.float64)
    if phi_arr.ndim == 0:
        factor = (1.0 + 1j * float(phi_arr)) if linearized else np.exp(1j * float(phi_arr))
        return FieldTrace(field.grid, field.samples * factor, field.mean_amplitude * factor)
    if phi_arr.shape != (field.grid.n,):
        raise ConfigurationError(f"phase array must be scalar or shape ({field.grid.n},), got {phi_arr.shape}")
    factor = (1.0 + 1j * phi_arr) if linearized else np.exp(1j * phi_arr)
    return FieldTrace(field.grid, field.samples * factor, field.mean_amplitude)


def delay(field: FieldTrace, lag: float, seed: SeedStream, vacuum_psd: float = 0.25) -> FieldTrace:
    """Shift a record later in time by ``lag``, an exact multiple of ``dt``.

    The first ``lag`` worth of samples has no source history and is filled
    with a fresh vacuum record, so the carrier is only present from ``lag``
    onward; the stated mean refers to the delayed content.
    """
    if lag < 0:
        raise ConfigurationError(f"lag must be >= 0, got {lag!r}")
    steps_f = lag / field.grid.dt
    steps = int(round(steps_f))
    if abs(steps_f - steps) > 1e-6:
        raise ConfigurationError(f"lag {lag!r} is not a multiple of the grid step {field.grid.dt!r}")
    if steps == 0:
        return field
    if steps >= field.grid.n:
        raise ConfigurationError(f"lag {lag!r} pushes the whole record off the grid")
    head = vacuum_field(field.grid, seed, vacuum_psd).samples[:steps]
    samples = np.concatenate([head, field.samples[: field.grid.n - steps]])
    return FieldTrace(field.grid, samples, field.mean_amplitude)


def time_gate(field: FieldTrace, windows, seed: SeedStream, vacuum_psd: float = 0.25) -> FieldTrace:
    """Pass a record only inside ``windows``; outside it, fresh vacuum.

    ``windows`` is one ``(t_start, t_stop)`` pair or a list of them, with
    the usual half-open convention.  The stated mean refers to the passed
    content.
    """
    if isinstance(windows, tuple) and len(windows) == 2 and np.isscalar(windows[0]):
        windows = [windows]
    mask = np.zeros(field.grid.n, dtype=bool)
    for t_start, t_stop in windows:
        if t_stop <= t_start:
            raise ConfigurationError(f"empty gate window ({t_start!r}, {t_stop!r})")
        mask[field.grid.window_slice(t_start, t_stop)] = True
    vac = vacuum_field(field.grid, seed, vacuum_psd).samples
    return FieldTrace(field.grid, np.where(mask, field.samples, vac), field.mean_amplitude)
