"""Locking architectures: feedforward correction and a delayed feedback loop.

Both schemes tap the controlled beam with a weak splitter, beat the tap
against a reference arm derived from the master beam (a 50/50 mix with an
empty port), and steer the beam's phase with the resulting error signal.
Feedforward applies the correction downstream through an exact phase
actuator, so it cannot go unstable but consumes its error record
instantly.  Feedback applies a frequency correction upstream after a
transport delay and a one-pole filter, so its stability depends on gain,
delay and filter shaping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (
    ActuatorRangeError,
    ConfigurationError,
    FeedbackInstabilityError,
    FieldTrace,
    RealTrace,
    SeedStream,
    require_same_grid,
)
from .detection import error_signal
from .laser import LinearLaserSpec, QUADRATURE_PSD
from .noise import vacuum_field
from .optics import beam_splitter, phase_shift

__all__ = [
    "FeedforwardSpec",
    "FeedbackSpec",
    "LockResult",
    "FeedbackResult",
    "nominal_gain",
    "feedforward_lock",
    "dual_lock",
    "unlock_and_coast",
    "feedback_lock",
]


@dataclass(frozen=True)
class FeedforwardSpec:
    """Feedforward lock parameters.

    ``mixing_angle`` sets the tap fraction (``r = sin``).  ``gain`` of
    ``None`` means the nominal gain that cancels the tapped beam's own
    phase fluctuation exactly.

    ``actuation`` picks how the correction is applied.  ``"linearized"``
    multiplies by ``1 + i phi``: the consistent companion of the additive
    source model, exact as a linear system however far the commanded
    phase wanders.  ``"rotation"`` multiplies by ``exp(i phi)``: the
    physical actuator, the right choice for rotating-phase sources, valid
    while phase excursions within the record stay small.

    ``actuator_limit`` optionally bounds the commanded phase; beyond it
    the lock raises instead of extrapolating.  Unbounded by default,
    since the nominal correction tracks the accumulated drift and grows
    without limit on long records.
    """

    mixing_angle: float
    gain: float | None = None
    actuation: str = "linearized"
    actuator_limit: float = math.inf

    def __post_init__(self):
        if not 0.0 < self.mixing_angle < math.pi / 2.0:
            raise ConfigurationError(
                f"mixing_angle must lie strictly between 0 and pi/2, got {self.mixing_angle!r}"
            )
        if self.gain is not None and not math.isfinite(self.gain):
            raise ConfigurationError(f"gain must be finite, got {self.gain!r}")
        if self.actuation not in ("linearized", "rotation"):
            raise ConfigurationError(
                f"actuation must be 'linearized' or 'rotation', got {self.actuation!r}"
            )
        if not self.actuator_limit > 0:
            raise ConfigurationError(f"actuator_limit must be positive, got {self.actuator_limit!r}")


@dataclass(frozen=True)
class FeedbackSpec:
    """Feedback loop parameters.

    The loop applies ``u = -loop_gain * z`` as a frequency correction,
    where ``z`` is the error signal delayed by ``loop_delay``, smoothed by
    a one-pole filter of bandwidth ``filter_bandwidth``, and optionally
    given derivative lead over ``lead_time``.  With zero lead the loop is
    a pure delayed integrator and turns unstable once the gain makes the
    open-loop magnitude reach one where the delay has eaten the phase
    margin; lead raises that ceiling.
    """

    mixing_angle: float
    loop_gain: float
    loop_delay: float
    filter_bandwidth: float
    lead_time: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.mixing_angle < math.pi / 2.0:
            raise ConfigurationError(
                f"mixing_angle must lie strictly between 0 and pi/2, got {self.mixing_angle!r}"
            )
        if not (self.loop_gain >= 0 and math.isfinite(self.loop_gain)):
            raise ConfigurationError(f"loop_gain must be >= 0, got {self.loop_gain!r}")
        if not (self.loop_delay >= 0 and math.isfinite(self.loop_delay)):
            raise ConfigurationError(f"loop_delay must be >= 0, got {self.loop_delay!r}")
        if not (self.filter_bandwidth > 0 and math.isfinite(self.filter_bandwidth)):
            raise ConfigurationError(f"filter_bandwidth must be positive, got {self.filter_bandwidth!r}")
        if not (self.lead_time >= 0 and math.isfinite(self.lead_time)):
            raise ConfigurationError(f"lead_time must be >= 0, got {self.lead_time!r}")


@dataclass(frozen=True)
class LockResult:
    """Everything a feedforward lock produced.

    The pre-correction beam is recoverable exactly by inverting the
    actuator (division by ``exp(i phi)`` or ``1 + i phi`` according to
    ``actuation``), which is how :func:`unlock_and_coast` rewinds it.
    """

    locked_output: FieldTrace
    error: RealTrace
    applied_phase: RealTrace
    gain: float
    actuation: str


@dataclass(frozen=True)
class FeedbackResult:
    """Everything a feedback run produced: the transmitted beam, the error
    record, the accumulated applied phase, and the realized (unwrapped)
    beam phase."""

    output: FieldTrace
    error: RealTrace
    applied_correction: RealTrace
    phase: RealTrace


def nominal_gain(mixing_angle: float, slave_amplitude: float, master_amplitude: float) -> float:
    """Error-to-phase gain that exactly cancels the tap's own phase noise."""
    r = math.sin(mixing_angle)
    if slave_amplitude <= 0 or master_amplitude <= 0:
        raise ConfigurationError("carrier amplitudes must be positive to define the nominal gain")
    return math.sqrt(2.0) / (r * slave_amplitude * master_amplitude)


def _reference_arms(master: FieldTrace, seed: SeedStream) -> tuple[FieldTrace, FieldTrace]:
    # 50/50 mix of the master with an empty port; the two outputs serve one
    # lock each, and their shared port noise is what a dual lock has in common.
    empty = vacuum_field(master.grid, seed)
    return beam_splitter(master, empty, math.pi / 4.0)


def _lock_against(slave: FieldTrace, reference: FieldTrace, spec: FeedforwardSpec, tap_seed: SeedStream) -> LockResult:
    grid = require_same_grid(slave, reference)
    tap_vacuum = vacuum_field(grid, tap_seed)
    tap, through = beam_splitter(slave, tap_vacuum, spec.mixing_angle)
    err = error_signal(tap, reference)
    gain = spec.gain
    if gain is None:
        gain = nominal_gain(spec.mixing_angle, abs(slave.mean_amplitude), abs(reference.mean_amplitude) * math.sqrt(2.0))
    phi = gain * err.samples
    over = np.abs(phi) > spec.actuator_limit
    if over.any():
        k = int(np.argmax(over))
        raise ActuatorRangeError(
            f"commanded phase {phi[k]:.3g} exceeds the actuator limit {spec.actuator_limit:g}",
            grid.t0 + k * grid.dt,
        )
    locked = phase_shift(through, phi, linearized=(spec.actuation == "linearized"))
    return LockResult(locked, err, RealTrace(grid, phi), gain, spec.actuation)


def feedforward_lock(
    slave: FieldTrace,
    master: FieldTrace,
    spec: FeedforwardSpec,
    seed: SeedStream,
) -> LockResult:
    """Phase-lock one beam to a master by downstream correction.

    The slave is tapped at ``spec.mixing_angle``; the tap is beaten
    against a reference arm (master mixed 50/50 with an empty port), and
    the through beam is steered by ``gain * error`` sample by sample
    through the actuation chosen in the spec.  At nominal gain the
    through beam's phase fluctuation relative to the master cancels to
    first order, at the cost of the noise entering through the tap and
    the reference.
    """
    require_same_grid(slave, master)
    reference, _ = _reference_arms(master, seed.child("reference_vacuum"))
    return _lock_against(slave, reference, spec, seed.child("tap_vacuum"))


def dual_lock(
    slave_a: FieldTrace,
    slave_b: FieldTrace,
    master: FieldTrace,
    spec: FeedforwardSpec,
    seed: SeedStream,
) -> tuple[LockResult, LockResult]:
    """Lock two beams to the same master with one shared reference split.

    Both locks use the two outputs of a single 50/50 reference split, so
    they share the master's fluctuations and the empty-port noise (with
    opposite sign on the latter).  Everything the two corrected beams
    still disagree by is what the shared arm could not cancel.
    """
    require_same_grid(slave_a, slave_b, master)
    ref_plus, ref_minus = _reference_arms(master, seed.child("reference_vacuum"))
    result_a = _lock_against(slave_a, ref_plus, spec, seed.child("tap_vacuum_a"))
    result_b = _lock_against(slave_b, ref_minus, spec, seed.child("tap_vacuum_b"))
    return result_a, result_b


def unlock_and_coast(result: LockResult, t_off: float) -> FieldTrace:
    """Freeze the feedforward actuator at ``t_off`` and let the beam drift.

    Before ``t_off`` the record equals the locked output.  From ``t_off``
    on, the actuator holds its last commanded phase, so the output is the
    uncorrected through beam steered by that constant.  The rewind
    inverts whichever actuation the lock used, exactly.
    """
    locked = result.locked_output
    grid = locked.grid
    i_off = int(np.ceil((t_off - grid.t0) / grid.dt - 1e-9))
    if i_off >= grid.n:
        raise ConfigurationError(f"t_off={t_off!r} is beyond the end of the record")
    i_off = max(i_off, 0)
    hold = result.applied_phase.samples[i_off - 1] if i_off > 0 else 0.0
    tail_phi = result.applied_phase.samples[i_off:]
    out = locked.samples.copy()
    if result.actuation == "rotation":
        out[i_off:] = out[i_off:] * np.exp(1j * (hold - tail_phi))
    else:
        out[i_off:] = out[i_off:] * (1.0 + 1j * hold) / (1.0 + 1j * tail_phi)
    return FieldTrace(grid, out, locked.mean_amplitude)


def feedback_lock(
    slave_spec: LinearLaserSpec,
    master: FieldTrace,
    spec: FeedbackSpec,
    seed: SeedStream,
) -> FeedbackResult:
    """Co-simulate a drifting source inside a delayed feedback loop.

    Unlike feedforward, the correction changes the source's future, so
    the source cannot be sampled up front: each step advances the phase
    by its own random increment plus the standing frequency correction,
    then refreshes the correction from the delayed, filtered error.  The
    error convention is the reference arm beaten against the tap - the
    opposite sign from the feedforward pickoff - chosen so that negative
    gain closes the loop.

    Raises :class:`FeedbackInstabilityError` when the error leaves the
    small-signal range, with the ring frequency estimated from the
    samples leading up to the crossing.
    """
    grid = master.grid
    dt = grid.dt
    delay_f = spec.loop_delay / dt
    delay_steps = int(round(delay_f))
    if abs(delay_f - delay_steps) > 1e-6:
        raise ConfigurationError(
            f"loop_delay {spec.loop_delay!r} is not a multiple of the grid step {dt!r}"
        )

    reference, _ = _reference_arms(master, seed.child("reference_vacuum"))
    tap_vacuum = vacuum_field(grid, seed.child("tap_vacuum"))

    a0 = slave_spec.mean_amplitude
    q_scale = math.sqrt(QUADRATURE_PSD / dt)
    w1 = q_scale * seed.child("slave_q1").normals(grid.n)
    w2 = q_scale * seed.child("slave_q2").normals(grid.n)
    dphi = np.zeros(grid.n)
    dphi[1:] = (slave_spec.drift_rate * math.sqrt(dt) / (2.0 * a0)) * seed.child("slave_walk").normals(grid.n - 1)

    r = math.sin(spec.mixing_angle)
    t = math.cos(spec.mixing_angle)
    alpha = 1.0 - math.exp(-spec.filter_bandwidth * dt)
    m0 = abs(reference.mean_amplitude)
    guard = m0 * (0.5 * r * a0 + 8.0 * q_scale)

    c, e, corr, theta, crossed = _kernels.feedback_loop(
        reference.samples,
        tap_vacuum.samples,
        w1,
        w2,
        dphi,
        a0,
        r,
        t,
        spec.loop_gain,
        delay_steps,
        alpha,
        spec.lead_time / dt,
        dt,
        guard,
    )
    if crossed >= 0:
        ring = _ring_frequency(e[: crossed + 1], dt)
        raise FeedbackInstabilityError(
            f"loop diverged at t={grid.t0 + crossed * dt:g}; "
            f"ringing near {ring:.3g} rad/s",
            oscillation_frequency=ring,
        )
    return FeedbackResult(
        output=FieldTrace(grid, c, mean_amplitude=t * a0),
        error=RealTrace(grid, e),
        applied_correction=RealTrace(grid, corr),
        phase=RealTrace(grid, theta),
    )


def _ring_frequency(history: np.ndarray, dt: float) -> float:
    """Dominant angular frequency of the tail of an error record."""
    tail = history[-min(len(history), 8192):]
    tail = tail - tail.mean()
    if len(tail) < 16:
        return float("nan")
    spectrum = np.abs(np.fft.rfft(tail * np.hanning(len(tail))))
    spectrum[0] = 0.0
    k = int(np.argmax(spectrum))
    return 2.0 * math.pi * k / (len(tail) * dt)
