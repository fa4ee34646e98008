"""Spectral estimation, closed-form reference curves, and summary metrics.

Estimated spectra follow the package convention: two-sided densities in
angular frequency with measure dW/2pi.  ``scipy.signal.welch`` with
``return_onesided=False`` already produces densities in exactly this
normalization (the value of the density is unchanged by the variable swap
from cyclic to angular frequency under that measure), so the wrapper only
relabels the axis and sorts it.

Records that contain a random walk are not stationary and must not be fed
to the plain estimator; :func:`increment_psd` differences the record
first, estimates the spectrum of the (stationary) increments, and divides
out the exact discrete transfer ``4 sin^2(omega dt / 2)`` of the
differencing, recovering the walk's density on the sampled band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import welch as _scipy_welch

from .core import ConfigurationError, FieldTrace, require_same_grid

__all__ = [
    "SpectrumEstimate",
    "welch_psd",
    "increment_psd",
    "band_average",
    "ComparisonReport",
    "compare_psd",
    "PowerLawFit",
    "power_law_fit",
    "analytic_curve",
    "delayed_homodyne_variance",
    "CoherenceReport",
    "coherence_metric",
    "TableStats",
    "ensemble_table_stats",
]


@dataclass(frozen=True)
class SpectrumEstimate:
    """A two-sided spectral density estimate on an angular-frequency axis."""

    omega: np.ndarray
    psd: np.ndarray
    n_segments: int
    resolution: float
    window: str

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=np.float64)
        psd = np.asarray(self.psd, dtype=np.float64)
        if omega.shape != psd.shape or omega.ndim != 1:
            raise ConfigurationError("omega and psd must be 1-d arrays of equal length")
        for name, arr in (("omega", omega), ("psd", psd)):
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _welch(samples: np.ndarray, dt: float, segment_length: int, overlap: float, window: str, detrend):
    n = samples.shape[0]
    if segment_length < 8:
        raise ConfigurationError(f"segment_length must be at least 8, got {segment_length!r}")
    if segment_length > n:
        raise ConfigurationError(f"segment_length {segment_length} exceeds the record length {n}")
    if not 0.0 <= overlap < 1.0:
        raise ConfigurationError(f"overlap must lie in [0, 1), got {overlap!r}")
    noverlap = int(round(overlap * segment_length))
    freq, dens = _scipy_welch(
        samples,
        fs=1.0 / dt,
        window=window,
        nperseg=segment_length,
        noverlap=noverlap,
        detrend=detrend,
        return_onesided=False,
        scaling="density",
    )
    omega = 2.0 * math.pi * freq
    order = np.argsort(omega)
    segments = 1 + (n - segment_length) // (segment_length - noverlap)
    return SpectrumEstimate(
        omega=omega[order],
        psd=dens[order],
        n_segments=segments,
        resolution=2.0 * math.pi / (segment_length * dt),
        window=window,
    )


def welch_psd(
    trace,
    segment_length: int,
    overlap: float = 0.5,
    window: str = "hann",
    detrend="constant",
) -> SpectrumEstimate:
    """Averaged-periodogram density of a stationary record.

    Accepts real and complex traces alike; the estimate is two-sided
    either way.  Do not feed records that carry a random walk - use
    :func:`increment_psd` for those.
    """
    return _welch(trace.samples, trace.grid.dt, segment_length, overlap, window, detrend)


def increment_psd(
    trace,
    segment_length: int,
    overlap: float = 0.5,
    window: str = "hann",
) -> SpectrumEstimate:
    """Density of a drifting record, estimated through its increments.

    The record is first-differenced (stationary even when the record
    itself drifts), the increment density is estimated, and the exact
    transfer of the differencing is divided back out.  The zero-frequency
    bin is dropped, since the differencing destroys it.
    """
    dt = trace.grid.dt
    est = _welch(np.diff(trace.samples), dt, segment_length, overlap, window, detrend="constant")
    keep = est.omega != 0.0
    omega = est.omega[keep]
    transfer = 4.0 * np.sin(omega * dt / 2.0) ** 2
    return SpectrumEstimate(
        omega=omega,
        psd=est.psd[keep] / transfer,
        n_segments=est.n_segments,
        resolution=est.resolution,
        window=est.window,
    )


def band_average(estimate: SpectrumEstimate, band: tuple[float, float]) -> float:
    """Mean density over ``lo <= |omega| <= hi`` (both spectrum sides)."""
    lo, hi = band
    if not 0.0 <= lo < hi:
        raise ConfigurationError(f"band must satisfy 0 <= lo < hi, got {band!r}")
    mask = (np.abs(estimate.omega) >= lo) & (np.abs(estimate.omega) <= hi)
    if not mask.any():
        raise ConfigurationError(f"band {band!r} contains no spectral bins (resolution {estimate.resolution:g})")
    return float(estimate.psd[mask].mean())


@dataclass(frozen=True)
class ComparisonReport:
    """Band-averaged comparison of an estimate against a reference curve."""

    band: tuple[float, float]
    measured_mean: float
    reference_mean: float
    ratio: float
    tolerance: float
    n_bins: int
    passed: bool


def compare_psd(
    estimate: SpectrumEstimate,
    reference,
    band: tuple[float, float],
    tolerance: float,
) -> ComparisonReport:
    """Check a density estimate against a reference over one band.

    ``reference`` is either a flat level or an array aligned with
    ``estimate.omega``.  The test is on band averages: the averaged
    estimate must match the averaged reference within the relative
    ``tolerance``.
    """
    lo, hi = band
    mask = (np.abs(estimate.omega) >= lo) & (np.abs(estimate.omega) <= hi)
    n_bins = int(mask.sum())
    if n_bins == 0:
        raise ConfigurationError(f"band {band!r} contains no spectral bins")
    measured = float(estimate.psd[mask].mean())
    if np.isscalar(reference):
        expected = float(reference)
    else:
        reference = np.asarray(reference, dtype=np.float64)
        if reference.shape != estimate.omega.shape:
            raise ConfigurationError("reference array must align with estimate.omega")
        expected = float(reference[mask].mean())
    if expected == 0.0:
        raise ConfigurationError("reference averages to zero over the band")
    ratio = measured / expected
    return ComparisonReport(
        band=(float(lo), float(hi)),
        measured_mean=measured,
        reference_mean=expected,
        ratio=ratio,
        tolerance=float(tolerance),
        n_bins=n_bins,
        passed=bool(abs(ratio - 1.0) <= tolerance),
    )


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of ``log psd`` against ``log |omega|``."""

    exponent: float
    prefactor: float
    r_squared: float


def power_law_fit(estimate: SpectrumEstimate, band: tuple[float, float]) -> PowerLawFit:
    """Fit ``psd ~ prefactor * |omega|**exponent`` over a band."""
    lo, hi = band
    if lo <= 0:
        raise ConfigurationError("power-law band must exclude zero frequency")
    mask = (np.abs(estimate.omega) >= lo) & (np.abs(estimate.omega) <= hi)
    if mask.sum() < 4:
        raise ConfigurationError(f"band {band!r} holds fewer than four bins")
    x = np.log(np.abs(estimate.omega[mask]))
    y = np.log(estimate.psd[mask])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(slope), float(np.exp(intercept)), r2)


# --------------------------------------------------------------------------
# closed-form reference curves


def _curve_coherent_quadrature(omega):
    return np.full_like(omega, 0.25)


def _curve_drifting_quadrature(omega, drift_rate):
    with np.errstate(divide="ignore"):
        return (omega**2 + drift_rate**2) / (4.0 * omega**2)


def _curve_locked_beat(omega, mixing_angle, slave_amplitude, master_amplitude):
    r = math.sin(mixing_angle)
    t = math.cos(mixing_angle)
    ta0 = t * slave_amplitude
    level = 4.0 * ta0**2 * (ta0**2 / master_amplitude**2 + 1.0 / (2.0 * r**2))
    return np.full_like(omega, level)


def _curve_coherent_pair_beat(omega, amplitude_a, amplitude_b):
    return np.full_like(omega, amplitude_a**2 + amplitude_b**2)


def _curve_delayed_homodyne(omega, amplitude, drift_rate, lag, mode_duration):
    limit = amplitude**2 * drift_rate**2 * lag**2 * mode_duration**2
    with np.errstate(divide="ignore", invalid="ignore"):
        value = (
            16.0
            * amplitude**2
            * (omega**2 + drift_rate**2)
            * np.sin(omega * lag / 2.0) ** 2
            * np.sin(omega * mode_duration / 2.0) ** 2
            / omega**4
        )
    return np.where(omega == 0.0, limit, value)


_CURVES = {
    "coherent_quadrature": _curve_coherent_quadrature,
    "drifting_quadrature": _curve_drifting_quadrature,
    "locked_beat": _curve_locked_beat,
    "coherent_pair_beat": _curve_coherent_pair_beat,
    "delayed_homodyne": _curve_delayed_homodyne,
}


def analytic_curve(name: str, omega: np.ndarray, **params) -> np.ndarray:
    """Evaluate a named closed-form density on an angular-frequency axis.

    Available curves:

    ``coherent_quadrature``
        Flat quarter: either quadrature of an ideal coherent source.
    ``drifting_quadrature`` (drift_rate)
        Out-of-phase quadrature of a drifting source: white floor plus
        the random-walk tail, ``(omega^2 + drift_rate^2) / (4 omega^2)``.
    ``locked_beat`` (mixing_angle, slave_amplitude, master_amplitude)
        Flat density of the balanced beat between two beams locked to a
        shared reference split at nominal gain.
    ``coherent_pair_beat`` (amplitude_a, amplitude_b)
        Flat density of the balanced beat of two ideal coherent sources.
    ``delayed_homodyne`` (amplitude, drift_rate, lag, mode_duration)
        Density of the gated self-beat integrand of
        :func:`fluxlock.detection.delayed_two_mode_homodyne`.
    """
    if name not in _CURVES:
        raise ConfigurationError(f"unknown curve {name!r}; choose from {sorted(_CURVES)}")
    omega = np.asarray(omega, dtype=np.float64)
    try:
        return _CURVES[name](omega, **params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for curve {name!r}: {exc}") from exc


def delayed_homodyne_variance(
    amplitude: float,
    drift_rate: float,
    lag: float,
    mode_duration: float,
) -> float:
    """Variance of the gated, delayed self-beat sample.

    For non-overlapping slices (``lag >= mode_duration``) the white floors
    of the two slices contribute ``2 amplitude^2 T`` and the random walk
    adds ``amplitude^2 T^2 lag drift_rate^2 (1 - T / (3 lag))``; the walk
    term grows with the lag because a longer wait lets the source phase
    wander further from its past.
    """
    if lag < mode_duration:
        raise ConfigurationError("closed form requires lag >= mode_duration (non-overlapping slices)")
    T = mode_duration
    white = 2.0 * amplitude**2 * T
    walk = amplitude**2 * T**2 * lag * drift_rate**2 * (1.0 - T / (3.0 * lag))
    return white + walk


# --------------------------------------------------------------------------
# coherence and ensemble statistics


@dataclass(frozen=True)
class CoherenceReport:
    """Mutual coherence summary of two records over one time window.

    ``g1_modulus`` averages the per-block modulus of the normalized cross
    correlation, so a fixed phase offset between the records does not
    depress it; only wander within a block does.  ``condition_ratio`` is
    the root-mean-square difference of the carrier-normalized out-of-phase
    quadratures, meaningful while both records sit near their carriers.
    """

    g1_modulus: float
    condition_ratio: float
    block_count: int
    window: tuple[float, float]


def coherence_metric(
    field_a: FieldTrace,
    field_b: FieldTrace,
    block_duration: float,
    window: tuple[float, float] | None = None,
) -> CoherenceReport:
    """Estimate mutual coherence of two records on a common grid.

    The window is split into consecutive blocks of ``block_duration``;
    each block contributes ``|mean(a * conj(b))| / (|A| |B|)`` with ``A``,
    ``B`` the stated carriers, and the blocks are averaged.  Block noise
    rectifies into a small positive bias on the modulus, so blocks should
    hold enough samples that the cross average is noise-starved well
    below one.
    """
    grid = require_same_grid(field_a, field_b)
    if window is None:
        window = (grid.t0, grid.t0 + grid.duration)
    a0 = abs(field_a.mean_amplitude)
    b0 = abs(field_b.mean_amplitude)
    if a0 == 0.0 or b0 == 0.0:
        raise ConfigurationError("both records need a nonzero carrier")
    steps = int(round(block_duration / grid.dt))
    if steps < 1 or abs(block_duration / grid.dt - steps) > 1e-6:
        raise ConfigurationError(
            f"block_duration {block_duration!r} is not a positive multiple of the grid step {grid.dt!r}"
        )
    sel = grid.window_slice(*window)
    count = (sel.stop - sel.start) // steps
    if count < 1:
        raise ConfigurationError("window too short for a single block")
    cross = field_a.samples[sel.start : sel.start + count * steps] * np.conj(
        field_b.samples[sel.start : sel.start + count * steps]
    )
    blocks = cross.reshape(count, steps).mean(axis=1)
    g1 = float(np.abs(blocks).mean() / (a0 * b0))

    span = slice(sel.start, sel.start + count * steps)
    qa = np.imag(field_a.samples[span] * np.conj(field_a.mean_amplitude)) / a0
    qb = np.imag(field_b.samples[span] * np.conj(field_b.mean_amplitude)) / b0
    diff = qa / a0 - qb / b0
    ratio = float(np.sqrt(np.mean(diff**2)))
    return CoherenceReport(g1, ratio, count, (float(window[0]), float(window[1])))


@dataclass(frozen=True)
class TableStats:
    """Ensemble statistics of per-mode amplitudes and photon counts.

    Standard errors assume near-Gaussian mode values, which is what the
    linearized sources deliver.
    """

    mean_q1: float
    se_mean_q1: float
    var_q1: float
    se_var_q1: float
    mean_q2: float
    se_mean_q2: float
    var_q2: float
    se_var_q2: float
    mean_n: float
    se_mean_n: float
    var_n: float
    se_var_n: float
    count: int


def _mean_var_se(values: np.ndarray) -> tuple[float, float, float, float]:
    n = values.shape[0]
    mean = float(values.mean())
    var = float(values.var(ddof=1))
    se_mean = math.sqrt(var / n)
    se_var = var * math.sqrt(2.0 / (n - 1))
    return mean, se_mean, var, se_var


def ensemble_table_stats(amplitudes: np.ndarray, photon_counts: np.ndarray) -> TableStats:
    """Summarize per-mode measurements across an ensemble.

    ``amplitudes`` are mode integrals of the field normalized by the
    square root of the mode duration (complex); ``photon_counts`` are
    mode integrals of the flux.  Means, variances and their standard
    errors come out per quadrature and for the counts.
    """
    amplitudes = np.asarray(amplitudes)
    photon_counts = np.asarray(photon_counts, dtype=np.float64)
    if amplitudes.ndim != 1 or photon_counts.ndim != 1:
        raise ConfigurationError("amplitudes and photon_counts must be 1-d")
    if amplitudes.shape[0] < 2 or photon_counts.shape[0] < 2:
        raise ConfigurationError("need at least two modes for variances")
    m1, sm1, v1, sv1 = _mean_var_se(amplitudes.real)
    m2, sm2, v2, sv2 = _mean_var_se(amplitudes.imag)
    mn, smn, vn, svn = _mean_var_se(photon_counts)
    return TableStats(
        mean_q1=m1,
        se_mean_q1=sm1,
        var_q1=v1,
        se_var_q1=sv1,
        mean_q2=m2,
        se_mean_q2=sm2,
        var_q2=v2,
        se_var_q2=sv2,
        mean_n=mn,
        se_mean_n=smn,
        var_n=vn,
        se_var_n=svn,
        count=int(amplitudes.shape[0]),
    )
