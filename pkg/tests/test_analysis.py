"""Spectral estimators, reference curves, coherence and table statistics."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fluxlock import (
    ComparisonReport,
    ConfigurationError,
    FieldTrace,
    SeedStream,
    SpectrumEstimate,
    TimeGrid,
    analytic_curve,
    band_average,
    coherence_metric,
    compare_psd,
    delayed_homodyne_variance,
    ensemble_table_stats,
    increment_psd,
    power_law_fit,
    vacuum_field,
    welch_psd,
    white_noise,
    wiener_process,
)

GRID = TimeGrid(dt=0.05, n=2**17)


def _white(psd=0.25, label="w"):
    return white_noise(GRID, psd, SeedStream(314).child(label))


class TestWelch:
    def test_flat_density_recovered(self):
        est = welch_psd(_white(0.25), 4096)
        assert band_average(est, (1.0, 40.0)) == pytest.approx(0.25, rel=0.02)

    def test_axis_and_metadata(self):
        est = welch_psd(_white(), 256, overlap=0.5)
        assert np.all(np.diff(est.omega) > 0)
        assert est.resolution == pytest.approx(2 * np.pi / (256 * GRID.dt))
        assert est.n_segments == 1 + (GRID.n - 256) // 128
        assert est.window == "hann"

    def test_total_power_matches_variance(self):
        trace = _white(1.5)
        est = welch_psd(trace, 8192)
        total = np.trapezoid(est.psd, est.omega) / (2 * np.pi)
        assert total == pytest.approx(trace.samples.var(), rel=0.05)

    def test_complex_record_two_sided(self):
        field = vacuum_field(GRID, SeedStream(314).child("v"))
        est = welch_psd(field, 1024)
        # both quadratures at the vacuum level: modulus density is flat 0.5
        assert band_average(est, (1.0, 40.0)) == pytest.approx(0.5, rel=0.05)
        assert est.omega.min() < 0 < est.omega.max()

    def test_validation(self):
        trace = _white()
        with pytest.raises(ConfigurationError):
            welch_psd(trace, 4)
        with pytest.raises(ConfigurationError):
            welch_psd(trace, GRID.n + 1)
        with pytest.raises(ConfigurationError):
            welch_psd(trace, 256, overlap=1.0)


class TestIncrementPsd:
    def test_walk_tail_recovered(self):
        drive = 0.8
        walk = wiener_process(GRID, drive, SeedStream(314).child("walk"))
        est = increment_psd(walk, 2**14)
        band = (np.abs(est.omega) > 0.2) & (np.abs(est.omega) < 2.0)
        expected = drive / est.omega[band] ** 2
        assert est.psd[band].mean() == pytest.approx(expected.mean(), rel=0.05)

    def test_zero_bin_dropped(self):
        est = increment_psd(_white(), 1024)
        assert np.all(est.omega != 0.0)

    def test_agrees_with_welch_on_stationary_record(self):
        # the differencing transfer must divide out exactly: both estimators
        # see the same flat density on a common band
        trace = _white(2.0)
        a = band_average(welch_psd(trace, 4096), (1.0, 30.0))
        b = band_average(increment_psd(trace, 4096), (1.0, 30.0))
        assert 0.8 < a / b < 1.25
        assert a == pytest.approx(2.0, rel=0.05)


class TestSpectrumEstimate:
    def test_arrays_frozen(self):
        est = welch_psd(_white(), 256)
        with pytest.raises(ValueError):
            est.psd[0] = 1.0
        with pytest.raises(ValueError):
            est.omega[0] = 1.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigurationError):
            SpectrumEstimate(np.arange(4.0), np.arange(5.0), 1, 0.1, "hann")


class TestBandAverage:
    EST = SpectrumEstimate(
        np.array([-2.0, -1.0, 1.0, 2.0]), np.array([4.0, 3.0, 1.0, 2.0]), 1, 1.0, "hann"
    )

    def test_uses_both_sides(self):
        assert band_average(self.EST, (0.5, 1.5)) == pytest.approx(2.0)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            band_average(self.EST, (-1.0, 1.0))
        with pytest.raises(ConfigurationError):
            band_average(self.EST, (2.0, 1.0))
        with pytest.raises(ConfigurationError):
            band_average(self.EST, (5.0, 6.0))


class TestComparePsd:
    def _flat(self, level):
        om = np.linspace(-10, 10, 201)
        return SpectrumEstimate(om, np.full_like(om, level), 10, 0.1, "hann")

    def test_report_fields(self):
        rep = compare_psd(self._flat(1.1), 1.0, (0.5, 5.0), 0.2)
        assert isinstance(rep, ComparisonReport)
        assert rep.measured_mean == pytest.approx(1.1)
        assert rep.reference_mean == 1.0
        assert rep.ratio == pytest.approx(1.1)
        assert rep.passed
        assert rep.n_bins > 0

    def test_boundary_is_inclusive(self):
        assert compare_psd(self._flat(1.2), 1.0, (0.5, 5.0), 0.2).passed
        assert not compare_psd(self._flat(1.21), 1.0, (0.5, 5.0), 0.2).passed

    def test_array_reference(self):
        est = self._flat(3.0)
        rep = compare_psd(est, np.full_like(est.omega, 3.0), (0.5, 5.0), 0.01)
        assert rep.passed
        with pytest.raises(ConfigurationError):
            compare_psd(est, np.ones(7), (0.5, 5.0), 0.01)

    def test_zero_reference_rejected(self):
        with pytest.raises(ConfigurationError):
            compare_psd(self._flat(1.0), 0.0, (0.5, 5.0), 0.1)

    @settings(max_examples=50, deadline=None)
    @given(
        scale=st.floats(1e-6, 1e6),
        level=st.floats(0.5, 2.0),
        tol=st.floats(0.01, 0.5),
    )
    def test_scale_invariance(self, scale, level, tol):
        # the verdict must depend only on the measured/reference ratio
        # (except exactly on the pass boundary, where rounding may tip it)
        assume(abs(abs(level - 1.0) - tol) > 1e-6)
        a = compare_psd(self._flat(level), 1.0, (0.5, 5.0), tol)
        b = compare_psd(self._flat(level * scale), scale, (0.5, 5.0), tol)
        assert a.passed == b.passed
        assert a.ratio == pytest.approx(b.ratio, rel=1e-9)


class TestPowerLawFit:
    def test_exact_power_law(self):
        om = np.linspace(0.1, 10.0, 300)
        est = SpectrumEstimate(om, 2.5 * om**-1.7, 1, 0.1, "hann")
        fit = power_law_fit(est, (0.2, 8.0))
        assert fit.exponent == pytest.approx(-1.7, abs=1e-9)
        assert fit.prefactor == pytest.approx(2.5, rel=1e-9)
        assert fit.r_squared == pytest.approx(1.0)

    def test_validation(self):
        om = np.linspace(0.1, 10.0, 300)
        est = SpectrumEstimate(om, np.ones_like(om), 1, 0.1, "hann")
        with pytest.raises(ConfigurationError):
            power_law_fit(est, (0.0, 5.0))
        with pytest.raises(ConfigurationError):
            power_law_fit(est, (4.0, 4.05))


class TestAnalyticCurves:
    OM = np.array([0.1, 0.5, 2.0])

    def test_flat_quarter(self):
        np.testing.assert_array_equal(analytic_curve("coherent_quadrature", self.OM), 0.25)

    def test_drifting_quadrature(self):
        got = analytic_curve("drifting_quadrature", self.OM, drift_rate=0.3)
        np.testing.assert_allclose(got, (self.OM**2 + 0.09) / (4 * self.OM**2))

    def test_locked_beat_level(self):
        got = analytic_curve(
            "locked_beat", self.OM, mixing_angle=np.pi / 4, slave_amplitude=800.0, master_amplitude=8e4
        )
        ta0 = np.cos(np.pi / 4) * 800.0
        level = 4 * ta0**2 * (ta0**2 / 8e4**2 + 1.0)
        np.testing.assert_allclose(got, level)

    def test_coherent_pair_beat(self):
        np.testing.assert_allclose(
            analytic_curve("coherent_pair_beat", self.OM, amplitude_a=3.0, amplitude_b=4.0), 25.0
        )

    def test_delayed_homodyne_smooth_at_zero(self):
        params = dict(amplitude=10.0, drift_rate=0.5, lag=0.1, mode_duration=0.01)
        at_zero = analytic_curve("delayed_homodyne", np.array([0.0]), **params)[0]
        near_zero = analytic_curve("delayed_homodyne", np.array([1e-6]), **params)[0]
        assert at_zero == pytest.approx(10.0**2 * 0.5**2 * 0.1**2 * 0.01**2)
        assert near_zero == pytest.approx(at_zero, rel=1e-6)

    def test_unknown_curve_and_bad_params(self):
        with pytest.raises(ConfigurationError):
            analytic_curve("nope", self.OM)
        with pytest.raises(ConfigurationError):
            analytic_curve("drifting_quadrature", self.OM, wrong_name=1.0)


class TestDelayedHomodyneVariance:
    def test_white_floor_at_zero_drift(self):
        assert delayed_homodyne_variance(30.0, 0.0, 0.1, 0.01) == pytest.approx(2 * 900 * 0.01)

    def test_walk_term_grows_with_lag(self):
        vals = [delayed_homodyne_variance(30.0, 1.0, lag, 0.01) for lag in (0.02, 0.06, 0.12, 0.2)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_overlapping_slices_rejected(self):
        with pytest.raises(ConfigurationError):
            delayed_homodyne_variance(30.0, 1.0, 0.005, 0.01)


class TestCoherenceMetric:
    def _carrier(self, a0, label, extra_phase=None):
        vac = vacuum_field(GRID, SeedStream(314).child(label))
        samples = vac.samples + a0
        if extra_phase is not None:
            samples = samples * np.exp(1j * extra_phase)
        return FieldTrace(GRID, samples, mean_amplitude=a0)

    def test_identical_records_fully_coherent(self):
        a = self._carrier(100.0, "a")
        rep = coherence_metric(a, a, 50.0)
        assert rep.g1_modulus == pytest.approx(1.0, rel=0.02)
        assert rep.condition_ratio == 0.0
        assert rep.block_count == GRID.n // int(round(50.0 / GRID.dt))

    def test_linear_ramp_gives_dirichlet_falloff(self):
        # b runs away in phase at a fixed rate; each block's normalized
        # cross average then has the Dirichlet-kernel modulus
        rate = 0.02
        n_block = 1000
        a = FieldTrace(GRID, np.full(GRID.n, 50.0, complex), mean_amplitude=50.0)
        ramp = rate * GRID.times
        b = FieldTrace(GRID, 50.0 * np.exp(1j * ramp), mean_amplitude=50.0)
        rep = coherence_metric(a, b, n_block * GRID.dt)
        x = rate * GRID.dt
        expected = abs(np.sin(n_block * x / 2) / (n_block * np.sin(x / 2)))
        assert rep.g1_modulus == pytest.approx(expected, rel=1e-6)

    def test_faster_wander_less_coherent(self):
        a = self._carrier(100.0, "a")
        slow = self._carrier(100.0, "b", extra_phase=0.002 * GRID.times)
        fast = self._carrier(100.0, "c", extra_phase=0.02 * GRID.times)
        tau = 500 * GRID.dt
        g_slow = coherence_metric(a, slow, tau).g1_modulus
        g_fast = coherence_metric(a, fast, tau).g1_modulus
        assert g_fast < g_slow < 1.01

    def test_condition_ratio_of_independent_vacua(self):
        a0, b0 = 200.0, 400.0
        a = self._carrier(a0, "a")
        b = self._carrier(b0, "b")
        rep = coherence_metric(a, b, 50.0)
        expected = np.sqrt(0.25 / GRID.dt * (1 / a0**2 + 1 / b0**2))
        assert rep.condition_ratio == pytest.approx(expected, rel=0.02)

    def test_validation(self):
        a = self._carrier(100.0, "a")
        dark = vacuum_field(GRID, SeedStream(314).child("d"))
        with pytest.raises(ConfigurationError):
            coherence_metric(a, dark, 50.0)
        with pytest.raises(ConfigurationError):
            coherence_metric(a, a, 50.0 + GRID.dt / 3)
        with pytest.raises(ConfigurationError):
            coherence_metric(a, a, 50.0, window=(0.0, 1.0))


class TestTableStats:
    def test_matches_direct_formulas(self):
        rng = np.random.default_rng(9)
        amps = rng.normal(5.0, 0.5, 400) + 1j * rng.normal(0.0, 0.5, 400)
        counts = rng.poisson(25.0, 400).astype(float)
        stats = ensemble_table_stats(amps, counts)
        assert stats.count == 400
        assert stats.mean_q1 == pytest.approx(amps.real.mean())
        assert stats.var_q2 == pytest.approx(amps.imag.var(ddof=1))
        assert stats.se_mean_n == pytest.approx(np.sqrt(counts.var(ddof=1) / 400))
        assert stats.se_var_q1 == pytest.approx(amps.real.var(ddof=1) * np.sqrt(2 / 399))

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            ensemble_table_stats(np.ones((2, 2)), np.ones(4))
        with pytest.raises(ConfigurationError):
            ensemble_table_stats(np.ones(1), np.ones(1))
