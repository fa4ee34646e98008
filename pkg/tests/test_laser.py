"""Source models against their stated spectra and steady states."""

import numpy as np
import pytest

from fluxlock import (
    ConfigurationError,
    LinearLaserSpec,
    NumericalInstabilityError,
    PotentialLaserSpec,
    SeedStream,
    TimeGrid,
    increment_psd,
    linearized_laser,
    nonlinear_laser,
    nonlinear_laser_ensemble,
    phase_diffusion_coefficient,
    phase_variance_rate,
    phasor_laser,
    potential_value,
    steady_state_amplitude,
    welch_psd,
)
from fluxlock.analysis import band_average
from fluxlock.core import FieldTrace


def _seed(*labels):
    return SeedStream(1618).child(*labels)


# ---------------------------------------------------------------- linearized


def test_carrier_and_mean():
    grid = TimeGrid(dt=0.01, n=50_000)
    spec = LinearLaserSpec(mean_amplitude=120.0, drift_rate=0.3)
    tr = linearized_laser(spec, grid, _seed("lin"))
    assert tr.mean_amplitude == 120.0
    assert tr.samples.real.mean() == pytest.approx(120.0, abs=0.15)
    assert abs(tr.samples.imag.mean()) < 2.0  # walk wanders, stays small here


def test_in_phase_quadrature_is_white_quarter():
    grid = TimeGrid(dt=0.01, n=2**18)
    tr = linearized_laser(LinearLaserSpec(50.0, 1.0), grid, _seed("q"))
    q1, _ = tr.quadratures()
    est = welch_psd(q1, segment_length=2**13)
    assert band_average(est, (1.0, 10.0)) == pytest.approx(0.25, rel=0.04)


def test_out_of_phase_density_has_walk_plus_floor():
    # S(W) = (W^2 + g^2) / (4 W^2): floor 1/4 plus g^2/(4 W^2) from the walk
    gamma = 1.0
    grid = TimeGrid(dt=0.01, n=2**19)
    tr = linearized_laser(LinearLaserSpec(50.0, gamma), grid, _seed("walky"))
    _, q2 = tr.quadratures()
    est = increment_psd(q2, segment_length=2**15)
    # the mid band straddles the walk/floor crossover where the estimator
    # spread is widest, hence its looser tolerance
    for band, rel in (((0.05, 0.15), 0.08), ((0.4, 1.2), 0.15), ((3.0, 9.0), 0.08)):
        om = est.omega[(np.abs(est.omega) >= band[0]) & (np.abs(est.omega) <= band[1])]
        expect = np.mean((om**2 + gamma**2) / (4.0 * om**2))
        assert band_average(est, band) == pytest.approx(expect, rel=rel)


def test_forms_agree_without_drift():
    # with no walk the rotating form reduces to the additive form exactly
    grid = TimeGrid(dt=0.05, n=4096)
    spec = LinearLaserSpec(30.0)
    a = linearized_laser(spec, grid, _seed("same"))
    b = phasor_laser(spec, grid, _seed("same"))
    np.testing.assert_array_equal(a.samples, b.samples)


def test_forms_share_noise_and_agree_to_first_order():
    grid = TimeGrid(dt=0.05, n=8192)
    spec = LinearLaserSpec(200.0, drift_rate=0.5)
    a = linearized_laser(spec, grid, _seed("pair"))
    b = phasor_laser(spec, grid, _seed("pair"))
    # identical labelled streams -> the difference is only the exponentiation;
    # dominant residue is the q1*theta cross term (~3e-4 rms here)
    diff = np.abs(a.samples.imag - b.samples.imag) / spec.mean_amplitude
    assert np.sqrt(np.mean(diff**2)) < 1e-3
    assert np.max(diff) < 5e-3


def test_phasor_modulus_ignores_walk():
    grid = TimeGrid(dt=0.05, n=4096)
    spec = LinearLaserSpec(40.0, drift_rate=3.0)
    quiet = phasor_laser(LinearLaserSpec(40.0, 0.0), grid, _seed("mod"))
    loud = phasor_laser(spec, grid, _seed("mod"))
    np.testing.assert_allclose(np.abs(loud.samples), np.abs(quiet.samples), rtol=1e-12)


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        LinearLaserSpec(0.0)
    with pytest.raises(ConfigurationError):
        LinearLaserSpec(10.0, drift_rate=-1.0)
    with pytest.raises(ConfigurationError):
        PotentialLaserSpec(gain=1.0, loss=1.0, saturation=0.5, noise_psd=0.1)  # at threshold
    with pytest.raises(ConfigurationError):
        PotentialLaserSpec(gain=2.0, loss=0.4, saturation=0.0, noise_psd=0.1)


# ---------------------------------------------------------------- oscillator


OSC = PotentialLaserSpec(gain=2.0, loss=0.4, saturation=0.8, noise_psd=0.01)


def test_steady_state_closed_form():
    assert steady_state_amplitude(OSC) == pytest.approx(1.0)
    assert steady_state_amplitude(PotentialLaserSpec(3.0, 1.0, 1.0, 0.0)) == pytest.approx(1.0)


def test_potential_minimum_sits_at_steady_state():
    a_ss = steady_state_amplitude(OSC)
    r = np.linspace(0.2, 2.0, 901)
    values = potential_value(OSC, r)
    assert r[np.argmin(values)] == pytest.approx(a_ss, abs=0.005)


def test_noiseless_path_stays_at_steady_state():
    spec = PotentialLaserSpec(2.0, 0.4, 0.8, 0.0)
    grid = TimeGrid(dt=0.01, n=2000)
    tr = nonlinear_laser(spec, grid, _seed("still"))
    np.testing.assert_allclose(np.abs(tr.samples), 1.0, rtol=1e-12)


def test_noiseless_relaxation_toward_minimum():
    spec = PotentialLaserSpec(2.0, 0.4, 0.8, 0.0)
    grid = TimeGrid(dt=0.01, n=4000)
    tr = nonlinear_laser(spec, grid, _seed("relax"), initial=0.3)
    mags = np.abs(tr.samples)
    assert mags[-1] == pytest.approx(1.0, rel=1e-6)
    assert np.all(np.diff(mags) > -1e-12)  # monotone climb out of the bowl


def test_steady_intensity_with_noise():
    grid = TimeGrid(dt=0.005, n=60_000)
    tr = nonlinear_laser(OSC, grid, _seed("hot"))
    tail = np.abs(tr.samples[-20_000:]) ** 2
    assert tail.mean() == pytest.approx(1.0, rel=0.05)


def test_instability_guard_raises_with_dt():
    spec = PotentialLaserSpec(2.0, 0.4, 0.8, 0.5)
    grid = TimeGrid(dt=5.0, n=500)  # cubic overshoot at this step
    with pytest.raises(NumericalInstabilityError) as info:
        nonlinear_laser(spec, grid, _seed("boom"), initial=4.0)
    assert info.value.dt == 5.0


def test_ensemble_matches_single_path_streams():
    grid = TimeGrid(dt=0.01, n=300)
    ens = nonlinear_laser_ensemble(OSC, grid, _seed("batch"), 5)
    assert ens.shape == (5, 300)
    # members are iid: distinct realizations, common distribution
    assert not np.array_equal(ens[0], ens[1])
    with pytest.raises(ConfigurationError):
        nonlinear_laser_ensemble(OSC, grid, _seed("batch"), 0)


def test_phase_variance_rate_forms():
    assert phase_variance_rate(LinearLaserSpec(10.0, 2.0)) == pytest.approx(4.0 / 400.0)
    assert phase_variance_rate(OSC) == pytest.approx(0.01)
    with pytest.raises(ConfigurationError):
        phase_variance_rate("not a spec")


def test_phase_diffusion_recovers_rate():
    # synthetic rotating fields with a known walk: variance slope = q/r0^2
    grid = TimeGrid(dt=0.05, n=2000)
    r0, q = 5.0, 0.4
    root = _seed("diff")
    fields = []
    for m in range(400):
        dW = np.sqrt(q * grid.dt) * root.child(m).normals(grid.n)
        theta = np.cumsum(dW) / r0
        fields.append(FieldTrace(grid, r0 * np.exp(1j * theta), mean_amplitude=r0))
    est = phase_diffusion_coefficient(fields, fit_start=1.0)
    assert est.variance_slope == pytest.approx(q / r0**2, rel=0.1)
    assert est.r_squared > 0.99
    assert est.decay_rate == pytest.approx(est.variance_slope / 2.0)
