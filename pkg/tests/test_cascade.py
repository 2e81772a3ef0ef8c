import numpy as np
import pytest
from scipy.integrate import quad

from pairpillar import cascade
from pairpillar.cascade import CascadeParams
from pairpillar.errors import InsufficientDataError, InvalidParameterError

REFERENCE_PAIR = CascadeParams(tau_xx_ps=218.0, tau_x_ps=281.0)
NO_DECAY = CascadeParams(tau_xx_ps=1e9, tau_x_ps=1e9, rep_period_ns=1e12)


class TestTwoPhotonDrive:
    def test_binding_energy_from_wavelengths(self):
        # oracle: E = hc (1/lam_x - 1/lam_xx), hc = 1239.84 eV nm
        e_b = cascade.binding_energy_from_wavelengths(906.1, 908.5)
        by_hand = 1239.84193e3 * (1 / 906.1 - 1 / 908.5)
        assert e_b == pytest.approx(by_hand, rel=1e-12)
        assert e_b == pytest.approx(3.61, abs=0.02)

    def test_quadratic_in_drive(self):
        w1 = cascade.effective_two_photon_rabi(0.1, 3.6)
        w2 = cascade.effective_two_photon_rabi(0.2, 3.6)
        assert w2 == pytest.approx(4 * w1, rel=1e-12)

    def test_inverse_in_binding(self):
        w1 = cascade.effective_two_photon_rabi(0.1, 3.6)
        w2 = cascade.effective_two_photon_rabi(0.1, 7.2)
        assert w2 == pytest.approx(w1 / 2, rel=1e-12)

    def test_zero_binding_guard(self):
        with pytest.raises(InvalidParameterError):
            cascade.effective_two_photon_rabi(0.1, 0.0)


class TestPulse:
    def test_ideal_pi_pulse(self):
        assert cascade.simulate_pulse(NO_DECAY, np.pi) == pytest.approx(1.0, abs=1e-6)

    def test_full_rabi_cycle(self):
        assert cascade.simulate_pulse(NO_DECAY, 2 * np.pi) == pytest.approx(0.0, abs=1e-6)

    def test_rabi_curve_matches_sin2(self):
        thetas = np.linspace(0.0, 3 * np.pi, 25)
        p = cascade.simulate_pulse(NO_DECAY, thetas)
        assert np.allclose(p, np.sin(thetas / 2) ** 2, atol=1e-6)

    def test_decay_during_pulse(self):
        params = CascadeParams(tau_xx_ps=250.0, tau_x_ps=281.0)
        p = cascade.simulate_pulse(params, np.pi)
        assert 0.95 <= p <= 1.0
        # fine-step integration as oracle
        p_fine = cascade.simulate_pulse(params, np.pi, n_steps=6000)
        assert p == pytest.approx(p_fine, abs=1e-7)

    def test_trace_and_positivity(self):
        rng = np.random.default_rng(11)
        thetas = rng.uniform(0.0, 4 * np.pi, 64)
        params = CascadeParams(tau_xx_ps=218.0, tau_x_ps=281.0, dephasing_per_ns=2.0)
        _, traces, min_eigs = cascade._pulse_integrate(thetas, params, diagnostics=True)
        assert np.max(np.abs(traces - 1.0)) < 1e-8
        assert min_eigs.min() >= -1e-9


class TestDensities:
    def test_normalization(self):
        dens = cascade.emission_time_densities(REFERENCE_PAIR)
        for f in (dens.p_xx, dens.p_x):
            val, _ = quad(f, 0.0, 60_000.0, limit=200)
            assert val == pytest.approx(1.0, abs=1e-9)

    def test_mean_exciton_time(self):
        dens = cascade.emission_time_densities(REFERENCE_PAIR)
        mean, _ = quad(lambda t: t * dens.p_x(t), 0.0, 80_000.0, limit=300)
        assert mean == pytest.approx(218.0 + 281.0, rel=1e-6)

    def test_peak_position(self):
        dens = cascade.emission_time_densities(REFERENCE_PAIR)
        t_star = 218.0 * 281.0 * np.log(281.0 / 218.0) / (281.0 - 218.0)
        assert t_star == pytest.approx(247.0, abs=1.0)
        t = np.linspace(0.0, 1500.0, 150_001)
        assert t[np.argmax(dens.p_x(t))] == pytest.approx(t_star, abs=0.05)

    def test_starts_at_zero(self):
        dens = cascade.emission_time_densities(REFERENCE_PAIR)
        assert dens.p_x(0.0) == 0.0

    def test_matches_numerical_convolution(self):
        dens = cascade.emission_time_densities(REFERENCE_PAIR)
        ts = np.linspace(5.0, 2000.0, 40)
        for t in ts:
            conv, _ = quad(
                lambda s: np.exp(-s / 218.0) / 218.0 * np.exp(-(t - s) / 281.0) / 281.0,
                0.0, t, limit=200,
            )
            assert abs(conv - float(dens.p_x(t))) < 1e-8

    def test_degenerate_lifetimes(self):
        d_eq = cascade.emission_time_densities(CascadeParams(250.0, 250.0))
        d_near = cascade.emission_time_densities(CascadeParams(250.0, 250.0000001))
        t = np.linspace(0.0, 2000.0, 500)
        assert np.allclose(d_eq.p_x(t), d_near.p_x(t), atol=1e-9)
        val, _ = quad(d_eq.p_x, 0.0, 60_000.0, limit=200)
        assert val == pytest.approx(1.0, abs=1e-9)


class TestEnsemble:
    def test_deterministic(self):
        a = cascade.trajectory_ensemble(REFERENCE_PAIR, 20_000, seed=5)
        b = cascade.trajectory_ensemble(REFERENCE_PAIR, 20_000, seed=5)
        assert np.array_equal(a, b)

    def test_zero_area_emits_nothing(self):
        params = CascadeParams(218.0, 281.0, pulse_area_rad=0.0)
        rec = cascade.trajectory_ensemble(params, 10_000, seed=1)
        assert rec.size == 0

    def test_cascade_ordering(self):
        rec = cascade.trajectory_ensemble(REFERENCE_PAIR, 50_000, seed=9)
        xx = rec[rec["channel"] == "xx"]
        x = rec[rec["channel"] == "x"]
        assert np.array_equal(xx["pulse_index"], x["pulse_index"])
        assert np.all(xx["emission_time_ps"] < x["emission_time_ps"])

    def test_ks_against_analytic(self):
        rec = cascade.trajectory_ensemble(REFERENCE_PAIR, 1_000_000, seed=12)
        t_xx = np.sort(rec[rec["channel"] == "xx"]["emission_time_ps"])
        dens = cascade.emission_time_densities(REFERENCE_PAIR)
        cdf = dens.cdf_xx(t_xx)
        n = len(t_xx)
        empirical_hi = np.arange(1, n + 1) / n
        empirical_lo = np.arange(0, n) / n
        ks = max(np.max(np.abs(empirical_hi - cdf)), np.max(np.abs(cdf - empirical_lo)))
        assert ks < 0.002


class TestG2:
    def test_zero_without_reexcitation(self):
        rec = cascade.trajectory_ensemble(REFERENCE_PAIR, 100_000, seed=2)
        for channel in ("xx", "x"):
            g2 = cascade.g2_pulsed(rec, channel, n_pulses=100_000)
            assert g2.g2_zero == 0.0

    def test_one_percent_reexcitation(self):
        rec = cascade.trajectory_ensemble(REFERENCE_PAIR, 1_000_000, seed=8,
                                          re_excitation_prob=0.01)
        g2 = cascade.g2_pulsed(rec, "xx", n_pulses=1_000_000)
        assert 0.01 <= g2.g2_zero <= 0.03

    def test_side_peaks_flat(self):
        rec = cascade.trajectory_ensemble(REFERENCE_PAIR, 200_000, seed=4,
                                          re_excitation_prob=0.01)
        side = cascade.side_peak_correlations(rec, "xx", max_lag=8)
        counts = np.bincount(rec[rec["channel"] == "xx"]["pulse_index"], minlength=200_000)
        sigma = np.std(side, ddof=1)
        noise = 1.0 / np.sqrt(200_000 * counts.mean() ** 2)
        assert np.all(np.abs(side - 1.0) < 3 * max(sigma, noise) + 0.02)

    def test_insufficient_data(self):
        rec = cascade.trajectory_ensemble(REFERENCE_PAIR, 100, seed=2)
        with pytest.raises(InsufficientDataError):
            cascade.g2_pulsed(rec, "xx", n_pulses=100)
        params = CascadeParams(218.0, 281.0, pulse_area_rad=0.0)
        empty = cascade.trajectory_ensemble(params, 20_000, seed=1)
        with pytest.raises(InsufficientDataError):
            cascade.g2_pulsed(empty, "xx", n_pulses=20_000)


class TestVisibility:
    def test_analytic_value(self):
        vis = cascade.hom_visibility_cascade(REFERENCE_PAIR, n_pulses=10_000, seed=1)
        assert vis.analytic == pytest.approx(218.0 / (218.0 + 281.0), rel=1e-12)
        assert vis.analytic == pytest.approx(0.437, abs=5e-4)

    def test_trajectory_matches_analytic(self):
        vis = cascade.hom_visibility_cascade(REFERENCE_PAIR, n_pulses=400_000, seed=21)
        assert abs(vis.trajectory - vis.analytic) < 3 * vis.trajectory_error

    def test_fast_upper_decay_kills_visibility(self):
        params = CascadeParams(tau_xx_ps=1e-3, tau_x_ps=281.0)
        vis = cascade.hom_visibility_cascade(params, n_pulses=20_000, seed=2)
        assert vis.analytic < 1e-3
        assert vis.trajectory < 1e-3

    def test_dephasing_kills_visibility(self):
        params = CascadeParams(218.0, 281.0, dephasing_per_ns=1e6)
        vis = cascade.hom_visibility_cascade(params, n_pulses=20_000, seed=3)
        assert vis.analytic < 1e-3
        assert vis.trajectory < 1e-3

    def test_conversion_from_g2hom(self):
        raw, _ = cascade.visibility_from_g2hom(0.5)
        assert raw == 0.0
        raw, corr = cascade.visibility_from_g2hom(0.280, 0.009)
        assert raw == pytest.approx(0.440, abs=1e-12)
        assert corr == pytest.approx(0.453, abs=2e-3)
        raw, corr = cascade.visibility_from_g2hom(0.0)
        assert raw == 1.0
        assert corr == 1.0

    def test_conversion_bounds(self):
        with pytest.raises(InvalidParameterError):
            cascade.visibility_from_g2hom(1.2)


class TestWarnings:
    def test_short_rep_period_warns(self):
        with pytest.warns(UserWarning):
            CascadeParams(218.0, 281.0, rep_period_ns=0.5)
