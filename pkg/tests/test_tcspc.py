import numpy as np
import pytest
from scipy.integrate import quad

from pairpillar import tcspc
from pairpillar.errors import (
    AmbiguousIrfError,
    InsufficientDataError,
    InvalidParameterError,
)

SIGMA78 = 78.0 / tcspc.FWHM_TO_SIGMA  # 33.12 ps


def convolution_oracle(t, tau, sigma, t0):
    """Direct quadrature of the exponential-Gaussian convolution."""

    def integrand(s):
        return (
            np.exp(-s / tau)
            / tau
            * np.exp(-((t - t0 - s) ** 2) / (2 * sigma**2))
            / (sigma * np.sqrt(2 * np.pi))
        )

    kink = max(t - t0, 0.0)
    hi = kink + 14 * sigma + 30 * tau
    val1, _ = quad(integrand, 0.0, kink + 2 * sigma, limit=800, epsabs=0.0, epsrel=1e-12)
    val2, _ = quad(integrand, kink + 2 * sigma, hi, limit=800, epsabs=0.0, epsrel=1e-12)
    return (val1 + val2) * tau  # model shape integrates to tau for amplitude 1


class TestExpGaussModel:
    def test_sigma_to_zero_recovers_exponential(self):
        t = np.linspace(50.0, 3000.0, 200)
        model = tcspc.exp_gauss_model(t, tau=300.0, sigma=1e-3, t0=0.0, amplitude=1.0, baseline=0.0)
        pure = np.exp(-t / 300.0)
        assert np.max(np.abs(model - pure) / pure) < 1e-9

    def test_normalization(self):
        val, _ = quad(
            lambda t: tcspc.exp_gauss_model(t, 300.0, SIGMA78, 500.0, 2.5, 0.0),
            -2000.0, 50_000.0, limit=500,
        )
        assert val == pytest.approx(2.5 * 300.0, rel=1e-6)

    def test_value_at_t0_against_quadrature(self):
        got = tcspc.exp_gauss_model(500.0, 300.0, SIGMA78, 500.0, 1.0, 0.0)
        from scipy.special import erfc
        closed = 0.5 * np.exp(SIGMA78**2 / (2 * 300.0**2)) * erfc(SIGMA78 / (300.0 * np.sqrt(2)))
        assert got == pytest.approx(closed, rel=1e-12)
        oracle = convolution_oracle(500.0, 300.0, SIGMA78, 500.0)
        assert abs(got - oracle) < 1e-8

    def test_matches_quadrature_over_range(self):
        tau, sigma, t0 = 300.0, SIGMA78, 400.0
        ts = np.concatenate([
            np.linspace(t0 - 5 * sigma, t0 + 5 * sigma, 9),
            np.linspace(t0 + 5 * sigma, t0 + 10 * tau, 9),
        ])
        for t in ts:
            got = tcspc.exp_gauss_model(float(t), tau, sigma, t0, 1.0, 0.0)
            oracle = convolution_oracle(float(t), tau, sigma, t0)
            assert abs(got - oracle) <= 1e-8 * max(got, oracle), f"mismatch at t={t}"

    def test_overflow_safe_extreme_ratio(self):
        # sigma/tau up to 1e3 must stay finite
        with np.errstate(over="raise"):
            vals = tcspc.exp_gauss_model(
                np.linspace(-500.0, 500.0, 101), tau=0.033, sigma=33.0,
                t0=0.0, amplitude=1.0, baseline=0.0,
            )
        assert np.all(np.isfinite(vals))

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            tcspc.exp_gauss_model(0.0, -1.0, 30.0, 0.0, 1.0, 0.0)


class TestCascadeModel:
    def test_fast_component_to_zero(self):
        t = np.linspace(0.0, 4000.0, 300)
        casc = tcspc.cascade_gauss_model(t, 1e-6, 281.0, SIGMA78, 300.0, 1.0, 0.0)
        single = tcspc.exp_gauss_model(t, 281.0, SIGMA78, 300.0, 1.0 / 281.0, 0.0)
        assert np.allclose(casc, single, rtol=1e-5, atol=1e-12)

    def test_peak_position_narrow_irf(self):
        t = np.linspace(0.0, 2000.0, 200_001)
        vals = tcspc.cascade_gauss_model(t, 218.0, 281.0, 0.1, 100.0, 1.0, 0.0)
        t_star = 218.0 * 281.0 * np.log(281.0 / 218.0) / (281.0 - 218.0)
        assert t[np.argmax(vals)] == pytest.approx(100.0 + t_star, abs=1.0)

    def test_never_below_baseline(self):
        t = np.linspace(-500.0, 5000.0, 2000)
        vals = tcspc.cascade_gauss_model(t, 218.0, 281.0, SIGMA78, 300.0, 1.0, 0.7)
        assert np.all(vals >= 0.7 - 1e-12)

    def test_degenerate_equal_lifetimes(self):
        t = np.linspace(0.0, 3000.0, 400)
        eq = tcspc.cascade_gauss_model(t, 250.0, 250.0, SIGMA78, 200.0, 1.0, 0.0)
        near = tcspc.cascade_gauss_model(t, 250.0, 250.00001, SIGMA78, 200.0, 1.0, 0.0)
        assert np.allclose(eq, near, rtol=1e-6, atol=1e-14)

    def test_matches_direct_convolution(self):
        tau_xx, tau_x, sigma, t0 = 218.0, 281.0, SIGMA78, 350.0

        def density(s):
            return (np.exp(-s / tau_x) - np.exp(-s / tau_xx)) / (tau_x - tau_xx)

        for t in (250.0, 350.0, 500.0, 900.0, 2000.0):
            def integrand(s):
                return density(s) * np.exp(-((t - t0 - s) ** 2) / (2 * sigma**2)) / (
                    sigma * np.sqrt(2 * np.pi)
                )
            oracle, _ = quad(integrand, 0.0, 15_000.0, limit=400)
            got = tcspc.cascade_gauss_model(t, tau_xx, tau_x, sigma, t0, 1.0, 0.0)
            assert abs(got - oracle) < 1e-8


class TestSynthesis:
    def test_total_counts(self):
        h = tcspc.synthesize_histogram(
            "exp_gauss", dict(tau=300.0, sigma=SIGMA78, t0=200.0, amplitude=1.0, baseline=0.0),
            1_000_000, 4.0, 12_500.0, seed=3,
        )
        assert abs(h.total() - 1_000_000) < 4 * np.sqrt(1_000_000)

    def test_flat_histogram_from_baseline_only(self):
        h = tcspc.synthesize_histogram(
            "exp_gauss", dict(tau=300.0, sigma=SIGMA78, t0=200.0, amplitude=0.0, baseline=1.0),
            200_000, 4.0, 4000.0, seed=4,
        )
        per_bin = 200_000 / len(h.counts)
        assert h.counts.mean() == pytest.approx(per_bin, abs=5 * np.sqrt(per_bin / len(h.counts)))
        lo, hi = np.percentile(h.counts, [1, 99])
        assert hi - lo < 10 * np.sqrt(per_bin)

    def test_deterministic(self):
        kw = dict(tau=300.0, sigma=SIGMA78, t0=200.0, amplitude=1.0, baseline=0.0)
        a = tcspc.synthesize_histogram("exp_gauss", kw, 10_000, 4.0, 8000.0, seed=7)
        b = tcspc.synthesize_histogram("exp_gauss", kw, 10_000, 4.0, 8000.0, seed=7)
        assert np.array_equal(a.counts, b.counts)

    def test_ks_against_model_cdf(self):
        params = dict(tau=300.0, sigma=SIGMA78, t0=400.0, amplitude=1.0, baseline=0.0)
        h = tcspc.synthesize_histogram("exp_gauss", params, 1_000_000, 4.0, 12_500.0, seed=5)
        edges = h.t0_offset_ps + np.arange(len(h.counts) + 1) * h.bin_width_ps
        shape = tcspc.exp_gauss_model(h.centers_ps, **params)
        model_cdf = np.concatenate([[0.0], np.cumsum(shape)]) / shape.sum()
        emp_cdf = np.concatenate([[0.0], np.cumsum(h.counts)]) / h.total()
        assert np.max(np.abs(emp_cdf - model_cdf)) < 0.005


class TestFit:
    def test_exp_gauss_round_trip(self):
        params = dict(tau=300.0, sigma=SIGMA78, t0=300.0, amplitude=1.0, baseline=1e-4)
        h = tcspc.synthesize_histogram("exp_gauss", params, 1_000_000, 4.0, 12_500.0, seed=10)
        fit = tcspc.fit_lifetime(h, "exp_gauss", fixed={"sigma": SIGMA78})
        assert fit.converged
        err = fit.errors["tau"]
        assert err < 3.0
        assert abs(fit.params["tau"] - 300.0) < 2 * err

    def test_cascade_round_trip_pinned_fast(self):
        params = dict(tau_xx=218.0, tau_x=281.0, sigma=SIGMA78, t0=300.0,
                      amplitude=1.0, baseline=1e-7)
        h = tcspc.synthesize_histogram("cascade_gauss", params, 1_000_000, 4.0, 12_500.0, seed=500)
        fit = tcspc.fit_lifetime(h, "cascade_gauss",
                                 fixed={"sigma": SIGMA78, "tau_xx": 218.0})
        assert abs(fit.params["tau_x"] - 281.0) < 2 * fit.errors["tau_x"]

    def test_flat_histogram_amplitude_zero(self):
        rng = np.random.default_rng(6)
        counts = rng.poisson(50.0, 1000)
        h = tcspc.Histogram(bin_width_ps=4.0, counts=counts)
        fit = tcspc.fit_lifetime(h, "exp_gauss", fixed={"sigma": SIGMA78},
                                 init={"tau": 300.0, "t0": 1000.0})
        signal = fit.params["amplitude"] * fit.params["tau"]
        assert signal < 0.01 * h.total() * 4.0

    def test_pinning_never_beats_free(self):
        params = dict(tau=300.0, sigma=SIGMA78, t0=300.0, amplitude=1.0, baseline=1e-4)
        h = tcspc.synthesize_histogram("exp_gauss", params, 200_000, 4.0, 8000.0, seed=12)
        free = tcspc.fit_lifetime(h, "exp_gauss", fixed={"sigma": SIGMA78})
        pinned = tcspc.fit_lifetime(
            h, "exp_gauss", fixed={"sigma": SIGMA78, "tau": free.params["tau"] + 20.0}
        )
        assert pinned.deviance >= free.deviance - 1e-6

    def test_deviance_scale_at_truth(self):
        params = dict(tau=300.0, sigma=SIGMA78, t0=200.0, amplitude=1.0, baseline=0.02)
        h = tcspc.synthesize_histogram("exp_gauss", params, 1_000_000, 4.0, 4000.0, seed=13)
        mu = tcspc.exp_gauss_model(h.centers_ps, **params)
        mu = mu / mu.sum() * h.total()
        dev = tcspc._deviance(h.counts.astype(float), mu)
        assert abs(dev - len(h.counts)) < 0.10 * len(h.counts)

    def test_unbiased_over_replications(self):
        taus = []
        for rep in range(100):
            params = dict(tau=300.0, sigma=SIGMA78, t0=300.0, amplitude=1.0, baseline=1e-4)
            h = tcspc.synthesize_histogram("exp_gauss", params, 100_000, 4.0, 8000.0,
                                           seed=1000 + rep)
            fit = tcspc.fit_lifetime(h, "exp_gauss", fixed={"sigma": SIGMA78})
            taus.append(fit.params["tau"])
        assert abs(np.mean(taus) - 300.0) / 300.0 < 0.01

    def test_covariance_symmetric_psd(self):
        params = dict(tau=300.0, sigma=SIGMA78, t0=300.0, amplitude=1.0, baseline=1e-4)
        h = tcspc.synthesize_histogram("exp_gauss", params, 500_000, 4.0, 10_000.0, seed=14)
        fit = tcspc.fit_lifetime(h, "exp_gauss", fixed={"sigma": SIGMA78})
        cov = fit.covariance
        assert np.max(np.abs(cov - cov.T)) < 1e-9 * max(np.max(np.abs(cov)), 1.0)
        assert np.min(np.linalg.eigvalsh((cov + cov.T) / 2)) > -1e-9

    def test_requires_enough_bins(self):
        h = tcspc.Histogram(bin_width_ps=4.0, counts=np.array([5, 3, 2] + [0] * 100))
        with pytest.raises(InsufficientDataError):
            tcspc.fit_lifetime(h, "exp_gauss")

    def test_nonconvergence_carries_best_so_far(self):
        params = dict(tau=300.0, sigma=SIGMA78, t0=300.0, amplitude=1.0, baseline=1e-4)
        h = tcspc.synthesize_histogram("exp_gauss", params, 100_000, 4.0, 8000.0, seed=19)
        from pairpillar.errors import FitFailureError
        with pytest.raises(FitFailureError) as err:
            tcspc.fit_lifetime(h, "exp_gauss", fixed={"sigma": SIGMA78}, max_nfev=1)
        assert "params" in err.value.details


class TestIrf:
    def test_round_trip_78ps(self):
        h = tcspc.synthesize_histogram(
            "gaussian", dict(center=500.0, sigma=SIGMA78, amplitude=1.0, baseline=1e-5),
            1_000_000, 4.0, 1000.0, seed=15,
        )
        irf, fit = tcspc.irf_from_trace(h)
        assert abs(irf.fwhm_ps - 78.0) <= 1.0
        assert fit.errors["sigma"] * tcspc.FWHM_TO_SIGMA < 1.0

    def test_fwhm_sigma_conversion(self):
        irf = tcspc.IrfModel(fwhm_ps=78.0)
        assert irf.sigma_ps == pytest.approx(33.12, abs=0.01)

    def test_shift_equivariance(self):
        kw = dict(sigma=SIGMA78, amplitude=1.0, baseline=1e-5)
        h1 = tcspc.synthesize_histogram("gaussian", dict(center=500.0, **kw),
                                        500_000, 4.0, 2000.0, seed=16)
        h2 = tcspc.synthesize_histogram("gaussian", dict(center=600.0, **kw),
                                        500_000, 4.0, 2000.0, seed=16)
        irf1, _ = tcspc.irf_from_trace(h1)
        irf2, _ = tcspc.irf_from_trace(h2)
        assert irf2.center_ps - irf1.center_ps == pytest.approx(100.0, abs=1.0)
        assert irf2.fwhm_ps == pytest.approx(irf1.fwhm_ps, abs=0.5)

    def test_multimodal_rejected(self):
        t = np.arange(250) * 4.0 + 2.0
        counts = (
            40_000.0 * np.exp(-((t - 300.0) ** 2) / (2 * SIGMA78**2))
            + 40_000.0 * np.exp(-((t - 700.0) ** 2) / (2 * SIGMA78**2))
        )
        h = tcspc.Histogram(bin_width_ps=4.0, counts=np.random.default_rng(17).poisson(counts))
        with pytest.raises(AmbiguousIrfError):
            tcspc.irf_from_trace(h)


class TestHistogramIO:
    def test_file_round_trip(self, tmp_path):
        h = tcspc.synthesize_histogram(
            "exp_gauss", dict(tau=300.0, sigma=SIGMA78, t0=200.0, amplitude=1.0, baseline=0.0),
            50_000, 4.0, 8000.0, seed=18,
        )
        path = tmp_path / "decay.tsv"
        h.to_file(path)
        back = tcspc.Histogram.from_file(path)
        assert back.bin_width_ps == pytest.approx(h.bin_width_ps)
        assert back.t0_offset_ps == pytest.approx(h.t0_offset_ps)
        assert np.array_equal(back.counts, h.counts)
