import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from handsel.cmp import (
    CmpParams,
    FitConfig,
    dispersion_index,
    fit_mle,
    log_likelihood,
    log_normalizer,
    log_pmf,
    mean_variance,
    pmf,
    sample,
)
from handsel.errors import (
    DegenerateSampleError,
    DivergenceError,
    InsufficientSamplesError,
    TruncationError,
)
from oracles import cmp_pmf, cmp_series, poisson_pmf

# frozen from oracles.cmp_series (50-digit direct summation)
LOGZ_FIG1 = 49.709996499957475731
MEAN_FIG1 = 31.296719553351670303
VAR_FIG1 = 19.203386788871375340
PMF_4_2_AT_2 = 0.35392210430579954724

FIG1 = CmpParams(286.46, 1.64)


class TestNormalizer:
    def test_poisson_case_is_lambda(self):
        # exact up to the 1e-12 relative truncation of the series
        assert log_normalizer(CmpParams(2.0, 1.0)) == pytest.approx(2.0, abs=1e-12)

    def test_geometric_case(self):
        assert log_normalizer(CmpParams(0.5, 0.0)) == pytest.approx(math.log(2.0), abs=1e-11)

    def test_large_lambda_against_extended_precision(self):
        value = log_normalizer(FIG1)
        assert math.isfinite(value)
        assert value == pytest.approx(LOGZ_FIG1, rel=1e-9)

    def test_frozen_value_matches_live_oracle(self):
        assert cmp_series(286.46, 1.64)[0] == pytest.approx(LOGZ_FIG1, rel=1e-15)

    def test_naive_series_would_overflow(self):
        # lambda**j alone leaves double range long before the series tail
        with pytest.raises(OverflowError):
            286.46 ** 130.0
        assert math.isfinite(log_normalizer(FIG1))

    def test_divergent_geometric(self):
        with pytest.raises(DivergenceError):
            log_normalizer(CmpParams(1.0, 0.0))
        with pytest.raises(DivergenceError):
            log_normalizer(CmpParams(3.0, 0.0))

    def test_mode_beyond_term_cap_is_truncation(self):
        # mode 120**2 = 14400 lies past the default 10,000 terms
        with pytest.raises(TruncationError):
            log_normalizer(CmpParams(120.0, 0.5))

    def test_truncation_failure(self):
        cfg = FitConfig(max_terms=100)
        with pytest.raises(TruncationError):
            log_normalizer(CmpParams(1e6, 1.0), cfg)

    def test_monotone_in_lambda(self):
        for nu in (0.6, 1.0, 1.64, 3.0):
            values = [log_normalizer(CmpParams(lam, nu)) for lam in (0.5, 1.5, 5.0, 30.0, 120.0)]
            assert all(a < b for a, b in zip(values, values[1:]))

    def test_monotone_in_nu(self):
        for lam in (1.5, 5.0, 30.0, 286.46):
            values = [log_normalizer(CmpParams(lam, nu)) for nu in (0.8, 1.0, 1.3, 1.64, 2.5)]
            assert all(a > b for a, b in zip(values, values[1:]))

    def test_deterministic(self):
        assert log_normalizer(FIG1) == log_normalizer(FIG1)


class TestMass:
    def test_poisson_one_at_zero(self):
        assert pmf(CmpParams(1.0, 1.0), 0) == pytest.approx(math.exp(-1.0), abs=1e-13)

    def test_geometric_mass(self):
        assert pmf(CmpParams(0.5, 0.0), 1) == pytest.approx(0.25, abs=1e-12)

    def test_under_dispersed_mass_against_oracle(self):
        assert pmf(CmpParams(4.0, 2.0), 2) == pytest.approx(PMF_4_2_AT_2, rel=1e-12)
        assert cmp_pmf(4.0, 2.0, 2) == pytest.approx(PMF_4_2_AT_2, rel=1e-15)

    @pytest.mark.parametrize("lam", [0.5, 1.0, 5.0, 30.0])
    def test_poisson_reduction(self, lam):
        k = np.arange(101)
        got = pmf(CmpParams(lam, 1.0), k)
        want = np.array([poisson_pmf(lam, int(j)) for j in k])
        assert np.max(np.abs(got - want)) < 1e-12

    def test_array_and_scalar_agree(self):
        p = CmpParams(12.0, 1.3)
        arr = log_pmf(p, np.array([0, 3, 17]))
        assert [log_pmf(p, 0), log_pmf(p, 3), log_pmf(p, 17)] == list(arr)

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            log_pmf(CmpParams(2.0, 1.0), -1)

    @pytest.mark.parametrize("lam,nu", [
        (0.3, 0.0), (0.9, 0.0), (0.5, 0.5), (2.0, 0.7), (5.0, 1.0),
        (30.0, 1.0), (4.0, 2.0), (20.0, 2.0), (286.46, 1.64), (250.458, 1.639),
        (1000.0, 2.0), (0.1, 3.0), (50.0, 0.9), (8.0, 1.5), (100.0, 1.2),
        (1.5, 4.0), (12.0, 1.3), (0.7, 0.2), (60.0, 1.1), (3.0, 10.0),
    ])
    def test_normalization_grid(self, lam, nu):
        p = CmpParams(lam, nu)
        mean, var = mean_variance(p)
        hi = int(mean + 40 * math.sqrt(var) + 50)
        total = math.fsum(pmf(p, np.arange(hi)))
        assert abs(total - 1.0) < 1e-9


class TestMoments:
    def test_poisson(self):
        mean, var = mean_variance(CmpParams(4.0, 1.0))
        assert mean == pytest.approx(4.0, abs=1e-9)
        assert var == pytest.approx(4.0, abs=1e-9)

    def test_geometric(self):
        mean, _ = mean_variance(CmpParams(0.5, 0.0))
        assert mean == pytest.approx(1.0, abs=1e-9)

    def test_handball_scale(self):
        mean, var = mean_variance(FIG1)
        assert mean == pytest.approx(MEAN_FIG1, rel=1e-10)
        assert var == pytest.approx(VAR_FIG1, rel=1e-9)
        assert var < mean
        # first-order approximation lambda**(1/nu)
        assert abs(mean - 286.46 ** (1 / 1.64)) < 1.0


class TestDispersion:
    def test_constant(self):
        assert dispersion_index([3, 3, 3, 3]) == 0.0

    def test_hand_case(self):
        assert dispersion_index([0, 2]) == 2.0

    def test_poisson_simulation(self):
        x = np.random.default_rng(7).poisson(30, 20_000)
        assert dispersion_index(x) == pytest.approx(1.0, abs=0.1)

    def test_zero_mean(self):
        with pytest.raises(DegenerateSampleError):
            dispersion_index([0, 0, 0])

    def test_too_few(self):
        with pytest.raises(InsufficientSamplesError):
            dispersion_index([4])


class TestFit:
    def test_poisson_recovery(self):
        x = np.random.default_rng(11).poisson(30, 2000)
        res = fit_mle(x)
        mean, _ = mean_variance(res.params)
        assert res.converged
        assert 0.8 <= res.params.nu <= 1.25
        assert mean == pytest.approx(30.0, rel=0.02)

    def test_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            fit_mle([10, 10, 10, 10, 10])

    def test_three_equal_samples_rejected(self):
        with pytest.raises((DegenerateSampleError, InsufficientSamplesError)):
            fit_mle([10, 10, 10])

    def test_too_few(self):
        with pytest.raises(InsufficientSamplesError):
            fit_mle([1, 2, 3])

    def test_rejects_non_integers(self):
        with pytest.raises(ValueError):
            fit_mle([1.5, 2, 3, 4, 5])

    def test_handball_scale_recovery(self):
        x = sample(FIG1, 2000, np.random.default_rng(2024))
        res = fit_mle(x)
        mean, var = mean_variance(res.params)
        assert res.converged and not res.nu_capped
        assert mean == pytest.approx(x.mean(), rel=0.02)
        assert var == pytest.approx(x.var(ddof=1), rel=0.10)
        init = CmpParams(float(x.mean()), 1.0)
        assert res.log_likelihood >= log_likelihood(init, x)

    def test_reported_likelihood_matches_params(self):
        x = sample(CmpParams(200.0, 1.5), 50, np.random.default_rng(3))
        res = fit_mle(x)
        assert res.log_likelihood == pytest.approx(log_likelihood(res.params, x), abs=1e-8)

    def test_self_consistency(self):
        x = sample(CmpParams(20.0, 1.2), 400, np.random.default_rng(5))
        fitted = fit_mle(x).params
        mean, var = mean_variance(fitted)
        y = sample(fitted, 4000, np.random.default_rng(6))
        refit_mean, _ = mean_variance(fit_mle(y).params)
        se = math.sqrt(var / len(y))
        assert abs(refit_mean - mean) < 2 * se

    def test_nu_cap_flagged(self):
        # nearly constant sample drives nu to the cap
        res = fit_mle([20, 20, 20, 20, 20, 20, 20, 20, 20, 21], FitConfig(nu_cap=5.0))
        assert res.nu_capped
        assert res.params.nu == pytest.approx(5.0)

    def test_iteration_limit_reports_nonconvergence(self):
        x = sample(FIG1, 200, np.random.default_rng(1))
        res = fit_mle(x, FitConfig(max_iterations=3))
        assert not res.converged
        assert res.iterations == 3

    def test_optimum_beats_neighbours(self):
        x = sample(CmpParams(150.0, 1.5), 300, np.random.default_rng(9))
        res = fit_mle(x)
        best = res.log_likelihood
        for dl, dn in ((1e-3, 0), (-1e-3, 0), (0, 1e-3), (0, -1e-3)):
            p = CmpParams.from_log(res.params.log_lam + dl, math.exp(math.log(res.params.nu) + dn))
            assert log_likelihood(p, x) <= best + 1e-9


class TestParams:
    def test_invalid(self):
        with pytest.raises(ValueError):
            CmpParams(0.0, 1.0)
        with pytest.raises(ValueError):
            CmpParams(1.0, -0.1)

    def test_config_invariants(self):
        with pytest.raises(ValueError):
            FitConfig(tolerance=0.0)
        with pytest.raises(ValueError):
            FitConfig(max_terms=10)
        with pytest.raises(ValueError):
            FitConfig(nu_cap=0.0)


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(0.05, 400.0), nu=st.floats(0.3, 4.0))
def test_mass_sums_to_one(lam, nu):
    assume(math.log(lam) / nu < math.log(5000))
    p = CmpParams(lam, nu)
    mean, var = mean_variance(p)
    hi = int(mean + 40 * math.sqrt(var) + 50)
    assert abs(math.fsum(pmf(p, np.arange(hi))) - 1.0) < 1e-9


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.5, 300.0), nu=st.floats(0.5, 3.0))
def test_normalizer_matches_extended_precision(lam, nu):
    assume(math.log(lam) / nu < math.log(2000))
    assert log_normalizer(CmpParams(lam, nu)) == pytest.approx(cmp_series(lam, nu, dps=30)[0],
                                                               rel=1e-9, abs=1e-12)
