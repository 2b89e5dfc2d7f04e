import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from anisofield.calibration import (FrequencyGrid, NoiseLevel, OptionModel,
                                    cos_transform, cos_transform_many,
                                    distinguished_log, fourier_O,
                                    fourier_O_numeric, holder_bound_check,
                                    holder_exponent, ito_covariance,
                                    lambda_min_on_IV, moment_integral,
                                    psi_estimator, simulate_spectral_noise,
                                    tail_integral, total_mass)
from anisofield.errors import PhaseJumpTooLarge, ZeroHit

POW = NoiseLevel(family="power-law", a=1.5, p=1.5)
BUMP = NoiseLevel(family="bump", support=2.0, amplitude=1.0, p=1.5)


class TestNoiseLevel:
    def test_family_validation(self):
        with pytest.raises(ValueError):
            NoiseLevel(family="gauss")
        with pytest.raises(ValueError):
            NoiseLevel(family="power-law", a=0.5)
        with pytest.raises(ValueError):
            NoiseLevel(family="bump", support=0.0)

    def test_eps_values(self):
        assert POW.eps(np.array(0.0)) == 1.0
        assert POW.eps(np.array(1.0)) == pytest.approx(2.0 ** -1.5)
        assert BUMP.eps(np.array(2.0)) == 0.0
        assert BUMP.eps(np.array(0.0)) == pytest.approx(math.exp(-1.0))

    def test_eps_even(self):
        xs = np.linspace(-3, 3, 31)
        for noise in (POW, BUMP):
            assert np.allclose(noise.eps(xs), noise.eps(-xs))

    def test_certify_tail(self):
        assert POW.certify_tail() == 1.5
        with pytest.raises(ValueError, match="diverges"):
            NoiseLevel(family="power-law", a=1.0).certify_tail(1.5)
        with pytest.raises(ValueError):
            POW.certify_tail(0.5)
        # compact support: any p > 1 is fine
        BUMP.certify_tail(100.0)


class TestIntegrals:
    def test_tail_integral_closed_form(self):
        # (1+|x|)^1.5 (1+|x|)^-3 integrates to 4 on the whole line
        assert tail_integral(POW, 1.5) == pytest.approx(4.0, abs=1e-8)

    def test_tail_integral_divergent_rejected(self):
        with pytest.raises(ValueError):
            tail_integral(NoiseLevel(family="power-law", a=1.0), 1.5)

    def test_total_mass_closed_form(self):
        assert total_mass(POW) == pytest.approx(1.0, abs=1e-10)
        oracle, _ = integrate.quad(lambda x: float(BUMP.eps(np.array(x)) ** 2),
                                   0.0, 2.0, epsabs=1e-12)
        assert total_mass(BUMP) == pytest.approx(2.0 * oracle, abs=1e-10)

    def test_moment_closed_form(self):
        # 2 Gamma(q+1) Gamma(2a-q-1) / Gamma(2a) at a=1.5, q=1.5 is 3 pi / 4
        assert moment_integral(POW, 1.5) == pytest.approx(3.0 * math.pi / 4.0,
                                                          abs=1e-12)
        assert moment_integral(POW, 0.0) == pytest.approx(1.0)

    def test_moment_matches_quadrature(self):
        oracle, _ = integrate.quad(lambda x: x ** 1.2 * (1 + x) ** -3.0,
                                   0.0, np.inf, epsabs=1e-12, limit=400)
        assert moment_integral(POW, 1.2) == pytest.approx(2.0 * oracle, rel=1e-9)

    def test_moment_divergent_rejected(self):
        with pytest.raises(ValueError):
            moment_integral(POW, 2.0)
        with pytest.raises(ValueError):
            moment_integral(POW, -0.5)


class TestCosTransform:
    def test_zero_frequency_is_mass(self):
        assert cos_transform(POW, 0.0) == pytest.approx(total_mass(POW))

    def test_even_in_w(self):
        assert cos_transform(POW, 1.3) == cos_transform(POW, -1.3)

    def test_against_integration_by_parts_oracle(self):
        # two integrations by parts turn int_0^inf cos(wx)(1+x)^-3 dx into
        # 3/(2w^2) - (12/w^2) int cos(wx)(1+x)^-5 dx, whose integrand decays
        # fast enough for plain adaptive quadrature on a truncated range
        for w in (0.5, 1.0, 2.5):
            body, _ = integrate.quad(lambda x: math.cos(w * x) * (1 + x) ** -5.0,
                                     0.0, 300.0, epsabs=1e-13, limit=4000)
            oracle = 2.0 * (3.0 - 12.0 * body) / w ** 2
            assert cos_transform(POW, w) == pytest.approx(oracle, abs=1e-8)

    def test_bounded_by_mass(self):
        ws = np.linspace(0.0, 20.0, 41)
        vals = cos_transform_many(POW, ws)
        assert np.all(np.abs(vals) <= total_mass(POW) + 1e-12)

    def test_many_matches_scalar(self):
        ws = np.array([[0.0, 0.7], [-0.7, 3.0]])
        vals = cos_transform_many(BUMP, ws)
        assert vals.shape == (2, 2)
        assert vals[0, 1] == cos_transform(BUMP, 0.7)
        assert vals[1, 0] == vals[0, 1]


class TestHolderExponent:
    def test_values(self):
        assert holder_exponent(1.5) == 0.75
        assert holder_exponent(2.0) == 1.0
        assert holder_exponent(7.0) == 1.0

    def test_domain(self):
        with pytest.raises(ValueError):
            holder_exponent(1.0)


class TestItoCovariance:
    def test_diagonal_and_symmetric_roles(self):
        cov = ito_covariance(POW, 0.8, 0.8)
        assert cov[0, 1] == 0.0 and cov[1, 0] == 0.0
        # variances of real and imaginary parts sum to the total mass
        assert cov[0, 0] + cov[1, 1] == pytest.approx(total_mass(POW))

    def test_anchor_degenerates(self):
        cov = ito_covariance(POW, 0.0, 0.0)
        assert cov[0, 0] == pytest.approx(total_mass(POW))
        assert cov[1, 1] == pytest.approx(0.0, abs=1e-12)

    def test_psd_two_by_two(self):
        for u, v in [(0.3, 0.9), (1.0, 1.0), (0.1, 5.0)]:
            w = np.linalg.eigvalsh(ito_covariance(POW, u, v))
            # cross-covariance blocks; entries bounded by the mass
            assert np.all(np.abs(w) <= total_mass(POW) + 1e-9)

    def test_quadrature_oracle(self):
        u, v = 0.6, 1.7
        cc, _ = integrate.quad(
            lambda x: math.cos(u * x) * math.cos(v * x) * (1 + abs(x)) ** -3.0,
            -np.inf, np.inf, epsabs=1e-10, limit=4000)
        ss, _ = integrate.quad(
            lambda x: math.sin(u * x) * math.sin(v * x) * (1 + abs(x)) ** -3.0,
            -np.inf, np.inf, epsabs=1e-10, limit=4000)
        cov = ito_covariance(POW, u, v)
        assert cov[0, 0] == pytest.approx(cc, abs=1e-7)
        assert cov[1, 1] == pytest.approx(ss, abs=1e-7)


class TestLambdaMin:
    def test_positive_and_below_half_mass(self):
        lam = lambda_min_on_IV(POW, 10.0)
        assert 0.0 < lam <= 0.5 * total_mass(POW) + 1e-12

    def test_nonincreasing_in_V(self):
        lams = [lambda_min_on_IV(POW, V) for V in (2.0, 5.0, 10.0)]
        assert lams[0] >= lams[1] >= lams[2]

    def test_domain(self):
        with pytest.raises(ValueError):
            lambda_min_on_IV(POW, 1.0)

    def test_matches_direct_phase_quadrature(self):
        # independent oracle: smallest int sin^2(phi + vx) eps^2 over a grid
        best = np.inf
        for v in np.linspace(0.5, 2.0, 7):
            for phi in np.linspace(0.0, math.pi, 19, endpoint=False):
                val, _ = integrate.quad(
                    lambda x: math.sin(phi + v * x) ** 2 * (1 + abs(x)) ** -3.0,
                    -np.inf, np.inf, epsabs=1e-10, limit=4000)
                best = min(best, val)
        assert lambda_min_on_IV(POW, 2.0) <= best + 1e-6


class TestHolderBound:
    def test_power_law_pairs_ok(self):
        pairs = [(u, v) for u in np.linspace(-10, 10, 15)
                 for v in np.linspace(-10, 10, 15)]
        worst, ok = holder_bound_check(POW, 1.5, pairs)
        assert ok and worst <= 1e-8

    def test_bump_pairs_ok(self):
        pairs = [(0.0, 0.3), (1.0, -1.0), (5.0, 5.5)]
        _, ok = holder_bound_check(BUMP, 2.0, pairs)
        assert ok

    def test_pointwise_inequality_by_quadrature(self):
        # the bound rests on 1 - cos(t) <= 2^(1-q) |t|^q for q in (0, 2]
        q = 1.5
        ts = np.linspace(-30, 30, 2001)
        assert np.all(1.0 - np.cos(ts) <= 2.0 ** (1.0 - q) * np.abs(ts) ** q + 1e-12)
        # integrated against eps^2 this is exactly lhs <= rhs for one pair
        u, v = 0.4, 2.1
        lhs, _ = integrate.quad(
            lambda x: 2.0 * (1.0 - math.cos((u - v) * x)) * (1 + abs(x)) ** -3.0,
            -np.inf, np.inf, epsabs=1e-10, limit=4000)
        rhs = 2.0 ** (2.0 - q) * abs(u - v) ** q * moment_integral(POW, q)
        assert lhs <= rhs + 1e-8


class TestFrequencyGrid:
    def test_build_structure(self):
        g = FrequencyGrid.build(5.0, 0.1)
        assert g.points[g.anchor_index] == 0.0
        assert np.allclose(g.points, -g.points[::-1])
        pos = g.positive
        assert pos[0] == pytest.approx(0.2) and pos[-1] <= 5.0 + 1e-12

    def test_rejects_points_in_gap(self):
        with pytest.raises(ValueError):
            FrequencyGrid(V=5.0, step=0.1, points=np.array([-0.05, 0.0, 0.05]))

    def test_rejects_missing_anchor(self):
        with pytest.raises(ValueError):
            FrequencyGrid(V=5.0, step=0.1, points=np.array([0.2, 0.4]))

    def test_rejects_bad_build_args(self):
        with pytest.raises(ValueError):
            FrequencyGrid.build(1.0, 0.1)
        with pytest.raises(ValueError):
            FrequencyGrid.build(5.0, 0.0)


class TestSpectralSimulation:
    def test_empty(self):
        g = FrequencyGrid.build(3.0, 0.5)
        s = simulate_spectral_noise(POW, g, 0, 0)
        assert s.values.shape == (0, g.points.size)

    def test_conjugate_symmetry_exact(self):
        g = FrequencyGrid.build(3.0, 0.25)
        s = simulate_spectral_noise(POW, g, 20, 7)
        assert np.array_equal(s.values, np.conj(s.values[:, ::-1]))
        a = g.anchor_index
        assert np.all(s.values[:, a].imag == 0.0)

    def test_deterministic_and_worker_invariant(self):
        g = FrequencyGrid.build(3.0, 0.25)
        a = simulate_spectral_noise(POW, g, 50, 11, workers=1)
        b = simulate_spectral_noise(POW, g, 50, 11, workers=4)
        assert a.values.tobytes() == b.values.tobytes()

    def test_empirical_covariance_matches_ito(self):
        g = FrequencyGrid.build(4.0, 0.5)
        n = 40_000
        s = simulate_spectral_noise(POW, g, n, 3)
        a = g.anchor_index
        # anchor variance equals the total mass
        var0 = float(np.var(s.values[:, a].real))
        M = total_mass(POW)
        assert abs(var0 - M) <= 5.0 * M * math.sqrt(2.0 / n)
        # real/imag variances at a positive frequency match the Ito blocks
        k = a + 3
        v = g.points[k]
        cov = ito_covariance(POW, v, v)
        for idx, part in enumerate((s.values[:, k].real, s.values[:, k].imag)):
            target = cov[idx, idx]
            assert abs(np.var(part) - target) <= 5.0 * target * math.sqrt(2.0 / n)

    def test_negative_samples_rejected(self):
        with pytest.raises(ValueError):
            simulate_spectral_noise(POW, FrequencyGrid.build(2.0, 0.5), -1, 0)


class TestFourierO:
    def test_closed_form_values(self):
        m = OptionModel()
        assert fourier_O(m, 0.0) == pytest.approx(2.0)
        assert fourier_O(m, 1.0) == pytest.approx(1.0)

    def test_numeric_cross_check(self):
        m = OptionModel()
        for v in (0.0, 0.5, 2.0, 7.0):
            assert fourier_O(m, v) == pytest.approx(fourier_O_numeric(m, v),
                                                    abs=1e-8)

    def test_model_validation(self):
        with pytest.raises(ValueError):
            OptionModel(kind="put")
        with pytest.raises(ValueError):
            OptionModel(T=0.0)


class TestDistinguishedLog:
    def test_constant_path_is_zero(self):
        log, jump = distinguished_log(np.ones(9, dtype=complex), 4)
        assert np.allclose(log, 0.0) and jump == 0.0

    def test_winding_path_oracle(self):
        # A(v) = (1+iv)^2 / (1+v^2) has modulus 1 and log = 2i arctan(v);
        # the principal-branch angle would wrap, the distinguished one does not
        v = np.linspace(-20.0, 20.0, 4001)
        A = (1.0 + 1j * v) ** 2 / (1.0 + v * v)
        log, _ = distinguished_log(A, 2000)
        assert np.max(np.abs(log - 2j * np.arctan(v))) < 1e-10

    def test_exp_inverts_log(self):
        rng = np.random.default_rng(5)
        steps = rng.normal(scale=0.2, size=50) + 1j * rng.normal(scale=0.2, size=50)
        z = np.exp(np.concatenate([[0.0], np.cumsum(steps)]))
        log, _ = distinguished_log(z, 0)
        assert np.max(np.abs(np.exp(log) - z)) < 1e-12

    def test_zero_hit(self):
        z = np.array([1.0, 1e-13, 1.0], dtype=complex)
        with pytest.raises(ZeroHit):
            distinguished_log(z, 0)

    def test_phase_jump(self):
        z = np.array([1.0, -1.0], dtype=complex)
        with pytest.raises(PhaseJumpTooLarge):
            distinguished_log(z, 0)
        # with raise_on_jump=False the jump is reported, not raised
        _, jump = distinguished_log(z, 0, raise_on_jump=False)
        assert jump == pytest.approx(math.pi)

    def test_anchor_must_be_one(self):
        with pytest.raises(ValueError):
            distinguished_log(np.array([2.0, 2.0], dtype=complex), 0)

    @given(st.integers(0, 2 ** 31))
    def test_branch_continuity(self, seed):
        rng = np.random.default_rng(seed)
        steps = (rng.normal(scale=0.3, size=30)
                 + 1j * rng.normal(scale=0.3, size=30))
        z = np.exp(np.concatenate([[0.0], np.cumsum(steps)]))
        log, jump = distinguished_log(z, 0, raise_on_jump=False)
        # adjacent imaginary parts never differ by more than the raw increment
        assert np.max(np.abs(np.diff(log.imag))) <= jump + 1e-12


class TestPsiEstimator:
    def test_noiseless_oracle(self):
        g = FrequencyGrid.build(10.0, 0.01)
        est = psi_estimator(OptionModel(), None, g, 0.0, 0)
        assert est.well_defined and est.failure is None
        v = g.points
        assert np.max(np.abs(est.values - 2j * np.arctan(v))) < 1e-10
        assert np.max(np.abs(np.abs(est.arg_values) - 1.0)) < 1e-10
        assert est.values[g.anchor_index] == 0.0

    def test_maturity_equivariance(self):
        g = FrequencyGrid.build(5.0, 0.05)
        a = psi_estimator(OptionModel(T=1.0), None, g, 0.0, 0)
        b = psi_estimator(OptionModel(T=2.0), None, g, 0.0, 0)
        assert np.allclose(b.values, a.values / 2.0)

    def test_common_randomness_reuse(self):
        g = FrequencyGrid.build(5.0, 0.05)
        spec = simulate_spectral_noise(POW, g, 1, 42).values[0]
        a = psi_estimator(OptionModel(), POW, g, 1e-3, 42, spectral_values=spec)
        b = psi_estimator(OptionModel(), POW, g, 1e-3, 42)
        assert np.array_equal(a.values, b.values)

    def test_small_noise_close_to_oracle(self):
        g = FrequencyGrid.build(5.0, 0.05)
        est = psi_estimator(OptionModel(), POW, g, 1e-4, 9)
        assert est.well_defined
        assert np.max(np.abs(est.values - 2j * np.arctan(g.points))) < 1e-2

    def test_zero_hit_reported_not_raised(self):
        g = FrequencyGrid.build(2.0, 0.5)
        # inject spectral values that drive the argument to zero at one point
        v = g.points
        FO = fourier_O(OptionModel(), v)
        k = g.anchor_index + 1
        spec = np.zeros_like(v, dtype=complex)
        # choose X(v_k) so 1 + iv(1+iv)(FO + X) = 0 exactly
        spec[k] = -1.0 / (1j * v[k] * (1.0 + 1j * v[k])) - FO[k]
        est = psi_estimator(OptionModel(), POW, g, 1.0, 0, spectral_values=spec)
        assert not est.well_defined and est.failure == "zero-hit"
        assert np.all(np.isnan(est.values.real))

    def test_noisy_run_requires_noise_model(self):
        g = FrequencyGrid.build(2.0, 0.5)
        with pytest.raises(ValueError):
            psi_estimator(OptionModel(), None, g, 0.1, 0)
