import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from laguerre_edge.ensemble import (
    TridiagonalSample,
    build_tridiagonal,
    noise_free_sample,
    sample_batch,
    sample_bidiagonal,
)
from laguerre_edge.errors import DegenerateDrawError, NearSingularError
from laguerre_edge.geometry import build_geometry, edge_params
from laguerre_edge.logdet import (
    eigen_oracle,
    eigenvalues_scaled,
    largest_eigenvalue_scaled,
    r2_initial,
    run_recursion,
    run_recursion_batch,
    tridiagonal_logabsdet,
)


@pytest.mark.parametrize("n", [5, 20, 100])
@pytest.mark.parametrize("lam", [0.3, 1.0])
@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_recursion_matches_eigen_oracle(n, lam, alpha):
    p = edge_params(n, lam, alpha)
    g = build_geometry(p)
    for rep in range(10):
        s = sample_bidiagonal(p, 31, rep)
        tr = run_recursion(s, g)
        oracle = eigen_oracle(s, p)
        assert abs(tr.log_abs_D - oracle) / abs(tr.log_abs_D) < 1e-8


def test_noise_free_matches_deterministic_spectrum():
    p = edge_params(200, 0.5, 1.0)
    g = build_geometry(p)
    s = noise_free_sample(p)
    diag, off = build_tridiagonal(s)
    dense = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    mu = np.linalg.eigvalsh(dense)
    ref = float(np.sum(np.log(np.abs(mu - p.shift))))
    tr = run_recursion(s, g)
    assert abs(tr.log_abs_D - ref) / abs(ref) < 1e-8


def test_trace_invariants():
    p = edge_params(500, 0.7, 2.0)
    g = build_geometry(p)
    tr = run_recursion(sample_bidiagonal(p, 4, 0), g)
    n = p.n
    tele = tr.log_abs_E2 + np.sum(np.log(np.abs(1.0 - tr.r[3:n + 1])))
    assert tr.log_abs_E == pytest.approx(tele, rel=1e-12)
    rho_sum = float(np.sum(np.log(g.rho_plus[1:])))
    assert (tr.log_abs_D - tr.log_abs_E) == pytest.approx(rho_sum, rel=1e-9)
    assert tr.log_abs_calD == tr.log_abs_D - n * math.log(p.m)
    assert tr.max_abs_r == np.max(np.abs(tr.r[2:]))
    assert np.isnan(tr.r[0]) and np.isnan(tr.r[1])
    assert tr.guard_events == 0


@pytest.mark.parametrize("n", [5, 6, 51, 52])
def test_sign_is_that_of_the_shifted_determinant(n):
    # every eigenvalue lies below the shift, so det(T - gamma m) has sign (-1)^n
    p = edge_params(n, 0.5, 1.0)
    g = build_geometry(p)
    s = sample_bidiagonal(p, 2, 0)
    diag, off = build_tridiagonal(s)
    mu = np.linalg.eigvalsh(np.diag(diag) + np.diag(off, 1) + np.diag(off, -1))
    assert np.all(mu < p.shift)
    assert run_recursion(s, g).sign_E == (-1) ** n


def test_scaled_determinant_from_scaled_eigenvalues():
    p = edge_params(300, 0.5, 1.0)
    g = build_geometry(p)
    s = sample_bidiagonal(p, 6, 1)
    mu = eigenvalues_scaled(s, p)
    direct = float(np.sum(np.log(np.abs(mu - p.gamma))))
    tr = run_recursion(s, g)
    assert abs(direct - tr.log_abs_calD) < 1e-8 * abs(tr.log_abs_calD)


def test_batch_rows_equal_single_runs():
    p = edge_params(80, 0.4, 1.0)
    g = build_geometry(p)
    a_sq, b_sq = sample_batch(p, 3, range(6))
    res = run_recursion_batch(a_sq, b_sq, g, keep_r=True)
    for k in range(6):
        tr = run_recursion(TridiagonalSample(a_sq[k], b_sq[k], p.m), g)
        assert res.log_abs_calD[k] == tr.log_abs_calD
        assert res.sign_E[k] == tr.sign_E
        np.testing.assert_array_equal(res.r[k], tr.r)
    assert np.all(res.failed_at == 0)


def _raw_r2(sample, params):
    with mpmath.workdps(40):
        gm = mpmath.mpf(params.shift)
        a1, a2 = (mpmath.mpf(float(v)) for v in sample.a_sq[:2])
        b1 = mpmath.mpf(float(sample.b_sq[0]))
        d1 = a1 - gm
        d2 = (a2 + b1 - gm) * d1 - a1 * b1
        n, m = params.n, params.m
        a = gm - (m - n + 3)
        b = mpmath.mpf(m - n + 1)
        rp2 = (a + mpmath.sqrt(a * a - 4 * b)) / 2
        # E_2 / E_1 = D_2 / (D_1 |rho_2^+|)
        return float(1 + d2 / (d1 * rp2))


def test_r2_closed_form_matches_raw_minors():
    p = edge_params(50, 0.5, 1.0)
    g = build_geometry(p)
    for rep in range(5):
        s = sample_bidiagonal(p, 8, rep)
        assert abs(r2_initial(s, g) - _raw_r2(s, p)) < 1e-10
        assert abs(run_recursion(s, g).r[2] - _raw_r2(s, p)) < 1e-10


def test_r2_with_unadjusted_last_term_is_off_by_omega2():
    # writing (alpha_1 + tau_1)/(1 - alpha_1) * delta_2 for the last term shifts R_2 by tau_1 delta_2
    p = edge_params(50, 0.5, 1.0)
    g = build_geometry(p)
    s = sample_bidiagonal(p, 8, 0)
    from laguerre_edge.logdet import noise_variables

    av, bv = noise_variables(s.a_sq, s.b_sq, g)
    a1, a2, b2 = av[1], av[2], bv[2]
    ratio = (a1 + g.tau[1]) / (1 - a1)
    unadjusted = -g.gamma_minus_omega[2] + a2 + (1 + ratio) * b2 + ratio * g.delta[2]
    assert abs(unadjusted - _raw_r2(s, p) - g.omega[2]) < 1e-10


def test_r2_noise_free_is_order_one_over_n():
    p = edge_params(10 ** 4, 0.5, 1.0)
    g = build_geometry(p)
    r2 = r2_initial(noise_free_sample(p), g)
    assert r2 == pytest.approx(-g.gamma_minus_omega[2], rel=1e-12)
    assert abs(r2) * p.n < 1.0


def test_r2_typical_size():
    p = edge_params(10 ** 4, 0.5, 1.0)
    g = build_geometry(p)
    base = noise_free_sample(p)
    rng = np.random.default_rng(3)
    vals = np.empty(10 ** 4)
    # R_2 depends only on a_1, a_2 and b_1, so only those entries are redrawn
    for k in range(vals.size):
        a, b = base.a_sq.copy(), base.b_sq.copy()
        a[:2] = p.alpha * rng.standard_gamma((p.m - p.n + np.arange(1, 3)) / p.alpha)
        b[0] = p.alpha * rng.standard_gamma(1.0 / p.alpha)
        vals[k] = r2_initial(TridiagonalSample(a, b, p.m), g)
    n = p.n
    assert np.median(np.abs(vals)) < 5 * n ** -0.5 * math.sqrt(math.log(n))


def test_degenerate_first_step_raises():
    p = edge_params(20, 0.5, 1.0)
    g = build_geometry(p)
    s = noise_free_sample(p)
    a = s.a_sq.copy()
    a[0] = p.shift
    bad = TridiagonalSample(a, s.b_sq.copy(), p.m)
    with pytest.raises(DegenerateDrawError):
        run_recursion(bad, g)
    with pytest.raises(DegenerateDrawError):
        r2_initial(bad, g)
    assert run_recursion_batch(bad.a_sq, bad.b_sq, g).failed_at[0] == 1


def singular_second_minor(p):
    """Noise-free sample with a_2^2 tuned so that D_2 = 0."""
    s = noise_free_sample(p)
    a, b = s.a_sq.copy(), s.b_sq.copy()
    d1 = a[0] - p.shift
    a[1] = p.shift - b[0] + a[0] * b[0] / d1
    return TridiagonalSample(a, b, p.m)


def test_near_singular_minor_raises_with_index():
    p = edge_params(20, 0.5, 1.0)
    g = build_geometry(p)
    bad = singular_second_minor(p)
    with pytest.raises(NearSingularError) as info:
        run_recursion(bad, g)
    assert info.value.index == 3
    assert info.value.value < 1e-13
    assert run_recursion_batch(bad.a_sq, bad.b_sq, g).failed_at[0] == 3


def test_max_r_shrinks_below_one_third_power():
    p = edge_params(10 ** 5, 0.5, 1.0)
    g = build_geometry(p)
    a_sq, b_sq = sample_batch(p, 9, range(100))
    res = run_recursion_batch(a_sq, b_sq, g)
    frac = np.mean(res.max_abs_r * p.n ** (1 / 3) < 1.0)
    assert frac >= 0.95


def test_oracle_scalar_case():
    s = TridiagonalSample(np.array([3.0]), np.array([]), 1)
    p = edge_params(5, 1.0, 1.0)
    assert tridiagonal_logabsdet(s.a_sq, s.b_sq, 7.5) == pytest.approx(math.log(4.5), rel=1e-15)
    assert tridiagonal_logabsdet([3.0], [], 0.0) == pytest.approx(math.log(3.0), rel=1e-15)
    assert p.n == 5


def test_oracle_hand_matrix():
    diag, off = [2.0, 3.0, 2.0], [1.0, 1.0]
    dense = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    roots = np.roots(np.poly(dense))
    np.testing.assert_allclose(np.sort(roots.real), [1.0, 2.0, 4.0], rtol=1e-12)
    assert tridiagonal_logabsdet(diag, off, 0.0) == pytest.approx(math.log(8.0), rel=1e-12)
    assert tridiagonal_logabsdet(diag, off, 0.0) == pytest.approx(float(np.sum(np.log(np.abs(roots)))), rel=1e-12)


def test_scaled_eigenvalues_sorted_and_nonnegative():
    p = edge_params(400, 0.5, 1.0)
    mu = eigenvalues_scaled(sample_bidiagonal(p, 1, 0), p)
    assert np.all(np.diff(mu) >= 0)
    assert mu[0] >= 0
    assert largest_eigenvalue_scaled(sample_bidiagonal(p, 1, 0), p) == pytest.approx(mu[-1], rel=1e-13)


def test_largest_eigenvalue_fluctuates_on_two_thirds_scale():
    # the rescaled top eigenvalue has a Tracy-Widom type law, mostly below d_plus
    p = edge_params(1000, 0.5, 1.0)
    mu = np.array([largest_eigenvalue_scaled(sample_bidiagonal(p, 8, r), p) for r in range(500)])
    scaled = (mu - p.d_plus) * p.n ** (2 / 3)
    q90 = np.quantile(scaled, 0.9)
    assert -20.0 < q90 < 20.0
    assert np.median(scaled) < 0


@given(
    n=st.integers(min_value=5, max_value=60),
    lam=st.floats(min_value=0.1, max_value=1.0),
    alpha=st.floats(min_value=0.3, max_value=3.0),
    seed=st.integers(min_value=0, max_value=2 ** 31),
)
def test_recursion_finite_and_matches_oracle(n, lam, alpha, seed):
    p = edge_params(n, lam, alpha)
    g = build_geometry(p)
    s = sample_bidiagonal(p, seed, 0)
    tr = run_recursion(s, g)
    assert np.isfinite(tr.log_abs_calD) and np.all(np.isfinite(tr.r[2:]))
    assert abs(tr.log_abs_D - eigen_oracle(s, p)) < 1e-8 * abs(tr.log_abs_D)
