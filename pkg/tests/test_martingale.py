import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rerw.analytic import a_sequence, gamma_n, limit_matrices
from rerw.martingale import (
    ConsistencyError,
    conditional_moment_diagnostics,
    decompose,
    decompose_path,
    eps_bound,
    increments,
    normalized_qv,
    qv_matrix,
    qv_N,
    quadratic_variations,
)
from rerw.model import Trajectory, WalkParams, make_rng, run
from rerw.moments import moment_path

RECON_RTOL = 1e-9
QV_RATIO_REL = 0.05
QV_MATRIX_REL = 0.10
SE_Z = 4.0


def _manual_path(params, X, beta):
    """Trajectory from an explicit step stream (index 0 unused, beta[1] unused)."""
    X = np.asarray([0] + list(X), dtype=np.int8)
    beta = np.asarray([0, 0] + list(beta), dtype=np.int32)
    n = X.size - 1
    S = np.cumsum(X[1:]).astype(np.int64)
    xb = np.r_[0, X[beta[2:]]].astype(float)
    Y = np.cumsum(X[1:].astype(float)) + params.c * np.cumsum(xb)
    ck = np.arange(1, n + 1)
    return Trajectory(params, ck, S, Y, seed=None, X=X, beta=beta)


def test_first_step_decomposition():
    P = WalkParams(0.7, 1.5, 1.0)
    traj = run(P, 1, seed=0, checkpoints=[1])
    ser = decompose(traj)
    assert ser.M[0] == 1.0
    assert ser.N[0] == pytest.approx(P.c / (P.a + P.c))


def test_c0_second_martingale_vanishes():
    P = WalkParams(0.8, 0.0)
    ser = decompose(run(P, 5000, seed=3))
    assert np.all(ser.N == 0)


@pytest.mark.parametrize("p, c", [(0.35, 1), (0.9, 1), (0.25, 2), (0.6, 0), (0.1, 2.5)])
def test_reconstruction_on_sample_path(p, c):
    P = WalkParams(p, c)
    traj = run(P, 10**4, seed=17, keep_path=True)
    ser = decompose_path(traj)
    S = np.cumsum(traj.X[1:].astype(float))
    assert np.allclose(ser.reconstruct_S(P), S, rtol=RECON_RTOL, atol=RECON_RTOL)
    ck = decompose(traj)
    assert np.allclose(ck.reconstruct_S(P), traj.S, rtol=RECON_RTOL, atol=RECON_RTOL)


def test_p1_has_no_xi_noise():
    P = WalkParams(1.0, 0.7)
    inc = increments(run(P, 5000, seed=1, keep_path=True))
    assert np.all(inc.xi == 0)


def test_eps_bound_on_long_path():
    P = WalkParams(0.35, 1)
    inc = increments(run(P, 10**6, seed=2, keep_path=True))
    assert inc.max_abs_eps <= eps_bound(P) <= 3.0
    assert np.abs(inc.xi).max() <= 1 + abs(P.a)


def test_eps_can_exceed_c_plus_two():
    # c = 2, p = 0.75: X_1 = +1, X_2 = -1, then beta = 1 with alpha = +1 up to n = 10
    # (Y_10 = 26, D_10 = 28); recalling beta = 2 with alpha = +1 gives |eps| = 5.32 > c + 2
    P = WalkParams(0.75, 2)
    X = [1, -1] + [1] * 8 + [-1]
    beta = [1] + [1] * 8 + [2]
    traj = _manual_path(P, X, beta)
    assert traj.Y[9] == 26
    inc = increments(traj)
    assert inc.eps[-1] == pytest.approx(-(2.5 / 28) * 26 - 3, rel=1e-12)
    assert inc.max_abs_eps > P.c + 2
    assert inc.max_abs_eps <= eps_bound(P)


def test_eps_identity_and_violation_detection():
    P = WalkParams(0.6, 1.0)
    traj = run(P, 2000, seed=4, keep_path=True)
    inc = increments(traj)
    Y = np.cumsum(traj.X[1:].astype(float)) + np.cumsum(np.r_[0, traj.X[traj.beta[2:]]].astype(float))
    g = gamma_n(P, np.arange(1, 2000, dtype=float))
    assert np.allclose(inc.eps, Y[1:] - g * Y[:-1])
    # an impossible stream: X_3 does not equal +-X_{beta_3}
    bad = _manual_path(P, [1, 1, 1], [1, 1])
    bad.X[3] = 3
    with pytest.raises(ConsistencyError):
        increments(bad)


def test_qv_N_closed_form():
    P = WalkParams(0.75, 1)
    assert qv_N(P, 3) == pytest.approx(1.0)
    assert qv_N(WalkParams(0.75, 0), 100) == 0
    traj = run(P, 1000, seed=0, keep_path=True)
    _, qvN = quadratic_variations(traj)
    assert np.allclose(qvN, np.arange(1, 1001) / 3)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), p=st.floats(0.0, 1.0), c=st.sampled_from([0.0, 0.5, 1.0, 2.0, 4.0]))
def test_qv_M_below_K_vn(seed, p, c):
    try:
        P = WalkParams(p, c)
    except ValueError:
        return
    if 1 + P.a * P.lam <= 0:
        return
    traj = run(P, 3000, seed=seed, keep_path=True)
    qvM, _ = quadratic_variations(traj)
    K = 1 + 2 * P.a * P.c + P.c**2
    v = np.cumsum(a_sequence(P, 3000) ** 2)
    assert np.all(qvM <= K * v * (1 + 1e-12))


@pytest.mark.parametrize("p, c, q", [(0.35, 1, 0.5), (0.8, 0.4, 0.5), (0.25, 2, 0.5)])
def test_first_step_convention_offsets(p, c, q):
    # E[M_n^2] - E<M>_n = 1 - K and E[N_n^2] - <N>_n = a^2 (c / (a + c))^2 at every n
    P = WalkParams(p, c, q)
    n = 400
    m = moment_path(P, n)
    ak = a_sequence(P, n)
    K = 1 + 2 * P.a * P.c + P.c**2
    g1 = gamma_n(P, np.arange(1, n, dtype=float)) - 1
    eR = np.r_[0, np.cumsum(ak[1:] ** 2 * g1**2 * m["eY2"][:-1])]
    eqvM = K * np.cumsum(ak**2) - eR
    assert np.allclose(ak**2 * m["eY2"] - eqvM, 1 - K, atol=1e-9)
    r = P.a / (P.a + P.c)
    eN2 = m["eS2"] - 2 * r * m["eSY"] + r * r * m["eY2"]
    assert np.allclose(eN2 - qv_N(P, np.arange(1, n + 1)), (P.a * P.c / (P.a + P.c)) ** 2, atol=1e-9)


@pytest.mark.parametrize("p, c", [(0.35, 1), (0.6, 0.5), (0.75, 0)])
def test_qv_M_over_vn_near_K(p, c):
    P = WalkParams(p, c)
    n = 10**5
    traj = run(P, n, seed=9, keep_path=True)
    qvM, _ = quadratic_variations(traj)
    K = 1 + 2 * P.a * P.c + P.c**2
    v = np.cumsum(a_sequence(P, n) ** 2)
    assert qvM[-1] / v[-1] == pytest.approx(K, rel=QV_RATIO_REL)


def test_qv_M_ratio_gap_at_critical_c2_is_in_expectation():
    # R_n converges while v_n grows like log n, so E<M>_n / (K v_n) = 0.934 at n = 1e5
    P = WalkParams(0.25, 2)
    n = 10**5
    eY2 = moment_path(P, n)["eY2"]
    ak = a_sequence(P, n)
    v = np.cumsum(ak**2)
    g1 = gamma_n(P, np.arange(1, n, dtype=float)) - 1
    K = 3.0
    ratio = (K * v[-1] - np.sum(ak[1:] ** 2 * g1**2 * eY2[:-1])) / (K * v[-1])
    assert ratio == pytest.approx(0.934, abs=2e-3)


def test_normalized_qv_matrix_diffusive():
    P = WalkParams(0.35, 1)
    n = 10**5
    traj = run(P, n, seed=5, keep_path=True)
    got = normalized_qv(traj, P, n)
    V, _ = limit_matrices(P)
    assert np.allclose(got, V, rtol=QV_MATRIX_REL, atol=0)
    M = qv_matrix(traj, P, n)
    assert M[0, 1] == M[1, 0] and M[0, 0] == pytest.approx(qv_N(P, n))


def test_conditional_targets_examples():
    P = WalkParams(0.75, 1)
    traj = run(P, 50, seed=3, keep_path=True)
    hist, X = traj.beta[2:], traj.X[1:]
    rep = conditional_moment_diagnostics(hist, X, P, 10**6, make_rng(5))
    targets = [c["target"] for c in rep["checks"]]
    assert targets == pytest.approx([0.75, 0.75, 3.0])
    assert all(c["pass"] for c in rep["checks"])
    Q = WalkParams(0.5, 1.5)
    rep = conditional_moment_diagnostics(hist, X, Q, 1000, make_rng(5))
    assert [c["target"] for c in rep["checks"]] == pytest.approx([1.0, 1.0, 1 + 1.5**2])


def test_conditional_eps_square_at_zero_Y():
    # c = 2, history (1, 2, 2) gives weights (3, 5, 1, 1); X = (1, -1, 1, 1) has Y_4 = 0
    P = WalkParams(0.7, 2)
    rep = conditional_moment_diagnostics([1, 2, 2], [1, -1, 1, 1], P, 10**6, make_rng(8))
    assert rep["Y_n"] == 0
    eps2 = rep["checks"][2]
    assert eps2["target"] == pytest.approx(1 + 2 * P.a * P.c + P.c**2)
    assert abs(eps2["estimate"] - eps2["target"]) <= SE_Z * eps2["stderr"]


def test_conditional_history_length_checked():
    with pytest.raises(ValueError):
        conditional_moment_diagnostics([1], [1, 1, 1], WalkParams(0.7, 1), 10, make_rng(0))


def test_diagnostics_need_path():
    traj = run(WalkParams(0.7, 1), 100, seed=0)
    with pytest.raises(ValueError, match="keep_path"):
        increments(traj)
