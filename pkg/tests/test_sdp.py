from __future__ import annotations

import warnings

import cvxpy as cp
import numpy as np
import pytest

from qsteer.assemblage import generate, pauli_measurements
from qsteer.detect import check_lhs
from qsteer.hermat import Y, Z, werner
from qsteer.sdp import kernels
from qsteer.sdp.embed import embed_hermitian, extract_hermitian, hvec, unhvec
from qsteer.sdp.ipm import IpmOptions
from qsteer.sdp.model import MalformedProblem, Problem, RedundantRowsWarning, esum


def _rand_herm(n, rng):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (A + A.conj().T) / 2


def test_max_trace_below_identity():
    p = Problem("max")
    X = p.herm(2, name="X")
    p.add_psd(np.eye(2) - X, name="cap")
    p.maximize(X.tr())
    sol = p.solve()
    assert sol.status == "optimal"
    assert np.isclose(sol.primal_value, 2, atol=1e-7)
    assert np.allclose(sol.value(X), np.eye(2), atol=1e-6)


def test_infeasible_raw_gives_farkas_ray():
    p = Problem("max")
    X = p.herm(2, name="X")
    p.add_eq(X.tr(), 1.0)
    p.add_eq(X.inner(Z), 2.0)
    p.maximize(0.0 * X.tr())
    sol = p.solve()
    assert sol.status == "infeasible"
    y = sol.farkas_ray
    # y1 tr X + y2 tr ZX = b.y > 0 is impossible when y1 1 + y2 Z <= 0 and X >= 0
    assert sol.conic.b @ y > 0
    assert np.linalg.eigvalsh(y[0] * np.eye(2) + y[1] * Z.real).max() <= 1e-8


def test_infeasible_strict_slack_negative():
    p = Problem(strict=True)
    X = p.herm(2, name="X")
    p.add_eq(X.tr(), 1.0)
    p.add_eq(X.inner(Z), 2.0)
    sol = p.solve()
    assert sol.status == "optimal" and sol.primal_value < -0.1


def test_strict_lhs_werner_steering():
    a = generate(werner(0.8), (2, 2), pauli_measurements("XZ"))
    assert check_lhs(a).mu_star < 0


def test_embed_identity_and_y():
    assert np.allclose(embed_hermitian(np.eye(2)), np.eye(4))
    ev = np.linalg.eigvalsh(embed_hermitian(Y))
    assert np.allclose(ev, [-1, -1, 1, 1])


def test_embed_roundtrip(rng):
    H = _rand_herm(4, rng)
    assert np.allclose(extract_hermitian(embed_hermitian(H)), H)
    assert np.allclose(unhvec(hvec(H), 4), H)


def test_embed_psd_equivalence(rng):
    for _ in range(20):
        H = _rand_herm(3, rng)
        assert (np.linalg.eigvalsh(H).min() >= 0) == (np.linalg.eigvalsh(embed_hermitian(H)).min() >= -1e-12)


def _random_problem(rng, n=3, k=3):
    X0 = _rand_herm(n, rng)
    X0 = X0 @ X0 + np.eye(n)
    C = _rand_herm(n, rng)
    C = C @ C + 0.1 * np.eye(n)
    As = [_rand_herm(n, rng) for _ in range(k)]
    bs = [float(np.trace(A @ X0).real) for A in As]
    return C, As, bs


def _build(C, As, bs):
    p = Problem("min")
    X = p.herm(C.shape[0], name="X")
    for i, (A, b) in enumerate(zip(As, bs)):
        p.add_eq(X.inner(A), b, name=f"eq{i}")
    p.minimize(X.inner(C))
    return p, X


def test_random_problems_gap_and_dual_recomputation():
    rng = np.random.default_rng(7)
    for _ in range(100):
        C, As, bs = _random_problem(rng)
        p, X = _build(C, As, bs)
        sol = p.solve()
        assert sol.status == "optimal"
        pv, dv = sol.primal_value, sol.dual_value
        assert abs(pv - dv) <= 1e-7 * (1 + abs(pv))
        assert abs(sol.recompute_dual_value() - dv) <= 1e-8 * (1 + abs(dv))
        Xv = sol.value(X)
        assert np.linalg.eigvalsh(Xv).min() >= -1e-8
        for A, b in zip(As, bs):
            assert abs(np.trace(A @ Xv).real - b) <= 1e-8 * (1 + abs(b))


def test_random_problems_match_cvxpy():
    rng = np.random.default_rng(11)
    for _ in range(10):
        C, As, bs = _random_problem(rng, n=4, k=5)
        p, _ = _build(C, As, bs)
        ours = p.solve().primal_value
        Xc = cp.Variable((4, 4), hermitian=True)
        ref = cp.Problem(cp.Minimize(cp.real(cp.trace(C @ Xc))),
                         [Xc >> 0] + [cp.real(cp.trace(A @ Xc)) == b for A, b in zip(As, bs)])
        ref.solve(solver=cp.CLARABEL)
        assert abs(ours - ref.value) <= 1e-6 * (1 + abs(ref.value))


def test_lmi_multiplier_is_psd():
    p = Problem("max")
    X = p.herm(2, name="X")
    p.add_psd(np.diag([1.0, 2.0]) - X, name="cap")
    p.maximize(X.tr())
    sol = p.solve()
    Yd = sol.dual("cap")
    assert np.linalg.eigvalsh(Yd).min() >= -1e-8
    assert np.isclose(sol.recompute_dual_value(), 3.0, atol=1e-7)


def test_redundant_rows_warn():
    p = Problem("max")
    X = p.herm(2, name="X")
    p.add_eq(X.tr(), 1.0)
    p.add_eq(2.0 * X.tr(), 2.0)
    p.maximize(X.inner(Z))
    with pytest.warns(RedundantRowsWarning):
        sol = p.solve()
    assert np.isclose(sol.primal_value, 1.0, atol=1e-7)


def test_foreign_variable_rejected():
    p, q = Problem("max"), Problem("max")
    X = q.herm(2)
    with pytest.raises(MalformedProblem):
        p.add_eq(X.tr(), 1.0)


def test_iteration_cap_reports_failure(monkeypatch):
    monkeypatch.setenv("QSTEER_MAX_ITER", "2")
    p = Problem("max")
    X = p.herm(3, name="X")
    p.add_psd(np.eye(3) - X)
    p.maximize(X.tr())
    sol = p.solve(IpmOptions())
    assert sol.status == "numerical-failure"


def test_dump_triplets(tmp_path):
    p = Problem("max")
    X = p.herm(2, name="X")
    s = p.scalar(name="s")
    p.add_eq(X.tr() + s, 1.0)
    p.maximize(X.inner(Z))
    path = tmp_path / "prob.txt"
    p.dump(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# nfree")
    body = [l for l in lines if not l.startswith("#")]
    assert body and all(len(l.split()) == 5 for l in body)


@pytest.mark.skipif(not kernels.HAVE_KERNEL, reason="compiled kernel not built")
def test_kernel_matches_fallback():
    rng = np.random.default_rng(3)
    a = generate(werner(0.9), (2, 2), pauli_measurements("XYZ"))
    from qsteer.detect import _lhs_problem
    prob, _, _ = _lhs_problem(a)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RedundantRowsWarning)
        s1 = prob.solve(IpmOptions(use_kernel=True))
        s2 = prob.solve(IpmOptions(use_kernel=False))
    assert s1.info["kernel"] and not s2.info["kernel"]
    assert abs(s1.primal_value - s2.primal_value) <= 1e-9
    # direct comparison of the Schur assembly on one block group
    from qsteer.sdp.ipm import ConicSolver
    conic, _ = prob.compile()
    solver = ConicSolver(conic.A, conic.b, conic.c, conic.nfree, conic.block_dims)
    for g in solver.groups:
        W = rng.normal(size=(len(g.blocks), g.n, g.n))
        W = W @ np.swapaxes(W, 1, 2)
        M1 = np.zeros((conic.A.shape[0],) * 2)
        M2 = np.zeros_like(M1)
        g.schur(W, M1, True)
        g.schur(W, M2, False)
        assert np.allclose(M1, M2, atol=1e-10)
