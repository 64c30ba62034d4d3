"""Independent reference computations used by the tests.

Everything here is written against cvxpy or closed-form criteria and
shares no code with the package's own SDP layer.
"""
from __future__ import annotations

import itertools

import cvxpy as cp
import numpy as np


def strategies(m: int, o: int) -> np.ndarray:
    """``D[x, a, lam]`` with ``lam = sum_x a_x o^x``."""
    lams = list(itertools.product(range(o), repeat=m))
    D = np.zeros((m, o, len(lams)))
    for l, outs in enumerate(lams):
        # itertools varies the last slot fastest; reverse so input 0 is least significant
        outs = outs[::-1]
        for x in range(m):
            D[x, outs[x], l] = 1
    return D


def _solve(prob):
    prob.solve(solver=cp.CLARABEL)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200000)
    return prob.value


def lhs_mu(members: np.ndarray) -> float:
    m, o, d = members.shape[:3]
    D = strategies(m, o)
    sig = [cp.Variable((d, d), hermitian=True) for _ in range(D.shape[2])]
    mu = cp.Variable()
    cons = [s - mu * np.eye(d) >> 0 for s in sig]
    for x in range(m):
        for a in range(o):
            cons.append(sum(sig[l] for l in np.nonzero(D[x, a])[0]) == members[x, a])
    return _solve(cp.Problem(cp.Maximize(mu), cons))


def steering_weight(members: np.ndarray) -> float:
    m, o, d = members.shape[:3]
    D = strategies(m, o)
    s = [cp.Variable((d, d), hermitian=True) for _ in range(D.shape[2])]
    cons = [si >> 0 for si in s]
    for x in range(m):
        for a in range(o):
            cons.append(members[x, a] - sum(s[l] for l in np.nonzero(D[x, a])[0]) >> 0)
    return 1 - _solve(cp.Problem(cp.Maximize(cp.real(sum(cp.trace(si) for si in s))), cons))


def steering_robustness(members: np.ndarray) -> float:
    m, o, d = members.shape[:3]
    D = strategies(m, o)
    s = [cp.Variable((d, d), hermitian=True) for _ in range(D.shape[2])]
    cons = [si >> 0 for si in s]
    for x in range(m):
        for a in range(o):
            cons.append(sum(s[l] for l in np.nonzero(D[x, a])[0]) - members[x, a] >> 0)
    return _solve(cp.Problem(cp.Minimize(cp.real(sum(cp.trace(si) for si in s))), cons)) - 1


def local_guessing_branches(members: np.ndarray, x_star: int = 0):
    """Optimal Eve branches ``sigma^e_{a|x}`` (shape ``(o, m, o, d, d)``) and p_guess."""
    m, o, d = members.shape[:3]
    s = [[[cp.Variable((d, d), hermitian=True) for _ in range(o)] for _ in range(m)] for _ in range(o)]
    cons = []
    for e in range(o):
        for x in range(m):
            cons += [s[e][x][a] >> 0 for a in range(o)]
            if x:
                cons.append(sum(s[e][x]) == sum(s[e][0]))
    for x in range(m):
        for a in range(o):
            cons.append(sum(s[e][x][a] for e in range(o)) == members[x, a])
    p = _solve(cp.Problem(cp.Maximize(cp.real(sum(cp.trace(s[e][x_star][e]) for e in range(o)))), cons))
    branches = np.array([[[s[e][x][a].value for a in range(o)] for x in range(m)] for e in range(o)])
    return branches, p


def ghjw(members: np.ndarray, tol: float = 1e-9):
    """Purification ``|psi>`` on ``A (x) B`` and Alice POVMs realising a normalized assemblage."""
    rho = members[0].sum(axis=0)
    w, V = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    keep = w > tol
    w, V = w[keep], V[:, keep]
    r, d = len(w), rho.shape[0]
    psi = np.zeros((r, d), complex)
    for i in range(r):
        psi[i] = np.sqrt(w[i]) * V[:, i].conj()
    psi = psi.reshape(-1)
    # rho^{-1/2} sigma rho^{-1/2} in the eigenbasis, transposed to Alice's side
    iw = 1 / np.sqrt(w)
    M = np.einsum("i,xaij,j->xaij", iw, np.einsum("ki,xakl,lj->xaij", V.conj(), members, V), iw)
    return psi, np.swapaxes(M, -1, -2)


def explicit_attack(members: np.ndarray, branches: np.ndarray, x_star: int = 0, bob: np.ndarray | None = None):
    """Tripartite state and measurements realising Eve's branch decomposition.

    Eve holds a classical register ``|E><E|``; branch ``E`` is realised by its
    own Schmidt state and GHJW measurements. Returns the reproduced
    assemblage and the probability that Eve's label matches Alice's outcome
    of ``x_star`` (and Bob's outcome of ``bob`` when given, with labels
    ``E = e * o_B + e'``).
    """
    m, o, d = members.shape[:3]
    E = len(branches)
    blocks = []
    for e in range(E):
        p = float(np.trace(branches[e, 0].sum(axis=0)).real)
        if p < 1e-10:
            continue
        psi, M = ghjw(branches[e] / p)
        blocks.append((e, p, psi, M))
    dA = sum(M.shape[-1] for _, _, _, M in blocks)
    Malice = np.zeros((m, o, dA, dA), complex)
    rho = np.zeros((dA * d * E, dA * d * E), complex)
    off = 0
    for e, p, psi, M in blocks:
        r = M.shape[-1]
        Malice[:, :, off:off + r, off:off + r] = M
        vec = np.zeros((dA, d), complex)
        vec[off:off + r] = psi.reshape(r, d)
        ket_e = np.zeros(E)
        ket_e[e] = 1
        v = np.kron(vec.reshape(-1), ket_e)
        rho += p * np.outer(v, v.conj())
        off += r
    r6 = rho.reshape(dA, d, E, dA, d, E)
    sigma = np.einsum("xaji,ibejce->xabc", Malice, r6)
    guess = 0.0
    for lab in range(E):
        e, eb = divmod(lab, bob.shape[0]) if bob is not None else (lab, None)
        B = np.eye(d) if bob is None else bob[eb]
        guess += np.einsum("ji,cb,ibjc->", Malice[x_star, e], B, r6[:, :, lab, :, :, lab]).real
    return sigma, float(guess)


def busch_random_robustness(a: np.ndarray, b: np.ndarray) -> float:
    """Random robustness of two unbiased qubit observables with Bloch vectors ``a, b``.

    The pair is jointly measurable iff ``|a + b| + |a - b| <= 2``; mixing in
    ``t 1/2`` scales both vectors by ``1/(1 + t)``.
    """
    s = np.linalg.norm(a + b) + np.linalg.norm(a - b)
    return max(0.0, s / 2 - 1)


def wiseman_boundary_noise(r: float, eta_A: float) -> float:
    """Added noise on Bob at which ``det(V_B - C^T V_A^{-1} C) = 1/4`` for the lossy TMSV family."""
    c2, s2 = np.cosh(2 * r) / 2, np.sinh(2 * r) / 2
    a = eta_A * c2 + (1 - eta_A) / 2
    c = np.sqrt(eta_A) * s2
    return 0.5 - c2 + c * c / a


def bloch_grid_chsh(members: np.ndarray, n: int = 181) -> float:
    """Best CHSH value with Bob's dichotomic projective measurements in the X-Z plane."""
    X = np.array([[0, 1], [1, 0]])
    Z = np.diag([1.0, -1.0])
    A = members[:, 0] - members[:, 1]
    best = -np.inf
    th = np.linspace(0, np.pi, n)
    obs = [np.cos(t) * Z + np.sin(t) * X for t in th]
    vals = np.array([[np.trace(A[x] @ B).real for B in obs] for x in range(2)])
    for i in range(n):
        for j in range(n):
            v = vals[0, i] + vals[0, j] + vals[1, i] - vals[1, j]
            best = max(best, v)
    return best
