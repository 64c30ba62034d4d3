"""One-sided device-independent applications of assemblage data.

* guessing probabilities of an eavesdropper for Alice's outcome (local)
  or for the pair of Alice's and Bob's outcomes (global);
* the maximal Bell value reachable by Bob's measurements on a fixed
  assemblage, and the see-saw alternating Bob's measurements with the
  assemblage;
* a moment-matrix lower bound on the negativity of any state compatible
  with the assemblage.

The guessing SDPs model individual (i.i.d.) attacks only: Eve measures
her share round by round and no memory effects are considered.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .assemblage import Assemblage, MeasurementSet
from .detect import SolverFailure, SteeringFunctional
from .sdp import Expr, Problem, RedundantRowsWarning, esum

PROB_TOL = 1e-6


def _solve(prob, what):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RedundantRowsWarning)
        sol = prob.solve()
    if sol.status != "optimal":
        raise SolverFailure(f"{what}: solver status {sol.status}")
    return sol


@dataclass(eq=False)
class GuessingResult:
    """Guessing probability with Eve's decomposition and the dual functional.

    ``eve_strategy`` has shape ``(E, m, o, d, d)`` where ``E`` enumerates
    Eve's guesses (``o`` for local, ``o * o_B`` pairs ``(e, e')`` flattened
    row-major for global). ``aux`` holds the zero-sum no-signalling
    multipliers ``N^e_x`` of the dual constraint
    ``F_{a|x} - delta_{x,x*} P_{a,e} + N^e_x >= 0``.
    """

    x_star: int
    p_guess: float
    dual_value: float
    eve_strategy: np.ndarray
    dual_witness: SteeringFunctional
    aux: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def min_entropy(self) -> float:
        return float(-np.log2(min(max(self.p_guess, 1e-300), 1.0)))

    def to_json(self) -> dict:
        return {"schema": "randomness.v1", "x_star": self.x_star, "p_guess": self.p_guess,
                "min_entropy": self.min_entropy, "dual_witness": self.dual_witness.to_json()}


def _guessing(a: Assemblage, x_star: int, targets: list[tuple[int, np.ndarray]], what: str) -> GuessingResult:
    """Shared SDP: ``targets[g] = (a_g, P_g)`` scores branch ``g`` by ``tr P_g sigma^g_{a_g|x*}``."""
    a.validate()
    if not 0 <= x_star < a.m:
        raise ValueError(f"x_star={x_star} out of range for m={a.m}")
    m, o, d = a.m, a.o, a.d_B
    prob = Problem("max")
    # facial reduction: every branch lives on the support of the observed member
    supp = [[_support(a.members[x, k]) for k in range(o)] for x in range(m)]
    s = [[[_supported_var(prob, supp[x][k], d, f"s_{g}_{x}_{k}") for k in range(o)] for x in range(m)]
         for g in range(len(targets))]
    for x in range(m):
        for k in range(o):
            prob.add_eq(esum([s[g][x][k] for g in range(len(targets))]), a.members[x, k], name=f"F_{x}_{k}")
    for g in range(len(targets)):
        base = esum(s[g][0])
        for x in range(1, m):
            prob.add_eq(esum(s[g][x]) - base, 0.0, name=f"N_{g}_{x}")
    prob.maximize(esum([s[g][x_star][ag].inner(P) for g, (ag, P) in enumerate(targets)]))
    sol = _solve(prob, what)
    eve = np.array([[[sol.value(s[g][x][k]) for k in range(o)] for x in range(m)] for g in range(len(targets))])
    F = np.array([[sol.dual(f"F_{x}_{k}") for k in range(o)] for x in range(m)])
    K = np.array([[sol.dual(f"N_{g}_{x}") for x in range(1, m)] for g in range(len(targets))]).reshape(
        len(targets), m - 1, d, d)
    N = np.concatenate([-K.sum(axis=1, keepdims=True), K], axis=1)
    F = _lift_dual(F, N, supp, targets, x_star)
    p = float(sum(np.trace(P @ eve[g, x_star, ag]).real for g, (ag, P) in enumerate(targets)))
    dual = float(np.real(np.einsum("xaij,xaji->", F, a.members)))
    res = GuessingResult(x_star, p, dual, eve, SteeringFunctional(F, 0.0, "guessing-dual"), N,
                         {"iterations": sol.iterations, "targets": [t[0] for t in targets]})
    _verify_guessing(a, res, targets)
    return res


def _support(S, rtol=1e-9):
    w, V = np.linalg.eigh(S)
    keep = w > rtol * max(w.max(), 1e-300)
    return V[:, keep]


def _supported_var(prob, V, d, name):
    r = V.shape[1]
    if r == 0:
        return Expr.constant(np.zeros((d, d)), d)
    if r == d:
        return prob.herm(d, name=name)
    X = prob.herm(r, name=name)
    return X.map(lambda H: V @ H @ V.conj().T, d)


def _dual_constraints(F, N, targets, x_star):
    m, o = F.shape[:2]
    for g, (ag, P) in enumerate(targets):
        for x in range(m):
            for k in range(o):
                C = F[x, k] + N[g, x]
                yield x, k, (C - P if (x == x_star and k == ag) else C)


def _lift_dual(F, N, supp, targets, x_star):
    """Add multiples of the kernel projectors so the dual holds on the full space.

    The added terms are orthogonal to the observed members and leave the
    dual value unchanged.
    """
    d = F.shape[-1]
    ker = np.array([[np.eye(d) - V @ V.conj().T for V in row] for row in supp])
    if np.allclose(ker, 0):
        return F
    c = 1.0
    for _ in range(60):
        G = F + c * ker
        if min(np.linalg.eigvalsh(C).min() for _, _, C in _dual_constraints(G, N, targets, x_star)) >= -1e-9:
            return G
        c *= 2.0
    return F + c * ker


def _verify_guessing(a, res, targets, tol=1e-7):
    eve = res.eve_strategy
    if np.max(np.abs(eve.sum(axis=0) - a.members)) > 1e-7:
        raise SolverFailure("Eve's branches do not reproduce the assemblage")
    marg = eve.sum(axis=2)
    if np.max(np.abs(marg - marg[:, :1])) > 1e-7 or np.linalg.eigvalsh(eve).min() < -tol:
        raise SolverFailure("Eve's branches are not valid assemblages")
    if abs(res.p_guess - res.dual_value) > PROB_TOL:
        raise SolverFailure("primal and dual guessing probability disagree")
    for _, _, C in _dual_constraints(res.dual_witness.operators, res.aux, targets, res.x_star):
        if np.linalg.eigvalsh(C).min() < -1e-6:
            raise SolverFailure("guessing dual failed re-verification")


def local_guessing(a: Assemblage, x_star: int = 0) -> GuessingResult:
    """Eve's optimal probability of guessing Alice's outcome of input ``x_star``."""
    I = np.eye(a.d_B)
    return _guessing(a, x_star, [(e, I) for e in range(a.o)], "local guessing")


def global_guessing(a: Assemblage, x_star: int, bob_meas) -> GuessingResult:
    """Eve's probability of guessing Alice's ``x_star`` outcome and Bob's POVM outcome."""
    Mb = np.asarray(bob_meas, dtype=complex)
    if Mb.ndim != 3 or Mb.shape[1:] != (a.d_B, a.d_B):
        raise ValueError("Bob's POVM must have shape (o_B, d_B, d_B)")
    MeasurementSet(Mb[None]).validate()
    return _guessing(a, x_star, [(e, Mb[b]) for e in range(a.o) for b in range(Mb.shape[0])], "global guessing")


# Bell functionals ---------------------------------------------------------

@dataclass(eq=False)
class BellFunctional:
    """Coefficients ``c[a, b, x, y]`` of ``sum c P(ab|xy)`` with local bound ``beta``."""

    coefficients: np.ndarray
    local_bound: float

    @property
    def shape(self):
        return self.coefficients.shape

    def algebraic_bound(self) -> float:
        c = self.coefficients
        return float(np.abs(c).max(axis=(0, 1)).sum())


def chsh() -> BellFunctional:
    """CHSH as ``sum (-1)^{a+b+xy} P(ab|xy) <= 2`` (correlator form ``<A0B0>+<A0B1>+<A1B0>-<A1B1>``)."""
    c = np.zeros((2, 2, 2, 2))
    for a_, b, x, y in itertools.product(range(2), repeat=4):
        c[a_, b, x, y] = (-1) ** (a_ + b + x * y)
    return BellFunctional(c, 2.0)


def bell_value(a: Assemblage, f: BellFunctional, bob: np.ndarray) -> float:
    """``sum c tr(M_{b|y} sigma_{a|x})`` for Bob's POVMs ``bob[y, b]``."""
    return float(np.real(np.einsum("abxy,ybij,xaji->", f.coefficients, bob, a.members)))


def _check_shapes(a, f):
    oA, oB, mA, mB = f.shape
    if (mA, oA) != (a.m, a.o):
        raise ValueError(f"functional expects m={mA}, o={oA}; assemblage has m={a.m}, o={a.o}")
    return oB, mB


def max_bell_violation(a: Assemblage, f: BellFunctional) -> tuple[float, np.ndarray]:
    """Best Bell value over Bob's POVMs; returns ``(value, M[y, b])``."""
    a.validate()
    oB, mB = _check_shapes(a, f)
    d = a.d_B
    prob = Problem("max")
    M = [[prob.herm(d) for _ in range(oB)] for _ in range(mB)]
    for y in range(mB):
        prob.add_eq(esum(M[y]), np.eye(d))
    # K[y, b] = sum_{a,x} c[a,b,x,y] sigma_{a|x}
    K = np.einsum("abxy,xaij->ybij", f.coefficients, a.members)
    prob.maximize(esum([M[y][b].inner(K[y, b]) for y in range(mB) for b in range(oB)]))
    sol = _solve(prob, "Bell maximization")
    bob = np.array([[sol.value(M[y][b]) for b in range(oB)] for y in range(mB)])
    return bell_value(a, f, bob), bob


def _best_assemblage(bob, f, d):
    oA, oB, mA, mB = f.shape
    prob = Problem("max")
    s = [[prob.herm(d) for _ in range(oA)] for _ in range(mA)]
    base = esum(s[0])
    for x in range(1, mA):
        prob.add_eq(esum(s[x]) - base, 0.0)
    prob.add_eq(base.tr(), 1.0)
    K = np.einsum("abxy,ybij->xaij", f.coefficients, bob)
    prob.maximize(esum([s[x][k].inner(K[x, k]) for x in range(mA) for k in range(oA)]))
    sol = _solve(prob, "assemblage step")
    return Assemblage(np.array([[sol.value(s[x][k]) for k in range(oA)] for x in range(mA)]))


def bell_seesaw(a0: Assemblage, f: BellFunctional, max_iter: int = 50, tol: float = 1e-9) -> dict:
    """Alternate Bob's measurements and the assemblage (Bob's dimension fixed).

    Every no-signalling assemblage has a quantum realisation, so each
    value is attained in quantum theory with Bob of dimension ``d_B``.
    """
    a = a0
    history = []
    bob = None
    for _ in range(max_iter):
        val, bob = max_bell_violation(a, f)
        history.append(val)
        a = _best_assemblage(bob, f, a.d_B)
        history.append(bell_value(a, f, bob))
        if len(history) > 2 and history[-1] - history[-3] <= tol:
            break
    return {"value": history[-1], "assemblage": a, "bob": bob, "history": history}


# negativity ---------------------------------------------------------------

def _reduce(word):
    """Projector words: equal adjacent inputs collapse or vanish. ``None`` is zero."""
    out = []
    for letter in word:
        if out and out[-1][0] == letter[0]:
            if out[-1][1] != letter[1]:
                return None
            continue
        out.append(letter)
    return tuple(out)


def _words(m: int, o: int, k: int):
    letters = [(x, a_) for x in range(m) for a_ in range(o - 1)]
    words = [()]
    frontier = [()]
    for _ in range(k):
        nxt = []
        for w in frontier:
            for L in letters:
                r = _reduce((L,) + w)
                if r is not None and r not in words and r not in nxt:
                    nxt.append(r)
        words += nxt
        frontier = nxt
    return words


def _block_map(n, d, i, j, part):
    """Hermitian part (``re``) or anti-Hermitian part / i (``im``) of block ``(i, j)``."""
    def f(H):
        B = H[..., i * d:(i + 1) * d, j * d:(j + 1) * d]
        Bd = np.conj(np.swapaxes(B, -1, -2))
        return 0.5 * (B + Bd) if part == "re" else (B - Bd) / 2j
    return f


def _ptranspose_B(n, d):
    def f(H):
        sh = H.shape[:-2]
        return np.swapaxes(H.reshape(sh + (n, d, n, d)), -1, -3).reshape(sh + (n * d, n * d))
    return f


def moment_structure(m: int, o: int, k: int):
    """Words of the level-``k`` operator set and the reduced word of each block.

    Block ``(i, j)`` of the moment matrix is ``tr_A[(S_j^dag S_i (x) 1) rho]``.
    """
    words = _words(m, o, k)
    table = {}
    for i, wi in enumerate(words):
        for j, wj in enumerate(words):
            table[i, j] = _reduce(tuple(reversed(wj)) + wi)
    return words, table


def negativity_lower_bound(a: Assemblage, k: int = 1, psd_moment: bool = True) -> float:
    """Lower bound on the negativity of any state that can produce ``a``.

    Alice's measurements are taken projective. The moment matrix is split
    as ``Gamma = Gamma_+ - Gamma_-`` with PPT parts; all vanishing and
    word-identity relations hold for both parts, and the blocks with known
    words are fixed by the data. ``psd_moment`` additionally imposes
    ``Gamma >= 0``, which every quantum moment matrix satisfies.
    """
    if k not in (1, 2):
        raise ValueError("supported levels are k = 1 and k = 2")
    a.validate()
    d = a.d_B
    words, table = moment_structure(a.m, a.o, k)
    n = len(words)
    N = n * d
    prob = Problem("min")
    Pp = prob.herm(N, name="PT_plus")
    Pm = prob.herm(N, name="PT_minus")
    pt = _ptranspose_B(n, d)
    Gp = Pp.map(pt, N)
    Gm = Pm.map(pt, N)
    G = Gp - Gm
    if psd_moment:
        prob.add_psd(G, name="moment_psd")

    def known(w):
        if len(w) == 0:
            return a.rho_B
        if len(w) == 1:
            x, k_ = w[0]
            return a.members[x, k_]
        return None

    first = {}
    for i in range(n):
        for j in range(i, n):
            w = table[i, j]
            parts = ("re",) if i == j else ("re", "im")
            rw = None if w is None else tuple(reversed(w))
            src = None
            if w is not None and (w in first or rw in first):
                src, conj = (first[w], False) if w in first else (first[rw], True)
            for part in parts:
                f = _block_map(n, d, i, j, part)
                if w is None:
                    for E in (Gp, Gm):
                        prob.add_eq(E.map(f, d), 0.0)
                elif src is not None:
                    # block equals an earlier block with the same word, or its adjoint
                    g = _block_map(n, d, src[0], src[1], part)
                    sign = -1.0 if (conj and part == "im") else 1.0
                    for E in (Gp, Gm):
                        prob.add_eq(E.map(f, d) - sign * E.map(g, d), 0.0)
                else:
                    K = known(w)
                    if K is not None:
                        val = 0.5 * (K + K.conj().T) if part == "re" else (K - K.conj().T) / 2j
                        prob.add_eq(G.map(f, d), val)
            if w is not None and src is None:
                first[w] = (i, j)
    top = np.zeros((N, N))
    top[:d, :d] = np.eye(d)
    prob.minimize(Gm.inner(top))
    sol = _solve(prob, "negativity bound")
    return max(float(sol.primal_value), 0.0)


def negativity(rho: np.ndarray, dims) -> float:
    """Negativity ``(||rho^{T_B}||_1 - 1) / 2``."""
    from .hermat import partial_transpose
    ev = np.linalg.eigvalsh(partial_transpose(rho, dims, 1))
    return float((np.abs(ev).sum() - 1) / 2)
