"""Tripartite steering tests.

One untrusted party (Alice) leaves Bob and Charlie with ``sigma^{BC}_{a|x}``;
two untrusted parties (Alice, Bob) leave Charlie with ``sigma^C_{ab|xy}``.
Separability of the members is relaxed to k-symmetric PPT extensions and
quantumness of Alice-Bob correlations to the steering moment-matrix
hierarchy ``Q_k``. A test that is infeasible at some level certifies the
corresponding kind of steering; feasibility is inconclusive.

Feasibility is decided through the strict form ``X >= mu*1`` on every cone:
``mu* >= -1e-8`` counts as feasible.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .assemblage import MeasurementSet, enumerate_strategies, pauli_measurements, _cplx_json, _from_cplx_json
from .detect import SolverFailure
from .hermat import dag, ghz, partial_trace, random_density, w_state
from .sdp import Expr, Problem, RedundantRowsWarning, esum

VERDICT_TOL = 1e-8
VALID_TOL = 1e-9
PSD_TOL = 1e-10
CHECK_TOL = 1e-6


class InvalidMultiAssemblage(ValueError):
    pass


def _herm(a):
    a = np.asarray(a, complex)
    return 0.5 * (a + dag(a))


def _min_eig(ops) -> float:
    ops = np.asarray(ops)
    if ops.size == 0:
        return 0.0
    return float(np.min(np.linalg.eigvalsh(_herm(ops))))


# data types ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MultiAssemblage1U:
    """``sigma^{BC}_{a|x}`` with shape ``(m, o, dB*dC, dB*dC)``."""

    members: np.ndarray
    dims: tuple[int, int]

    def __post_init__(self):
        s = np.asarray(self.members, complex)
        dB, dC = (int(d) for d in self.dims)
        if s.ndim != 4 or s.shape[2:] != (dB * dC, dB * dC):
            raise InvalidMultiAssemblage(f"members of shape {s.shape} do not match dims {(dB, dC)}")
        object.__setattr__(self, "members", _herm(s))
        object.__setattr__(self, "dims", (dB, dC))

    @property
    def m(self) -> int:
        return self.members.shape[0]

    @property
    def o(self) -> int:
        return self.members.shape[1]

    @property
    def rho_BC(self) -> np.ndarray:
        return self.members[0].sum(axis=0)

    def validate(self, tol: float = VALID_TOL) -> "MultiAssemblage1U":
        if _min_eig(self.members) < -PSD_TOL:
            raise InvalidMultiAssemblage("a member is not positive semidefinite")
        marg = self.members.sum(axis=1)
        ns = np.max(np.abs(marg - marg[0]))
        if ns > tol:
            raise InvalidMultiAssemblage(f"no-signalling from Alice violated (deviation {ns:.1e})")
        tr = abs(np.trace(marg[0]).real - 1)
        if tr > tol:
            raise InvalidMultiAssemblage(f"not normalized (trace off by {tr:.1e})")
        return self

    def to_json(self) -> dict:
        return {"schema": "massemblage1u.v1", "dims": list(self.dims), "m": self.m, "o": self.o,
                "members": _cplx_json(self.members)}

    @classmethod
    def from_json(cls, obj: dict, validate: bool = True) -> "MultiAssemblage1U":
        if obj.get("schema") != "massemblage1u.v1":
            raise InvalidMultiAssemblage(f"unexpected schema {obj.get('schema')!r}")
        a = cls(_from_cplx_json(obj["members"]), tuple(obj["dims"]))
        if (a.m, a.o) != (obj["m"], obj["o"]):
            raise InvalidMultiAssemblage("declared sizes do not match members")
        return a.validate() if validate else a


@dataclass(frozen=True, eq=False)
class MultiAssemblage2U:
    """``sigma^C_{ab|xy}`` with shape ``(mA, oA, mB, oB, dC, dC)`` indexed ``[x, a, y, b]``."""

    members: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.members, complex)
        if s.ndim != 6 or s.shape[4] != s.shape[5]:
            raise InvalidMultiAssemblage(f"members must have shape (mA, oA, mB, oB, d, d), got {s.shape}")
        object.__setattr__(self, "members", _herm(s))

    @property
    def scenario(self) -> tuple[int, int, int, int]:
        return tuple(self.members.shape[:4])

    @property
    def d_C(self) -> int:
        return self.members.shape[-1]

    @property
    def marginal_A(self) -> np.ndarray:
        """``sigma_{a|x}`` read at ``y = 0``, shape ``(mA, oA, d, d)``."""
        return self.members[:, :, 0].sum(axis=2)

    @property
    def marginal_B(self) -> np.ndarray:
        """``sigma_{b|y}`` read at ``x = 0``, shape ``(mB, oB, d, d)``."""
        return self.members[0].sum(axis=0)

    @property
    def rho_C(self) -> np.ndarray:
        return self.members[0, :, 0].sum(axis=(0, 1))

    def validate(self, tol: float = VALID_TOL) -> "MultiAssemblage2U":
        s = self.members
        if _min_eig(s.reshape((-1,) + s.shape[-2:])) < -PSD_TOL:
            raise InvalidMultiAssemblage("a member is not positive semidefinite")
        sa = s.sum(axis=1)  # [x, y, b]
        dev_a = np.max(np.abs(sa - sa[0:1]))
        if dev_a > tol:
            raise InvalidMultiAssemblage(f"no-signalling from Alice violated (deviation {dev_a:.1e})")
        sb = s.sum(axis=3)  # [x, a, y]
        dev_b = np.max(np.abs(sb - sb[:, :, 0:1]))
        if dev_b > tol:
            raise InvalidMultiAssemblage(f"no-signalling from Bob violated (deviation {dev_b:.1e})")
        tr = abs(np.trace(self.rho_C).real - 1)
        if tr > tol:
            raise InvalidMultiAssemblage(f"not normalized (trace off by {tr:.1e})")
        return self

    def to_json(self) -> dict:
        mA, oA, mB, oB = self.scenario
        return {"schema": "massemblage2u.v1", "d_C": self.d_C, "mA": mA, "oA": oA, "mB": mB, "oB": oB,
                "members": _cplx_json(self.members)}

    @classmethod
    def from_json(cls, obj: dict, validate: bool = True) -> "MultiAssemblage2U":
        if obj.get("schema") != "massemblage2u.v1":
            raise InvalidMultiAssemblage(f"unexpected schema {obj.get('schema')!r}")
        a = cls(_from_cplx_json(obj["members"]))
        if a.scenario != (obj["mA"], obj["oA"], obj["mB"], obj["oB"]) or a.d_C != obj["d_C"]:
            raise InvalidMultiAssemblage("declared sizes do not match members")
        return a.validate() if validate else a


@dataclass(eq=False)
class MultiVerdict:
    """Outcome of a feasibility test; ``feasible=False`` certifies steering."""

    feasible: bool
    mu_star: float
    certificate: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def demonstrates_steering(self) -> bool:
        return not self.feasible


# generators ---------------------------------------------------------------

def _check_state(rho, n):
    rho = np.asarray(rho, complex)
    if rho.shape != (n, n):
        raise ValueError(f"state of shape {rho.shape} does not match total dimension {n}")
    if abs(np.trace(rho).real - 1) > 1e-9 or _min_eig(rho) < -1e-9:
        raise ValueError("rho must be a unit-trace PSD operator")
    return rho


def generate_1u(rho, dims, meas: MeasurementSet) -> MultiAssemblage1U:
    """``sigma^{BC}_{a|x} = tr_A[(M_{a|x} (x) 1 (x) 1) rho]``."""
    dA, dB, dC = (int(d) for d in dims)
    rho = _check_state(rho, dA * dB * dC)
    if meas.dim != dA:
        raise ValueError("measurement dimension does not match Alice")
    meas.validate()
    r = rho.reshape(dA, dB * dC, dA, dB * dC)
    return MultiAssemblage1U(np.einsum("xaji,ibjc->xabc", meas.elements, r), (dB, dC))


def generate_2u(rho, dims, meas_A: MeasurementSet, meas_B: MeasurementSet) -> MultiAssemblage2U:
    """``sigma^C_{ab|xy} = tr_AB[(M_{a|x} (x) M_{b|y} (x) 1) rho]``."""
    dA, dB, dC = (int(d) for d in dims)
    rho = _check_state(rho, dA * dB * dC)
    if meas_A.dim != dA or meas_B.dim != dB:
        raise ValueError("measurement dimensions do not match the state")
    meas_A.validate()
    meas_B.validate()
    r = rho.reshape(dA, dB, dC, dA, dB, dC)
    s = np.einsum("xaji,yblk,ikcjld->xaybcd", meas_A.elements, meas_B.elements, r)
    return MultiAssemblage2U(s)


def noisy_tripartite(psi: np.ndarray, w: float) -> np.ndarray:
    """``w |psi><psi| + (1 - w) 1/8`` (``psi`` may be a ket or a density matrix)."""
    psi = np.asarray(psi, complex)
    P = np.outer(psi, psi.conj()) if psi.ndim == 1 else psi
    n = P.shape[0]
    return w * P + (1 - w) * np.eye(n) / n


def random_fully_separable(dims, rng: np.random.Generator, terms: int = 4) -> np.ndarray:
    """Random mixture of product states."""
    p = rng.dirichlet(np.ones(terms))
    out = 0
    for t in range(terms):
        prod = np.eye(1)
        for d in dims:
            prod = np.kron(prod, random_density(int(d), rng))
        out = out + p[t] * prod
    return out


def random_biseparable(dims, rng: np.random.Generator, terms: int = 2) -> np.ndarray:
    """Random mixture of states separable across A:BC, B:AC and C:AB."""
    dA, dB, dC = (int(d) for d in dims)
    p = rng.dirichlet(np.ones(3 * terms))
    out = np.zeros((dA * dB * dC,) * 2, complex)
    k = 0
    for _ in range(terms):
        out += p[k] * np.kron(random_density(dA, rng), random_density(dB * dC, rng))
        out += p[k + 1] * np.kron(random_density(dA * dB, rng), random_density(dC, rng))
        # B:AC term, built on B (x) A (x) C and permuted to A (x) B (x) C
        t = np.kron(random_density(dB, rng), random_density(dA * dC, rng)).reshape(dB, dA, dC, dB, dA, dC)
        out += p[k + 2] * t.transpose(1, 0, 2, 4, 3, 5).reshape(out.shape)
        k += 3
    return out


def _pr(x, a, y, b, alpha=0, beta=0, gamma=0):
    return 0.5 if (a ^ b) == ((x & y) ^ (alpha & x) ^ (beta & y) ^ gamma) else 0.0


def pr_box() -> np.ndarray:
    """PR box ``p[x, a, y, b] = 1/2`` when ``a xor b = x y``."""
    return np.array([[[[_pr(x, a, y, b) for b in range(2)] for y in range(2)] for a in range(2)] for x in range(2)])


def pr_box_assemblage(rho_C=None) -> MultiAssemblage2U:
    rho_C = np.eye(2) / 2 if rho_C is None else np.asarray(rho_C, complex)
    return MultiAssemblage2U(np.einsum("xayb,cd->xaybcd", pr_box(), rho_C))


@dataclass(frozen=True, eq=False)
class NsVertexTable:
    """Vertices of the (2,2,2,2) no-signalling polytope, ``table[lam, x, a, y, b]``."""

    table: np.ndarray
    local: np.ndarray

    @property
    def scenario(self) -> tuple[int, int, int, int]:
        return (2, 2, 2, 2)


def ns_vertices() -> NsVertexTable:
    """16 local deterministic vertices followed by the 8 PR-box relabellings."""
    st = enumerate_strategies(2, 2)
    rows = [np.einsum("xa,yb->xayb", st.table[:, :, mu], st.table[:, :, nu])
            for mu in range(st.d) for nu in range(st.d)]
    for al, be, ga in itertools.product(range(2), repeat=3):
        rows.append(np.array([[[[_pr(x, a, y, b, al, be, ga) for b in range(2)] for y in range(2)]
                               for a in range(2)] for x in range(2)]))
    return NsVertexTable(np.array(rows), np.arange(24) < 16)


# k-symmetric PPT extensions -------------------------------------------------

def symmetric_isometry(d: int, k: int) -> np.ndarray:
    """Isometry ``V`` (``d**k x C(d+k-1, k)``) onto the symmetric subspace."""
    if k == 0:
        return np.ones((1, 1))
    cols = []
    for combo in itertools.combinations_with_replacement(range(d), k):
        v = np.zeros(d**k)
        for perm in set(itertools.permutations(combo)):
            v[np.ravel_multi_index(perm, (d,) * k)] = 1.0
        cols.append(v / np.linalg.norm(v))
    V = np.array(cols).T
    assert V.shape[1] == comb(d + k - 1, k)
    return V


def _pt_map(dims, sel):
    """Partial transpose on the subsystems in ``sel`` (batched)."""
    n = len(dims)
    N = int(np.prod(dims))

    def f(H):
        sh = H.shape[:-2]
        t = H.reshape(sh + tuple(dims) + tuple(dims))
        b = len(sh)
        perm = list(range(b + 2 * n))
        for s in sel:
            perm[b + s], perm[b + n + s] = perm[b + n + s], perm[b + s]
        return t.transpose(perm).reshape(sh + (N, N))
    return f


def _ptrace_map(dims, keep):
    n = len(dims)
    keep = sorted(keep)
    dk = int(np.prod([dims[i] for i in keep]))

    def f(H):
        sh = H.shape[:-2]
        b = len(sh)
        t = H.reshape(sh + tuple(dims) + tuple(dims))
        letters = "abcdefghijklmnop"
        row = [letters[i] for i in range(n)]
        col = [letters[i] if i not in keep else letters[n + i] for i in range(n)]
        out = [letters[i] for i in keep] + [letters[n + i] for i in keep]
        spec = "..." + "".join(row) + "".join(col) + "->..." + "".join(out)
        return np.einsum(spec, t).reshape(sh + (dk, dk))
    return f


def _lift_map(dB, V):
    """``X -> (1 (x) V) X (1 (x) V)^dag``."""
    W = np.kron(np.eye(dB), V)

    def f(H):
        return W @ H @ W.T
    return f


class _Kext:
    """Member expression with a k-symmetric PPT extension by construction."""

    def __init__(self, prob: Problem, dB: int, dC: int, k: int, name: str):
        if k < 1:
            raise ValueError("extension level k must be >= 1")
        self.dB, self.dC, self.k = dB, dC, k
        full = [dB] + [dC] * k
        if k == 1:
            self.X = prob.herm(dB * dC, name=name)
            self.pi = self.X
            self.member = self.X
            prob.add_psd(self.X.map(_pt_map(full, [1]), dB * dC), name=f"{name}_ppt1")
            self.V = None
            return
        self.V = symmetric_isometry(dC, k)
        ns = self.V.shape[1]
        N = dB * dC**k
        self.X = prob.herm(dB * ns, name=name)
        self.pi = self.X.map(_lift_map(dB, self.V), N)
        self.member = self.pi.map(_ptrace_map(full, [0, 1]), dB * dC)
        for l in range(1, k + 1):
            # the l-cut of a Bose-symmetric operator lives on B (x) Sym^l (x) Sym^(k-l)
            W = np.kron(np.eye(dB), np.kron(symmetric_isometry(dC, l), symmetric_isometry(dC, k - l)))
            pt = _pt_map(full, list(range(1, l + 1)))
            prob.add_psd(self.pi.map(lambda H, W=W, pt=pt: W.T @ pt(H) @ W, W.shape[1]), name=f"{name}_ppt{l}")

    def extension(self, sol) -> np.ndarray:
        return sol.value(self.pi)


def _check_extension(pi, member, dB, dC, k, tol=CHECK_TOL) -> bool:
    """Re-verify symmetry, reduction, positivity and every PPT cut."""
    full = [dB] + [dC] * k
    if k > 1:
        V = symmetric_isometry(dC, k)
        P = np.kron(np.eye(dB), V @ V.T)
        if np.max(np.abs(P @ pi @ P - pi)) > tol:
            return False
        if np.max(np.abs(_ptrace_map(full, [0, 1])(pi) - member)) > tol:
            return False
    elif np.max(np.abs(pi - member)) > tol:
        return False
    if _min_eig(pi) < -tol:
        return False
    return all(_min_eig(_pt_map(full, list(range(1, l + 1)))(pi)) >= -tol for l in range(1, k + 1))


def _solve(prob, what):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RedundantRowsWarning)
        sol = prob.solve()
    if sol.status != "optimal":
        raise SolverFailure(f"{what}: solver status {sol.status}")
    return sol


def _verdict_from(sol, cert, check, info=None) -> MultiVerdict:
    mu = float(sol.primal_value)
    feasible = mu >= -VERDICT_TOL
    info = dict(info or {})
    info.update(iterations=sol.iterations, dual_value=sol.dual_value)
    if feasible:
        info["certificate_verified"] = bool(check())
    return MultiVerdict(feasible, mu, cert if feasible else {}, info)


def kext_check(members, dims, k: int = 1) -> MultiVerdict:
    """Do all members (operators on ``B (x) C``) admit unnormalized k-symmetric PPT extensions?"""
    members = np.asarray(members, complex)
    if members.ndim == 2:
        members = members[None]
    dB, dC = (int(d) for d in dims)
    if members.shape[1:] != (dB * dC, dB * dC):
        raise ValueError("member dimension does not match dims")
    prob = Problem(strict=True)
    ext = []
    for i, S in enumerate(members):
        e = _Kext(prob, dB, dC, k, f"ext_{i}")
        prob.add_eq(e.member, _herm(S), name=f"member_{i}")
        ext.append(e)
    sol = _solve(prob, "k-extension test")
    pis = [e.extension(sol) for e in ext]
    return _verdict_from(sol, {"extensions": pis},
                         lambda: all(_check_extension(p, _herm(S), dB, dC, k) for p, S in zip(pis, members)),
                         {"k": k})


# one untrusted party -------------------------------------------------------

def _targets_1u(a: MultiAssemblage1U):
    return [[a.members[x, k] for k in range(a.o)] for x in range(a.m)]


def _build_ms_1u(prob, T, m, o, dB, dC, k):
    st = enumerate_strategies(m, o)
    ext = [_Kext(prob, dB, dC, k, f"sigma_{l}") for l in range(st.d)]
    for x in range(m):
        for a in range(o):
            lams = np.nonzero(st.table[x, a])[0]
            prob.add_eq(esum([ext[l].member for l in lams]) - T[x][a], 0.0, name=f"F_{x}_{a}")
    return st, ext


def ms_test_1u(a: MultiAssemblage1U, k: int = 1) -> MultiVerdict:
    """Fully separable model: ``sigma_{a|x} = sum D(a|x,lam) sigma_lam`` with k-extendible members."""
    a.validate()
    dB, dC = a.dims
    prob = Problem(strict=True)
    st, ext = _build_ms_1u(prob, _targets_1u(a), a.m, a.o, dB, dC, k)
    sol = _solve(prob, "MS test (one untrusted)")
    sig = np.array([sol.value(e.member) for e in ext])
    pis = [e.extension(sol) for e in ext]

    def check():
        rec = np.einsum("xal,lij->xaij", st.table, sig)
        return (np.max(np.abs(rec - a.members)) <= CHECK_TOL
                and all(_check_extension(p, s, dB, dC, k) for p, s in zip(pis, sig)))
    return _verdict_from(sol, {"sigma_lambda": sig, "extensions": pis}, check, {"k": k})


def _build_gms_1u(prob, T, m, o, dB, dC, k):
    st = enumerate_strategies(m, o)
    n = dB * dC
    sig_mu = [prob.herm(n, name=f"sigma_mu_{l}") for l in range(st.d)]
    pi_nu = [prob.herm(dC, name=f"pi_nu_{l}") for l in range(st.d)]
    gam_lam = [prob.herm(dB, name=f"gamma_lam_{l}") for l in range(st.d)]
    pi = [[_Kext(prob, dB, dC, k, f"pi_{x}_{a}") for a in range(o)] for x in range(m)]
    gam = [[_Kext(prob, dB, dC, k, f"gamma_{x}_{a}") for a in range(o)] for x in range(m)]
    trB = _ptrace_map([dB, dC], [1])
    trC = _ptrace_map([dB, dC], [0])
    for x in range(m):
        for a in range(o):
            lams = np.nonzero(st.table[x, a])[0]
            lhs = esum([sig_mu[l] for l in lams]) + pi[x][a].member + gam[x][a].member
            prob.add_eq(lhs - T[x][a], 0.0, name=f"F_{x}_{a}")
            prob.add_eq(pi[x][a].member.map(trB, dC) - esum([pi_nu[l] for l in lams]), 0.0)
            prob.add_eq(gam[x][a].member.map(trC, dB) - esum([gam_lam[l] for l in lams]), 0.0)
    return st, sig_mu, pi_nu, gam_lam, pi, gam


def gms_test_1u(a: MultiAssemblage1U, k: int = 1) -> MultiVerdict:
    """Biseparable model with one untrusted party (three-term decomposition)."""
    a.validate()
    dB, dC = a.dims
    prob = Problem(strict=True)
    st, sig_mu, pi_nu, gam_lam, pi, gam = _build_gms_1u(prob, _targets_1u(a), a.m, a.o, dB, dC, k)
    sol = _solve(prob, "GMS test (one untrusted)")
    v = sol.value
    S = np.array([v(s) for s in sig_mu])
    Pn = np.array([v(s) for s in pi_nu])
    Gl = np.array([v(s) for s in gam_lam])
    P = np.array([[v(e.member) for e in row] for row in pi])
    G = np.array([[v(e.member) for e in row] for row in gam])
    Pext = [[e.extension(sol) for e in row] for row in pi]
    Gext = [[e.extension(sol) for e in row] for row in gam]

    def check():
        D = st.table
        rec = np.einsum("xal,lij->xaij", D, S) + P + G
        ok = np.max(np.abs(rec - a.members)) <= CHECK_TOL
        ok &= np.max(np.abs(_ptrace_map([dB, dC], [1])(P) - np.einsum("xal,lij->xaij", D, Pn))) <= CHECK_TOL
        ok &= np.max(np.abs(_ptrace_map([dB, dC], [0])(G) - np.einsum("xal,lij->xaij", D, Gl))) <= CHECK_TOL
        ok &= min(_min_eig(S), _min_eig(Pn), _min_eig(Gl)) >= -CHECK_TOL
        for x in range(a.m):
            for k_ in range(a.o):
                ok &= _check_extension(Pext[x][k_], P[x, k_], dB, dC, k)
                ok &= _check_extension(Gext[x][k_], G[x, k_], dB, dC, k)
        return bool(ok)
    cert = {"sigma_mu": S, "pi": P, "pi_nu": Pn, "gamma": G, "gamma_lambda": Gl}
    return _verdict_from(sol, cert, check, {"k": k})


# two untrusted parties -----------------------------------------------------

def _targets_2u(a: MultiAssemblage2U):
    mA, oA, mB, oB = a.scenario
    return {(x, i, y, j): a.members[x, i, y, j] for x in range(mA) for i in range(oA)
            for y in range(mB) for j in range(oB)}


def _build_ms_2u(prob, T, mA, oA, mB, oB, dC):
    sa = enumerate_strategies(mA, oA)
    sb = enumerate_strategies(mB, oB)
    sig = [[prob.herm(dC, name=f"sigma_{mu}_{nu}") for nu in range(sb.d)] for mu in range(sa.d)]
    for (x, a, y, b), t in T.items():
        terms = [sig[mu][nu] for mu in np.nonzero(sa.table[x, a])[0] for nu in np.nonzero(sb.table[y, b])[0]]
        prob.add_eq(esum(terms) - t, 0.0, name=f"F_{x}_{a}_{y}_{b}")
    return sa, sb, sig


def ms_test_2u(a: MultiAssemblage2U) -> MultiVerdict:
    """Fully separable model: ``sum D(a|x,mu) D(b|y,nu) sigma_{mu nu}``."""
    a.validate()
    mA, oA, mB, oB = a.scenario
    prob = Problem(strict=True)
    sa, sb, sig = _build_ms_2u(prob, _targets_2u(a), mA, oA, mB, oB, a.d_C)
    sol = _solve(prob, "MS test (two untrusted)")
    S = np.array([[sol.value(s) for s in row] for row in sig])

    def check():
        rec = np.einsum("xam,ybn,mnij->xaybij", sa.table, sb.table, S)
        return bool(np.max(np.abs(rec - a.members)) <= CHECK_TOL and _min_eig(S.reshape((-1,) + S.shape[-2:])) >= -CHECK_TOL)
    return _verdict_from(sol, {"sigma_mu_nu": S}, check)


# steering moment matrices ---------------------------------------------------

def _reduce(word):
    out = []
    for letter in word:
        if out and out[-1][0] == letter[0]:
            if out[-1][1] != letter[1]:
                return None
            continue
        out.append(letter)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class MomentMatrixSpec:
    """Operator strings of level ``k`` and the reduced word of every block.

    Strings are pairs ``(alice_word, bob_word)``: Alice letters to the left
    of Bob letters, each part reduced with projectivity. Letters are
    ``(input, outcome)`` with the last outcome omitted. ``table[i, j]``
    is the word of ``S_j^dag S_i`` or ``None`` when it vanishes.
    """

    level: int
    strings: tuple
    table: dict
    block_dim: int

    @property
    def size(self) -> int:
        return len(self.strings)


def moment_matrix_spec(mA: int, oA: int, mB: int, oB: int, k: int, d_C: int = 1) -> MomentMatrixSpec:
    if k < 0:
        raise ValueError("level must be >= 0")
    LA = [(x, a) for x in range(mA) for a in range(oA - 1)]
    LB = [(y, b) for y in range(mB) for b in range(oB - 1)]
    strings = [((), ())]
    seen = {((), ())}
    frontier = [((), ())]
    for _ in range(k):
        nxt = []
        for wa, wb in frontier:
            cands = [(_reduce((L,) + wa), wb) for L in LA] + [(wa, _reduce((L,) + wb)) for L in LB]
            for c in cands:
                if c[0] is None or c[1] is None or c in seen:
                    continue
                seen.add(c)
                nxt.append(c)
        strings += nxt
        frontier = nxt
    table = {}
    for i, (ai, bi) in enumerate(strings):
        for j, (aj, bj) in enumerate(strings):
            wa = _reduce(tuple(reversed(aj)) + ai)
            wb = _reduce(tuple(reversed(bj)) + bi)
            table[i, j] = None if (wa is None or wb is None) else (wa, wb)
    return MomentMatrixSpec(k, tuple(strings), table, d_C)


def _block_map(d, i, j, part):
    def f(H):
        B = H[..., i * d:(i + 1) * d, j * d:(j + 1) * d]
        Bd = np.conj(np.swapaxes(B, -1, -2))
        return 0.5 * (B + Bd) if part == "re" else (B - Bd) / 2j
    return f


def _adjoint(w):
    return (tuple(reversed(w[0])), tuple(reversed(w[1])))


class _Moment:
    """Moment matrix variable with all projectivity and word-identity relations imposed."""

    def __init__(self, prob: Problem, spec: MomentMatrixSpec, name: str = "Gamma"):
        d = spec.block_dim
        n = spec.size
        self.spec = spec
        self.G = prob.herm(n * d, name=name)
        self.first = {}
        for i in range(n):
            for j in range(i, n):
                w = spec.table[i, j]
                parts = ("re",) if i == j else ("re", "im")
                src = None
                if w is not None:
                    if w in self.first:
                        src, conj = self.first[w], False
                    elif _adjoint(w) in self.first:
                        src, conj = self.first[_adjoint(w)], True
                for part in parts:
                    f = _block_map(d, i, j, part)
                    if w is None:
                        prob.add_eq(self.G.map(f, d), 0.0)
                    elif src is not None:
                        g = _block_map(d, src[0], src[1], part)
                        sign = -1.0 if (conj and part == "im") else 1.0
                        prob.add_eq(self.G.map(f, d) - sign * self.G.map(g, d), 0.0)
                    elif self._known(w) and part == "im":
                        # observable words are Hermitian operators
                        prob.add_eq(self.G.map(f, d), 0.0)
                if w is not None and src is None:
                    self.first[w] = (i, j)

    @staticmethod
    def _known(w):
        return len(w[0]) <= 1 and len(w[1]) <= 1

    def block(self, w) -> Expr:
        i, j = self.first[w]
        return self.G.map(_block_map(self.spec.block_dim, i, j, "re"), self.spec.block_dim)

    def known_words(self):
        return [w for w in self.first if self._known(w)]


def _assemblage_from_moment(mom: _Moment, mA, oA, mB, oB):
    """Full assemblage expressions ``[x][a][y][b]`` read from the moment blocks."""
    rho = mom.block(((), ()))
    sA = {(x, a): mom.block((((x, a),), ())) for x in range(mA) for a in range(oA - 1)}
    sB = {(y, b): mom.block(((), ((y, b),))) for y in range(mB) for b in range(oB - 1)}
    sAB = {(x, a, y, b): mom.block((((x, a),), ((y, b),)))
           for x in range(mA) for a in range(oA - 1) for y in range(mB) for b in range(oB - 1)}
    out = {}
    for x in range(mA):
        for y in range(mB):
            for a in range(oA):
                for b in range(oB):
                    if a < oA - 1 and b < oB - 1:
                        e = sAB[x, a, y, b]
                    elif a < oA - 1:
                        e = sA[x, a] - esum([sAB[x, a, y, bb] for bb in range(oB - 1)], rho.dim)
                    elif b < oB - 1:
                        e = sB[y, b] - esum([sAB[x, aa, y, b] for aa in range(oA - 1)], rho.dim)
                    else:
                        e = (rho - esum([sA[x, aa] for aa in range(oA - 1)], rho.dim)
                             - esum([sB[y, bb] for bb in range(oB - 1)], rho.dim)
                             + esum([sAB[x, aa, y, bb] for aa in range(oA - 1) for bb in range(oB - 1)], rho.dim))
                    out[x, a, y, b] = e
    return out


def _word_data(w, T):
    """Data value of an observable word from a target dictionary ``[(x,a,y,b)]``."""
    keys = list(T)
    mA = 1 + max(k[0] for k in keys)
    mB = 1 + max(k[2] for k in keys)
    oA = 1 + max(k[1] for k in keys)
    oB = 1 + max(k[3] for k in keys)
    wa, wb = w
    if wa and wb:
        (x, a), (y, b) = wa[0], wb[0]
        return T[x, a, y, b]
    if wa:
        (x, a) = wa[0]
        return _tsum([T[x, a, 0, b] for b in range(oB)])
    if wb:
        (y, b) = wb[0]
        return _tsum([T[0, a, y, b] for a in range(oA)])
    return _tsum([T[0, a, 0, b] for a in range(oA) for b in range(oB)])


def _tsum(items):
    if any(isinstance(t, Expr) for t in items):
        dim = next(t.dim for t in items if isinstance(t, Expr))
        return esum([t if isinstance(t, Expr) else Expr.constant(t, dim) for t in items])
    return sum(items)


def _tie_moment(prob, mom: _Moment, T, prefix="data"):
    names = {}
    for w in mom.known_words():
        name = f"{prefix}_{w}"
        prob.add_eq(mom.block(w) - _word_data(w, T), 0.0, name=name)
        names[w] = name
    return names


def npa_membership(a: MultiAssemblage2U, k: int = 1) -> MultiVerdict:
    """Is ``a`` in level ``k`` of the steering moment-matrix hierarchy?"""
    a.validate()
    mA, oA, mB, oB = a.scenario
    spec = moment_matrix_spec(mA, oA, mB, oB, k, a.d_C)
    prob = Problem(strict=True)
    mom = _Moment(prob, spec)
    T = _targets_2u(a)
    names = _tie_moment(prob, mom, T)
    sol = _solve(prob, "moment-matrix test")
    G = sol.value(mom.G)

    def check():
        d = a.d_C
        ok = _min_eig(G) >= -CHECK_TOL
        for w in mom.known_words():
            i, j = mom.first[w]
            ok &= np.max(np.abs(G[i * d:(i + 1) * d, j * d:(j + 1) * d] - _word_data(w, T))) <= CHECK_TOL
        return bool(ok)
    v = _verdict_from(sol, {"moment_matrix": G, "strings": spec.strings}, check, {"k": k, "size": spec.size})
    if not v.feasible:
        v.certificate["separating_functional"] = _functional_from_duals(sol, names, a.scenario, a.d_C)
    return v


def _functional_from_duals(sol, names, scenario, d):
    """``F`` with ``sum tr F pi <= 0`` on ``Q_k`` and ``> 0`` on the tested assemblage."""
    mA, oA, mB, oB = scenario
    F = np.zeros((mA, oA, mB, oB, d, d), complex)
    for w, name in names.items():
        Y = -sol.dual(name)
        wa, wb = w
        if wa and wb:
            (x, a), (y, b) = wa[0], wb[0]
            F[x, a, y, b] += Y
        elif wa:
            (x, a) = wa[0]
            F[x, a, 0, :] += Y
        elif wb:
            (y, b) = wb[0]
            F[0, :, y, b] += Y
        else:
            F[0, :, 0, :] += Y
    return _herm(F)


def tsirelson_bound(F, k: int = 1) -> float:
    """Upper bound ``beta_k^Q`` on ``sum tr F_{ab|xy} pi_{ab|xy}`` over ``Q_k``."""
    F = _herm(np.asarray(F, complex))
    if F.ndim != 6:
        raise ValueError("F must have shape (mA, oA, mB, oB, d, d)")
    mA, oA, mB, oB = F.shape[:4]
    d = F.shape[-1]
    prob = Problem("max")
    mom = _Moment(prob, moment_matrix_spec(mA, oA, mB, oB, k, d))
    prob.add_eq(mom.block(((), ())).tr(), 1.0, name="norm")
    asm = _assemblage_from_moment(mom, mA, oA, mB, oB)
    prob.maximize(esum([asm[key].inner(F[key]) for key in asm]))
    return float(_solve(prob, "Tsirelson bound").primal_value)


def _build_gms_2u(prob, T, d, k):
    """Three-term biseparable decomposition with the nonlocal term in ``Q_k``."""
    st = enumerate_strategies(2, 2)
    ns = ns_vertices()
    pb = [[[prob.herm(d, name=f"piB_{mu}_{y}_{b}") for b in range(2)] for y in range(2)] for mu in range(st.d)]
    pa = [[[prob.herm(d, name=f"piA_{nu}_{x}_{a}") for a in range(2)] for x in range(2)] for nu in range(st.d)]
    pl = [prob.herm(d, name=f"pi_lam_{l}") for l in range(len(ns.table))]
    for mu in range(st.d):
        prob.add_eq(pb[mu][0][0] + pb[mu][0][1] - pb[mu][1][0] - pb[mu][1][1], 0.0, name=f"nsB_{mu}")
        prob.add_eq(pa[mu][0][0] + pa[mu][0][1] - pa[mu][1][0] - pa[mu][1][1], 0.0, name=f"nsA_{mu}")
    tau = {}
    for (x, a, y, b), t in T.items():
        lams = np.nonzero(ns.table[:, x, a, y, b])[0]
        tau[x, a, y, b] = esum([ns.table[l, x, a, y, b] * pl[l] for l in lams])
        lhs = (esum([pb[mu][y][b] for mu in np.nonzero(st.table[x, a])[0]])
               + esum([pa[nu][x][a] for nu in np.nonzero(st.table[y, b])[0]]) + tau[x, a, y, b])
        prob.add_eq(lhs - t, 0.0, name=f"F_{x}_{a}_{y}_{b}")
    mom = _Moment(prob, moment_matrix_spec(2, 2, 2, 2, k, d))
    _tie_moment(prob, mom, tau, prefix="tau")
    return st, ns, pa, pb, pl, mom


def gms_test_2u(a: MultiAssemblage2U, k: int = 2) -> MultiVerdict:
    """Biseparable model with two untrusted parties; (2,2,2,2) scenarios only."""
    a.validate()
    if a.scenario != (2, 2, 2, 2):
        raise ValueError("GMS test with two untrusted parties supports the (2,2,2,2) scenario only")
    prob = Problem(strict=True)
    st, ns, pa, pb, pl, mom = _build_gms_2u(prob, _targets_2u(a), a.d_C, k)
    sol = _solve(prob, "GMS test (two untrusted)")
    v = sol.value
    PB = np.array([[[v(e) for e in r2] for r2 in r1] for r1 in pb])  # [mu, y, b]
    PA = np.array([[[v(e) for e in r2] for r2 in r1] for r1 in pa])  # [nu, x, a]
    PL = np.array([v(e) for e in pl])

    def check():
        D = st.table
        rec = (np.einsum("xam,mybij->xaybij", D, PB) + np.einsum("ybn,nxaij->xaybij", D, PA)
               + np.einsum("lxayb,lij->xaybij", ns.table, PL))
        ok = np.max(np.abs(rec - a.members)) <= CHECK_TOL
        for P in (PA, PB):
            ok &= _min_eig(P.reshape((-1, a.d_C, a.d_C))) >= -CHECK_TOL
            marg = P.sum(axis=2)
            ok &= np.max(np.abs(marg - marg[:, :1])) <= CHECK_TOL
        ok &= _min_eig(PL) >= -CHECK_TOL
        ok &= _min_eig(sol.value(mom.G)) >= -CHECK_TOL
        return bool(ok)
    return _verdict_from(sol, {"pi_B": PB, "pi_A": PA, "pi_lambda": PL}, check, {"k": k})


# noise thresholds -------------------------------------------------------------

def _affine_targets(prob, sig_pure, sig_noise):
    """Targets ``w sig_pure + (1 - w) sig_noise`` with a scalar variable ``w <= 1``."""
    w = prob.scalar(name="w")
    s = prob.scalar(nonneg=True, name="w_slack")
    prob.add_eq(w + s, 1.0, name="w_cap")
    diff = sig_pure - sig_noise

    def t(idx):
        return w * _herm(diff[idx]) + _herm(sig_noise[idx])
    return w, t


def white_noise_threshold(psi, test: str = "ms", untrusted: int = 1, meas_A: MeasurementSet | None = None,
                          meas_B: MeasurementSet | None = None, k: int = 1) -> float:
    """Largest ``w`` for which ``w |psi><psi| + (1-w) 1/8`` passes the test (capped at 1).

    The assemblage is affine in ``w`` so the threshold is one SDP. Default
    measurements are Pauli X, Y and Z on each untrusted qubit.
    """
    if test not in ("ms", "gms") or untrusted not in (1, 2):
        raise ValueError("test must be 'ms' or 'gms' and untrusted 1 or 2")
    meas_A = meas_A or pauli_measurements("XYZ")
    meas_B = meas_B or pauli_measurements("XYZ")
    return float(_threshold(psi, test, untrusted, meas_A, meas_B, k).primal_value)


def _threshold(psi, test, untrusted, meas_A, meas_B, k):
    dims = (2, 2, 2)
    pure = noisy_tripartite(psi, 1.0)
    mix = noisy_tripartite(psi, 0.0)
    prob = Problem("max")
    if untrusted == 1:
        sp_ = generate_1u(pure, dims, meas_A).members
        sn_ = generate_1u(mix, dims, meas_A).members
        w, t = _affine_targets(prob, sp_, sn_)
        T = [[t((x, a)) for a in range(meas_A.o)] for x in range(meas_A.m)]
        if test == "ms":
            _build_ms_1u(prob, T, meas_A.m, meas_A.o, 2, 2, k)
        else:
            _build_gms_1u(prob, T, meas_A.m, meas_A.o, 2, 2, k)
    else:
        sp_ = generate_2u(pure, dims, meas_A, meas_B).members
        sn_ = generate_2u(mix, dims, meas_A, meas_B).members
        w, t = _affine_targets(prob, sp_, sn_)
        T = {key: t(key) for key in itertools.product(range(meas_A.m), range(meas_A.o), range(meas_B.m), range(meas_B.o))}
        if test == "ms":
            _build_ms_2u(prob, T, meas_A.m, meas_A.o, meas_B.m, meas_B.o, 2)
        else:
            if (meas_A.m, meas_A.o, meas_B.m, meas_B.o) != (2, 2, 2, 2):
                raise ValueError("GMS with two untrusted parties supports two binary measurements each")
            _build_gms_2u(prob, T, 2, k)
    prob.maximize(w)
    return _solve(prob, "noise threshold")


def _seesaw_step(psi, test, untrusted, w, sol, mA, mB):
    """One measurement update for each untrusted party from the multipliers at ``w``."""
    from .quantify import _best_measurements
    rho = noisy_tripartite(psi, w)
    if untrusted == 1:
        Y = np.array([[sol.dual(f"F_{x}_{a}") for a in range(mA.o)] for x in range(mA.m)])
        return _best_measurements(rho, (2, 4), Y, "min"), None
    Y = np.array([[[[sol.dual(f"F_{x}_{a}_{y}_{b}") for b in range(mB.o)] for y in range(mB.m)]
                   for a in range(mA.o)] for x in range(mA.m)])
    FA = np.einsum("ybij,xaybcd->xaicjd", mB.elements, Y).reshape(mA.m, mA.o, 4, 4)
    newA = _best_measurements(rho, (2, 4), FA, "min")
    # Bob first: B (x) A (x) C
    rB = rho.reshape(2, 2, 2, 2, 2, 2).transpose(1, 0, 2, 4, 3, 5).reshape(8, 8)
    FB = np.einsum("xaij,xaybcd->ybicjd", mA.elements, Y).reshape(mB.m, mB.o, 4, 4)
    newB = _best_measurements(rB, (2, 4), FB, "min")
    return newA, newB


def threshold_seesaw(psi, test: str = "ms", untrusted: int = 1, k: int = 1, restarts: int = 5, seed: int = 0,
                     max_iter: int = 30, tol: float = 1e-7) -> dict:
    """Lower a noise threshold by alternating with the untrusted measurements.

    At the optimum the multipliers ``Y`` of the decomposition constraints
    give the first-order change of the threshold with the targets; the
    untrusted POVMs are chosen to minimize ``sum tr[Y sigma]`` and the
    threshold is recomputed, keeping only improvements. Runs start from
    Pauli X, Y, Z and from ``restarts`` Haar-random projective sets.
    """
    from .assemblage import random_projective
    rng = np.random.default_rng(seed)
    starts = [(pauli_measurements("XYZ"), pauli_measurements("XYZ"))]
    starts += [(random_projective(2, 3, rng), random_projective(2, 3, rng)) for _ in range(restarts)]
    best = None
    histories = []
    for mA, mB in starts:
        sol = _threshold(psi, test, untrusted, mA, mB, k)
        hist = [float(sol.primal_value)]
        for _ in range(max_iter):
            nA, nB = _seesaw_step(psi, test, untrusted, hist[-1], sol, mA, mB)
            nB = nB if nB is not None else mB
            sol_new = _threshold(psi, test, untrusted, nA, nB, k)
            if float(sol_new.primal_value) >= hist[-1] - tol:
                break
            mA, mB, sol = nA, nB, sol_new
            hist.append(float(sol.primal_value))
        histories.append(hist)
        if best is None or hist[-1] < best[0]:
            best = (hist[-1], mA, mB)
    return {"value": best[0], "meas_A": best[1], "meas_B": best[2] if untrusted == 2 else None,
            "history": histories}


def ghz_state() -> np.ndarray:
    return ghz(3)


def w_state3() -> np.ndarray:
    return w_state(3)


# post-quantum steering ------------------------------------------------------

@dataclass(eq=False)
class PostQuantumResult:
    assemblage: MultiAssemblage2U
    beta: float
    beta_Q: float
    post_quantum: bool
    q: np.ndarray
    info: dict = field(default_factory=dict)


def _qutrit_lift(r):
    """``gamma -> (1/3)[r gamma + tr(gamma)((1-r) 1/2 + 2|2><2|)]`` from qubit to qutrit."""
    base = np.zeros((3, 3))
    base[:2, :2] = (1 - r) * np.eye(2) / 2
    base[2, 2] = 2.0

    def f(H):
        sh = H.shape[:-2]
        out = np.zeros(sh + (3, 3), complex)
        out[..., :2, :2] = r * H
        tr = np.trace(H, axis1=-2, axis2=-1)
        return (out + tr[..., None, None] * base) / 3
    return f


def postquantum_search(F, charlie: MeasurementSet, r: float, k: int = 2, margin: float = 1e-6) -> PostQuantumResult:
    """Maximize ``sum tr F sigma~`` over lifted assemblages with only local behaviours.

    ``charlie`` are the qubit measurements whose symmetrized hull has
    inscribed radius ``r``. The result is flagged post-quantum only when
    the value exceeds the level-``k`` Tsirelson bound by ``margin``.
    """
    F = _herm(np.asarray(F, complex))
    if F.ndim != 6 or F.shape[-1] != 3:
        raise ValueError("F must have shape (mA, oA, mB, oB, 3, 3)")
    if charlie.dim != 2:
        raise ValueError("Charlie's measurements must act on a qubit")
    if not 0 < r <= 1:
        raise ValueError("radius must lie in (0, 1]")
    mA, oA, mB, oB = F.shape[:4]
    sa, sb, sc = enumerate_strategies(mA, oA), enumerate_strategies(mB, oB), enumerate_strategies(charlie.m, charlie.o)
    prob = Problem("max")
    gam = {key: prob.herm(2, psd=False, name=f"gamma_{key}")
           for key in itertools.product(range(mA), range(oA), range(mB), range(oB))}
    q = {lam: prob.scalar(nonneg=True, name=f"q_{lam}") for lam in itertools.product(range(sa.d), range(sb.d), range(sc.d))}
    lift = _qutrit_lift(r)
    sig = {key: g.map(lift, 3) for key, g in gam.items()}
    for key, s in sig.items():
        prob.add_psd(s, name=f"psd_{key}")
    for (x, a, y, b), g in gam.items():
        for z in range(charlie.m):
            for c in range(charlie.o):
                lams = [lam for lam in q if sa.table[x, a, lam[0]] and sb.table[y, b, lam[1]] and sc.table[z, c, lam[2]]]
                prob.add_eq(g.inner(charlie.elements[z, c]) - esum([q[l] for l in lams], 0), 0.0)
    for x in range(mA):
        for y in range(mB):
            for b in range(oB):
                if x:
                    prob.add_eq(esum([gam[x, a, y, b] for a in range(oA)]) - esum([gam[0, a, y, b] for a in range(oA)]), 0.0)
    for x in range(mA):
        for a in range(oA):
            for y in range(1, mB):
                prob.add_eq(esum([gam[x, a, y, b] for b in range(oB)]) - esum([gam[x, a, 0, b] for b in range(oB)]), 0.0)
    prob.add_eq(esum([gam[0, a, 0, b].tr() for a in range(oA) for b in range(oB)]), 1.0, name="norm")
    prob.add_eq(esum(list(q.values())), 1.0, name="q_norm")
    prob.maximize(esum([s.inner(F[key]) for key, s in sig.items()]))
    sol = _solve(prob, "post-quantum search")
    members = np.zeros((mA, oA, mB, oB, 3, 3), complex)
    for key, s in sig.items():
        members[key] = sol.value(s)
    qv = np.array([float(sol.value(q[l])) for l in q]).reshape(sa.d, sb.d, sc.d)
    beta = float(sol.primal_value)
    beta_q = tsirelson_bound(F, k)
    return PostQuantumResult(MultiAssemblage2U(members), beta, beta_q, beta > beta_q + margin, qv,
                             {"iterations": sol.iterations, "k": k, "r": r})


def random_functional(rng: np.random.Generator, scenario=(2, 2, 2, 2), d: int = 3) -> np.ndarray:
    G = rng.normal(size=scenario + (d, d)) + 1j * rng.normal(size=scenario + (d, d))
    return _herm(G)


def postquantum_outer_search(charlie: MeasurementSet, r: float, k: int = 2, trials: int = 20,
                             seed: int = 0) -> PostQuantumResult | None:
    """Look for post-quantum steering with only local behaviours.

    Random functionals pick extreme points of the lifted set; a point that
    fails the moment test yields a separating functional from the dual
    multipliers, which is then re-run through :func:`postquantum_search`.
    """
    rng = np.random.default_rng(seed)
    for t in range(trials):
        F0 = random_functional(rng)
        cand = postquantum_search(F0, charlie, r, k)
        if cand.post_quantum:
            cand.info["trial"] = t
            return cand
        try:
            a = cand.assemblage.validate(1e-7)
        except InvalidMultiAssemblage:
            continue
        a = MultiAssemblage2U(a.members / np.trace(a.rho_C).real)
        v = npa_membership(a, k)
        if v.feasible:
            continue
        F = v.certificate["separating_functional"]
        res = postquantum_search(F, charlie, r, k)
        res.info.update(trial=t, mu_star=v.mu_star)
        if res.post_quantum:
            return res
    return None
