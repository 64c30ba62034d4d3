"""Modeling layer for block-structured semidefinite programs.

Variables are complex Hermitian matrices, real symmetric matrices or real
scalars, each either free or constrained to be positive semidefinite. Affine
expressions are stored as sparse maps from variable coordinates to the
``hvec`` coordinates of the expression. A :class:`Problem` compiles to the
real conic standard form solved by :mod:`qsteer.sdp.ipm`.

Feasibility problems can be built in strict mode: every PSD variable ``X``
becomes ``P + mu*1`` with ``P`` PSD, every matrix inequality ``E >= 0``
becomes ``E - mu*1 >= 0``, and the objective is to maximize ``mu``. The sign
of the optimal ``mu`` is then the feasibility verdict.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .embed import embed_hermitian, hvec, multiplier_from_row, trace_row, unhvec, herm_basis
from .ipm import ConicSolver, IpmOptions

log = logging.getLogger(__name__)


class MalformedProblem(ValueError):
    """Raised for dangling variable references or inconsistent shapes."""


class RedundantRowsWarning(UserWarning):
    """Emitted when linearly dependent equality rows are dropped."""


_ids = itertools.count()


@dataclass(eq=False)
class Variable:
    kind: str  # "herm", "sym" or "scalar"
    dim: int
    psd: bool
    name: str
    owner: int
    uid: int = field(default_factory=lambda: next(_ids))

    @property
    def ncoord(self) -> int:
        if self.kind == "herm":
            return self.dim * self.dim
        if self.kind == "sym":
            return self.dim * (self.dim + 1) // 2
        return 1

    def coord_to_hvec(self) -> sp.csr_matrix:
        """Map from the variable's own coordinates to hvec coordinates."""
        n = self.dim
        if self.kind == "herm":
            return sp.identity(n * n, format="csr")
        if self.kind == "sym":
            iu, ju = np.triu_indices(n)
            return sp.csr_matrix((np.ones(iu.size), (iu * n + ju, np.arange(iu.size))), shape=(n * n, iu.size))
        return sp.identity(1, format="csr")


def _as_const(value, dim: int) -> np.ndarray:
    if dim == 0:
        return np.array([float(np.real(value))])
    a = np.asarray(value)
    if a.ndim == 0:
        return hvec(complex(a) * np.eye(dim))
    if a.shape != (dim, dim):
        raise MalformedProblem(f"constant of shape {a.shape} does not match dimension {dim}")
    return hvec(0.5 * (a + a.conj().T))


class Expr:
    """Affine expression in the problem variables.

    ``dim == 0`` denotes a real scalar; otherwise the value is a ``dim x dim``
    Hermitian matrix with ``dim*dim`` hvec coordinates.
    """

    __slots__ = ("dim", "terms", "const")
    __array_priority__ = 100

    def __init__(self, dim: int, terms: dict | None = None, const: np.ndarray | None = None):
        self.dim = dim
        self.terms: dict[int, tuple[Variable, sp.csr_matrix]] = terms or {}
        self.const = np.zeros(self.size) if const is None else np.asarray(const, float)

    @property
    def size(self) -> int:
        return 1 if self.dim == 0 else self.dim * self.dim

    @classmethod
    def of(cls, var: Variable) -> "Expr":
        dim = 0 if var.kind == "scalar" else var.dim
        size = 1 if dim == 0 else dim * dim
        return cls(dim, {var.uid: (var, sp.identity(size, format="csr"))})

    @classmethod
    def constant(cls, value, dim: int) -> "Expr":
        return cls(dim, {}, _as_const(value, dim))

    def copy(self) -> "Expr":
        return Expr(self.dim, dict(self.terms), self.const.copy())

    # arithmetic ----------------------------------------------------------
    def _coerce(self, other) -> "Expr":
        if isinstance(other, Expr):
            if other.dim != self.dim:
                raise MalformedProblem(f"dimension mismatch {self.dim} vs {other.dim}")
            return other
        return Expr.constant(other, self.dim)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for k, (v, L) in other.terms.items():
            terms[k] = (v, terms[k][1] + L) if k in terms else (v, L)
        return Expr(self.dim, terms, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Expr):
            raise MalformedProblem("product of two expressions is not affine")
        if np.ndim(other) == 0:
            c = float(np.real(other))
            if np.imag(other) != 0:
                raise MalformedProblem("complex scaling of a Hermitian expression")
            return Expr(self.dim, {k: (v, c * L) for k, (v, L) in self.terms.items()}, c * self.const)
        if self.dim != 0:
            raise MalformedProblem("matrix constants multiply scalar expressions only")
        h = _as_const(other, np.asarray(other).shape[0])[:, None]
        dim = np.asarray(other).shape[0]
        terms = {k: (v, sp.csr_matrix(h) @ L) for k, (v, L) in self.terms.items()}
        return Expr(dim, terms, (h * self.const[0]).ravel())

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / float(other))

    def apply(self, mat: sp.spmatrix, dim_out: int) -> "Expr":
        """Apply a real linear map given on hvec (or scalar) coordinates."""
        mat = sp.csr_matrix(mat)
        return Expr(dim_out, {k: (v, mat @ L) for k, (v, L) in self.terms.items()}, mat @ self.const)

    def map(self, f: Callable[[np.ndarray], np.ndarray], dim_out: int) -> "Expr":
        """Apply a Hermiticity-preserving linear map ``f`` (must accept batches)."""
        return self.apply(linear_map_matrix(f, self.dim, dim_out), dim_out)

    def tr(self) -> "Expr":
        return self.inner(np.eye(self.dim))

    def inner(self, A) -> "Expr":
        """Scalar expression ``Re tr(A X)``."""
        if self.dim == 0:
            raise MalformedProblem("inner product needs a matrix expression")
        row = trace_row(np.asarray(A, dtype=complex))[None, :]
        return self.apply(sp.csr_matrix(row), 0)

    def entry_rows(self) -> np.ndarray:
        """Indices of coordinates that carry any dependence or constant."""
        used = np.abs(self.const) > 0
        for _, L in self.terms.values():
            used |= np.asarray(abs(L).sum(axis=1)).ravel() > 0
        return used

    def is_real(self) -> bool:
        if self.dim == 0:
            return True
        n = self.dim
        lower = np.tril(np.ones((n, n), dtype=bool), -1).reshape(-1)
        return not np.any(self.entry_rows()[lower])


def esum(exprs: Iterable[Expr], dim: int | None = None) -> Expr:
    """Sum of expressions, merged in one pass."""
    exprs = list(exprs)
    if not exprs:
        if dim is None:
            raise MalformedProblem("empty sum needs an explicit dimension")
        return Expr(dim)
    d = exprs[0].dim
    acc: dict[int, list] = {}
    var: dict[int, Variable] = {}
    const = np.zeros(exprs[0].size)
    for e in exprs:
        if e.dim != d:
            raise MalformedProblem("dimension mismatch in sum")
        const = const + e.const
        for k, (v, L) in e.terms.items():
            acc.setdefault(k, []).append(L)
            var[k] = v
    terms = {k: (var[k], Ls[0] if len(Ls) == 1 else _sparse_sum(Ls)) for k, Ls in acc.items()}
    return Expr(d, terms, const)


def _sparse_sum(mats) -> sp.csr_matrix:
    """Sum of equally shaped sparse matrices through one COO assembly."""
    trip = [_triplets(m) for m in mats]
    data, row, col = (np.concatenate(t) for t in zip(*trip))
    return sp.csr_matrix((data, (row, col)), shape=mats[0].shape)


def _triplets(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(data, row, col)`` of a CSR matrix without building a COO object."""
    if not sp.isspmatrix_csr(m):
        m = sp.csr_matrix(m)
    row = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    return m.data, row, m.indices


_map_cache: dict = {}


def linear_map_matrix(f: Callable[[np.ndarray], np.ndarray], n_in: int, n_out: int, key=None) -> sp.csr_matrix:
    """Matrix of a Hermiticity-preserving linear map on hvec coordinates."""
    if key is not None and (key, n_in, n_out) in _map_cache:
        return _map_cache[(key, n_in, n_out)]
    basis = herm_basis(n_in)
    out = np.asarray(f(basis))
    if out.shape != (n_in * n_in, n_out, n_out):
        raise MalformedProblem(f"map output shape {out.shape} != {(n_in * n_in, n_out, n_out)}")
    mat = hvec(out).T
    mat[np.abs(mat) < 1e-15] = 0.0
    res = sp.csr_matrix(mat)
    if key is not None:
        _map_cache[(key, n_in, n_out)] = res
    return res


@dataclass
class ConicProblem:
    """Real-symmetric standard form produced by :func:`embed_complex`."""

    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    c0: float
    nfree: int
    block_dims: list[int]
    dropped_rows: np.ndarray
    row_owner: list[tuple[int, int]]  # (constraint index, hvec coordinate)
    inconsistent: bool = False


@dataclass
class _Constraint:
    name: str
    kind: str  # "eq" or "psd"
    expr: Expr  # eq: expr == 0 ; psd: expr >= 0
    slack: Variable | None = None


class Problem:
    """Semidefinite program built from variables, equalities and LMIs.

    Parameters
    ----------
    sense : {"max", "min"}
    strict : bool
        Build a strictified feasibility problem (see module docstring).
    mu_cap : float, optional
        Upper bound on ``mu`` in strict mode; keeps unbounded feasible sets finite.
    """

    def __init__(self, sense: str = "max", strict: bool = False, mu_cap: float | None = None):
        if sense not in ("max", "min"):
            raise MalformedProblem(f"unknown sense {sense!r}")
        self.sense = "max" if strict else sense
        self.strict = strict
        self.vars: list[Variable] = []
        self.cons: list[_Constraint] = []
        self.objective: Expr | None = None
        self._key = next(_ids)
        self.mu: Expr | None = None
        self._mu_shift: dict[int, Expr] = {}
        if strict:
            self.mu = self._declare("scalar", 1, False, "mu")
            self.objective = self.mu
            if mu_cap is not None:
                cap = self._declare("scalar", 1, True, "mu_cap_slack")
                self.add_eq(self.mu + cap, mu_cap, name="mu_cap")

    # declarations ----------------------------------------------------------
    def _declare(self, kind, dim, psd, name) -> Expr:
        name = name or f"v{len(self.vars)}"
        v = Variable(kind, dim, psd, name, self._key)
        self.vars.append(v)
        return Expr.of(v)

    def variable(self, dim: int = 1, field: str = "herm", psd: bool = True, name: str | None = None) -> Expr:
        """Declare a variable and return it as an expression.

        In strict mode a PSD variable is returned shifted by ``mu*1``.
        """
        if field not in ("herm", "sym", "scalar"):
            raise MalformedProblem(f"unknown field {field!r}")
        if field != "scalar" and dim < 1:
            raise MalformedProblem("matrix variables need dim >= 1")
        e = self._declare(field, 1 if field == "scalar" else dim, psd, name)
        if self.strict and psd:
            key = 0 if field == "scalar" else dim
            if key not in self._mu_shift:
                self._mu_shift[key] = self.mu * (1.0 if key == 0 else np.eye(dim))
            e = e + self._mu_shift[key]
        return e

    def herm(self, dim: int, psd: bool = True, name: str | None = None) -> Expr:
        return self.variable(dim, "herm", psd, name)

    def sym(self, dim: int, psd: bool = True, name: str | None = None) -> Expr:
        return self.variable(dim, "sym", psd, name)

    def scalar(self, nonneg: bool = False, name: str | None = None) -> Expr:
        return self.variable(1, "scalar", nonneg, name)

    def _check(self, e: Expr):
        for v, _ in e.terms.values():
            if v.owner != self._key:
                raise MalformedProblem(f"expression references variable {v.name!r} of another problem")

    def add_eq(self, lhs, rhs=0.0, name: str | None = None) -> str:
        lhs = lhs if isinstance(lhs, Expr) else Expr.constant(lhs, 0)
        e = lhs - rhs
        self._check(e)
        name = name or f"eq{len(self.cons)}"
        self.cons.append(_Constraint(name, "eq", e))
        return name

    def add_psd(self, expr: Expr, name: str | None = None) -> str:
        if expr.dim == 0:
            expr = expr * np.eye(1)
        self._check(expr)
        if self.strict:
            expr = expr - self.mu * np.eye(expr.dim)
        name = name or f"psd{len(self.cons)}"
        self.cons.append(_Constraint(name, "psd", expr))
        return name

    def maximize(self, expr: Expr):
        self._set_obj(expr, "max")

    def minimize(self, expr: Expr):
        self._set_obj(expr, "min")

    def _set_obj(self, expr, sense):
        if self.strict:
            raise MalformedProblem("strict problems maximize mu")
        if not isinstance(expr, Expr):
            expr = Expr.constant(expr, 0)
        if expr.dim != 0:
            raise MalformedProblem("objective must be a scalar expression")
        self._check(expr)
        self.objective = expr
        self.sense = sense

    # compilation -------------------------------------------------------------
    def compile(self) -> tuple[ConicProblem, dict]:
        if not self.vars:
            raise MalformedProblem("problem has no variables")
        for c in self.cons:
            if c.kind == "psd" and c.slack is None:
                kind = "sym" if c.expr.is_real() else "herm"
                c.slack = Variable(kind, c.expr.dim, True, f"{c.name}#slack", self._key)
        allvars = list(self.vars) + [c.slack for c in self.cons if c.slack is not None]
        free = [v for v in allvars if not v.psd]
        cone = [v for v in allvars if v.psd]
        layout: dict[int, tuple[int, int, Variable]] = {}
        off = 0
        for v in free:
            layout[v.uid] = (off, v.ncoord, v)
            off += v.ncoord
        nfree = off
        block_dims = []
        for v in cone:
            N = 2 * v.dim if v.kind == "herm" else v.dim
            T = N * (N + 1) // 2
            layout[v.uid] = (off, T, v)
            block_dims.append(N)
            off += T
        natoms = off
        P = {v.uid: self._coord_map(v, layout[v.uid][0], natoms) for v in allvars}
        # stacked coordinate maps: each constraint becomes one product [L_1 .. L_k] @ P_all
        coff, o = {}, 0
        for v in allvars:
            coff[v.uid] = o
            o += v.ncoord
        P_all = sp.vstack([P[v.uid] for v in allvars], format="csr")
        ncoord = o
        rows, rhs, owner = [], [], []
        for ci, c in enumerate(self.cons):
            e = c.expr
            if c.kind == "psd":
                e = e - Expr.of(c.slack)
            rows.append(self._concat_terms(e, coff, ncoord))
            rhs.append(-e.const)
            owner.extend((ci, k) for k in range(e.size))
        A = (sp.vstack(rows, format="csr") @ P_all).tocsr() if rows else sp.csr_matrix((0, natoms))
        b = np.concatenate(rhs) if rhs else np.zeros(0)
        obj = self.objective if self.objective is not None else Expr(0)
        crow = sp.csr_matrix((1, natoms))
        for uid, (v, L) in obj.terms.items():
            crow = crow + L @ P[uid]
        c = np.asarray(crow.todense()).ravel()
        if self.sense == "max":
            c = -c
        A.eliminate_zeros()
        A.sum_duplicates()
        keep, inconsistent = _independent_rows(A, b)
        dropped = np.setdiff1d(np.arange(A.shape[0]), keep)
        conic = ConicProblem(A[keep], b[keep], c, float(obj.const[0]), nfree, block_dims,
                             dropped, owner, inconsistent)
        meta = {"layout": layout, "P": P, "keep": keep}
        return conic, meta

    @staticmethod
    def _concat_terms(e: Expr, coff: dict, ncoord: int) -> sp.csr_matrix:
        data, row, col = [], [], []
        for uid, (v, L) in e.terms.items():
            dv, rv, cv = _triplets(L)
            data.append(dv)
            row.append(rv)
            col.append(cv + coff[uid])
        if not data:
            return sp.csr_matrix((e.size, ncoord))
        return sp.csr_matrix((np.concatenate(data), (np.concatenate(row), np.concatenate(col))),
                             shape=(e.size, ncoord))

    @staticmethod
    def _coord_map(v: Variable, start: int, natoms: int) -> sp.csr_matrix:
        """Sparse map from atoms to the variable's hvec coordinates."""
        n = v.dim
        if not v.psd:
            H = v.coord_to_hvec()
            cols = sp.csr_matrix((np.ones(v.ncoord), (np.arange(v.ncoord), start + np.arange(v.ncoord))),
                                 shape=(v.ncoord, natoms))
            return (H @ cols).tocsr()
        if v.kind in ("sym", "scalar"):
            N = n
            iu, ju = np.triu_indices(N)
            hv = iu * N + ju
            return sp.csr_matrix((np.ones(iu.size), (hv, start + np.arange(iu.size))), shape=(N * N, natoms))
        N = 2 * n

        def atom(p, q):
            p, q = np.minimum(p, q), np.maximum(p, q)
            return start + p * (2 * N - p + 1) // 2 + (q - p)

        r, cidx, val = [], [], []
        P_, Q_ = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        P_, Q_ = P_.ravel(), Q_.ravel()
        pos = P_ * n + Q_
        up = P_ <= Q_
        # real parts and diagonal: (X[p,q] + X[n+p,n+q]) / 2
        for a, bq in ((P_[up], Q_[up]), (P_[up] + n, Q_[up] + n)):
            r.append(pos[up]); cidx.append(atom(a, bq)); val.append(np.full(a.size, 0.5))
        lo = P_ > Q_
        a, bq = Q_[lo], P_[lo]  # upper pair (a, b) with a < b, Im slot at [b, a]
        r.append(pos[lo]); cidx.append(atom(bq, n + a)); val.append(np.full(a.size, 0.5))
        r.append(pos[lo]); cidx.append(atom(a, n + bq)); val.append(np.full(a.size, -0.5))
        return sp.csr_matrix((np.concatenate(val), (np.concatenate(r), np.concatenate(cidx))), shape=(n * n, natoms))

    def solve(self, options: IpmOptions | None = None) -> "Solution":
        conic, meta = self.compile()
        if conic.inconsistent:
            return Solution._failed(self, "infeasible", conic, meta, "inconsistent equality rows")
        solver = ConicSolver(conic.A, conic.b, conic.c, conic.nfree, conic.block_dims, options)
        res = solver.solve()
        return Solution(self, conic, meta, res)

    def dump(self, path) -> None:
        """Write the compiled real problem in sparse-triplet text form.

        Section ``k`` (``k = 0`` objective, ``k >= 1`` constraint rows) lists
        one line per nonzero as ``block row col re im``; free variables use
        block ``0`` with ``row == col`` their index, PSD blocks are numbered
        from 1. The right-hand side is given in the section header.
        """
        conic, meta = self.compile()
        dump_conic(conic, path)


def dump_conic(conic: ConicProblem, path) -> None:
    offs, off = [], conic.nfree
    for N in conic.block_dims:
        offs.append(off)
        off += N * (N + 1) // 2
    starts = np.array(offs, dtype=int)

    def locate(j):
        if j < conic.nfree:
            return 0, j, j, 1.0
        k = int(np.searchsorted(starts, j, side="right") - 1)
        N = conic.block_dims[k]
        t = j - starts[k]
        iu, ju = np.triu_indices(N)
        p, q = int(iu[t]), int(ju[t])
        return k + 1, p, q, (1.0 if p == q else 0.5)

    with open(path, "w") as fh:
        fh.write(f"# nfree {conic.nfree} blocks {' '.join(map(str, conic.block_dims))}\n")
        fh.write(f"# section 0 objective const {conic.c0!r}\n")
        for j in np.nonzero(conic.c)[0]:
            blk, p, q, s = locate(j)
            fh.write(f"{blk} {p} {q} {conic.c[j] * s!r} 0.0\n")
        A = conic.A.tocsr()
        for i in range(A.shape[0]):
            fh.write(f"# section {i + 1} rhs {conic.b[i]!r}\n")
            for j, v in zip(A.indices[A.indptr[i]:A.indptr[i + 1]], A.data[A.indptr[i]:A.indptr[i + 1]]):
                blk, p, q, s = locate(j)
                fh.write(f"{blk} {p} {q} {v * s!r} 0.0\n")


def _independent_rows(A: sp.csr_matrix, b: np.ndarray, tol: float = 1e-11) -> tuple[np.ndarray, bool]:
    """Select a maximal independent subset of rows via pivoted Cholesky of ``A A^T``."""
    m = A.shape[0]
    if m == 0:
        return np.arange(0), False
    norms = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    zero = norms == 0
    inconsistent = bool(np.any(np.abs(b[zero]) > 1e-9))
    nz = np.nonzero(~zero)[0]
    if nz.size == 0:
        return nz, inconsistent
    An = sp.diags(1.0 / norms[nz]) @ A[nz]
    G = (An @ An.T).toarray()
    c, piv, rank, info = sla.lapack.dpstrf(G, lower=1, tol=tol)
    piv = piv - 1
    keep = np.sort(piv[:rank])
    if rank < nz.size:
        drop = np.sort(piv[rank:])
        warnings.warn(f"dropped {drop.size} linearly dependent equality rows", RedundantRowsWarning, stacklevel=3)
        Ak, Ad = An[keep], An[drop]
        bk = b[nz][keep] / norms[nz][keep]
        bd = b[nz][drop] / norms[nz][drop]
        z, *_ = np.linalg.lstsq(Ak.T.toarray(), Ad.T.toarray(), rcond=None)
        resid = np.abs(bd - z.T @ bk)
        if np.any(resid > 1e-8 * (1 + np.abs(bd))):
            inconsistent = True
    return nz[keep], inconsistent


class Solution:
    """Result of :meth:`Problem.solve`.

    Attributes
    ----------
    status : str
        ``optimal``, ``infeasible``, ``unbounded`` or ``numerical-failure``.
    primal_value, dual_value : float
        Objective values in the user's sense (for a feasible max problem
        ``primal_value <= dual_value`` up to tolerance).
    primal_blocks : dict
        Value of every declared variable by name (strict shift included).
    dual_multipliers : dict
        Hermitian (or real) multiplier per constraint name. Equality
        multipliers ``Y`` enter the Lagrangian as ``tr[Y (rhs - lhs)]``;
        LMI multipliers are PSD.
    """

    def __init__(self, problem: Problem, conic: ConicProblem, meta: dict, res):
        self.problem = problem
        self.conic = conic
        self._meta = meta
        self.status = res.status
        self.iterations = res.iterations
        self.info = {"pinf": res.pinf, "dinf": res.dinf, "gap": res.gap, **res.info}
        self._x = res.x
        sgn = -1.0 if problem.sense == "max" else 1.0
        c0 = conic.c0
        if res.status == "infeasible":
            self.primal_value = -np.inf if problem.sense == "max" else np.inf
            self.dual_value = self.primal_value
        elif res.status == "unbounded":
            self.primal_value = np.inf if problem.sense == "max" else -np.inf
            self.dual_value = self.primal_value
        else:
            self.primal_value = sgn * res.pobj + c0
            self.dual_value = sgn * res.dobj + c0
        y_full = np.zeros(len(conic.row_owner))
        y_full[meta["keep"]] = res.y
        self._y_int = y_full
        self._y_user = sgn * y_full
        self.farkas_ray = None
        if res.status == "infeasible":
            by = float(conic.b @ res.y)
            self.farkas_ray = res.y / by if by > 0 else res.y
        self.primal_blocks = {v.name: self._var_value(v) for v in problem.vars}
        self.dual_multipliers = self._collect_duals()

    @classmethod
    def _failed(cls, problem, status, conic, meta, msg):
        from .ipm import IpmResult
        n = conic.A.shape[1]
        res = IpmResult(status, np.zeros(n), np.zeros(conic.A.shape[0]), np.zeros(n), np.nan, np.nan, 0,
                        np.inf, np.inf, np.inf, info={"message": msg})
        return cls(problem, conic, meta, res)

    def _var_value(self, v: Variable):
        h = self._meta["P"][v.uid] @ self._x
        return float(h[0]) if v.kind == "scalar" else unhvec(h, v.dim)

    def value(self, expr: Expr):
        """Evaluate an expression of the problem at the primal solution."""
        h = expr.const.copy()
        for uid, (v, L) in expr.terms.items():
            h = h + L @ (self._meta["P"][uid] @ self._x)
        return float(h[0]) if expr.dim == 0 else unhvec(h, expr.dim)

    def _collect_duals(self) -> dict:
        out = {}
        owner = self.conic.row_owner
        start = 0
        for ci, c in enumerate(self.problem.cons):
            k = c.expr.size
            seg = slice(start, start + k)
            start += k
            if c.kind == "eq":
                y = self._y_user[seg]
                out[c.name] = float(y[0]) if c.expr.dim == 0 else multiplier_from_row(y, c.expr.dim)
            else:
                out[c.name] = multiplier_from_row(self._y_int[seg], c.expr.dim)
        return out

    def dual(self, name: str):
        return self.dual_multipliers[name]

    def recompute_dual_value(self) -> float:
        """Dual objective rebuilt from the multipliers and constraint data."""
        total = self.conic.c0
        lmi_sign = 1.0 if self.problem.sense == "max" else -1.0
        for c in self.problem.cons:
            Y = self.dual_multipliers[c.name]
            if c.kind == "eq":
                # rhs of "expr == 0" form is -const
                if c.expr.dim == 0:
                    total += Y * (-c.expr.const[0])
                else:
                    total += float(np.real(np.trace(Y @ unhvec(-c.expr.const, c.expr.dim))))
            else:
                total += lmi_sign * float(np.real(np.trace(Y @ unhvec(c.expr.const, c.expr.dim))))
        return total

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def embed_complex(problem: Problem) -> ConicProblem:
    """Compile ``problem`` to the real-symmetric standard form."""
    return problem.compile()[0]


__all__ = [
    "Problem", "Expr", "Solution", "ConicProblem", "MalformedProblem", "RedundantRowsWarning",
    "esum", "linear_map_matrix", "embed_complex", "embed_hermitian",
]
