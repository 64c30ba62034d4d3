"""Primal-dual interior-point method for real conic problems.

The solver works on the standard form

    minimize    c^T x
    subject to  A x = b,
                x = (x_free, X_1, ..., X_K),  X_k symmetric PSD,

where every PSD block is stored through its upper triangle ("atoms"): the
atom for entry ``(p, q)`` with ``p <= q`` equals ``X[p, q]``. With this
convention ``c^T x`` equals ``sum_k tr(C_k X_k)`` when the off-diagonal
atom coefficients are twice the symmetric matrix entries.

The search direction is Nesterov-Todd with a Mehrotra predictor-corrector.
Free variables enter through an augmented saddle-point system.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import kernels

log = logging.getLogger(__name__)

MAX_ITER_ENV = "QSTEER_MAX_ITER"


@dataclass
class IpmOptions:
    """Tolerances and limits of the interior-point iteration."""

    tol_gap: float = 1e-6
    tol_feas: float = 1e-8
    tol_target: float = 1e-10
    max_iter: int = 200
    infeas_tol: float = 1e-8
    use_kernel: bool | None = None

    def __post_init__(self):
        cap = os.environ.get(MAX_ITER_ENV)
        if cap:
            self.max_iter = min(self.max_iter, int(cap))


@dataclass
class IpmResult:
    status: str
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    pobj: float
    dobj: float
    iterations: int
    pinf: float
    dinf: float
    gap: float
    info: dict = field(default_factory=dict)


class _Group:
    """Blocks of equal size handled together with batched linear algebra."""

    def __init__(self, n: int, blocks: list[int], offsets: list[int], A_csc: sp.csc_matrix):
        self.n = n
        self.blocks = blocks
        K = len(blocks)
        iu, ju = np.triu_indices(n)
        self.iu, self.ju = iu, ju
        T = iu.size
        self.atom_idx = np.array([np.arange(offsets[b], offsets[b] + T) for b in blocks], dtype=np.int64).reshape(K, T)
        self.offdiag = (iu != ju)
        blk_ptr = [0]
        rows_all, ent_ptr, ent_p, ent_q, ent_v = [], [0], [], [], []
        dense = []
        for b in blocks:
            sub = A_csc[:, offsets[b]:offsets[b] + T].tocoo()
            r, t, v = sub.row, sub.col, sub.data
            p, q = iu[t], ju[t]
            off = p != q
            # symmetric matrix entries: diagonal atoms full, off-diagonal split
            rr = np.concatenate([r, r[off]])
            pp = np.concatenate([p, q[off]])
            qq = np.concatenate([q, p[off]])
            vv = np.concatenate([np.where(off, 0.5 * v, v), 0.5 * v[off]])
            order = np.lexsort((qq, pp, rr))
            rr, pp, qq, vv = rr[order], pp[order], qq[order], vv[order]
            urows, starts = np.unique(rr, return_index=True)
            rows_all.extend(urows.tolist())
            counts = np.diff(np.append(starts, rr.size))
            base = ent_ptr[-1]
            ent_ptr.extend((base + np.cumsum(counts)).tolist())
            ent_p.append(pp)
            ent_q.append(qq)
            ent_v.append(vv)
            blk_ptr.append(len(rows_all))
            Bd = np.zeros((urows.size, n, n))
            loc = np.repeat(np.arange(urows.size), counts)
            np.add.at(Bd, (loc, pp, qq), vv)
            dense.append(Bd)
        self.blk_ptr = np.array(blk_ptr, dtype=np.int64)
        self.rows = np.array(rows_all, dtype=np.int64)
        self.ent_ptr = np.array(ent_ptr, dtype=np.int64)
        cat = lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt)
        self.ent_p = cat(ent_p, np.int64)
        self.ent_q = cat(ent_q, np.int64)
        self.ent_v = cat(ent_v, np.float64)
        self.dense = dense

    # conversions between atoms and stacked matrices
    def primal_mat(self, x: np.ndarray) -> np.ndarray:
        a = x[self.atom_idx]
        X = np.zeros((len(self.blocks), self.n, self.n))
        X[:, self.iu, self.ju] = a
        X[:, self.ju, self.iu] = a
        return X

    def primal_atoms(self, X: np.ndarray, out: np.ndarray) -> None:
        out[self.atom_idx] = X[:, self.iu, self.ju]

    def dual_mat(self, s: np.ndarray) -> np.ndarray:
        a = s[self.atom_idx] * np.where(self.offdiag, 0.5, 1.0)
        S = np.zeros((len(self.blocks), self.n, self.n))
        S[:, self.iu, self.ju] = a
        S[:, self.ju, self.iu] = a
        return S

    def dual_atoms(self, S: np.ndarray, out: np.ndarray) -> None:
        out[self.atom_idx] = S[:, self.iu, self.ju] * np.where(self.offdiag, 2.0, 1.0)

    def schur(self, W: np.ndarray, M: np.ndarray, use_kernel: bool) -> None:
        if use_kernel:
            kernels.schur_group(np.ascontiguousarray(W), self.blk_ptr, self.rows, self.ent_ptr,
                                self.ent_p, self.ent_q, self.ent_v, M)
        else:
            kernels.schur_group_ref(W, self.blk_ptr, self.rows, self.dense, M)


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _max_step(L: np.ndarray, D: np.ndarray) -> float:
    """Largest step ``a`` with ``L L^T + a D`` PSD, for stacked Cholesky factors."""
    Li = np.linalg.inv(L)
    T = _sym(Li @ D @ np.swapaxes(Li, -1, -2))
    lmin = np.min(np.linalg.eigvalsh(T))
    return np.inf if lmin >= 0 else -1.0 / lmin


def _chol(X: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        n = X.shape[-1]
        w = np.linalg.eigvalsh(X)
        shift = max(0.0, -np.min(w)) + 1e-300 + 1e-15 * np.max(np.abs(w))
        return np.linalg.cholesky(X + shift * np.eye(n))


class ConicSolver:
    """Interior-point solver for one conic problem instance.

    Parameters
    ----------
    A : sparse matrix, shape (m, n_atoms)
    b : ndarray, shape (m,)
    c : ndarray, shape (n_atoms,)
    nfree : int
        Leading atoms that are free variables.
    block_dims : list of int
        Sizes of the PSD blocks, stored after the free atoms.
    """

    def __init__(self, A, b, c, nfree: int, block_dims: list[int], options: IpmOptions | None = None):
        self.opts = options or IpmOptions()
        A = sp.csr_matrix(A, dtype=float)
        self.m, self.natoms = A.shape
        self.nfree = nfree
        self.block_dims = list(block_dims)
        offsets, off = [], nfree
        for n in self.block_dims:
            offsets.append(off)
            off += n * (n + 1) // 2
        if off != self.natoms:
            raise ValueError("atom count does not match block structure")
        self.offsets = offsets
        # row and objective scaling
        rn = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
        rn[rn == 0] = 1.0
        self.row_scale = rn
        A = sp.diags(1.0 / rn) @ A
        b = np.asarray(b, float) / rn
        c = np.asarray(c, float)
        self.bscale = max(1.0, np.linalg.norm(b))
        self.cscale = max(1.0, np.linalg.norm(c))
        self.A = A.tocsr()
        self.AT = self.A.T.tocsr()
        self.b = b / self.bscale
        self.c = c / self.cscale
        self.Af = self.A[:, :nfree].toarray() if nfree else np.zeros((self.m, 0))
        A_csc = self.A.tocsc()
        by_size: dict[int, list[int]] = {}
        for k, n in enumerate(self.block_dims):
            by_size.setdefault(n, []).append(k)
        self.groups = [_Group(n, blks, offsets, A_csc) for n, blks in sorted(by_size.items())]
        self.nu = sum(self.block_dims)
        use = self.opts.use_kernel
        self.use_kernel = kernels.HAVE_KERNEL if use is None else (use and kernels.HAVE_KERNEL)

    # helpers -----------------------------------------------------------
    def _mats(self, v, dual: bool):
        return [g.dual_mat(v) if dual else g.primal_mat(v) for g in self.groups]

    def _atoms(self, mats, dual: bool, free=None):
        out = np.zeros(self.natoms)
        if free is not None and self.nfree:
            out[: self.nfree] = free
        for g, Mx in zip(self.groups, mats):
            (g.dual_atoms if dual else g.primal_atoms)(Mx, out)
        return out

    def solve(self) -> IpmResult:
        o = self.opts
        m, nf = self.m, self.nfree
        nmax = max(self.block_dims) if self.block_dims else 1
        xi = max(10.0, np.sqrt(nmax))
        eta = max(10.0, np.sqrt(nmax))
        X = [xi * np.broadcast_to(np.eye(g.n), (len(g.blocks), g.n, g.n)).copy() for g in self.groups]
        S = [eta * np.broadcast_to(np.eye(g.n), (len(g.blocks), g.n, g.n)).copy() for g in self.groups]
        xf = np.zeros(nf)
        y = np.zeros(m)
        status = "numerical-failure"
        best = None
        reduced = False
        it = 0
        hist = []
        for it in range(o.max_iter + 1):
            x = self._atoms(X, dual=False, free=xf)
            s = self._atoms(S, dual=True)
            rp = self.b - self.A @ x
            rd_all = self.c - self.AT @ y - s
            rf = rd_all[:nf]
            rd = rd_all.copy()
            rd[:nf] = 0.0
            pobj = float(self.c @ x)
            dobj = float(self.b @ y)
            xs = float(x[nf:] @ s[nf:])
            mu = xs / max(self.nu, 1)
            pinf = np.linalg.norm(rp) / (1 + np.linalg.norm(self.b))
            dinf = np.linalg.norm(rd_all) / (1 + np.linalg.norm(self.c))
            gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
            cgap = xs / (1 + abs(pobj) + abs(dobj))
            err = max(pinf, dinf, gap, cgap)
            hist.append(err)
            log.debug("it %d pinf %.2e dinf %.2e gap %.2e cgap %.2e mu %.2e", it, pinf, dinf, gap, cgap, mu)
            # prefer iterates that are feasible to the loose tolerance
            rank = (0 if (pinf < o.tol_feas and dinf < o.tol_feas) else 1, err)
            if best is None or rank < best[0]:
                best = (rank, x.copy(), y.copy(), s.copy(), it)
            if err < o.tol_target:
                status = "optimal"
                break
            # infeasibility certificates
            if dobj > 0:
                ray = np.linalg.norm(self.AT @ y + np.concatenate([np.zeros(nf), s[nf:]])) / dobj
                if ray < o.infeas_tol and pinf > o.tol_feas:
                    status = "infeasible"
                    break
            if pobj < 0:
                ray = np.linalg.norm(self.A @ x) / (-pobj)
                if ray < o.infeas_tol and dinf > o.tol_feas:
                    status = "unbounded"
                    break
            if it == o.max_iter:
                break
            if len(hist) > 12 and min(hist[-6:]) > 0.5 * min(hist[:-6]):
                # stagnation; accept when the loose tolerances are met
                break
            try:
                step = self._step(X, S, xf, y, rp, rd, rf, mu)
            except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
                log.debug("ipm step failed: %s", exc)
                break
            X, S, xf, y = step
        if status == "numerical-failure" and best is not None:
            err, x, y, s, _ = best
            rp = self.b - self.A @ x
            rd_all = self.c - self.AT @ y - s
            pobj, dobj = float(self.c @ x), float(self.b @ y)
            pinf = np.linalg.norm(rp) / (1 + np.linalg.norm(self.b))
            dinf = np.linalg.norm(rd_all) / (1 + np.linalg.norm(self.c))
            gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
            if pinf < o.tol_feas and dinf < o.tol_feas and gap < o.tol_gap:
                status = "optimal"
                reduced = True
        elif status != "optimal":
            x = self._atoms(X, dual=False, free=xf)
            s = self._atoms(S, dual=True)
        # unscale
        xu = x * self.bscale
        yu = y * self.cscale / self.row_scale
        su = s * self.cscale
        return IpmResult(status, xu, yu, su, pobj * self.bscale * self.cscale,
                         dobj * self.bscale * self.cscale, it, float(pinf), float(dinf), float(gap),
                         info={"kernel": self.use_kernel, "reduced_accuracy": reduced})

    def _step(self, X, S, xf, y, rp, rd, rf, mu):
        nf = self.nfree
        # NT scaling per group
        scal = []
        M = np.zeros((self.m, self.m))
        for g, Xg, Sg in zip(self.groups, X, S):
            L = _chol(Xg)
            R = _chol(Sg)
            U, sv, Vt = np.linalg.svd(np.swapaxes(R, -1, -2) @ L)
            V = np.swapaxes(Vt, -1, -2)
            G = L @ V / np.sqrt(sv)[:, None, :]
            Ginv = (np.sqrt(sv)[:, :, None] * Vt) @ np.linalg.inv(L)
            W = _sym(G @ np.swapaxes(G, -1, -2))
            scal.append((L, R, G, Ginv, W, sv))
            g.schur(W, M, self.use_kernel)
        Af = self.Af
        Rd = self._mats(rd, dual=True)
        HRd = [sc[4] @ r @ sc[4] for sc, r in zip(scal, Rd)]
        A_HRd = self.A @ self._atoms(HRd, dual=False)
        dscale = np.max(np.abs(np.diag(M))) if self.m else 1.0
        if nf:
            K = np.zeros((self.m + nf, self.m + nf))
            K[: self.m, : self.m] = M
            K[: self.m, self.m:] = Af
            K[self.m:, : self.m] = Af.T
            K[self.m:, self.m:] = -1e-14 * max(dscale, 1.0) * np.eye(nf)
            fac = ("lu", sla.lu_factor(K, check_finite=False))
        else:
            try:
                fac = ("chol", sla.cho_factor(M, check_finite=False))
            except np.linalg.LinAlgError:
                M2 = M + 1e-13 * max(dscale, 1.0) * np.eye(self.m)
                try:
                    fac = ("chol", sla.cho_factor(M2, check_finite=False))
                except np.linalg.LinAlgError:
                    fac = ("lu", sla.lu_factor(M2, check_finite=False))

        Kmat = K if nf else M

        def solve_k(rhs):
            if fac[0] == "chol":
                return sla.cho_solve(fac[1], rhs, check_finite=False)
            return sla.lu_solve(fac[1], rhs, check_finite=False)

        def newton(Rc):
            h = rp - self.A @ self._atoms(Rc, dual=False) + A_HRd
            rhs = np.concatenate([h, rf]) if nf else h
            sol = solve_k(rhs)
            # iterative refinement against the assembled system
            for _ in range(2):
                res = rhs - Kmat @ sol
                if np.linalg.norm(res) <= 1e-15 * (1 + np.linalg.norm(rhs)):
                    break
                sol = sol + solve_k(res)
            dy = sol[: self.m]
            dxf = sol[self.m:]
            ds_atoms = rd - self.AT @ dy
            ds_atoms[:nf] = 0.0
            dS = self._mats(ds_atoms, dual=True)
            dX = [_sym(rc - sc[4] @ d @ sc[4]) for rc, sc, d in zip(Rc, scal, dS)]
            return dX, dS, dxf, dy

        def steps(dX, dS):
            ap, ad = np.inf, np.inf
            for sc, dx, ds in zip(scal, dX, dS):
                ap = min(ap, _max_step(sc[0], dx))
                ad = min(ad, _max_step(sc[1], ds))
            return ap, ad

        # predictor
        Rc = [-Xg for Xg in X]
        dXa, dSa, _, _ = newton(Rc)
        ap, ad = steps(dXa, dSa)
        ap1, ad1 = min(1.0, ap), min(1.0, ad)
        xs_aff = sum(np.sum((Xg + ap1 * dx) * (Sg + ad1 * ds)) for Xg, Sg, dx, ds in zip(X, S, dXa, dSa))
        mu_aff = xs_aff / max(self.nu, 1)
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        # corrector in the scaled space
        Rc = []
        for sc, dx, ds in zip(scal, dXa, dSa):
            L, R, G, Ginv, W, sv = sc
            dXt = Ginv @ dx @ np.swapaxes(Ginv, -1, -2)
            dSt = np.swapaxes(G, -1, -2) @ ds @ G
            n = sv.shape[1]
            rhs = -(dXt @ dSt + dSt @ dXt)
            rhs += 2 * sigma * mu * np.eye(n)
            idx = np.arange(n)
            rhs[:, idx, idx] -= 2 * sv**2
            D = rhs / (sv[:, :, None] + sv[:, None, :])
            Rc.append(_sym(G @ D @ np.swapaxes(G, -1, -2)))
        dX, dS, dxf, dy = newton(Rc)
        ap, ad = steps(dX, dS)
        tau = 0.9 + 0.09 * min(1.0, ap, ad)
        ap = min(1.0, tau * ap)
        ad = min(1.0, tau * ad)
        Xn = [_sym(Xg + ap * d) for Xg, d in zip(X, dX)]
        Sn = [_sym(Sg + ad * d) for Sg, d in zip(S, dS)]
        return Xn, Sn, xf + ap * dxf, y + ad * dy
