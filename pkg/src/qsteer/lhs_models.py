"""LHS models for qubit-qudit states from finite projective measurement sets.

If an operator ``O`` has an LHS model for the dichotomic measurements along
a set of Bloch directions whose symmetrized convex hull contains a ball of
radius ``r``, then ``r O + (1 - r) 1/2 (x) O_B`` has an LHS model for every
projective measurement on the qubit. Mixing in ``gamma_A (x) rho_B`` with
weight one half extends the conclusion to POVMs.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .assemblage import directions_measurements, enumerate_strategies
from .detect import SolverFailure
from .hermat import as_hermitian
from .sdp import Problem, RedundantRowsWarning, esum

_PHI = (1 + np.sqrt(5)) / 2


class DegeneratePolytope(ValueError):
    """Directions do not span a full-dimensional polytope around the origin."""


@dataclass(eq=False)
class MeasurementPolytope:
    directions: np.ndarray
    radius: float

    def to_json(self) -> dict:
        return {"directions": self.directions.tolist(), "radius": self.radius}


@dataclass(eq=False)
class LhsCertificate:
    """Outcome of a certification run; ``O`` and ``sigma_lambda`` are set on success."""

    certified: bool
    mu_star: float
    O: np.ndarray | None = None
    sigma_lambda: np.ndarray | None = None
    radius: float = 0.0
    state: np.ndarray | None = None
    objective: float | None = None
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def c(v):
            return None if v is None else np.stack([v.real, v.imag], -1).tolist()
        return {"certified": self.certified, "mu_star": self.mu_star, "radius": self.radius, "O": c(self.O),
                "sigma_lambda": c(self.sigma_lambda), "state": c(self.state), "objective": self.objective}


def _unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def octahedron() -> np.ndarray:
    return np.eye(3)


def icosahedron() -> np.ndarray:
    p = _PHI
    return _unit([[0, 1, p], [0, 1, -p], [1, p, 0], [1, -p, 0], [p, 0, 1], [-p, 0, 1]])


def icosidodecahedron() -> np.ndarray:
    p = _PHI
    pts = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    base = np.array([0.5, p / 2, p * p / 2])
    for s1 in (1, -1):
        for s2 in (1, -1):
            v = base * np.array([1, s1, s2])
            for k in range(3):
                pts.append(np.roll(v, k))
    return _unit(pts)


def dodecahedron() -> np.ndarray:
    p = _PHI
    return _unit([[1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1], [0, 1 / p, p], [0, 1 / p, -p],
                  [1 / p, p, 0], [1 / p, -p, 0], [p, 0, 1 / p], [-p, 0, 1 / p]])


def cover13() -> np.ndarray:
    """Dodecahedron axes plus the coordinate axes (r ~ 0.823)."""
    return np.vstack([dodecahedron(), octahedron()])


def sphere21() -> np.ndarray:
    """Icosahedron axes together with the icosidodecahedron axes."""
    return np.vstack([icosahedron(), icosidodecahedron()])


DIRECTION_SETS = {"octahedron": octahedron, "icosahedron": icosahedron, "dodecahedron": dodecahedron,
                  "cover13": cover13, "icosidodecahedron": icosidodecahedron, "sphere21": sphere21}
# 2**m deterministic strategies; beyond 15 directions the LHS program is out of reach
MAX_DIRECTIONS = 15


def inscribed_radius(directions) -> MeasurementPolytope:
    """Largest ball around the origin inside the hull of ``{+-directions}``."""
    d = _unit(np.atleast_2d(directions))
    if d.shape[1] != 3:
        raise ValueError("directions must be vectors in R^3")
    pts = np.vstack([d, -d])
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegeneratePolytope("directions are coplanar") from exc
    # equations are (n, c) with n.x + c <= 0 inside and |n| = 1
    r = float(np.min(-hull.equations[:, 3]))
    if r <= 1e-12:
        raise DegeneratePolytope("origin is not interior")
    return MeasurementPolytope(d, r)


def _polytope(poly) -> MeasurementPolytope:
    if isinstance(poly, MeasurementPolytope):
        return poly
    if isinstance(poly, str):
        return inscribed_radius(DIRECTION_SETS[poly]())
    return inscribed_radius(poly)


def _split_dims(rho):
    n = rho.shape[0]
    if n % 2:
        raise ValueError("state must act on C^2 (x) C^d")
    return n // 2


def _add_lhs_constraints(prob, O, poly, dB):
    """``tr_A[(Pi_{a|x} (x) 1) O] = sum D sigma_lam`` for the vertex measurements."""
    if len(poly.directions) > MAX_DIRECTIONS:
        raise ValueError(f"{len(poly.directions)} directions exceed the supported {MAX_DIRECTIONS}")
    meas = directions_measurements(poly.directions)
    st = enumerate_strategies(meas.m, 2, cap=1 << MAX_DIRECTIONS)
    sig = [prob.herm(dB, name=f"sigma_{l}") for l in range(st.d)]
    for x in range(meas.m):
        for k in range(2):
            P = meas.elements[x, k]
            f = lambda H, P=P: np.einsum("ij,...jbic->...bc", P, H.reshape(H.shape[:-2] + (2, dB, 2, dB)))
            lhs = O.map(f, dB)
            prob.add_eq(esum([sig[l] for l in np.nonzero(st.table[x, k])[0]]) - lhs, 0.0)
    return sig, meas, st


def _noisy_map(r, dB, gamma=None):
    """Linear map ``O -> r O + (1-r) 1/2 (x) O_B``, optionally half-mixed with ``gamma (x) O_B``."""
    def f(H):
        OB = np.einsum("...ibic->...bc", H.reshape(H.shape[:-2] + (2, dB, 2, dB)))
        noise = np.einsum("ij,...bc->...ibjc", np.eye(2) / 2, OB).reshape(H.shape)
        out = r * H + (1 - r) * noise
        if gamma is not None:
            out = 0.5 * out + 0.5 * np.einsum("ij,...bc->...ibjc", gamma, OB).reshape(H.shape)
        return out
    return f


def noisy_qubit_map(O: np.ndarray, r: float, gamma=None) -> np.ndarray:
    """Apply the shrinking identity to a (possibly non-physical) operator."""
    O = np.asarray(O, complex)
    return _noisy_map(r, _split_dims(O), gamma)(O)


def _check_gamma(gamma):
    g = as_hermitian(gamma)
    if g.shape != (2, 2) or abs(np.trace(g).real - 1) > 1e-9 or np.linalg.eigvalsh(g).min() < -1e-10:
        raise ValueError("gamma_A must be a qubit density matrix")
    return g


def _certify(rho, poly, gamma):
    rho = as_hermitian(rho)
    dB = _split_dims(rho)
    poly = _polytope(poly)
    n = 2 * dB
    prob = Problem(strict=True)
    O = prob.herm(n, psd=False, name="O")
    sig, meas, st = _add_lhs_constraints(prob, O, poly, dB)
    prob.add_eq(O.map(_noisy_map(poly.radius, dB, gamma), n), rho, name="target")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RedundantRowsWarning)
        sol = prob.solve()
    if sol.status == "infeasible":
        return LhsCertificate(False, -np.inf, radius=poly.radius, info={"status": sol.status})
    if sol.status != "optimal":
        raise SolverFailure(f"LHS-model search ended with status {sol.status}")
    Ov = sol.value(O)
    sig_l = np.array([sol.value(s) for s in sig])
    mu = sol.primal_value
    ok = _verify(Ov, sig_l, poly, meas, rho, gamma)
    if not ok:
        return LhsCertificate(False, mu, radius=poly.radius, info={"iterations": sol.iterations})
    return LhsCertificate(True, mu, Ov, sig_l, poly.radius, rho, info={"iterations": sol.iterations})


def _verify(Ov, sig_l, poly, meas, target, gamma, tol_eq=1e-7, tol_state=1e-8):
    dB = Ov.shape[0] // 2
    r4 = Ov.reshape(2, dB, 2, dB)
    members = np.einsum("xaij,jbic->xabc", meas.elements, r4)
    rec = np.einsum("xal,lij->xaij", enumerate_strategies(meas.m, 2, cap=1 << MAX_DIRECTIONS).table, sig_l)
    if np.max(np.abs(rec - members)) > tol_eq or np.linalg.eigvalsh(sig_l).min() < -1e-8:
        return False
    return np.max(np.abs(noisy_qubit_map(Ov, poly.radius, gamma) - target)) <= tol_state


def certify_unsteerable_projective(rho, poly="icosahedron") -> LhsCertificate:
    """Certify that ``rho`` has an LHS model for all projective qubit measurements."""
    return _certify(rho, poly, None)


def certify_unsteerable_povm(rho, poly="icosahedron", gamma_A=None) -> LhsCertificate:
    """Certify that ``rho`` has an LHS model for all qubit POVMs."""
    g = _check_gamma(np.eye(2) / 2 if gamma_A is None else gamma_A)
    return _certify(rho, poly, g)


def find_unsteerable_from_witness(W, poly="icosahedron", mode: str = "projective", gamma_A=None,
                                  tol: float = 1e-8) -> LhsCertificate:
    """Minimize ``tr[W O~]`` over unit-trace states ``O~`` with a certified LHS model.

    A negative optimum yields an entangled state (``W`` is a witness) that
    is unsteerable; it is returned as ``state``.
    """
    if mode not in ("projective", "povm"):
        raise ValueError("mode must be 'projective' or 'povm'")
    W = as_hermitian(W)
    dB = _split_dims(W)
    poly = _polytope(poly)
    gamma = None if mode == "projective" else _check_gamma(np.eye(2) / 2 if gamma_A is None else gamma_A)
    n = 2 * dB
    prob = Problem("min")
    O = prob.herm(n, psd=False, name="O")
    Ot = prob.herm(n, name="O_tilde")
    sig, meas, st = _add_lhs_constraints(prob, O, poly, dB)
    prob.add_eq(Ot - O.map(_noisy_map(poly.radius, dB, gamma), n), 0.0, name="shrink")
    prob.add_eq(Ot.tr(), 1.0, name="norm")
    prob.minimize(Ot.inner(W))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RedundantRowsWarning)
        sol = prob.solve()
    if sol.status != "optimal":
        raise SolverFailure(f"witness search ended with status {sol.status}")
    val = sol.primal_value
    info = {"iterations": sol.iterations}
    if val >= -tol:
        return LhsCertificate(False, 0.0, radius=poly.radius, objective=val, info=info)
    Ov = sol.value(O)
    state = sol.value(Ot)
    state = 0.5 * (state + state.conj().T)
    sig_l = np.array([sol.value(s) for s in sig])
    ok = (np.linalg.eigvalsh(state).min() >= -1e-8 and abs(np.trace(state).real - 1) <= 1e-8
          and np.trace(W @ state).real < 0 and _verify(Ov, sig_l, poly, meas, state, gamma))
    return LhsCertificate(bool(ok), 0.0, Ov if ok else None, sig_l if ok else None, poly.radius,
                          state if ok else None, val, info)
