"""LHS membership tests and optimal steering inequalities.

The test decomposes an assemblage over deterministic strategies,
``sigma_{a|x} = sum_lam D(a|x, lam) sigma_lam``, with the slack form
``sigma_lam >= mu*1``. A negative optimal ``mu`` demonstrates steering and
the equality multipliers form the optimal steering functional ``F_{a|x}``,
normalized by ``sum_{a,x,lam} D(a|x,lam) tr F_{a|x} = 1`` with LHS bound 0.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .assemblage import Assemblage, MeasurementSet, enumerate_strategies, generate, lift_efficiency, _cplx_json, _from_cplx_json
from .sdp import Problem, RedundantRowsWarning, esum

VERDICT_TOL = 1e-8
CONVENTIONS = ("dual-eq12", "weight-dual", "robustness-dual", "guessing-dual")


class SolverFailure(RuntimeError):
    """The SDP solver did not reach an optimal status."""


@dataclass(eq=False)
class SteeringFunctional:
    """Operators ``F_{a|x}`` (shape ``(m, o, d, d)``) with their LHS bound."""

    operators: np.ndarray
    lhs_bound: float
    scale_convention: str = "dual-eq12"

    def __post_init__(self):
        if self.scale_convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.scale_convention!r}")
        F = np.asarray(self.operators, dtype=complex)
        self.operators = 0.5 * (F + np.conj(np.swapaxes(F, -1, -2)))

    def to_json(self) -> dict:
        m, o, d = self.operators.shape[:3]
        return {"schema": "witness.v1", "dim": d, "m": m, "o": o, "elements": _cplx_json(self.operators),
                "lhs_bound": self.lhs_bound, "scale_convention": self.scale_convention}

    @classmethod
    def from_json(cls, obj: dict) -> "SteeringFunctional":
        if obj.get("schema") != "witness.v1":
            raise ValueError(f"unexpected schema {obj.get('schema')!r}")
        return cls(_from_cplx_json(obj["elements"]), float(obj["lhs_bound"]), obj["scale_convention"])


@dataclass(eq=False)
class LhsVerdict:
    demonstrates_steering: bool
    mu_star: float
    lhs_model: np.ndarray | None = None
    witness: SteeringFunctional | None = None
    boundary: bool = False
    info: dict = field(default_factory=dict)


def evaluate(f: SteeringFunctional | np.ndarray, a: Assemblage) -> float:
    """``sum_{a,x} tr(F_{a|x} sigma_{a|x})``."""
    F = f.operators if isinstance(f, SteeringFunctional) else np.asarray(f)
    if F.shape != a.members.shape:
        raise ValueError(f"functional shape {F.shape} != assemblage shape {a.members.shape}")
    return float(np.real(np.einsum("xaij,xaji->", F, a.members)))


def canonical_gauge(F: np.ndarray) -> np.ndarray:
    """Shift ``F_{a|x}`` by input-only terms so every ``sum_a F_{a|x}`` is equal.

    Adding ``K_x`` with ``sum_x K_x = 0`` changes neither the dual
    constraints nor the value on no-signalling assemblages.
    """
    o = F.shape[1]
    B = F.sum(axis=1) / o
    return F - B[:, None] + B.mean(axis=0)[None, None]


def lhs_constraint_sums(F: np.ndarray, strategies=None) -> np.ndarray:
    """``sum_{a,x} D(a|x,lam) F_{a|x}`` for every strategy, shape ``(d, n, n)``."""
    m, o = F.shape[:2]
    st = strategies or enumerate_strategies(m, o)
    return np.einsum("xal,xaij->lij", st.table, F)


def verify_lhs_model(a: Assemblage, sig_l: np.ndarray, tol_eq: float = 1e-7, tol_psd: float = 1e-8) -> bool:
    st = enumerate_strategies(a.m, a.o)
    rec = np.einsum("xal,lij->xaij", st.table, sig_l)
    if np.max(np.abs(rec - a.members)) > tol_eq:
        return False
    return float(np.min(np.linalg.eigvalsh(sig_l))) >= -tol_psd


def verify_witness(f: SteeringFunctional, tol: float = 1e-8) -> bool:
    """Check the dual-eq12 constraints of a functional."""
    S = lhs_constraint_sums(f.operators)
    if float(np.min(np.linalg.eigvalsh(S))) < -tol:
        return False
    return abs(float(np.real(np.trace(S.sum(axis=0)))) - 1.0) <= tol


def _lhs_problem(a: Assemblage):
    st = enumerate_strategies(a.m, a.o)
    prob = Problem(strict=True)
    sig = [prob.herm(a.d_B, name=f"sigma_{l}") for l in range(st.d)]
    for x in range(a.m):
        for k in range(a.o):
            lams = np.nonzero(st.table[x, k])[0]
            prob.add_eq(esum([sig[l] for l in lams]), a.members[x, k], name=f"F_{x}_{k}")
    return prob, sig, st


def check_lhs(a: Assemblage, validate: bool = True) -> LhsVerdict:
    """Decide whether ``a`` admits a local-hidden-state model.

    Both certificates are re-verified by direct arithmetic. Inside the band
    ``|mu*| <= 1e-8`` the verdict is "boundary" and both are attempted.
    """
    if validate:
        a.validate()
    prob, sig, st = _lhs_problem(a)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RedundantRowsWarning)
        sol = prob.solve()
    if sol.status != "optimal":
        raise SolverFailure(f"LHS test ended with status {sol.status}")
    mu = sol.primal_value
    F = np.array([[sol.dual(f"F_{x}_{k}") for k in range(a.o)] for x in range(a.m)])
    norm = float(np.real(np.trace(lhs_constraint_sums(F, st).sum(axis=0))))
    F = canonical_gauge(F / norm)
    wit = SteeringFunctional(F, 0.0, "dual-eq12")
    sig_l = np.array([sol.value(s) for s in sig])
    steering = mu < -VERDICT_TOL
    boundary = abs(mu) <= VERDICT_TOL
    model = sig_l if (not steering and verify_lhs_model(a, sig_l)) else None
    beta = evaluate(wit, a)
    wit_ok = verify_witness(wit) and (beta < 0 or boundary)
    if steering and not wit_ok:
        raise SolverFailure("steering witness failed re-verification")
    if not steering and model is None and not boundary:
        raise SolverFailure("LHS model failed re-verification")
    return LhsVerdict(steering, mu, model, wit if (steering or (boundary and wit_ok)) else None, boundary,
                      info={"iterations": sol.iterations, "beta": beta, "dual_value": sol.dual_value})


def optimal_inequality(a: Assemblage) -> SteeringFunctional:
    """Optimal functional of the dual program (LHS bound 0, eq12 scale)."""
    a.validate()
    prob, sig, st = _lhs_problem(a)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RedundantRowsWarning)
        sol = prob.solve()
    if sol.status != "optimal":
        raise SolverFailure(f"LHS test ended with status {sol.status}")
    F = np.array([[sol.dual(f"F_{x}_{k}") for k in range(a.o)] for x in range(a.m)])
    norm = float(np.real(np.trace(lhs_constraint_sums(F, st).sum(axis=0))))
    return SteeringFunctional(canonical_gauge(F / norm), 0.0, "dual-eq12")


def to_unit_bound(f: SteeringFunctional) -> tuple[np.ndarray, float]:
    """Rewrite ``beta >= 0`` as ``sum tr(G sigma) >= 1`` on normalized assemblages."""
    m = f.operators.shape[0]
    d = f.operators.shape[-1]
    return f.operators + np.eye(d) / m, f.lhs_bound + 1.0


def correlator_inequality(f: SteeringFunctional, tol: float = 1e-6) -> tuple[np.ndarray, float]:
    """Two-outcome functional as ``sum_x <A_x O_x> <= bound``.

    Uses ``F_{a|x} = B_x + (-1)^a C_x``. When ``sum_x B_x`` is proportional
    to the identity the LHS condition reads ``sum_x <A_x (-C_x)> <= b``; the
    observables are rescaled to unit operator norm.
    """
    F = f.operators
    if F.shape[1] != 2:
        raise ValueError("correlator form needs two outcomes")
    B = 0.5 * (F[:, 0] + F[:, 1])
    C = 0.5 * (F[:, 0] - F[:, 1])
    Bs = B.sum(axis=0)
    d = Bs.shape[0]
    b = np.trace(Bs).real / d
    if np.max(np.abs(Bs - b * np.eye(d))) > tol:
        raise ValueError("marginal part is not proportional to the identity")
    O = -C
    scale = max(np.max(np.abs(np.linalg.eigvalsh(O[x]))) for x in range(O.shape[0]))
    return O / scale, (b - f.lhs_bound) / scale


def efficiency_threshold(rho: np.ndarray, dims: Sequence[int], meas: MeasurementSet,
                         eta_grid: Sequence[float] | None = None) -> float:
    """Smallest grid efficiency at which the lifted assemblage shows steering.

    Assumes monotonicity in ``eta`` and bisects over the sorted grid. Returns
    ``1.0`` when no grid point demonstrates steering.
    """
    grid = np.sort(np.asarray(eta_grid if eta_grid is not None else np.linspace(0, 1, 201), float))
    if grid.size == 0 or grid[0] < 0 or grid[-1] > 1:
        raise ValueError("eta grid must lie in [0, 1]")
    base = generate(rho, dims, meas)

    def steer(i):
        return check_lhs(lift_efficiency(base, float(grid[i]))).demonstrates_steering

    hi = grid.size - 1
    if not steer(hi):
        return 1.0
    lo = -1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if steer(mid):
            hi = mid
        else:
            lo = mid
    return float(grid[hi])
