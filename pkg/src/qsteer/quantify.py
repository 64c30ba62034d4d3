"""Steering and incompatibility quantifiers.

All quantifiers are conic programs over unnormalized hidden states
``s_lam`` (``tilde sigma`` in the usual notation) attached to the
deterministic strategies. Incompatibility quantifiers apply the same
programs to POVM elements with a parent POVM ``G_lam``.

Noise kinds for the robustness family
-------------------------------------
``all-assemblages``
    ``sum_lam D s_lam - sigma >= 0``.
``lhs-assemblages``
    ``sum_lam D (s_lam - t_lam) = sigma`` with ``t_lam >= 0``.
``singleton-maximally-mixed``
    ``sum_lam D s_lam = sigma + t 1/(d_B o)``.
``reduced-state``
    ``sum_lam D s_lam = sigma + t rho_B / o``.
``consistent-all``
    as ``all-assemblages`` plus ``sum_lam s_lam = (1 + t) rho_B``.
``consistent-lhs``
    as ``lhs-assemblages`` plus ``sum_lam t_lam = t rho_B``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .assemblage import (Assemblage, MeasurementSet, enumerate_strategies, generate, random_projective,
                         _cplx_json)
from .detect import SolverFailure, SteeringFunctional, lhs_constraint_sums
from .hermat import partial_trace, haar_unitary
from .sdp import Problem, RedundantRowsWarning, esum

NOISE_KINDS = ("all-assemblages", "lhs-assemblages", "singleton-maximally-mixed", "reduced-state",
               "consistent-all", "consistent-lhs")
AGREE_TOL = 1e-6


@dataclass(eq=False)
class QuantifierResult:
    """Optimal value with primal decomposition and dual functional."""

    name: str
    value: float
    dual_value: float
    primal_certificate: dict = field(default_factory=dict)
    dual_certificate: SteeringFunctional | None = None
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        prim = {k: _cplx_json(v) if isinstance(v, np.ndarray) and np.iscomplexobj(v) else
                (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.primal_certificate.items()}
        return {"schema": "quantifier.v1", "name": self.name, "value": self.value, "dual_value": self.dual_value,
                "primal_certificate": prim,
                "dual_witness": self.dual_certificate.to_json() if self.dual_certificate else None}


def _solve(prob: Problem, what: str):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RedundantRowsWarning)
        sol = prob.solve()
    if sol.status != "optimal":
        raise SolverFailure(f"{what}: solver status {sol.status}")
    return sol


def _dsum(vars_, table, x, a):
    lams = np.nonzero(table[x, a])[0]
    return esum([vars_[l] for l in lams])


def _members_array(sol, names, m, o):
    return np.array([[sol.dual(names(x, a)) for a in range(o)] for x in range(m)])


def steering_weight(a: Assemblage, consistent: bool = False) -> QuantifierResult:
    """Steering weight, or its consistent variant (CSW) with fixed reduced state.

    Primal: minimize ``1 - tr sum s_lam`` subject to
    ``sigma_{a|x} - sum_lam D s_lam >= 0`` and ``s_lam >= 0``. The LMI
    multipliers ``F_{a|x} >= 0`` satisfy ``sum D F >= 1`` and give the value
    ``1 - tr sum F sigma`` (for the consistent variant the dual has an extra
    free term, so only the primal pieces are re-verified).
    """
    a.validate()
    st = enumerate_strategies(a.m, a.o)
    d = a.d_B
    prob = Problem("min")
    s = [prob.herm(d, name=f"s_{l}") for l in range(st.d)]
    name = lambda x, k: f"F_{x}_{k}"
    for x in range(a.m):
        for k in range(a.o):
            prob.add_psd(a.members[x, k] - _dsum(s, st.table, x, k), name=name(x, k))
    total = esum([si.tr() for si in s])
    if consistent:
        scale = prob.scalar(name="scale")
        prob.add_eq(esum(s) - scale * a.rho_B, 0.0, name="consistency")
    prob.minimize(1.0 - total)
    sol = _solve(prob, "steering weight")
    F = _members_array(sol, name, a.m, a.o)
    s_val = np.array([sol.value(si) for si in s])
    val = sol.primal_value
    res = QuantifierResult("CSW" if consistent else "SW", val, sol.dual_value, {"s_lambda": s_val},
                           None if consistent else SteeringFunctional(F, 1.0, "weight-dual"),
                           {"iterations": sol.iterations})
    _check_weight(a, res, st, consistent)
    return res


def _check_weight(a, res, st, consistent):
    s_val = res.primal_certificate["s_lambda"]
    rest = a.members - np.einsum("xal,lij->xaij", st.table, s_val)
    if min(np.linalg.eigvalsh(rest).min(), np.linalg.eigvalsh(s_val).min()) < -1e-7:
        raise SolverFailure("weight decomposition failed re-verification")
    if abs(res.value - res.dual_value) > AGREE_TOL:
        raise SolverFailure("primal and dual weight disagree")
    if res.dual_certificate is not None:
        F = res.dual_certificate.operators
        S = lhs_constraint_sums(F, st) - np.eye(a.d_B)
        if min(np.linalg.eigvalsh(F).min(), np.linalg.eigvalsh(S).min()) < -1e-7:
            raise SolverFailure("weight dual failed re-verification")


def steering_robustness(a: Assemblage, noise: str = "all-assemblages") -> QuantifierResult:
    """Robustness of ``a`` against the chosen noise set (see module docstring)."""
    if noise not in NOISE_KINDS:
        raise ValueError(f"unsupported noise kind {noise!r}; choose from {NOISE_KINDS}")
    a.validate()
    st = enumerate_strategies(a.m, a.o)
    d, m, o = a.d_B, a.m, a.o
    prob = Problem("min")
    s = [prob.herm(d, name=f"s_{l}") for l in range(st.d)]
    name = lambda x, k: f"F_{x}_{k}"
    uses_tau = noise in ("lhs-assemblages", "consistent-lhs")
    tau = [prob.herm(d, name=f"tau_{l}") for l in range(st.d)] if uses_tau else None
    t = None
    rhoB = a.rho_B
    for x in range(m):
        for k in range(o):
            ds = _dsum(s, st.table, x, k)
            if noise in ("all-assemblages", "consistent-all"):
                prob.add_psd(ds - a.members[x, k], name=name(x, k))
            elif uses_tau:
                prob.add_eq(ds - _dsum(tau, st.table, x, k), a.members[x, k], name=name(x, k))
            else:
                if t is None:
                    t = prob.scalar(nonneg=True, name="t")
                noise_op = np.eye(d) / (d * o) if noise == "singleton-maximally-mixed" else rhoB / o
                prob.add_eq(ds - t * noise_op, a.members[x, k], name=name(x, k))
    total = esum([si.tr() for si in s])
    if noise == "consistent-all":
        t = prob.scalar(name="t")
        prob.add_eq(esum(s) - t * rhoB, rhoB, name="consistency")
    if noise == "consistent-lhs":
        t = prob.scalar(name="t")
        prob.add_eq(esum(tau) - t * rhoB, 0.0, name="consistency")
    prob.minimize(total - 1.0)
    sol = _solve(prob, f"robustness ({noise})")
    F = _members_array(sol, name, m, o)
    cert = {"s_lambda": np.array([sol.value(si) for si in s])}
    if tau is not None:
        cert["tau_lambda"] = np.array([sol.value(ti) for ti in tau])
    if t is not None:
        cert["t"] = sol.value(t)
    dual = SteeringFunctional(F, 1.0, "robustness-dual") if noise == "all-assemblages" else None
    res = QuantifierResult({"all-assemblages": "SR", "lhs-assemblages": "LHSR", "singleton-maximally-mixed": "RR",
                            "reduced-state": "RSSR", "consistent-all": "CSR", "consistent-lhs": "CLHSR"}[noise],
                           max(sol.primal_value, 0.0) if sol.primal_value > -1e-9 else sol.primal_value,
                           sol.dual_value, cert, dual, {"iterations": sol.iterations, "noise": noise})
    _check_robustness(a, res, st, noise)
    return res


def _check_robustness(a, res, st, noise):
    s_val = res.primal_certificate["s_lambda"]
    rec = np.einsum("xal,lij->xaij", st.table, s_val)
    if np.linalg.eigvalsh(s_val).min() < -1e-7:
        raise SolverFailure("robustness hidden states not PSD")
    if noise in ("all-assemblages", "consistent-all") and np.linalg.eigvalsh(rec - a.members).min() < -1e-7:
        raise SolverFailure("robustness noise part not PSD")
    if abs(res.value - res.dual_value) > AGREE_TOL:
        raise SolverFailure("primal and dual robustness disagree")
    if res.dual_certificate is not None:
        F = res.dual_certificate.operators
        S = np.eye(a.d_B) - lhs_constraint_sums(F, st)
        if min(np.linalg.eigvalsh(F).min(), np.linalg.eigvalsh(S).min()) < -1e-7:
            raise SolverFailure("robustness dual failed re-verification")


def consistent_quantifiers(a: Assemblage) -> dict[str, QuantifierResult]:
    """CSW, CSR, RSSR and CLHSR of an assemblage."""
    return {"CSW": steering_weight(a, consistent=True),
            "CSR": steering_robustness(a, "consistent-all"),
            "RSSR": steering_robustness(a, "reduced-state"),
            "CLHSR": steering_robustness(a, "consistent-lhs")}


def parent_povm(meas: MeasurementSet) -> np.ndarray | None:
    """Parent POVM ``G_lam`` with ``sum_lam D G_lam = M_{a|x}``, or ``None``."""
    meas.validate()
    st = enumerate_strategies(meas.m, meas.o)
    prob = Problem(strict=True)
    G = [prob.herm(meas.dim, name=f"G_{l}") for l in range(st.d)]
    for x in range(meas.m):
        for k in range(meas.o):
            prob.add_eq(_dsum(G, st.table, x, k), meas.elements[x, k])
    sol = _solve(prob, "joint measurability")
    if sol.primal_value < -1e-8:
        return None
    Gv = np.array([sol.value(g) for g in G])
    ok = (np.linalg.eigvalsh(Gv).min() >= -1e-8 and
          np.max(np.abs(np.einsum("xal,lij->xaij", st.table, Gv) - meas.elements)) <= 1e-7)
    return Gv if ok else None


def incompatibility_quantifiers(meas: MeasurementSet) -> dict[str, QuantifierResult]:
    """Incompatibility weight, generalized, random and jointly-measurable robustness."""
    meas.validate()
    st = enumerate_strategies(meas.m, meas.o)
    d, m, o = meas.dim, meas.m, meas.o
    M = meas.elements
    I = np.eye(d)
    out = {}
    # weight: M - sum D G >= 0, sum G = (1 - p) 1
    prob = Problem("min")
    G = [prob.herm(d) for _ in range(st.d)]
    p = prob.scalar(name="p")
    for x in range(m):
        for k in range(o):
            prob.add_psd(M[x, k] - _dsum(G, st.table, x, k))
    prob.add_eq(esum(G) + p * I, I)
    prob.minimize(p)
    out["IW"] = _incompat_result("IW", _solve(prob, "incompatibility weight"), G)
    # generalized robustness: sum D G - M >= 0, sum G = (1 + t) 1
    prob = Problem("min")
    G = [prob.herm(d) for _ in range(st.d)]
    t = prob.scalar(name="t")
    for x in range(m):
        for k in range(o):
            prob.add_psd(_dsum(G, st.table, x, k) - M[x, k])
    prob.add_eq(esum(G) - t * I, I)
    prob.minimize(t)
    out["IR"] = _incompat_result("IR", _solve(prob, "incompatibility robustness"), G)
    # random robustness: sum D G = M + t 1/o
    prob = Problem("min")
    G = [prob.herm(d) for _ in range(st.d)]
    t = prob.scalar(nonneg=True, name="t")
    for x in range(m):
        for k in range(o):
            prob.add_eq(_dsum(G, st.table, x, k) - t * (I / o), M[x, k])
    prob.minimize(t)
    out["IRR"] = _incompat_result("IRR", _solve(prob, "random robustness"), G)
    # jointly-measurable robustness: sum D (G - H) = M, sum H = t 1
    prob = Problem("min")
    G = [prob.herm(d) for _ in range(st.d)]
    H = [prob.herm(d) for _ in range(st.d)]
    t = prob.scalar(name="t")
    for x in range(m):
        for k in range(o):
            prob.add_eq(_dsum(G, st.table, x, k) - _dsum(H, st.table, x, k), M[x, k])
    prob.add_eq(esum(H) - t * I, 0.0)
    prob.minimize(t)
    out["IJR"] = _incompat_result("IJR", _solve(prob, "jointly-measurable robustness"), G)
    return out


def _incompat_result(name, sol, G):
    if abs(sol.primal_value - sol.dual_value) > AGREE_TOL:
        raise SolverFailure(f"{name}: primal and dual disagree")
    val = sol.primal_value
    return QuantifierResult(name, max(val, 0.0) if val > -1e-9 else val, sol.dual_value,
                            {"parent": np.array([sol.value(g) for g in G])}, None, {"iterations": sol.iterations})


# state-level quantifiers --------------------------------------------------

def _random_projective_o(dA: int, o: int, rng) -> np.ndarray:
    U = haar_unitary(dA, rng)
    el = np.zeros((o, dA, dA), dtype=complex)
    for k in range(dA):
        el[k % o] += np.outer(U[:, k], U[:, k].conj())
    return el


def _best_measurements(rho, dims, F, sense):
    """POVMs optimizing ``sum tr[(M_{a|x} (x) F_{a|x}) rho]``."""
    dA, dB = dims
    m, o = F.shape[:2]
    r = rho.reshape(dA, dB, dA, dB)
    prob = Problem("max" if sense == "max" else "min")
    Ms = [[prob.herm(dA) for _ in range(o)] for _ in range(m)]
    terms = []
    for x in range(m):
        prob.add_eq(esum(Ms[x]), np.eye(dA))
        for k in range(o):
            # K = tr_B[(1 (x) F) rho]
            K = np.einsum("ibjc,cb->ij", r, F[x, k])
            terms.append(Ms[x][k].inner(K))
    obj = esum(terms)
    (prob.maximize if sense == "max" else prob.minimize)(obj)
    sol = _solve(prob, "measurement step")
    return MeasurementSet(np.array([[sol.value(Ms[x][k]) for k in range(o)] for x in range(m)]))


def state_quantifier_seesaw(rho: np.ndarray, dims, m: int, o: int, tag: str = "robustness", restarts: int = 10,
                            seed: int = 0, max_iter: int = 50, rel_tol: float = 1e-6) -> dict:
    """Lower bound on the state quantifier by alternating assemblage and measurement steps.

    Returns a dict with the certified ``value`` (re-quantified from scratch),
    the best ``measurements`` and the per-iteration ``history`` of every run.
    """
    if tag not in ("robustness", "weight"):
        raise ValueError("tag must be 'robustness' or 'weight'")
    rho = np.asarray(rho, dtype=complex)
    dA, dB = dims
    rng = np.random.default_rng(seed)
    quant = (lambda a: steering_robustness(a)) if tag == "robustness" else (lambda a: steering_weight(a))
    best = None
    histories = []
    for _ in range(restarts):
        meas = MeasurementSet(np.array([_random_projective_o(dA, o, rng) for _ in range(m)]))
        hist = []
        for it in range(max_iter):
            res = quant(generate(rho, dims, meas))
            hist.append(res.value)
            if best is None or res.value > best[0]:
                best = (res.value, meas)
            if it > 0 and hist[-1] - hist[-2] <= rel_tol * max(abs(hist[-2]), 1e-12):
                break
            F = res.dual_certificate.operators
            meas = _best_measurements(rho, dims, F, "max" if tag == "robustness" else "min")
        histories.append(hist)
    final = quant(generate(rho, dims, best[1]))
    return {"value": final.value, "measurements": best[1], "history": histories, "tag": tag}
