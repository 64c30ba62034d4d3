"""Result payloads with embedded certificates and their offline re-verification.

Every payload built here carries a ``certificate`` dict with a ``kind`` tag
and all data needed to re-check it by matrix arithmetic alone.
:func:`verify_payload` performs those checks without calling any solver.
"""
from __future__ import annotations

import numpy as np

from .assemblage import Assemblage, _cplx_json, _from_cplx_json, directions_measurements, enumerate_strategies
from .detect import SteeringFunctional, evaluate, lhs_constraint_sums, verify_lhs_model, verify_witness

TOL = 1e-6


def cplx(a):
    return _cplx_json(np.asarray(a))


def uncplx(v):
    return _from_cplx_json(v)


def _min_eig(ops) -> float:
    ops = np.asarray(ops)
    if ops.size == 0:
        return 0.0
    h = 0.5 * (ops + np.conj(np.swapaxes(ops, -1, -2)))
    return float(np.min(np.linalg.eigvalsh(h)))


# builders ----------------------------------------------------------------------

def detect_payload(a: Assemblage, verdict) -> dict:
    out = {"steering": bool(verdict.demonstrates_steering), "mu": float(verdict.mu_star),
           "boundary": bool(verdict.boundary)}
    if verdict.demonstrates_steering:
        cert = {"kind": "steering_witness", "assemblage": a.to_json(), "witness": verdict.witness.to_json()}
        out["beta"] = float(verdict.info["beta"])
    else:
        cert = {"kind": "lhs_model", "assemblage": a.to_json(),
                "sigma_lambda": cplx(verdict.lhs_model) if verdict.lhs_model is not None else None}
    out["certificate"] = cert
    return out


def witness_payload(a: Assemblage, f: SteeringFunctional, extra: dict) -> dict:
    beta = evaluate(f, a)
    return {"beta": beta, "lhs_bound": f.lhs_bound, **extra,
            "certificate": {"kind": "steering_witness", "assemblage": a.to_json(), "witness": f.to_json()}}


def quantifier_payload(a: Assemblage, res) -> dict:
    cert = {"kind": "quantifier", "name": res.name, "assemblage": a.to_json(),
            "s_lambda": cplx(res.primal_certificate["s_lambda"]),
            "noise": res.info.get("noise", "weight" if res.name in ("SW", "CSW") else None),
            "dual": res.dual_certificate.to_json() if res.dual_certificate is not None else None}
    for key in ("tau_lambda",):
        if key in res.primal_certificate:
            cert[key] = cplx(res.primal_certificate[key])
    if "t" in res.primal_certificate:
        cert["t"] = float(res.primal_certificate["t"])
    return {"name": res.name, "value": float(res.value), "dual_value": float(res.dual_value), "certificate": cert}


def guessing_payload(a: Assemblage, res, bob=None) -> dict:
    cert = {"kind": "guessing", "assemblage": a.to_json(), "x_star": res.x_star,
            "eve_strategy": cplx(res.eve_strategy), "bob": None if bob is None else cplx(bob)}
    return {"p_guess": res.p_guess, "dual_value": res.dual_value, "min_entropy": res.min_entropy,
            "certificate": cert}


def lhs_model_payload(cert, directions, gamma=None) -> dict:
    out = {"certified": bool(cert.certified), "mu": float(cert.mu_star), "radius": float(cert.radius),
           "objective": cert.objective}
    c = cert.to_json()
    c.update(kind="lhs_polytope", gamma=None if gamma is None else cplx(gamma),
             directions=np.asarray(directions, float).tolist())
    out["certificate"] = c
    return out


def cv_payload(data, verdict) -> dict:
    out = {"steering": bool(verdict.demonstrates_steering), "mu": float(verdict.mu_star),
           "level": verdict.matrix.level}
    cert = {"kind": "cv_moment", "data": data.to_json(), "level": verdict.matrix.level}
    if verdict.feasible:
        cert["completion"] = cplx(verdict.completion)
    else:
        cert["Z"] = cplx(verdict.inequality.Z)
        out["inequality"] = verdict.inequality.to_json()
        out["inequality_value"] = float(verdict.info["inequality_value"])
    out["certificate"] = cert
    return out


def multi_payload(a, test: str, untrusted: int, k: int, verdict) -> dict:
    cert = {"kind": "multi", "test": test, "untrusted": untrusted, "k": k, "assemblage": a.to_json(),
            "feasible": bool(verdict.feasible)}
    for key, val in verdict.certificate.items():
        if isinstance(val, np.ndarray):
            cert[key] = cplx(val)
    return {"steering": bool(verdict.demonstrates_steering), "mu": float(verdict.mu_star),
            "verified_at_solve": bool(verdict.info.get("certificate_verified", False)), "certificate": cert}


# verification --------------------------------------------------------------------

class CertificateError(ValueError):
    """Malformed or unsupported certificate."""


def verify_payload(payload: dict) -> dict:
    """Re-check the certificate of a result payload; returns ``{"valid", "checks"}``."""
    result = payload.get("result", payload)
    cert = result.get("certificate")
    if not cert:
        raise CertificateError("payload carries no certificate")
    kind = cert.get("kind")
    fn = _VERIFIERS.get(kind)
    if fn is None:
        raise CertificateError(f"unknown certificate kind {kind!r}")
    checks = fn(result, cert)
    return {"kind": kind, "valid": all(checks.values()), "checks": checks}


def _v_lhs_model(result, cert):
    a = Assemblage.from_json(cert["assemblage"])
    sig = cert.get("sigma_lambda")
    if sig is None:
        return {"model_present": False}
    return {"model_reproduces_assemblage": verify_lhs_model(a, uncplx(sig)),
            "claims_no_steering": not result.get("steering", False)}


def _v_witness(result, cert):
    a = Assemblage.from_json(cert["assemblage"])
    f = SteeringFunctional.from_json(cert["witness"])
    beta = evaluate(f, a)
    checks = {"lhs_bound_constraints": verify_witness(f), "violated": beta < f.lhs_bound}
    if "beta" in result:
        checks["beta_matches"] = abs(beta - result["beta"]) <= TOL
    return checks


def _v_quantifier(result, cert):
    a = Assemblage.from_json(cert["assemblage"])
    st = enumerate_strategies(a.m, a.o)
    s = uncplx(cert["s_lambda"])
    rec = np.einsum("xal,lij->xaij", st.table, s)
    name = cert["name"]
    checks = {"hidden_states_psd": _min_eig(s) >= -TOL}
    tr = float(np.trace(s.sum(axis=0)).real)
    if name in ("SW", "CSW"):
        checks["remainder_psd"] = _min_eig(a.members - rec) >= -TOL
        checks["value_matches"] = abs((1 - tr) - result["value"]) <= TOL
        if name == "CSW":
            rho = a.rho_B
            c = np.trace(s.sum(axis=0)).real
            checks["consistent"] = np.max(np.abs(s.sum(axis=0) - c * rho)) <= TOL
    else:
        noise = cert["noise"]
        if noise in ("all-assemblages", "consistent-all"):
            checks["noise_psd"] = _min_eig(rec - a.members) >= -TOL
            checks["value_matches"] = abs((tr - 1) - result["value"]) <= TOL
        elif noise in ("lhs-assemblages", "consistent-lhs"):
            tau = uncplx(cert["tau_lambda"])
            rec_t = np.einsum("xal,lij->xaij", st.table, tau)
            checks["decomposition"] = np.max(np.abs(rec - rec_t - a.members)) <= TOL
            checks["noise_psd"] = _min_eig(tau) >= -TOL
            checks["value_matches"] = abs((tr - 1) - result["value"]) <= TOL
        else:
            t = cert["t"]
            o, d = a.o, a.d_B
            N = np.eye(d) / (d * o) if noise == "singleton-maximally-mixed" else a.rho_B / o
            checks["decomposition"] = np.max(np.abs(rec - a.members - t * N)) <= TOL
            checks["value_matches"] = abs((tr - 1) - result["value"]) <= TOL
    dual = cert.get("dual")
    if dual is not None:
        F = SteeringFunctional.from_json(dual).operators
        S = lhs_constraint_sums(F, st)
        dv = float(np.real(np.einsum("xaij,xaji->", F, a.members)))
        if name == "SW":
            checks["dual_feasible"] = min(_min_eig(F), _min_eig(S - np.eye(a.d_B))) >= -TOL
            checks["zero_gap"] = abs((1 - dv) - result["value"]) <= TOL
        else:
            checks["dual_feasible"] = min(_min_eig(F), _min_eig(np.eye(a.d_B) - S)) >= -TOL
            checks["zero_gap"] = abs((dv - 1) - result["value"]) <= TOL
    return checks


def _v_guessing(result, cert):
    a = Assemblage.from_json(cert["assemblage"])
    eve = uncplx(cert["eve_strategy"])
    xs = cert["x_star"]
    marg = eve.sum(axis=2)
    checks = {"branches_sum": np.max(np.abs(eve.sum(axis=0) - a.members)) <= TOL,
              "branches_no_signalling": np.max(np.abs(marg - marg[:, :1])) <= TOL,
              "branches_psd": _min_eig(eve) >= -TOL}
    if cert.get("bob") is None:
        p = sum(np.trace(eve[e, xs, e]).real for e in range(a.o))
    else:
        Mb = uncplx(cert["bob"])
        ob = Mb.shape[0]
        p = sum(np.trace(Mb[b] @ eve[e * ob + b, xs, e]).real for e in range(a.o) for b in range(ob))
    checks["p_guess_matches"] = abs(p - result["p_guess"]) <= TOL
    return checks


def _v_lhs_polytope(result, cert):
    from .lhs_models import _verify, inscribed_radius
    if not cert.get("certified"):
        return {"certified": False}
    O = uncplx(cert["O"])
    sig = uncplx(cert["sigma_lambda"])
    state = uncplx(cert["state"])
    poly = inscribed_radius(np.asarray(cert["directions"], float))
    gamma = None if cert.get("gamma") is None else uncplx(cert["gamma"])
    meas = directions_measurements(poly.directions)
    return {"radius_matches": abs(poly.radius - cert["radius"]) <= 1e-9,
            "lhs_model_and_shrinking": bool(_verify(O, sig, poly, meas, state, gamma))}


def _v_cv(result, cert):
    from .cv_moment import MomentData, _constant_part, _free_directions, _skeleton
    data = MomentData.from_json(cert["data"])
    sk = _skeleton(data.m_A, data.m_B, cert["level"], data.algebra)
    C = _constant_part(sk, data)
    G = _free_directions(sk, data)
    if "completion" in cert:
        Gam = uncplx(cert["completion"])
        D = (Gam - C).reshape(-1)
        if len(G):
            B = G.reshape(len(G), -1).T
            coef, *_ = np.linalg.lstsq(np.vstack([B.real, B.imag]), np.concatenate([D.real, D.imag]), rcond=None)
            resid = float(np.max(np.abs(B @ coef - D)))
        else:
            resid = float(np.max(np.abs(D)))
        return {"completion_psd": _min_eig(Gam) >= -TOL, "completion_matches_data": resid <= TOL}
    Z = uncplx(cert["Z"])
    ann = float(np.max(np.abs(np.einsum("ij,kji->k", Z, G)))) if len(G) else 0.0
    val = float(np.real(np.trace(Z @ C)))
    return {"multiplier_psd": _min_eig(Z) >= -1e-8, "annihilates_free_entries": ann <= TOL, "violated": val < 0}


def _v_multi(result, cert):
    from .multipartite import MultiAssemblage1U, MultiAssemblage2U, _pt_map, _ptrace_map
    if not cert["feasible"]:
        return {"infeasible_verdict_has_no_offline_check": True}
    k = cert["k"]
    if cert["untrusted"] == 1:
        a = MultiAssemblage1U.from_json(cert["assemblage"])
        dB, dC = a.dims
        st = enumerate_strategies(a.m, a.o)
        ppt = lambda X: _min_eig(_pt_map([dB, dC], [1])(X)) >= -TOL
        if cert["test"] == "ms":
            S = uncplx(cert["sigma_lambda"])
            checks = {"reconstructs": np.max(np.abs(np.einsum("xal,lij->xaij", st.table, S) - a.members)) <= TOL,
                      "psd": _min_eig(S) >= -TOL}
            if k == 1:
                checks["ppt"] = ppt(S)
            return checks
        S, P, G = uncplx(cert["sigma_mu"]), uncplx(cert["pi"]), uncplx(cert["gamma"])
        Pn, Gl = uncplx(cert["pi_nu"]), uncplx(cert["gamma_lambda"])
        D = st.table
        checks = {"reconstructs": np.max(np.abs(np.einsum("xal,lij->xaij", D, S) + P + G - a.members)) <= TOL,
                  "pi_marginal": np.max(np.abs(_ptrace_map([dB, dC], [1])(P) - np.einsum("xal,lij->xaij", D, Pn))) <= TOL,
                  "gamma_marginal": np.max(np.abs(_ptrace_map([dB, dC], [0])(G) - np.einsum("xal,lij->xaij", D, Gl))) <= TOL,
                  "psd": min(_min_eig(S), _min_eig(Pn), _min_eig(Gl), _min_eig(P), _min_eig(G)) >= -TOL}
        if k == 1:
            checks["ppt"] = ppt(P) and ppt(G)
        return checks
    a = MultiAssemblage2U.from_json(cert["assemblage"])
    if cert["test"] == "ms":
        S = uncplx(cert["sigma_mu_nu"])
        mA, oA, mB, oB = a.scenario
        sa, sb = enumerate_strategies(mA, oA), enumerate_strategies(mB, oB)
        rec = np.einsum("xam,ybn,mnij->xaybij", sa.table, sb.table, S)
        return {"reconstructs": np.max(np.abs(rec - a.members)) <= TOL,
                "psd": _min_eig(S.reshape((-1,) + S.shape[-2:])) >= -TOL}
    if cert["test"] == "npa":
        G = uncplx(cert["moment_matrix"])
        return {"moment_matrix_psd": _min_eig(G) >= -TOL, "unit_block": np.max(np.abs(
            G[:a.d_C, :a.d_C] - a.members[0, :, 0, :].sum(axis=(0, 1)))) <= TOL}
    return {"verified_at_solve": bool(result.get("verified_at_solve"))}


def _v_parent(result, cert):
    from .assemblage import MeasurementSet
    meas = MeasurementSet.from_json(result["measurements"])
    G = uncplx(cert["parent"])
    st = enumerate_strategies(meas.m, meas.o)
    return {"parent_psd": _min_eig(G) >= -TOL,
            "marginals_match": np.max(np.abs(np.einsum("xal,lij->xaij", st.table, G) - meas.elements)) <= TOL}


def _v_incompat(result, cert):
    """Primal pieces bound each quantifier from above at the reported value."""
    from .assemblage import MeasurementSet
    meas = MeasurementSet.from_json(result["measurements"])
    st = enumerate_strategies(meas.m, meas.o)
    M, I = meas.elements, np.eye(meas.dim)
    out = {}
    for name in ("IW", "IR", "IRR"):
        G = uncplx(cert[name])
        DG = np.einsum("xal,lij->xaij", st.table, G)
        v = float(result[name])
        ok = _min_eig(G) >= -TOL
        if name == "IW":
            ok &= _min_eig(M - DG) >= -TOL and np.max(np.abs(G.sum(axis=0) - (1 - v) * I)) <= TOL
        elif name == "IR":
            ok &= _min_eig(DG - M) >= -TOL and np.max(np.abs(G.sum(axis=0) - (1 + v) * I)) <= TOL
        else:
            ok &= np.max(np.abs(DG - M - v * I / meas.o)) <= TOL
        out[f"{name}_primal"] = bool(ok)
    return out


_VERIFIERS = {"parent_povm": _v_parent, "incompatibility": _v_incompat, "lhs_model": _v_lhs_model, "steering_witness": _v_witness, "quantifier": _v_quantifier,
              "guessing": _v_guessing, "lhs_polytope": _v_lhs_polytope, "cv_moment": _v_cv, "multi": _v_multi}

