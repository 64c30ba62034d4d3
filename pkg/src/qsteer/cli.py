"""Command-line front end.

Every command prints a run report ``{command, inputs, result, solver,
wall_time}``; ``result`` is deterministic given the inputs and ``--seed``
and embeds a certificate that ``qsteer verify`` re-checks without a solver.

Exit codes: 0 computed, 2 invalid input, 3 solver failure. The environment
variable ``QSTEER_MAX_ITER`` caps interior-point iterations.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .assemblage import (Assemblage, InvalidAssemblage, InvalidMeasurement, MeasurementSet, directions_measurements,
                         generate, lift_efficiency, pauli_measurements)
from .detect import SolverFailure, check_lhs, correlator_inequality, optimal_inequality
from .hermat import werner
from .reports import (CertificateError, cplx, cv_payload, detect_payload, guessing_payload, lhs_model_payload,
                      multi_payload, quantifier_payload, verify_payload, witness_payload)

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3


class InputError(ValueError):
    """Bad command-line input."""


# input helpers ---------------------------------------------------------------------

def fixture_names() -> list[str]:
    return sorted(p.name for p in resources.files("qsteer").joinpath("data").iterdir() if p.name.endswith(".json"))


def _read(path: str) -> tuple[dict, str]:
    p = Path(path)
    if p.exists():
        raw = p.read_bytes()
    else:
        name = path if path.endswith(".json") else path + ".json"
        res = resources.files("qsteer").joinpath("data", name)
        if not res.is_file():
            raise InputError(f"no such file or bundled fixture: {path}")
        raw = res.read_bytes()
    try:
        return json.loads(raw), hashlib.sha256(raw).hexdigest()
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc


def _measurements(spec: str) -> MeasurementSet:
    from .lhs_models import DIRECTION_SETS
    if spec in DIRECTION_SETS:
        return directions_measurements(DIRECTION_SETS[spec]())
    if spec and set(spec) <= set("XYZ"):
        return pauli_measurements(spec)
    raise InputError(f"measurements must be Pauli labels (e.g. XZ) or one of {sorted(DIRECTION_SETS)}")


def _bipartite_state(name: str, w: float, dim: int = 2) -> np.ndarray:
    if not 0 <= w <= 1:
        raise InputError("w must lie in [0, 1]")
    if name == "werner":
        return werner(w, dim)
    raise InputError(f"unknown bipartite state {name!r}")


def _tripartite_state(name: str) -> np.ndarray:
    from .multipartite import ghz_state, w_state3
    if name == "ghz":
        return ghz_state()
    if name == "w":
        return w_state3()
    raise InputError(f"unknown tripartite state {name!r}")


# commands --------------------------------------------------------------------------

class Ctx:
    def __init__(self, args):
        self.args = args
        self.inputs: dict = {}
        self.solver: dict = {}

    def load(self, path: str) -> dict:
        obj, digest = _read(path)
        self.inputs[path] = digest
        return obj

    def assemblage(self, path: str) -> Assemblage:
        return Assemblage.from_json(self.load(path))


def cmd_gen(ctx, a):
    if a.state in ("ghz", "w"):
        from .multipartite import generate_1u, generate_2u, noisy_tripartite
        rho = noisy_tripartite(_tripartite_state(a.state), a.w)
        meas = _measurements(a.meas)
        obj = (generate_1u(rho, (2, 2, 2), meas) if a.untrusted == 1 else generate_2u(rho, (2, 2, 2), meas, meas))
        return {"assemblage": obj.to_json()}
    rho = _bipartite_state(a.state, a.w, a.dim)
    meas = _measurements(a.meas)
    if meas.dim != a.dim:
        raise InputError("measurement dimension does not match the state")
    asm = generate(rho, (a.dim, a.dim), meas)
    if a.eta is not None:
        asm = lift_efficiency(asm, a.eta)
    return {"assemblage": asm.to_json()}


def cmd_validate(ctx, a):
    obj = ctx.load(a.file)
    schema = obj.get("schema", "assemblage.v1")
    if schema == "assemblage.v1":
        x = Assemblage.from_json(obj)
        return {"valid": True, "schema": schema, "m": x.m, "o": x.o, "d_B": x.d_B}
    if schema == "povmset.v1":
        x = MeasurementSet.from_json(obj)
        return {"valid": True, "schema": schema, "m": x.m, "o": x.o, "dim": x.dim}
    if schema in ("massemblage1u.v1", "massemblage2u.v1"):
        from .multipartite import MultiAssemblage1U, MultiAssemblage2U
        (MultiAssemblage1U if schema.startswith("massemblage1u") else MultiAssemblage2U).from_json(obj)
        return {"valid": True, "schema": schema}
    if schema == "cvmoments.v1":
        from .cv_moment import MomentData
        MomentData.from_json(obj).validate()
        return {"valid": True, "schema": schema}
    if schema == "witness.v1":
        from .detect import SteeringFunctional, verify_witness
        f = SteeringFunctional.from_json(obj)
        return {"valid": True, "schema": schema, "lhs_constraints_hold": verify_witness(f)}
    raise InputError(f"unknown schema {schema!r}")


def cmd_detect(ctx, a):
    asm = ctx.assemblage(a.file)
    v = check_lhs(asm)
    ctx.solver = {"iterations": v.info["iterations"]}
    return detect_payload(asm, v)


def cmd_witness(ctx, a):
    asm = ctx.assemblage(a.file)
    f = optimal_inequality(asm)
    extra = {}
    if asm.o == 2:
        try:
            O, bound = correlator_inequality(f)
            extra["correlator"] = {"observables": cplx(O), "bound": float(bound),
                                   "value": float(np.real(np.einsum("xij,xji->", O, asm.members[:, 0] - asm.members[:, 1])))}
        except ValueError:
            pass
    return witness_payload(asm, f, extra)


def cmd_weight(ctx, a):
    from .quantify import steering_weight
    asm = ctx.assemblage(a.file)
    res = steering_weight(asm, consistent=a.consistent)
    ctx.solver = res.info
    return quantifier_payload(asm, res)


def cmd_robustness(ctx, a):
    from .quantify import steering_robustness
    asm = ctx.assemblage(a.file)
    res = steering_robustness(asm, a.noise)
    ctx.solver = {"iterations": res.info["iterations"]}
    return quantifier_payload(asm, res)


def cmd_incompat(ctx, a):
    from .quantify import incompatibility_quantifiers, parent_povm
    meas = MeasurementSet.from_json(ctx.load(a.file)) if a.file else _measurements(a.meas)
    if a.visibility < 1:
        d = meas.dim
        meas = MeasurementSet(a.visibility * meas.elements + (1 - a.visibility) * np.eye(d) / meas.o)
    q = incompatibility_quantifiers(meas)
    parent = parent_povm(meas)
    return {"jointly_measurable": parent is not None, "measurements": meas.to_json(),
            **{k: float(v.value) for k, v in q.items()},
            "certificate": {"kind": "parent_povm", "parent": cplx(parent)} if parent is not None else
            {"kind": "incompatibility", **{k: cplx(q[k].primal_certificate["parent"]) for k in ("IW", "IR", "IRR")}}}


def cmd_lhs_model(ctx, a):
    from .lhs_models import (DIRECTION_SETS, certify_unsteerable_povm, certify_unsteerable_projective,
                             find_unsteerable_from_witness, inscribed_radius)
    if a.directions not in DIRECTION_SETS:
        raise InputError(f"unknown direction set {a.directions!r}")
    poly = inscribed_radius(DIRECTION_SETS[a.directions]())
    gamma = np.eye(2) / 2 if a.povm else None
    if a.mode == "target":
        rho = _bipartite_state(a.state, a.w)
        c = certify_unsteerable_povm(rho, poly) if a.povm else certify_unsteerable_projective(rho, poly)
    else:
        if a.witness_file:
            from .reports import uncplx
            W = uncplx(ctx.load(a.witness_file)["operator"])
        else:
            from .hermat import partial_transpose, phi_plus
            W = partial_transpose(phi_plus(2), (2, 2), 1)
        c = find_unsteerable_from_witness(W, poly, "povm" if a.povm else "projective")
    return lhs_model_payload(c, poly.directions, gamma)


def cmd_randomness(ctx, a):
    from .applications import global_guessing, local_guessing
    asm = ctx.assemblage(a.file)
    if a.mode == "local":
        res = local_guessing(asm, a.x)
        return guessing_payload(asm, res)
    bob = _measurements(a.bob).elements[0]
    res = global_guessing(asm, a.x, bob)
    return guessing_payload(asm, res, bob)


def cmd_bell_max(ctx, a):
    from .applications import chsh, max_bell_violation
    asm = ctx.assemblage(a.file)
    f = chsh()
    val, bob = max_bell_violation(asm, f)
    return {"functional": "chsh", "local_bound": f.local_bound, "value": val, "bob_measurements": cplx(bob)}


def cmd_seesaw(ctx, a):
    if a.kind == "bell":
        from .applications import bell_seesaw, chsh
        out = bell_seesaw(ctx.assemblage(a.file), chsh())
        return {"value": out["value"], "history": out["history"], "assemblage": out["assemblage"].to_json()}
    from .quantify import state_quantifier_seesaw
    rho = _bipartite_state(a.state, a.w)
    out = state_quantifier_seesaw(rho, (2, 2), a.m, 2, a.kind, restarts=a.restarts, seed=a.seed)
    return {"value": out["value"], "tag": out["tag"], "history": out["history"],
            "measurements": out["measurements"].to_json()}


def cmd_multi(ctx, a):
    from . import multipartite as mp
    if a.threshold:
        psi = _tripartite_state(a.threshold)
        if a.seesaw:
            out = mp.threshold_seesaw(psi, a.test, a.untrusted, a.k, restarts=a.restarts, seed=a.seed)
            return {"threshold": out["value"], "history": out["history"], "meas_A": out["meas_A"].to_json(),
                    "meas_B": None if out["meas_B"] is None else out["meas_B"].to_json()}
        ma = _measurements(a.meas)
        return {"threshold": mp.white_noise_threshold(psi, a.test, a.untrusted, ma, ma, a.k), "measurements": a.meas}
    if not a.file:
        raise InputError("multi needs an assemblage file or --threshold")
    obj = ctx.load(a.file)
    if a.untrusted == 1:
        asm = mp.MultiAssemblage1U.from_json(obj)
        v = mp.ms_test_1u(asm, a.k) if a.test == "ms" else mp.gms_test_1u(asm, a.k)
    else:
        asm = mp.MultiAssemblage2U.from_json(obj)
        v = mp.ms_test_2u(asm) if a.test == "ms" else mp.gms_test_2u(asm, max(a.k, 2))
    return multi_payload(asm, a.test, a.untrusted, a.k, v)


def cmd_npa(ctx, a):
    from . import multipartite as mp
    asm = mp.MultiAssemblage2U.from_json(ctx.load(a.file))
    v = mp.npa_membership(asm, a.level)
    out = multi_payload(asm, "npa", 2, a.level, v)
    out["quantum_compatible"] = bool(v.feasible)
    return out


def cmd_cv_test(ctx, a):
    from .cv_moment import MomentData, cv_steering_test
    data = MomentData.from_json(ctx.load(a.file))
    v = cv_steering_test(data, a.level)
    return cv_payload(data, v)


def _sweep_point(job):
    cmd, w, meas = job
    asm = generate(werner(w), (2, 2), _measurements(meas))
    if cmd == "detect":
        v = check_lhs(asm)
        return {"w": w, "steering": bool(v.demonstrates_steering), "mu": float(v.mu_star)}
    from .quantify import steering_robustness, steering_weight
    res = steering_weight(asm) if cmd == "weight" else steering_robustness(asm)
    return {"w": w, "value": float(res.value)}


def cmd_sweep(ctx, a):
    if a.param != "w":
        raise InputError("only --param=w is supported")
    try:
        lo, hi, n = a.range.split(":")
        grid = np.linspace(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise InputError("--range must be a:b:n") from exc
    if grid.min() < 0 or grid.max() > 1:
        raise InputError("w must lie in [0, 1]")
    jobs = [(a.cmd, float(w), a.meas) for w in grid]
    workers = a.workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            points = list(pool.map(_sweep_point, jobs))
    else:
        points = [_sweep_point(j) for j in jobs]
    out = {"cmd": a.cmd, "measurements": a.meas, "points": points}
    if a.cmd == "detect":
        flags = [p["steering"] for p in points]
        first = next((i for i, f in enumerate(flags) if f), None)
        # midpoint of the bracketing grid points
        out["boundary"] = None if first is None else (
            points[first]["w"] if first == 0 else 0.5 * (points[first - 1]["w"] + points[first]["w"]))
        out["monotone"] = all(not f or g for f, g in zip(flags, flags[1:]))
    return out


def cmd_verify(ctx, a):
    return verify_payload(ctx.load(a.file))


def cmd_fixtures(ctx, a):
    return {"fixtures": fixture_names()}


# parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "table"), default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the report to this file instead of stdout")
    p = argparse.ArgumentParser(prog="qsteer", description="Quantum steering analysis", parents=[common])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        s = sub.add_parser(name, help=help_, parents=[common])
        s.set_defaults(fn=fn)
        return s

    s = add("gen", cmd_gen, "generate an assemblage from a state and measurements")
    s.add_argument("--state", default="werner", choices=("werner", "ghz", "w"))
    s.add_argument("--w", type=float, default=1.0)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--meas", default="XZ")
    s.add_argument("--eta", type=float)
    s.add_argument("--untrusted", type=int, choices=(1, 2), default=1)
    s = add("validate", cmd_validate, "check a JSON input against its schema")
    s.add_argument("file")
    for name, fn, h in (("detect", cmd_detect, "LHS membership test"),
                        ("witness", cmd_witness, "optimal steering inequality"),
                        ("bell-max", cmd_bell_max, "maximal CHSH value over Bob's measurements"),
                        ("npa", cmd_npa, "steering moment-matrix membership")):
        s = add(name, fn, h)
        s.add_argument("file")
        if name == "npa":
            s.add_argument("--level", type=int, default=2)
    s = add("weight", cmd_weight, "steering weight")
    s.add_argument("file")
    s.add_argument("--consistent", action="store_true")
    s = add("robustness", cmd_robustness, "steering robustness")
    s.add_argument("file")
    from .quantify import NOISE_KINDS
    s.add_argument("--noise", choices=NOISE_KINDS, default="all-assemblages")
    s = add("incompat", cmd_incompat, "incompatibility quantifiers of a measurement set")
    s.add_argument("file", nargs="?")
    s.add_argument("--meas", default="XZ")
    s.add_argument("--visibility", type=float, default=1.0)
    s = add("lhs-model", cmd_lhs_model, "certify unsteerability for all measurements")
    s.add_argument("mode", choices=("target", "witness"))
    s.add_argument("--state", default="werner")
    s.add_argument("--w", type=float, default=0.5)
    s.add_argument("--directions", default="icosahedron")
    s.add_argument("--povm", action="store_true")
    s.add_argument("--witness-file")
    s = add("randomness", cmd_randomness, "eavesdropper guessing probability")
    s.add_argument("mode", choices=("local", "global"))
    s.add_argument("file")
    s.add_argument("--x", type=int, default=0)
    s.add_argument("--bob", default="Z")
    s = add("seesaw", cmd_seesaw, "see-saw lower bounds")
    s.add_argument("kind", choices=("robustness", "weight", "bell"))
    s.add_argument("file", nargs="?")
    s.add_argument("--state", default="werner")
    s.add_argument("--w", type=float, default=1.0)
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--restarts", type=int, default=5)
    s = add("multi", cmd_multi, "tripartite steering tests and noise thresholds")
    s.add_argument("test", choices=("ms", "gms"))
    s.add_argument("file", nargs="?")
    s.add_argument("--untrusted", type=int, choices=(1, 2), default=1)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--threshold", choices=("ghz", "w"))
    s.add_argument("--meas", default="XYZ")
    s.add_argument("--seesaw", action="store_true")
    s.add_argument("--restarts", type=int, default=5)
    s = add("cv-test", cmd_cv_test, "continuous-variable moment-matrix test")
    s.add_argument("file")
    s.add_argument("--level", type=int, default=1)
    s = add("sweep", cmd_sweep, "Werner-family parameter sweep")
    s.add_argument("--param", default="w")
    s.add_argument("--range", default="0:1:41")
    s.add_argument("--cmd", choices=("detect", "weight", "robustness"), default="detect")
    s.add_argument("--meas", default="XZ")
    s.add_argument("--workers", type=int, default=0, help="worker processes (default: number of cores)")
    s = add("verify", cmd_verify, "re-check the certificate of a result file")
    s.add_argument("file")
    add("fixtures", cmd_fixtures, "list bundled input files")
    return p


def _table(result, prefix="") -> list[str]:
    lines = []
    for k, v in result.items():
        if k in ("certificate", "assemblage", "history", "points", "measurements", "bob_measurements"):
            continue
        if isinstance(v, dict):
            lines += _table(v, prefix + k + ".")
        elif isinstance(v, (list, tuple)) and v and isinstance(v[0], (list, dict)):
            continue
        else:
            lines.append(f"{prefix + k:<28} {v}")
    if "points" in result:
        for pt in result["points"]:
            lines.append("  ".join(f"{k}={v}" for k, v in pt.items()))
    return lines


def run(argv=None) -> tuple[int, dict]:
    parser = build_parser()
    args = parser.parse_args(argv)
    ctx = Ctx(args)
    t0 = time.perf_counter()
    np.random.seed(args.seed)
    try:
        result = args.fn(ctx, args)
        code = EXIT_OK
    except SolverFailure as exc:
        result, code = {"error": "solver-failure", "message": str(exc)}, EXIT_SOLVER
    except (InputError, InvalidAssemblage, InvalidMeasurement, CertificateError, ValueError, KeyError) as exc:
        result, code = {"error": "invalid-input", "message": str(exc)}, EXIT_INPUT
    args_dict = {k: v for k, v in vars(args).items() if k not in ("fn", "out", "format")}
    report = {"command": args.command, "inputs": {"files": ctx.inputs, "args": args_dict},
              "result": result, "solver": ctx.solver, "wall_time": round(time.perf_counter() - t0, 3)}
    return code, report


def main(argv=None) -> int:
    code, report = run(argv)
    args = build_parser().parse_args(argv)
    if args.format == "json":
        text = json.dumps(report, sort_keys=True, default=_json_default)
    else:
        text = "\n".join([f"command: {report['command']}"] + _table(report["result"]))
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return code


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return cplx(o) if np.iscomplexobj(o) else o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


if __name__ == "__main__":
    sys.exit(main())
