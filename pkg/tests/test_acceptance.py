"""Acceptance criteria, one test per criterion, each recording a PASS/FAIL line."""
from __future__ import annotations

import time

import numpy as np
import pytest

from conftest import record
from qsteer.applications import local_guessing
from qsteer.assemblage import (generate, lift_efficiency, pauli_measurements, random_assemblage,
                               random_lhs_assemblage, random_povm, random_projective)
from qsteer.cli import run
from qsteer.cv_moment import cv_steering_test, gaussian_moment_data, tmsv_covariance
from qsteer.detect import check_lhs, correlator_inequality, evaluate, optimal_inequality
from qsteer.hermat import random_density, werner
from qsteer.lhs_models import DIRECTION_SETS, MAX_DIRECTIONS
from qsteer.multipartite import (generate_2u, ghz_state, npa_membership, pr_box_assemblage, threshold_seesaw,
                                 white_noise_threshold)
from qsteer.quantify import (consistent_quantifiers, incompatibility_quantifiers, steering_robustness,
                             steering_weight)
from qsteer.reports import quantifier_payload, verify_payload

import oracles

XZ = pauli_measurements("XZ")


def _werner_xz(w):
    return generate(werner(w), (2, 2), XZ)


def test_criterion_1_werner_bisection():
    t0 = time.perf_counter()
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-4:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if check_lhs(_werner_xz(mid)).demonstrates_steering else (mid, hi)
    w_star, dt = 0.5 * (lo + hi), time.perf_counter() - t0
    ok = abs(w_star - 1 / np.sqrt(2)) <= 1e-3 and dt < 5
    record(1, ok, f"boundary {w_star:.5f} vs {1 / np.sqrt(2):.5f}, {dt:.2f} s")
    assert ok


def test_criterion_2_witness_and_correlators():
    beta = evaluate(optimal_inequality(_werner_xz(0.8)), _werner_xz(0.8))
    ref = (1 - np.sqrt(2) * 0.8) / 8
    _, b2 = correlator_inequality(optimal_inequality(_werner_xz(1.0)))
    _, b3 = correlator_inequality(optimal_inequality(generate(werner(1.0), (2, 2), pauli_measurements("XYZ"))))
    ok = abs(beta - ref) <= 1e-6 and abs(b2 - np.sqrt(2)) <= 1e-6 and abs(b3 - np.sqrt(3)) <= 1e-6
    record(2, ok, f"beta {beta:.9f} vs {ref:.9f}; bounds {b2:.6f}, {b3:.6f}")
    assert ok


def _timed(f):
    t0 = time.perf_counter()
    v = f()
    return v, time.perf_counter() - t0


def test_criterion_3_table_one():
    ms1, t1 = _timed(lambda: threshold_seesaw(ghz_state(), "ms", 1)["value"])
    ms2, t2 = _timed(lambda: white_noise_threshold(ghz_state(), "ms", 2))
    gms1, t3 = _timed(lambda: white_noise_threshold(ghz_state(), "gms", 1))
    ok = (abs(ms1 - 0.25) <= 1e-3 and abs(ms2 - 0.4286) <= 5e-3 and abs(gms1 - 0.5420) <= 5e-3
          and max(t1, t2, t3) < 600)
    record(3, ok, f"MS-1U {ms1:.4f} ({t1:.1f} s), MS-2U {ms2:.4f} ({t2:.1f} s), GMS-1U {gms1:.4f} ({t3:.1f} s)")
    assert ok


@pytest.mark.xfail(strict=False, reason="GMS-2U stretch target: two binary settings per party only")
def test_criterion_3_stretch_gms_2u():
    best, dt = None, 0.0
    for labels in ("XZ", "XY"):
        m = pauli_measurements(labels)
        v, t = _timed(lambda: white_noise_threshold(ghz_state(), "gms", 2, m, m, k=2))
        dt += t
        best = v if best is None else min(best, v)
    print(f"GMS-2U stretch: {best:.4f} vs 0.6322 in {dt:.1f} s")
    assert abs(best - 0.6322) <= 1e-2


def test_criterion_4_detection_efficiency():
    lines, ok = [], True
    for labels in ("XZ", "XYZ"):
        m = len(labels)
        base = generate(werner(1.0), (2, 2), pauli_measurements(labels))
        grid = np.linspace(0, 1 / m, 20)
        steer = [eta for eta in grid if check_lhs(lift_efficiency(base, float(eta))).demonstrates_steering]
        ok &= not steer
        lines.append(f"m={m}: {len(grid) - len(steer)}/20 LHS")
    record(4, ok, "; ".join(lines))
    assert ok


def test_criterion_5_no_false_certificates():
    ws = (0.51, 0.6, 1 / np.sqrt(2), 0.8, 1.0)
    checked, bad, rejected = 0, [], []
    for name, fn in DIRECTION_SETS.items():
        if len(fn()) > MAX_DIRECTIONS:
            code, rep = run(["lhs-model", "target", "--w", "0.6", "--directions", name])
            rejected.append(name)
            assert code == 2
            continue
        for w in (ws if len(fn()) <= 13 else (0.51, 1.0)):
            code, rep = run(["lhs-model", "target", "--w", str(w), "--directions", name])
            assert code == 0, rep
            checked += 1
            if rep["result"]["certified"]:
                bad.append((name, w))
    ok = not bad
    record(5, ok, f"{checked} runs over {len(DIRECTION_SETS) - len(rejected)} sets, none certified; "
                  f"rejected as too large: {', '.join(rejected)}" if ok else f"false certificates {bad}")
    assert ok


def test_criterion_6_quantifier_duality():
    rng = np.random.default_rng(2024)
    worst, failures = 0.0, 0
    for i in range(200):
        dB, m = int(rng.choice([2, 3])), int(rng.choice([2, 3]))
        a = random_assemblage(dB, m, 2, rng, d_A=2)
        for res in (steering_weight(a), steering_robustness(a)):
            worst = max(worst, abs(res.value - res.dual_value))
            if not verify_payload({"result": quantifier_payload(a, res)})["valid"]:
                failures += 1
    ok = worst <= 1e-6 and failures == 0
    record(6, ok, f"max primal-dual gap {worst:.1e}, {failures} certificate failures over 400 solves")
    assert ok


def test_criterion_7_randomness():
    rng = np.random.default_rng(77)
    dev = max(abs(local_guessing(random_lhs_assemblage(int(rng.choice([2, 3])), 2, 2, rng)).p_guess - 1)
              for _ in range(50))
    a = _werner_xz(1.0)
    res = local_guessing(a)
    sigma, p_attack = oracles.explicit_attack(a.members, res.eve_strategy)
    branches, p_cvx = oracles.local_guessing_branches(a.members)
    sigma_cvx, p_attack_cvx = oracles.explicit_attack(a.members, branches)
    ok = (dev <= 1e-7 and res.p_guess < 1 - 1e-4 and np.max(np.abs(sigma - a.members)) <= 1e-6
          and np.max(np.abs(sigma_cvx - a.members)) <= 1e-5
          and max(abs(p_attack - res.p_guess), abs(p_attack_cvx - res.p_guess), abs(p_cvx - res.p_guess)) <= 1e-4)
    record(7, ok, f"LHS deviation {dev:.1e}; w=1 p_guess {res.p_guess:.6f}, "
                  f"attacks {p_attack:.6f} (own branches) and {p_attack_cvx:.6f} (reference branches)")
    assert ok


def test_criterion_8_npa():
    rng = np.random.default_rng(8)
    accepted = 0
    for _ in range(50):
        a = generate_2u(random_density(8, rng), (2, 2, 2), random_projective(2, 2, rng), random_projective(2, 2, rng))
        accepted += npa_membership(a, 2).feasible
    pr = npa_membership(pr_box_assemblage(), 2)
    ok = accepted == 50 and not pr.feasible
    record(8, ok, f"{accepted}/50 quantum accepted; PR box mu {pr.mu_star:.4f}")
    assert ok


def _cv_boundary(r, eta, tol=1e-6):
    lo, hi = 0.0, 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        steer = cv_steering_test(gaussian_moment_data(tmsv_covariance(r, eta, mid), 1), 1).demonstrates_steering
        lo, hi = (mid, hi) if steer else (lo, mid)
    return 0.5 * (lo + hi)


def test_criterion_9_cv_wiseman():
    family = [(r, eta) for r in np.linspace(0.1, 1.0, 10) for eta in (1.0, 0.75)]
    errs = [abs(_cv_boundary(r, eta) - oracles.wiseman_boundary_noise(r, eta)) for r, eta in family]
    ok = len(family) == 20 and max(errs) <= 1e-4
    record(9, ok, f"max boundary error {max(errs):.1e} over {len(family)} covariance matrices")
    assert ok


def test_criterion_10_incompatibility():
    irr = incompatibility_quantifiers(XZ)["IRR"].value
    rng = np.random.default_rng(10)
    pairs = (("CSW", "IW"), ("CSR", "IR"), ("RSSR", "IRR"), ("CLHSR", "IJR"))
    worst = -np.inf
    for _ in range(50):
        meas = random_povm(2, 2, 2, rng) if rng.uniform() < 0.5 else random_projective(2, 2, rng)
        a = generate(random_density(4, rng), (2, 2), meas)
        c, q = consistent_quantifiers(a), incompatibility_quantifiers(meas)
        worst = max(worst, max(c[s].value - q[t].value for s, t in pairs))
    ok = abs(irr - (np.sqrt(2) - 1)) <= 1e-6 and worst <= 1e-6
    record(10, ok, f"IRR {irr:.8f}; max(consistent - incompatibility) {worst:.1e} over 50 trials")
    assert ok
