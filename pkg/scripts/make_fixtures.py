"""Regenerate the JSON fixtures bundled under ``src/qsteer/data``."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from qsteer.assemblage import generate, pauli_measurements
from qsteer.cv_moment import gaussian_moment_data, lossy_single_photon, tmsv_covariance
from qsteer.hermat import werner
from qsteer.multipartite import generate_1u, generate_2u, ghz_state, noisy_tripartite, pr_box_assemblage, w_state3

OUT = Path(__file__).resolve().parents[1] / "src" / "qsteer" / "data"


def dump(name, obj):
    (OUT / name).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def main():
    OUT.mkdir(exist_ok=True)
    xz = pauli_measurements("XZ")
    for tag, w in (("0.5", 0.5), ("0.7071", 1 / np.sqrt(2)), ("0.8", 0.8), ("1", 1.0)):
        dump(f"werner_w{tag}_xz.json", generate(werner(w), (2, 2), xz).to_json())
    xyz = pauli_measurements("XYZ")
    for name, psi in (("ghz", ghz_state()), ("w", w_state3())):
        for w in (0.2, 0.5, 0.8):
            rho = noisy_tripartite(psi, w)
            dump(f"{name}_noisy_1u_w{w}.json", generate_1u(rho, (2, 2, 2), xyz).to_json())
            dump(f"{name}_noisy_2u_w{w}.json", generate_2u(rho, (2, 2, 2), xyz, xyz).to_json())
    dump("pr_box.json", pr_box_assemblage().to_json())
    dump("quadrature_example.json", gaussian_moment_data(tmsv_covariance(0.5, 0.8, 0.0), 1).to_json())
    dump("lossy_single_photon_eta0.75.json", lossy_single_photon(0.75, 2).to_json())


if __name__ == "__main__":
    main()
