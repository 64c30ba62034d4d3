"""Assemblages, measurement sets and deterministic strategies.

Members are stored as arrays of shape ``(m, o, d, d)`` indexed ``[x, a]``,
matching the ``[x][a][row][col]`` layout of the JSON schemas.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hermat import dag, partial_trace, PAULIS, I2, bloch_projector, haar_unitary

STRATEGY_CAP = 4096
VALID_TOL = 1e-9
PSD_TOL = 1e-10


class InvalidAssemblage(ValueError):
    pass


class InvalidMeasurement(ValueError):
    pass


def _psd_min(ops: np.ndarray) -> float:
    h = 0.5 * (ops + dag(ops))
    return float(np.min(np.linalg.eigvalsh(h)))


def _cplx_json(a: np.ndarray):
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _from_cplx_json(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """POVMs ``M_{a|x}`` stored with shape ``(m, o, dim, dim)``."""

    elements: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.elements, dtype=complex)
        if e.ndim != 4 or e.shape[2] != e.shape[3]:
            raise InvalidMeasurement(f"elements must have shape (m, o, d, d), got {e.shape}")
        object.__setattr__(self, "elements", 0.5 * (e + dag(e)))

    @property
    def m(self) -> int:
        return self.elements.shape[0]

    @property
    def o(self) -> int:
        return self.elements.shape[1]

    @property
    def dim(self) -> int:
        return self.elements.shape[2]

    def validate(self, tol: float = 1e-10) -> "MeasurementSet":
        if _psd_min(self.elements) < -tol:
            raise InvalidMeasurement("POVM element is not positive semidefinite")
        dev = np.max(np.abs(self.elements.sum(axis=1) - np.eye(self.dim)))
        if dev > tol:
            raise InvalidMeasurement(f"POVM elements do not sum to identity (deviation {dev:.1e})")
        return self

    def is_projective(self, tol: float = 1e-9) -> bool:
        E = self.elements
        return bool(np.max(np.abs(E @ E - E)) < tol)

    def to_json(self) -> dict:
        return {"schema": "povmset.v1", "dim": self.dim, "m": self.m, "o": self.o,
                "elements": _cplx_json(self.elements)}

    @classmethod
    def from_json(cls, obj: dict) -> "MeasurementSet":
        if obj.get("schema", "povmset.v1") != "povmset.v1":
            raise InvalidMeasurement(f"unexpected schema {obj.get('schema')!r}")
        el = _from_cplx_json(obj["elements"])
        ms = cls(el)
        if (ms.dim, ms.m, ms.o) != (obj["dim"], obj["m"], obj["o"]):
            raise InvalidMeasurement("declared sizes do not match elements")
        return ms.validate()


@dataclass(frozen=True, eq=False)
class Assemblage:
    """Subnormalized conditional states ``sigma_{a|x}`` with shape ``(m, o, d, d)``."""

    members: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.members, dtype=complex)
        if s.ndim != 4 or s.shape[2] != s.shape[3]:
            raise InvalidAssemblage(f"members must have shape (m, o, d, d), got {s.shape}")
        object.__setattr__(self, "members", 0.5 * (s + dag(s)))

    @property
    def m(self) -> int:
        return self.members.shape[0]

    @property
    def o(self) -> int:
        return self.members.shape[1]

    @property
    def d_B(self) -> int:
        return self.members.shape[2]

    @property
    def rho_B(self) -> np.ndarray:
        """Reduced state of Bob, read from input 0."""
        return self.members[0].sum(axis=0)

    def validate(self, tol: float = VALID_TOL) -> "Assemblage":
        if _psd_min(self.members) < -PSD_TOL:
            raise InvalidAssemblage("an assemblage member is not positive semidefinite")
        marg = self.members.sum(axis=1)
        ns = np.max(np.abs(marg - marg[0]))
        if ns > tol:
            raise InvalidAssemblage(f"no-signalling violated (deviation {ns:.1e})")
        tr = abs(np.trace(marg[0]).real - 1.0)
        if tr > tol:
            raise InvalidAssemblage(f"assemblage is not normalized (trace off by {tr:.1e})")
        return self

    def is_valid(self, tol: float = VALID_TOL) -> bool:
        try:
            self.validate(tol)
            return True
        except InvalidAssemblage:
            return False

    def mix(self, other: "Assemblage", p: float) -> "Assemblage":
        return Assemblage(p * self.members + (1 - p) * other.members)

    def to_json(self) -> dict:
        return {"schema": "assemblage.v1", "d_B": self.d_B, "m": self.m, "o": self.o,
                "members": _cplx_json(self.members)}

    @classmethod
    def from_json(cls, obj: dict, validate: bool = True) -> "Assemblage":
        if obj.get("schema", "assemblage.v1") != "assemblage.v1":
            raise InvalidAssemblage(f"unexpected schema {obj.get('schema')!r}")
        a = cls(_from_cplx_json(obj["members"]))
        if (a.d_B, a.m, a.o) != (obj["d_B"], obj["m"], obj["o"]):
            raise InvalidAssemblage("declared sizes do not match members")
        return a.validate() if validate else a


@dataclass(frozen=True, eq=False)
class StrategySet:
    """Deterministic response functions ``D(a|x, lam)``.

    ``outcomes[lam, x]`` is the outcome assigned to input ``x``; ``table`` has
    shape ``(m, o, d)`` with ``table[x, a, lam] = D(a|x, lam)``.
    """

    m: int
    o: int
    outcomes: np.ndarray
    table: np.ndarray

    @property
    def d(self) -> int:
        return self.outcomes.shape[0]


def enumerate_strategies(m: int, o: int, cap: int = STRATEGY_CAP) -> StrategySet:
    """All ``o**m`` deterministic strategies, ``lam = sum_x a_x o**x``."""
    if m < 1 or o < 1:
        raise ValueError("m and o must be positive")
    d = o**m
    if d > cap:
        raise ValueError(f"{d} strategies exceed the cap of {cap}")
    lam = np.arange(d)
    outcomes = (lam[:, None] // (o ** np.arange(m))[None, :]) % o
    table = np.zeros((m, o, d))
    for x in range(m):
        table[x, outcomes[:, x], lam] = 1.0
    return StrategySet(m, o, outcomes, table)


def generate(rho: np.ndarray, dims: Sequence[int], meas: MeasurementSet) -> Assemblage:
    """Assemblage ``sigma_{a|x} = tr_A[(M_{a|x} (x) 1) rho]`` (Alice is subsystem 0)."""
    rho = np.asarray(rho, dtype=complex)
    dA, dB = (int(d) for d in dims)
    if rho.shape != (dA * dB, dA * dB):
        raise ValueError(f"state of shape {rho.shape} does not match dims {(dA, dB)}")
    if meas.dim != dA:
        raise ValueError(f"measurement dimension {meas.dim} != Alice dimension {dA}")
    if abs(np.trace(rho).real - 1) > 1e-9 or _psd_min(rho) < -1e-9:
        raise ValueError("rho must be a unit-trace PSD operator")
    meas.validate()
    r = rho.reshape(dA, dB, dA, dB)
    # sigma[x,a] = sum_{ij} M[x,a][j,i] rho[i,:,j,:]
    sig = np.einsum("xaji,ibjc->xabc", meas.elements, r)
    return Assemblage(sig)


def lift_efficiency(a: Assemblage, eta: float) -> Assemblage:
    """Append a no-click outcome: clicks ``eta*sigma``, no-click ``(1-eta) rho_B``."""
    if not 0 <= eta <= 1:
        raise ValueError(f"eta={eta} outside [0, 1]")
    rho = a.members.sum(axis=1)
    out = np.concatenate([eta * a.members, (1 - eta) * rho[:, None]], axis=1)
    return Assemblage(out)


def ghjw_realise(a: Assemblage, tol: float = 1e-12) -> tuple[np.ndarray, MeasurementSet]:
    """Schmidt-state realisation reproducing ``a`` exactly.

    Returns the density matrix of ``sum_i sqrt(l_i) |i>_A U|i>_B`` on the
    support of ``rho_B`` together with Alice's POVMs.
    """
    a.validate()
    rho = a.rho_B
    lam, U = np.linalg.eigh(rho)
    sup = lam > tol * max(1.0, lam.max())
    lam, U = lam[sup], U[:, sup]
    r = lam.size
    psi = np.zeros((r, a.d_B), dtype=complex)
    psi[np.arange(r)] = (np.sqrt(lam)[:, None] * U.T)
    psi = psi.reshape(-1)
    state = np.outer(psi, psi.conj())
    inv = 1 / np.sqrt(lam)
    st = dag(U)[None, None] @ a.members @ U[None, None]
    M = inv[:, None] * st * inv[None, :]
    M = np.swapaxes(M, -1, -2)
    # fix rounding in completeness
    corr = np.eye(r) - M.sum(axis=1)
    M[:, -1] += corr
    return state, MeasurementSet(M)


def pauli_measurements(labels: str = "XZ") -> MeasurementSet:
    """Projective qubit measurements along Pauli axes, outcome 0 is ``+1``."""
    idx = {"X": 0, "Y": 1, "Z": 2}
    el = []
    for c in labels.upper():
        P = PAULIS[idx[c]]
        el.append([0.5 * (I2 + P), 0.5 * (I2 - P)])
    return MeasurementSet(np.array(el))


def directions_measurements(directions: np.ndarray) -> MeasurementSet:
    """Projective qubit measurements ``(1 +/- n.sigma)/2`` along given directions."""
    el = [[bloch_projector(n, 1), bloch_projector(n, -1)] for n in np.atleast_2d(directions)]
    return MeasurementSet(np.array(el))


def random_projective(d: int, m: int, rng: np.random.Generator) -> MeasurementSet:
    """``m`` Haar-random rank-one projective measurements with ``d`` outcomes."""
    el = []
    for _ in range(m):
        U = haar_unitary(d, rng)
        el.append([np.outer(U[:, k], U[:, k].conj()) for k in range(d)])
    return MeasurementSet(np.array(el))


def random_povm(d: int, m: int, o: int, rng: np.random.Generator) -> MeasurementSet:
    """Random POVMs from normalized Wishart elements."""
    el = []
    for _ in range(m):
        G = rng.normal(size=(o, d, d)) + 1j * rng.normal(size=(o, d, d))
        P = G @ dag(G)
        S = P.sum(axis=0)
        w, V = np.linalg.eigh(S)
        Si = (V / np.sqrt(w)) @ dag(V)
        el.append(Si @ P @ Si)
    return MeasurementSet(np.array(el))


def random_jm_measurements(d: int, m: int, o: int, rng: np.random.Generator) -> MeasurementSet:
    """Jointly measurable set: deterministic post-processing of a random parent POVM."""
    strat = enumerate_strategies(m, o)
    parent = random_povm(d, 1, strat.d, rng).elements[0]
    el = np.einsum("xal,lij->xaij", strat.table, parent)
    return MeasurementSet(el)


def random_assemblage(d_B: int, m: int, o: int, rng: np.random.Generator, d_A: int | None = None) -> Assemblage:
    """Assemblage from a random mixed state and random POVMs."""
    from .hermat import random_density
    d_A = d_A or d_B
    rho = random_density(d_A * d_B, rng)
    meas = random_povm(d_A, m, o, rng)
    return generate(rho, (d_A, d_B), meas)


def random_lhs_assemblage(d_B: int, m: int, o: int, rng: np.random.Generator) -> Assemblage:
    """Assemblage with an explicit LHS model from random hidden states."""
    strat = enumerate_strategies(m, o)
    G = rng.normal(size=(strat.d, d_B, d_B)) + 1j * rng.normal(size=(strat.d, d_B, d_B))
    sig = G @ dag(G)
    sig /= np.trace(sig.sum(axis=0)).real
    return Assemblage(np.einsum("xal,lij->xaij", strat.table, sig))


def maximally_mixed_assemblage(d_B: int, m: int, o: int) -> Assemblage:
    return Assemblage(np.broadcast_to(np.eye(d_B) / (d_B * o), (m, o, d_B, d_B)).copy())
