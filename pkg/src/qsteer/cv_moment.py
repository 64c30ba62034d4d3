"""Steering tests from partially specified moment matrices.

Alice holds observables ``A_x`` whose outcomes are arbitrary real numbers;
Bob holds trusted observables ``B_y`` obeying a scalar commutator table
(quadratures ``[q, p] = i`` by default). A local-hidden-state model makes
Alice's observables effectively commuting, so the data is unsteerable only
if the observed moments complete to a PSD moment matrix

    Gamma_ij = <T_j^dag T_i>,  T in words of length <= k,

in which Alice words that are permutations of each other share one value.

Entries are classified as fixed by data (``<A_x^m B_y^n>`` and Bob-only
polynomials), fixed by Bob's algebra (normal ordering), fixed by Alice
commutation (identification) or free. Free moments are parametrized after
solving the Hermiticity relations ``<W^dag> = conj <W>``; infeasibility is
certified by a PSD multiplier ``Z`` with ``tr(Z G_k) = 0`` on every free
direction, which yields a linear steering inequality ``tr(Z C(data)) >= 0``.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import null_space

from .detect import SolverFailure
from .sdp import Expr, Problem, RedundantRowsWarning

VERDICT_TOL = 1e-8
PAIRING_TOL = 1e-8
QUADRATURE_COMMUTATORS = np.array([[0, 1j], [-1j, 0]])

AliceWord = tuple
BobWord = tuple


class UnderspecifiedData(ValueError):
    """Moments required at the requested level are missing."""

    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__("missing required moments: " + ", ".join(format_word(a, b) for a, b in self.missing))


class InconsistentData(ValueError):
    """Supplied moments violate Hermitian pairing or Bob's algebra."""


def format_word(alice: AliceWord, bob: BobWord) -> str:
    letters = [f"A{x}" for x in alice] + [f"B{y}" for y in bob]
    return " ".join(letters) if letters else "1"


def parse_word(text: str) -> tuple[AliceWord, BobWord]:
    """Inverse of :func:`format_word`; ``"A0 A0 B1"`` -> ``((0, 0), (1,))``."""
    alice, bob = [], []
    for tok in text.split():
        if tok == "1":
            continue
        if len(tok) < 2 or tok[0] not in "AB" or not tok[1:].isdigit():
            raise ValueError(f"bad letter {tok!r} in word {text!r}")
        if tok[0] == "A":
            if bob:
                raise ValueError(f"Alice letters must precede Bob letters in {text!r}")
            alice.append(int(tok[1:]))
        else:
            bob.append(int(tok[1:]))
    return tuple(alice), tuple(bob)


# Bob algebra ------------------------------------------------------------------

class BobAlgebra:
    """Scalar commutator table ``[B_y, B_z] = c[y, z]``; ``None`` means a free algebra."""

    def __init__(self, m_B: int, commutators=None):
        self.m_B = m_B
        if commutators is None:
            self.c = None
        else:
            c = np.asarray(commutators, complex)
            if c.shape != (m_B, m_B):
                raise ValueError(f"commutator table must have shape {(m_B, m_B)}")
            if np.max(np.abs(c + c.T)) > 1e-12:
                raise ValueError("commutator table must be antisymmetric")
            # [B, B'] of Hermitian operators is anti-Hermitian
            if np.max(np.abs(c.real)) > 1e-12:
                raise ValueError("commutators of Hermitian observables must be imaginary")
            self.c = c
        self._cache: dict = {}

    def is_canonical(self, w: BobWord) -> bool:
        return self.c is None or all(w[i] <= w[i + 1] for i in range(len(w) - 1))

    def normal_order(self, w: BobWord) -> dict:
        """Expand ``w`` over canonical words (sorted letters)."""
        w = tuple(w)
        if w in self._cache:
            return self._cache[w]
        if self.is_canonical(w):
            out = {w: 1.0 + 0j}
        else:
            i = next(i for i in range(len(w) - 1) if w[i] > w[i + 1])
            out = dict(self.normal_order(w[:i] + (w[i + 1], w[i]) + w[i + 2:]))
            # B_j B_i = B_i B_j + [B_j, B_i]
            c = self.c[w[i], w[i + 1]]
            if c != 0:
                for k, v in self.normal_order(w[:i] + w[i + 2:]).items():
                    out[k] = out.get(k, 0) + c * v
            out = {k: v for k, v in out.items() if v != 0}
        self._cache[w] = out
        return out

    def to_json(self):
        if self.c is None:
            return None
        return [[[float(v.real), float(v.imag)] for v in row] for row in self.c]


# data -------------------------------------------------------------------------

@dataclass(eq=False)
class MomentData:
    """Observed moments of a CV (or finite) steering scenario.

    Attributes
    ----------
    m_A, m_B : int
        Number of Alice and Bob observables.
    moments : dict
        ``{(x, m, y, n): value}`` for ``<A_x^m B_y^n>``; ``y = n = 0`` marks a
        pure Alice moment. Values are real.
    bob : dict
        ``{bob_word: value}`` for Bob-only expectations (complex). Words may be
        non-canonical; they are checked against the algebra.
    commutators : array or None
        Bob's scalar commutator table; defaults to quadratures when ``m_B == 2``.
    """

    m_A: int
    m_B: int
    moments: dict = field(default_factory=dict)
    bob: dict = field(default_factory=dict)
    commutators: object = "quadratures"

    def __post_init__(self):
        if isinstance(self.commutators, str):
            if self.commutators != "quadratures":
                raise ValueError(f"unknown algebra {self.commutators!r}")
            self.commutators = QUADRATURE_COMMUTATORS if self.m_B == 2 else None
        self.algebra = BobAlgebra(self.m_B, self.commutators)
        self.moments = {tuple(int(i) for i in k): float(np.real(v)) if abs(np.imag(v)) <= PAIRING_TOL
                        else complex(v) for k, v in self.moments.items()}
        self.bob = {tuple(int(i) for i in k): complex(v) for k, v in self.bob.items()}

    # lookups
    def canonical_bob(self) -> dict:
        out = {(): 1.0 + 0j}
        for w, v in self.bob.items():
            if self.algebra.is_canonical(w):
                out[w] = v
        return out

    def _expand_value(self, poly: dict, canon: dict):
        total = 0j
        for w, c in poly.items():
            if w not in canon:
                return None
            total += c * canon[w]
        return total

    def validate(self) -> None:
        """Check normalization, reality, algebra consistency and Hermitian pairing."""
        for k, v in self.moments.items():
            x, m, y, n = k
            if not (0 <= x < self.m_A and m >= 1 and n >= 0 and (n == 0 or 0 <= y < self.m_B)):
                raise InconsistentData(f"bad moment key {k}")
            if isinstance(v, complex):
                raise InconsistentData(f"<A{x}^{m} B{y}^{n}> is the mean of a Hermitian operator and must be real")
        if () in self.bob and abs(self.bob[()] - 1) > PAIRING_TOL:
            raise InconsistentData("<1> must equal 1")
        canon = self.canonical_bob()
        for w, v in self.bob.items():
            if any(not 0 <= y < self.m_B for y in w):
                raise InconsistentData(f"bad Bob word {w}")
            rewritten = self._expand_value(self.algebra.normal_order(w), canon)
            if rewritten is not None and abs(rewritten - v) > PAIRING_TOL:
                raise InconsistentData(f"<{format_word((), w)}> contradicts Bob's algebra")
            adj = w[::-1]
            adj_v = self.bob.get(adj)
            if adj_v is None:
                adj_v = self._expand_value(self.algebra.normal_order(adj), canon)
            if adj_v is not None and abs(adj_v - np.conj(v)) > PAIRING_TOL:
                raise InconsistentData(
                    f"Hermitian pairing violated: <{format_word((), adj)}> != conj <{format_word((), w)}>")

    def to_json(self) -> dict:
        known = []
        for (x, m, y, n), v in sorted(self.moments.items()):
            known.append({"word": format_word((x,) * m, (y,) * n), "re": float(np.real(v)), "im": float(np.imag(v))})
        for w, v in sorted(self.bob.items()):
            known.append({"word": format_word((), w), "re": float(v.real), "im": float(v.imag)})
        return {"schema": "cvmoments.v1", "observables": {"alice": self.m_A, "bob": self.m_B},
                "known_moments": known, "relations": {"commutators": self.algebra.to_json()}}

    @classmethod
    def from_json(cls, obj: dict) -> "MomentData":
        if obj.get("schema") != "cvmoments.v1":
            raise ValueError(f"unexpected schema {obj.get('schema')!r}")
        m_A = int(obj["observables"]["alice"])
        m_B = int(obj["observables"]["bob"])
        rel = (obj.get("relations") or {}).get("commutators")
        comm = None if rel is None else np.array([[complex(*v) for v in row] for row in rel])
        moments, bob = {}, {}
        for item in obj["known_moments"]:
            a, b = parse_word(item["word"])
            val = complex(item["re"], item.get("im", 0.0))
            if a:
                if len(set(a)) != 1 or len(set(b)) > 1:
                    raise ValueError(f"known Alice moments must have the form A_x^m B_y^n, got {item['word']!r}")
                moments[(a[0], len(a), b[0] if b else 0, len(b))] = val
            else:
                bob[b] = val
        return cls(m_A, m_B, moments, bob, comm)


# word list ----------------------------------------------------------------------

@dataclass(eq=False)
class CvMomentMatrix:
    """Moment-matrix skeleton at level ``k``.

    ``entries[i][j]`` (``i <= j``) is the expansion of ``<T_j^dag T_i>`` as a
    dict ``{(alice_sorted, bob_canonical): coefficient}``.
    """

    level: int
    words: list
    entries: list
    keys: list

    @property
    def size(self) -> int:
        return len(self.words)

    def classify(self) -> dict:
        """Count entries by the constraint family that pins them."""
        counts = {"data": 0, "algebra": 0, "commutation": 0, "free": 0}
        n = self.size
        for i in range(n):
            for j in range(i, n):
                raw_a = self.words[j][0][::-1] + self.words[i][0]
                raw_b = self.words[j][1][::-1] + self.words[i][1]
                terms = self.entries[i][j]
                if all(_known_form(t) for t in terms):
                    counts["data" if len(terms) == 1 and raw_b in {b for _, b in terms} else "algebra"] += 1
                elif tuple(sorted(raw_a)) != raw_a:
                    counts["commutation"] += 1
                else:
                    counts["free"] += 1
        return counts


def _known_form(key) -> bool:
    a, b = key
    if not a:
        return True
    return len(set(a)) == 1 and len(set(b)) <= 1


def build_word_list(m_A: int, m_B: int, k: int, commutators="quadratures") -> list:
    """Words of length ``<= k`` as ``(alice_word, bob_word)`` pairs.

    Alice letters are kept in every order (their commutation is imposed by
    the test, not here); Bob words are kept canonical under the commutator
    table, since a non-canonical word equals its canonical form plus
    shorter words already in the list.
    """
    if k < 0:
        raise ValueError("level must be >= 0")
    if isinstance(commutators, str):
        commutators = QUADRATURE_COMMUTATORS if m_B == 2 else None
    alg = BobAlgebra(m_B, commutators)
    words = [((), ())]
    for length in range(1, k + 1):
        for la in range(length, -1, -1):
            for a in itertools.product(range(m_A), repeat=la):
                for b in itertools.product(range(m_B), repeat=length - la):
                    if alg.is_canonical(b):
                        words.append((a, b))
    return words


def moment_matrix(m_A: int, m_B: int, k: int, commutators="quadratures") -> CvMomentMatrix:
    if isinstance(commutators, str):
        commutators = QUADRATURE_COMMUTATORS if m_B == 2 else None
    alg = BobAlgebra(m_B, commutators)
    words = build_word_list(m_A, m_B, k, commutators)
    n = len(words)
    entries = [[None] * n for _ in range(n)]
    keys = set()
    for i in range(n):
        for j in range(i, n):
            a = tuple(sorted(words[j][0][::-1] + words[i][0]))
            poly = alg.normal_order(words[j][1][::-1] + words[i][1])
            e = {(a, b): c for b, c in poly.items()}
            entries[i][j] = e
            keys.update(e)
    return CvMomentMatrix(k, words, entries, sorted(keys, key=lambda t: (len(t[0]) + len(t[1]), t)))


# test ----------------------------------------------------------------------------

@dataclass(eq=False)
class CvInequality:
    """Steering inequality ``I(data) = tr(Z C(data)) >= 0`` at a fixed level.

    ``coefficients`` maps every data key to ``(c_re, c_im)`` with
    ``I = constant + sum c_re Re v + c_im Im v``.
    """

    level: int
    m_A: int
    m_B: int
    Z: np.ndarray
    constant: float
    coefficients: dict

    def evaluate(self, data: MomentData) -> float:
        sk = _skeleton(data.m_A, data.m_B, self.level, data.algebra)
        C = _constant_part(sk, data)
        return float(np.real(np.trace(self.Z @ C)))

    def to_json(self) -> dict:
        coeffs = []
        for key, (cr, ci) in sorted(self.coefficients.items(), key=lambda t: str(t[0])):
            coeffs.append({"word": format_word(*key), "re": cr, "im": ci})
        return {"level": self.level, "constant": self.constant, "coefficients": coeffs}


@dataclass(eq=False)
class CvVerdict:
    feasible: bool
    mu_star: float
    completion: np.ndarray | None = None
    inequality: CvInequality | None = None
    matrix: CvMomentMatrix | None = None
    info: dict = field(default_factory=dict)

    @property
    def demonstrates_steering(self) -> bool:
        return not self.feasible


@dataclass(eq=False)
class _Skeleton:
    mm: CvMomentMatrix
    known: list       # keys pinned by data
    unknown: list     # keys left free (before Hermiticity relations)
    G: np.ndarray     # (2U, n, n) Hermitian coefficient matrices for Re/Im of each unknown


_SKELETONS: dict = {}


def _skeleton(m_A, m_B, k, alg: BobAlgebra) -> _Skeleton:
    ck = None if alg.c is None else tuple(np.round(alg.c.ravel(), 12))
    key = (m_A, m_B, k, ck)
    if key in _SKELETONS:
        return _SKELETONS[key]
    mm = moment_matrix(m_A, m_B, k, alg.c)
    known = [t for t in mm.keys if _known_form(t)]
    unknown = [t for t in mm.keys if not _known_form(t)]
    index = {t: u for u, t in enumerate(unknown)}
    n = mm.size
    G = np.zeros((2 * len(unknown), n, n), complex)
    for i in range(n):
        for j in range(i, n):
            for t, c in mm.entries[i][j].items():
                if t not in index:
                    continue
                u = index[t]
                for part, unit in ((0, 1.0), (1, 1j)):
                    val = c * unit
                    if i == j:
                        G[2 * u + part, i, i] += val.real
                    else:
                        G[2 * u + part, i, j] += val
                        G[2 * u + part, j, i] += np.conj(val)
    sk = _Skeleton(mm, known, unknown, G)
    _SKELETONS[key] = sk
    return sk


def _known_value(t, data: MomentData, canon: dict):
    a, b = t
    if not a:
        return canon.get(b)
    x, m = a[0], len(a)
    y, n = (b[0], len(b)) if b else (0, 0)
    v = data.moments.get((x, m, y, n))
    return None if v is None else complex(v)


def _relations(sk: _Skeleton, data: MomentData, canon: dict):
    """Hermiticity relations ``conj L(a, b) = L(a, b^dag)`` on the unknowns, as ``R u = r``."""
    index = {t: u for u, t in enumerate(sk.unknown)}
    rows, rhs = [], []
    for t in sk.unknown:
        a, b = t
        poly = data.algebra.normal_order(b[::-1])
        # conj(u_t) - sum c_s L(a, s) = 0, split into real and imaginary parts
        row = np.zeros((2, 2 * len(sk.unknown)))
        const = 0j
        u = index[t]
        row[0, 2 * u] += 1.0
        row[1, 2 * u + 1] -= 1.0
        for s, c in poly.items():
            key = (a, s)
            if key in index:
                v = index[key]
                # c * (re + i im)
                row[0, 2 * v] -= c.real
                row[0, 2 * v + 1] += c.imag
                row[1, 2 * v] -= c.imag
                row[1, 2 * v + 1] -= c.real
            else:
                val = _known_value(key, data, canon)
                if val is None:
                    raise UnderspecifiedData([key])
                const += c * val
        rows.extend(row)
        rhs.extend([const.real, const.imag])
    if not rows:
        return np.zeros((0, 0)), np.zeros(0)
    return np.array(rows), np.array(rhs)


def _constant_part(sk: _Skeleton, data: MomentData) -> np.ndarray:
    """``C(data)``: Gamma with every free direction set to zero."""
    canon = data.canonical_bob()
    missing = [t for t in sk.known if _known_value(t, data, canon) is None]
    if missing:
        raise UnderspecifiedData(missing)
    n = sk.mm.size
    C = np.zeros((n, n), complex)
    for i in range(n):
        for j in range(i, n):
            val = 0j
            for t, c in sk.mm.entries[i][j].items():
                if _known_form(t):
                    val += c * _known_value(t, data, canon)
            C[i, j] = val.real if i == j else val
            C[j, i] = np.conj(C[i, j])
    if sk.unknown:
        R, r = _relations(sk, data, canon)
        up, *_ = np.linalg.lstsq(R, r, rcond=None)
        if np.max(np.abs(R @ up - r), initial=0.0) > 1e-9:
            raise InconsistentData("Hermiticity relations of the unknown moments are inconsistent with the data")
        C = C + np.einsum("u,uij->ij", up, sk.G)
    return C


def _free_directions(sk: _Skeleton, data: MomentData) -> np.ndarray:
    if not sk.unknown:
        return np.zeros((0,) + sk.G.shape[1:], complex)
    R, _ = _relations(sk, data, data.canonical_bob())
    N = null_space(R)
    return np.einsum("uk,uij->kij", N, sk.G)


def required_moments(m_A: int, m_B: int, k: int, commutators="quadratures") -> list:
    """Data keys ``(alice_word, bob_word)`` that a level-``k`` test needs."""
    if isinstance(commutators, str):
        commutators = QUADRATURE_COMMUTATORS if m_B == 2 else None
    sk = _skeleton(m_A, m_B, k, BobAlgebra(m_B, commutators))
    return [t for t in sk.known if t != ((), ())]


def cv_steering_test(data: MomentData, k: int = 1, validate: bool = True) -> CvVerdict:
    """Decide whether the moments complete to a level-``k`` moment matrix.

    Solves ``max mu`` s.t. ``C(data) + sum_k t_k G_k >= mu 1``. A negative
    optimum certifies steering, and the PSD multiplier provides an inequality
    that is non-negative on every completable dataset.
    """
    if k not in (1, 2):
        raise ValueError("level must be 1 or 2")
    if validate:
        data.validate()
    sk = _skeleton(data.m_A, data.m_B, k, data.algebra)
    C = _constant_part(sk, data)
    Gs = _free_directions(sk, data)
    n = sk.mm.size
    prob = Problem(strict=True)
    t = [prob.scalar(name=f"t{i}") for i in range(len(Gs))]
    gamma = Expr.constant(C, n)
    for ti, Gi in zip(t, Gs):
        gamma = gamma + ti * Gi
    prob.add_psd(gamma, name="moment")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RedundantRowsWarning)
        sol = prob.solve()
    if sol.status != "optimal":
        raise SolverFailure(f"moment test ended with status {sol.status}")
    mu = sol.primal_value
    Gamma = sol.value(gamma)
    info = {"iterations": sol.iterations, "size": n, "free": len(Gs)}
    if mu >= -VERDICT_TOL:
        if np.linalg.eigvalsh(Gamma).min() < -1e-7:
            raise SolverFailure("completion failed re-verification")
        return CvVerdict(True, mu, Gamma, None, sk.mm, info)
    Z = sol.dual("moment")
    Z = 0.5 * (Z + Z.conj().T)
    Z = Z / np.trace(Z).real
    ineq = _inequality(sk, data, Z, Gs)
    value = ineq.evaluate(data)
    info["inequality_value"] = value
    if np.linalg.eigvalsh(Z).min() < -1e-8 or value >= 0:
        raise SolverFailure("steering inequality failed re-verification")
    return CvVerdict(False, mu, None, ineq, sk.mm, info)


def _inequality(sk: _Skeleton, data: MomentData, Z: np.ndarray, Gs: np.ndarray) -> CvInequality:
    """Project ``Z`` onto the free directions' annihilator and read off coefficients."""
    if len(Gs):
        resid = np.einsum("ij,kji->k", Z, Gs).real
        if np.max(np.abs(resid)) > 1e-6:
            raise SolverFailure("dual multiplier does not annihilate the free directions")
    coeffs = {}
    base_keys = [t for t in sk.known if t != ((), ())]

    def value_with(values):
        d = MomentData(data.m_A, data.m_B, {}, {}, data.algebra.c)
        for t, v in values.items():
            a, b = t
            if a:
                d.moments[(a[0], len(a), b[0] if b else 0, len(b))] = v
            else:
                d.bob[b] = complex(v)
        return float(np.real(np.trace(Z @ _constant_part(sk, d))))

    zeros = {t: 0.0 for t in base_keys}
    const = value_with(zeros)
    for t in base_keys:
        cr = value_with({**zeros, t: 1.0}) - const
        ci = 0.0
        if not t[0]:
            ci = value_with({**zeros, t: 1j}) - const
        coeffs[t] = (cr, ci)
    return CvInequality(sk.mm.level, data.m_A, data.m_B, Z, const, coeffs)


# data generators -------------------------------------------------------------------

def _wick(word, two_point):
    """Ordered Gaussian moment: sum over pairings of ordered two-point functions."""
    if not word:
        return 1.0 + 0j
    if len(word) % 2:
        return 0j
    first, rest = word[0], word[1:]
    total = 0j
    for j in range(len(rest)):
        total += two_point[first, rest[j]] * _wick(rest[:j] + rest[j + 1:], two_point)
    return total


def gaussian_moment_data(V: np.ndarray, k: int = 1) -> MomentData:
    """Moments of a zero-mean two-mode Gaussian state with homodyne observables.

    ``V`` is the covariance matrix in the order ``(q_A, p_A, q_B, p_B)`` with
    vacuum variance 1/2. Alice measures ``q_A, p_A``, Bob ``q_B, p_B``.
    """
    V = np.asarray(V, float)
    Om = np.array([[0, 1], [-1, 0]])
    two = V + 0.5j * np.kron(np.eye(2), Om)
    moments, bob = {}, {}
    for x in range(2):
        for m in range(1, 2 * k + 1):
            for y in range(2):
                for n in range(0, 2 * k + 1 - m):
                    if n == 0 and y:
                        continue
                    moments[(x, m, y, n)] = _wick((x,) * m + (2 + y,) * n, two).real
    for n in range(1, 2 * k + 1):
        for b in itertools.combinations_with_replacement(range(2), n):
            bob[b] = _wick(tuple(2 + y for y in b), two)
    return MomentData(2, 2, moments, bob)


def wiseman_steerable(V: np.ndarray) -> bool:
    """Gaussian criterion: Alice steers Bob iff ``det(V_B - C^T V_A^{-1} C) < 1/4``."""
    return wiseman_margin(V) < 0


def wiseman_margin(V: np.ndarray) -> float:
    V = np.asarray(V, float)
    S = V[2:, 2:] - V[:2, 2:].T @ np.linalg.solve(V[:2, :2], V[:2, 2:])
    return float(np.linalg.det(S) - 0.25)


def tmsv_covariance(r: float, eta_A: float = 1.0, noise_B: float = 0.0) -> np.ndarray:
    """Two-mode squeezed vacuum, Alice's mode through loss ``eta_A``, Bob with added noise."""
    c2, s2 = np.cosh(2 * r) / 2, np.sinh(2 * r) / 2
    a = eta_A * c2 + (1 - eta_A) / 2
    b = c2 + noise_B
    c = np.sqrt(eta_A) * s2
    Z = np.diag([1.0, -1.0])
    return np.block([[a * np.eye(2), c * Z], [c * Z, b * np.eye(2)]])


@lru_cache(maxsize=4)
def _fock_quadratures(dim: int):
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    q = (a + a.T) / np.sqrt(2)
    p = (a - a.T) / (1j * np.sqrt(2))
    return q, p


def state_moment_data(rho: np.ndarray, alice_ops, bob_ops, k: int, commutators="quadratures",
                      split: bool = True) -> MomentData:
    """Moments of a two-party density matrix for the given observables.

    Each word is split in halves, ``<L R> = tr(rho L R)`` computed as
    ``sum_i p_i <L^dag psi_i, R psi_i>``; with Fock truncation this keeps every
    intermediate vector within half the word's degree.
    """
    rho = np.asarray(rho, complex)
    A = [np.asarray(o, complex) for o in alice_ops]
    B = [np.asarray(o, complex) for o in bob_ops]
    dA, dB = A[0].shape[0], B[0].shape[0]
    w, U = np.linalg.eigh(rho)
    keep = w > 1e-14
    psis = (U[:, keep] * np.sqrt(w[keep])).T

    def op(alice, bob):
        Oa = np.eye(dA)
        for x in alice:
            Oa = Oa @ A[x]
        Ob = np.eye(dB)
        for y in bob:
            Ob = Ob @ B[y]
        return np.kron(Oa, Ob)

    def expect(alice, bob):
        la, lb = len(alice) // 2, len(bob) // 2
        L = op(alice[:la], bob[:lb])
        R = op(alice[la:], bob[lb:])
        return complex(np.sum(np.conj(psis @ L.conj()) * (psis @ R.T))) if split else complex(np.trace(rho @ L @ R))

    moments, bob = {}, {}
    for x in range(len(A)):
        for m in range(1, 2 * k + 1):
            for y in range(len(B)):
                for n in range(0, 2 * k + 1 - m):
                    if n == 0 and y:
                        continue
                    moments[(x, m, y, n)] = expect((x,) * m, (y,) * n).real
    m_B = len(B)
    probe = MomentData(len(A), m_B, {}, {}, commutators)
    for n in range(1, 2 * k + 1):
        for b in itertools.product(range(m_B), repeat=n):
            if probe.algebra.is_canonical(b):
                bob[b] = expect((), b)
    return MomentData(len(A), m_B, moments, bob, probe.algebra.c)


def lossy_single_photon(eta: float, k: int = 2, photons: int = 3) -> MomentData:
    """``eta |psi><psi| + (1 - eta)|00><00|`` with ``psi = (|01> + |10>)/sqrt 2``.

    Moments come from a Fock basis truncated at ``photons`` per mode; with
    the half-word split this is exact for words of degree ``<= 2 (photons - 1)``.
    """
    d = photons + 1
    q, p = _fock_quadratures(d)
    e = np.eye(d)
    psi = (np.kron(e[0], e[1]) + np.kron(e[1], e[0])) / np.sqrt(2)
    vac = np.kron(e[0], e[0])
    rho = eta * np.outer(psi, psi) + (1 - eta) * np.outer(vac, vac)
    return state_moment_data(rho, [q, p], [q, p], k)


def classical_model_data(rng: np.random.Generator, m_A: int = 2, m_B: int = 2, d_B: int = 3,
                         n_lambda: int = 4, k: int = 2) -> MomentData:
    """Moments of an LHS-style model with commuting Alice variables.

    Hidden variable ``lam`` fixes Alice's real values ``a_{x,lam}`` and Bob's
    state ``rho_lam``; Bob's observables are random Hermitian matrices, so his
    algebra is left free.
    """
    p = rng.dirichlet(np.ones(n_lambda))
    vals = rng.normal(size=(n_lambda, m_A)) * rng.uniform(0.5, 2.0)
    Bs = []
    for _ in range(m_B):
        X = rng.normal(size=(d_B, d_B)) + 1j * rng.normal(size=(d_B, d_B))
        Bs.append((X + X.conj().T) / 2)
    rhos = []
    for _ in range(n_lambda):
        X = rng.normal(size=(d_B, d_B)) + 1j * rng.normal(size=(d_B, d_B))
        r = X @ X.conj().T
        rhos.append(r / np.trace(r))

    def bob_exp(b):
        O = np.eye(d_B, dtype=complex)
        for y in b:
            O = O @ Bs[y]
        return np.array([np.trace(r @ O) for r in rhos])

    moments, bob = {}, {}
    for x in range(m_A):
        for m in range(1, 2 * k + 1):
            for y in range(m_B):
                for n in range(0, 2 * k + 1 - m):
                    if n == 0 and y:
                        continue
                    moments[(x, m, y, n)] = float(np.real(np.sum(p * vals[:, x] ** m * bob_exp((y,) * n))))
    for n in range(1, 2 * k + 1):
        for b in itertools.product(range(m_B), repeat=n):
            bob[b] = complex(np.sum(p * bob_exp(b)))
    return MomentData(m_A, m_B, moments, bob, None)
