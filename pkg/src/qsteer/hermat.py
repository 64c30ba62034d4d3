"""Dense Hermitian linear algebra used throughout the package.

Operators are plain ``numpy`` complex arrays. Composite systems follow the
convention that the leftmost tensor factor is subsystem 0.
"""
from __future__ import annotations

from functools import reduce
from typing import Iterable, Sequence

import numpy as np

HERM_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (X, Y, Z)


class DimensionError(ValueError):
    """Raised when an operator does not match its declared subsystem dimensions."""


def as_hermitian(a, tol: float = HERM_TOL) -> np.ndarray:
    """Return ``a`` as a symmetrized complex Hermitian matrix.

    Parameters
    ----------
    a : array_like
        Square matrix.
    tol : float
        Largest tolerated entrywise deviation from Hermiticity.

    Raises
    ------
    ValueError
        If ``a`` is not square or deviates from Hermitian by more than ``tol``.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.2e})")
    return 0.5 * (a + a.conj().T)


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of the given operators, left to right."""
    if not ops:
        raise ValueError("tensor needs at least one operator")
    return reduce(np.kron, ops)


def _check_dims(op: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise DimensionError(f"subsystem dimensions must be positive: {dims}")
    n = int(np.prod(dims))
    if op.shape[-2:] != (n, n):
        raise DimensionError(f"operator of shape {op.shape[-2:]} does not match dims {dims}")
    return dims


def _as_set(sel, nsys: int) -> list[int]:
    if isinstance(sel, (int, np.integer)):
        sel = [int(sel)]
    out = sorted(set(int(s) for s in sel))
    if any(s < 0 or s >= nsys for s in out):
        raise DimensionError(f"subsystem selector {sel} out of range for {nsys} subsystems")
    return out


def partial_trace(op: np.ndarray, dims: Sequence[int], keep: int | Iterable[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    Parameters
    ----------
    op : ndarray
        Operator on the composite space, shape ``(..., n, n)``; leading axes
        are treated as a batch.
    dims : sequence of int
        Local dimensions, leftmost factor first.
    keep : int or iterable of int
        Subsystems retained, in their original order.
    """
    op = np.asarray(op)
    dims = _check_dims(op, dims)
    keep = _as_set(keep, len(dims))
    batch = op.shape[:-2]
    nsys = len(dims)
    t = op.reshape(batch + dims + dims)
    nb = len(batch)
    traced = [s for s in range(nsys) if s not in keep]
    # contract traced subsystems pairwise, highest index first so axes stay valid
    for s in sorted(traced, reverse=True):
        cur = t.ndim - nb
        half = cur // 2
        t = np.trace(t, axis1=nb + s, axis2=nb + half + s)
    dk = int(np.prod([dims[s] for s in keep])) if keep else 1
    return t.reshape(batch + (dk, dk))


def partial_transpose(op: np.ndarray, dims: Sequence[int], on: int | Iterable[int]) -> np.ndarray:
    """Transpose the subsystems listed in ``on``; leading axes are a batch."""
    op = np.asarray(op)
    dims = _check_dims(op, dims)
    on = _as_set(on, len(dims))
    batch = op.shape[:-2]
    nb = len(batch)
    nsys = len(dims)
    t = op.reshape(batch + dims + dims)
    perm = list(range(nb + 2 * nsys))
    for s in on:
        perm[nb + s], perm[nb + nsys + s] = perm[nb + nsys + s], perm[nb + s]
    return t.transpose(perm).reshape(op.shape)


def min_eig(op: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian operator (or of a batch, overall)."""
    op = np.asarray(op)
    h = 0.5 * (op + dag(op))
    return float(np.min(np.linalg.eigvalsh(h)))


def is_psd(op: np.ndarray, tol: float = 1e-8) -> bool:
    return min_eig(op) >= -tol


def ket(*digits: int, d: int = 2) -> np.ndarray:
    """Computational-basis ket ``|digits>`` with local dimension ``d``."""
    v = np.zeros(d ** len(digits), dtype=complex)
    idx = 0
    for k in digits:
        idx = idx * d + k
    v[idx] = 1.0
    return v


def proj(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def phi_plus(d: int = 2) -> np.ndarray:
    """Maximally entangled state ``sum_i |ii>/sqrt(d)`` as a density matrix."""
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = 1 / np.sqrt(d)
    return proj(v)


def werner(w: float, d: int = 2) -> np.ndarray:
    """Isotropic family ``w |phi+><phi+| + (1-w) 1/d^2``."""
    return w * phi_plus(d) + (1 - w) * np.eye(d * d) / d**2


def ghz(n: int = 3) -> np.ndarray:
    v = np.zeros(2**n, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return proj(v)


def w_state(n: int = 3) -> np.ndarray:
    v = np.zeros(2**n, dtype=complex)
    for k in range(n):
        v[1 << k] = 1 / np.sqrt(n)
    return proj(v)


def noisy(rho: np.ndarray, w: float) -> np.ndarray:
    """White-noise mixture ``w rho + (1-w) 1/D``."""
    n = rho.shape[0]
    return w * rho + (1 - w) * np.eye(n) / n


def bloch_projector(n: Sequence[float], sign: int = 1) -> np.ndarray:
    """Qubit projector ``(1 + sign * n.sigma)/2`` for a unit vector ``n``."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    return 0.5 * (I2 + sign * (n[0] * X + n[1] * Y + n[2] * Z))


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from a complex Ginibre matrix."""
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (a + dag(a)))
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
