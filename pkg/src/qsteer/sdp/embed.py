"""Real embedding of complex Hermitian matrices and the ``hvec`` coordinates.

A Hermitian ``H`` is represented inside the real solver by the symmetric
matrix ``[[Re H, -Im H], [Im H, Re H]]``. Linear functionals on ``H`` use the
real ``n*n`` coordinate vector ``hvec(H)``: diagonal entries, the real parts
of the upper triangle in their own slots, and the imaginary parts of the
upper triangle stored in the mirrored lower slots.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


def embed_hermitian(H: np.ndarray) -> np.ndarray:
    """Return ``[[Re H, -Im H], [Im H, Re H]]``."""
    H = np.asarray(H, dtype=complex)
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def extract_hermitian(Xr: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed_hermitian`, averaging the redundant copies."""
    Xr = np.asarray(Xr, dtype=float)
    n = Xr.shape[0] // 2
    a, b = Xr[:n, :n], Xr[:n, n:]
    c, d = Xr[n:, :n], Xr[n:, n:]
    H = 0.5 * (a + d) + 0.5j * (c - b)
    return 0.5 * (H + H.conj().T)


def hvec(H: np.ndarray) -> np.ndarray:
    """Real coordinates of a Hermitian matrix (batched over leading axes)."""
    H = np.asarray(H)
    n = H.shape[-1]
    re = np.real(H)
    im = np.imag(H)
    upper = np.triu(np.ones((n, n), dtype=bool))
    out = np.where(upper, re, np.swapaxes(im, -1, -2))
    return out.reshape(H.shape[:-2] + (n * n,))


def unhvec(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`hvec`."""
    v = np.asarray(v, dtype=float)
    V = v.reshape(v.shape[:-1] + (n, n))
    re = np.triu(V)
    im = np.swapaxes(np.tril(V, -1), -1, -2)
    up = re + 1j * im
    diag = np.eye(n, dtype=bool)
    H = up + np.conj(np.swapaxes(up, -1, -2))
    H = np.where(diag, re.astype(complex), H)
    return H


def trace_row(A: np.ndarray) -> np.ndarray:
    """Row ``r`` with ``r @ hvec(H) == Re tr(A H)`` for Hermitian ``A``."""
    A = np.asarray(A)
    n = A.shape[-1]
    r = 2.0 * hvec(0.5 * (A + np.conj(np.swapaxes(A, -1, -2))))
    idx = np.arange(n) * (n + 1)
    r[..., idx] *= 0.5
    return r


def multiplier_from_row(y: np.ndarray, n: int) -> np.ndarray:
    """Hermitian ``Y`` with ``tr(Y H) == y @ hvec(H)`` for all Hermitian ``H``."""
    y = np.asarray(y, dtype=float).copy()
    mask = ~np.eye(n, dtype=bool).reshape(-1)
    y[..., mask] *= 0.5
    return unhvec(y, n)


@lru_cache(maxsize=32)
def herm_basis(n: int) -> np.ndarray:
    """Stack of ``n*n`` Hermitian matrices dual to :func:`hvec` (cached, read-only)."""
    B = unhvec(np.eye(n * n), n)
    B.flags.writeable = False
    return B
