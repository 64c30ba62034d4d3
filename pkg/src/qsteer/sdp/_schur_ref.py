"""Vectorized numpy assembly of the Schur complement matrix.

This is the fallback used when the compiled kernel is unavailable. Both
implementations accumulate, for every positive semidefinite block,

    M[i, j] += tr(A_i W A_j W)

over the constraint rows ``i, j`` that touch the block.
"""
from __future__ import annotations

import numpy as np


def schur_group_ref(W, blk_ptr, rows, dense_blocks, M):
    """Accumulate one group of equally sized blocks into ``M``.

    Parameters
    ----------
    W : ndarray, shape (K, N, N)
        Scaling matrices of the ``K`` blocks in the group.
    blk_ptr : ndarray of int, shape (K + 1,)
        Block ``k`` owns ``rows[blk_ptr[k]:blk_ptr[k + 1]]``.
    rows : ndarray of int
        Global constraint indices touching each block.
    dense_blocks : list of ndarray
        ``dense_blocks[k]`` has shape ``(m_k, N, N)`` and stores the
        symmetric constraint matrices of block ``k``.
    M : ndarray, shape (m, m)
        Accumulator, updated in place.
    """
    for k in range(W.shape[0]):
        lo, hi = blk_ptr[k], blk_ptr[k + 1]
        if hi == lo:
            continue
        r = rows[lo:hi]
        B = dense_blocks[k]
        Wk = W[k]
        T = Wk @ B @ Wk
        mk = B.shape[0]
        M[np.ix_(r, r)] += B.reshape(mk, -1) @ T.reshape(mk, -1).T
