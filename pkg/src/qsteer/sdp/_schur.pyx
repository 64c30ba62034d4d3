# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Schur complement assembly over sparse constraint triplets.

For each block the product U = W A_j W is formed from the nonzeros of A_j,
then M[i, j] += sum over nonzeros (p, q, v) of A_i of v * U[q, p].
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def schur_group(double[:, :, ::1] W, long[::1] blk_ptr, long[::1] rows,
                long[::1] ent_ptr, long[::1] ent_p, long[::1] ent_q,
                double[::1] ent_v, double[:, ::1] M):
    cdef Py_ssize_t K = W.shape[0]
    cdef Py_ssize_t N = W.shape[1]
    cdef Py_ssize_t k, jj, ii, e, r, s, i, j, p, q
    cdef double v, acc
    cdef double[:, ::1] U = np.empty((N, N), dtype=np.float64)
    for k in range(K):
        for jj in range(blk_ptr[k], blk_ptr[k + 1]):
            j = rows[jj]
            for r in range(N):
                for s in range(N):
                    U[r, s] = 0.0
            for e in range(ent_ptr[jj], ent_ptr[jj + 1]):
                p = ent_p[e]
                q = ent_q[e]
                v = ent_v[e]
                for r in range(N):
                    acc = v * W[k, r, p]
                    if acc != 0.0:
                        for s in range(N):
                            U[r, s] += acc * W[k, q, s]
            for ii in range(blk_ptr[k], jj + 1):
                i = rows[ii]
                acc = 0.0
                for e in range(ent_ptr[ii], ent_ptr[ii + 1]):
                    acc += ent_v[e] * U[ent_q[e], ent_p[e]]
                M[i, j] += acc
                if i != j:
                    M[j, i] += acc
