# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: split-scan for tree building and KNN voting.

The split scan mirrors kernels/pure.py bit-for-bit: class counts are exact
int64 and every candidate score is two float64 divisions plus one addition.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "compiled"


def scan_split(double[::1] sorted_values, long long[::1] sorted_labels, int n_classes):
    """Best binary split of one pre-sorted feature column; see kernels.pure."""
    cdef Py_ssize_t n = sorted_values.shape[0]
    if n < 2:
        return -1, 0.0
    cdef long long[::1] cnt = np.zeros(n_classes, dtype=np.int64)
    cdef long long[::1] rem = np.zeros(n_classes, dtype=np.int64)
    cdef long long a_left = 0
    cdef long long a_right = 0
    cdef Py_ssize_t i
    cdef long long c
    for i in range(n):
        rem[sorted_labels[i]] += 1
    for i in range(n_classes):
        a_right += rem[i] * rem[i]

    cdef double best_score = -np.inf
    cdef Py_ssize_t best_t = -1
    cdef double score
    cdef Py_ssize_t t
    for t in range(1, n):
        c = sorted_labels[t - 1]
        a_left += 2 * cnt[c] + 1
        cnt[c] += 1
        a_right += -2 * rem[c] + 1
        rem[c] -= 1
        if sorted_values[t - 1] < sorted_values[t]:
            score = (<double> a_left) / (<double> t) + (<double> a_right) / (<double> (n - t))
            if score > best_score:
                best_score = score
                best_t = t
    if best_t < 0:
        return -1, 0.0
    return best_t, best_score


def knn_block(
    double[:, ::1] train_x,
    long long[::1] train_y,
    double[::1] train_sq,
    double[:, ::1] test_block,
    int k,
    int n_classes,
    bint distance_weighted,
):
    """Class-probability votes of the k nearest training rows for one block
    of test rows; neighbor ties resolved toward the lower training index."""
    cdef Py_ssize_t m = test_block.shape[0]
    cdef Py_ssize_t n = train_x.shape[0]
    cdef Py_ssize_t f = train_x.shape[1]
    if k > n:
        k = n
    cdef cnp.ndarray[cnp.float64_t, ndim=2] proba_arr = np.zeros((m, n_classes))
    cdef double[:, ::1] proba = proba_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bd_arr = np.empty(k)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] bi_arr = np.empty(k, dtype=np.int64)
    cdef double[::1] best_d = bd_arr
    cdef long long[::1] best_i = bi_arr
    cdef Py_ssize_t r, j, q, pos, filled
    cdef double d2, diff, acc, w, total
    cdef bint any_zero
    for r in range(m):
        filled = 0
        for j in range(n):
            acc = 0.0
            for q in range(f):
                diff = test_block[r, q] - train_x[j, q]
                acc += diff * diff
            d2 = acc
            if filled < k:
                pos = filled
                while pos > 0 and best_d[pos - 1] > d2:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = d2
                best_i[pos] = j
                filled += 1
            elif d2 < best_d[k - 1]:
                pos = k - 1
                while pos > 0 and best_d[pos - 1] > d2:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = d2
                best_i[pos] = j
        if distance_weighted:
            any_zero = False
            for j in range(k):
                if best_d[j] <= 0.0:
                    any_zero = True
                    break
            total = 0.0
            for j in range(k):
                if any_zero:
                    w = 1.0 if best_d[j] <= 0.0 else 0.0
                else:
                    w = 1.0 / sqrt(best_d[j])
                proba[r, train_y[best_i[j]]] += w
                total += w
        else:
            total = <double> k
            for j in range(k):
                proba[r, train_y[best_i[j]]] += 1.0
        for j in range(n_classes):
            proba[r, j] /= total
    return proba_arr
