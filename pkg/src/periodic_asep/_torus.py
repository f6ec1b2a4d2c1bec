"""Compiled tensor-product trapezoid sum over the k-torus."""
import os

import numpy as np
from numba import config, njit, prange

# the installed TBB is too old for numba; skip probing it
if "NUMBA_THREADING_LAYER" not in os.environ:
    config.THREADING_LAYER = "omp"


@njit(cache=True)
def _matvec(T, i, j, Jt, vec, S):
    for mu in range(S):
        acc = 0j
        for nu in range(S):
            acc += T[i, j, Jt, mu, nu] * vec[i + 1, nu]
        vec[i, mu] = acc


@njit(cache=True)
def _inner(g, F, T, suffix_dependent, jo, out):
    """All tuples whose outermost variable sits at node ``jo``; bins into ``out``."""
    k = T.shape[0]
    M = g.shape[0]
    S = T.shape[3]
    idx = np.zeros(k, dtype=np.int64)
    jsuf = np.zeros(k + 1, dtype=np.int64)
    w = np.ones(k + 1, dtype=np.complex128)
    vec = np.ones((k + 1, S), dtype=np.complex128)

    top = k - 1
    idx[top] = jo
    jsuf[top] = jo
    w[top] = g[jo]
    _matvec(T, top, jo, jo if suffix_dependent else 0, vec, S)
    if k == 1:
        out[jo] += w[0] * vec[0, 0]
        return

    i = top - 1
    while True:
        if i >= 1:
            j = idx[i]
            J = (jsuf[i + 1] + j) % M
            jsuf[i] = J
            wi = w[i + 1] * g[j]
            for l in range(i + 1, k):
                wi *= F[j, idx[l]]
            w[i] = wi
            _matvec(T, i, j, J if suffix_dependent else 0, vec, S)
            if i > 1:
                i -= 1
                idx[i] = 0
                continue
        # leaf: variable 0 needs only the top row of its matrix
        J1 = jsuf[1]
        w1 = w[1]
        for j0 in range(M):
            wl = w1 * g[j0]
            for l in range(1, k):
                wl *= F[j0, idx[l]]
            Jl = (J1 + j0) % M
            Jt0 = Jl if suffix_dependent else 0
            s = 0j
            for nu in range(S):
                s += T[0, j0, Jt0, 0, nu] * vec[1, nu]
            out[Jl] += wl * s
        if k == 2:
            return
        # odometer over variables 1..k-2
        i = 1
        idx[i] += 1
        while idx[i] == M:
            idx[i] = 0
            i += 1
            if i == top:
                return
            idx[i] += 1


@njit(cache=True, parallel=True)
def torus_sum(g, F, T, suffix_dependent):
    """Sum the integrand over every node tuple, binned by total angle index.

    g[j]            one-variable factor at node j (weight included)
    F[a, b]         pair factor f(node a, node b)
    T[i, j, J]      transfer matrix of variable i at node j and suffix angle J
                    (the J axis has length 1 unless ``suffix_dependent``)

    Returns G[J], the sum over tuples with (j_1 + ... + j_k) mod M == J.
    Partial sums are kept per outermost node and reduced in index order, so
    the result does not depend on the thread count.
    """
    M = g.shape[0]
    partial = np.zeros((M, M), dtype=np.complex128)
    for jo in prange(M):
        _inner(g, F, T, suffix_dependent, np.int64(jo), partial[jo])
    G = np.zeros(M, dtype=np.complex128)
    for jo in range(M):
        for J in range(M):
            G[J] += partial[jo, J]
    return G
