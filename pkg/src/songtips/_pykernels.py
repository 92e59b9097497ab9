"""Pure numpy/scipy versions of the compiled kernels in ``_core.pyx``.

Each function has the same signature and return contract as its compiled
counterpart; the test suite checks the two against each other.
"""

import numpy as np
import scipy.sparse as sp


def greedy_map(L, k, stop_eps):
    n = L.shape[0]
    steps = min(k, n)
    c = np.zeros((max(steps, 1), n))
    d2 = np.array(np.diag(L), dtype=float)
    taken = np.zeros(n, dtype=bool)
    picked, gains = [], []
    for step in range(steps):
        masked = np.where(taken, -np.inf, d2)
        j = int(np.argmax(masked))
        best = masked[j]
        if taken[j] or best <= stop_eps:
            break
        taken[j] = True
        picked.append(j)
        gains.append(np.log(best))
        if step == steps - 1:
            break
        e = (L[j, :] - c[:step, j] @ c[:step, :]) / np.sqrt(best)
        e[taken] = 0.0
        c[step, :] = e
        d2 = d2 - e * e
    return np.asarray(picked, dtype=np.int64), np.asarray(gains, dtype=float)


def rank_iterate(indptr, indices, weights, base, init, damping, tol, max_iter):
    M = len(indptr) - 1
    T = sp.csr_matrix((weights, indices, indptr), shape=(M, M))
    w = np.full(M, init)
    it, resid = 0, np.inf
    while it < max_iter:
        nxt = base + damping * (T @ w)
        resid = float(np.max(np.abs(nxt - w)))
        w = nxt
        it += 1
        if resid < tol:
            break
    return w, it, resid


def plsa_accumulate(doc, word, count, theta, phi):
    joint = theta[doc] * phi[:, word].T
    s = joint.sum(axis=1)
    with np.errstate(divide="ignore"):
        loglik = float(np.sum(count * np.log(s))) if np.all(s > 0) else -np.inf
    ok = s > 0
    post = np.zeros_like(joint)
    post[ok] = joint[ok] * (count[ok] / s[ok])[:, None]
    t = theta.shape[1]
    acc_theta = np.zeros((theta.shape[0], t))
    acc_phi = np.zeros((t, phi.shape[1]))
    np.add.at(acc_theta, doc, post)
    np.add.at(acc_phi.T, word, post)
    return acc_theta, acc_phi, loglik
