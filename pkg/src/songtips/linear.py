"""L2-regularized multinomial logistic regression on sparse features.

Full-batch gradient descent with a backtracking (Armijo) line search: an
epoch only commits a step that lowers the objective, so the recorded loss
history is non-increasing by construction.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class TrainingError(ValueError):
    pass


class NumericalError(ArithmeticError):
    """A numeric routine produced non-finite values."""


@dataclass
class SoftmaxFit:
    weights: np.ndarray  # (features, classes)
    bias: np.ndarray  # (classes,)
    losses: list = field(default_factory=list)


def softmax(z):
    z = np.asarray(z, dtype=float)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _objective(X, Y, sw, W, b, l2):
    Z = X @ W + b
    Zmax = Z.max(axis=1, keepdims=True)
    logZ = Zmax[:, 0] + np.log(np.exp(Z - Zmax).sum(axis=1))
    ce = logZ - np.sum(Z * Y, axis=1)
    loss = float(sw @ ce) + 0.5 * l2 * float(np.sum(W * W))
    P = np.exp(Z - logZ[:, None])
    G = (P - Y) * sw[:, None]
    return loss, G


def fit_softmax(X, y, n_classes, l2=1e-3, epochs=300, seed=0, sample_weight=None, step=1.0, tol=1e-12):
    """Fit weights and bias; ``y`` holds integer class ids.

    Rows of ``X`` should be roughly unit-scaled (the callers L2-normalize).
    ``sample_weight`` is renormalized to sum to one. The bias is not
    regularized.
    """
    X = sp.csr_matrix(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n, p = X.shape
    if n == 0:
        raise TrainingError("no training examples")
    Y = np.zeros((n, n_classes))
    Y[np.arange(n), y] = 1.0
    sw = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    sw = sw / sw.sum()

    rng = np.random.default_rng(seed)
    W = rng.normal(0.0, 0.01, size=(p, n_classes))
    b = np.zeros(n_classes)

    loss, G = _objective(X, Y, sw, W, b, l2)
    if not np.isfinite(loss):
        raise NumericalError("non-finite training loss at initialization")
    losses = [loss]
    for _ in range(epochs):
        gW = X.T @ G + l2 * W
        gb = G.sum(axis=0)
        gnorm2 = float(np.sum(gW * gW) + np.sum(gb * gb))
        if gnorm2 < 1e-24:
            break
        while step > 1e-12:
            W_new, b_new = W - step * gW, b - step * gb
            new_loss, G_new = _objective(X, Y, sw, W_new, b_new, l2)
            if not np.isfinite(new_loss):
                raise NumericalError("non-finite training loss")
            if new_loss <= loss - 1e-4 * step * gnorm2:
                break
            step *= 0.5
        else:
            break
        improvement = loss - new_loss
        W, b, loss, G = W_new, b_new, new_loss, G_new
        losses.append(loss)
        step = min(step * 2.0, 1e4)
        if improvement < tol * max(1.0, abs(loss)):
            break
    return SoftmaxFit(W, b, losses)


def l2_normalize_rows(X):
    X = sp.csr_matrix(X, dtype=float)
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    norms[norms == 0] = 1.0
    return sp.diags(1.0 / norms) @ X
