"""Pure-numpy implementations of the hot numeric kernels.

Every function here has a numba twin in ``_kernels_numba`` with the same
signature; ``fourpl.kernels`` picks one of the two at import time.  All
inputs are C-contiguous float64 arrays, the coefficient vector order is
always (b..., c..., d...).
"""

import numpy as np

# Probabilities are clamped away from 0/1 before logs and divisions.
CLAMP = 1e-12


def sigmoid(eta):
    """Numerically stable logistic function."""
    out = np.empty_like(eta)
    pos = eta >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    t = np.exp(eta[~pos])
    out[~pos] = t / (1.0 + t)
    return out


def components(X, Z, b, c, d):
    """Return (phi, lower, upper, pi) for every row."""
    phi = sigmoid(X @ b)
    lower = Z @ c
    upper = Z @ d
    pi = lower + (upper - lower) * phi
    return phi, lower, upper, pi


def rss_value_grad(y, X, Z, b, c, d, weighted):
    """Residual sum of squares and its gradient in (b, c, d) order.

    ``weighted`` divides each squared residual by pi*(1-pi).
    """
    phi, lower, upper, pi = components(X, Z, b, c, d)
    r = y - pi
    if weighted:
        v = pi * (1.0 - pi)
        v = np.maximum(v, CLAMP)
        value = float(np.sum(r * r / v))
        t = (-2.0 * r * v - r * r * (1.0 - 2.0 * pi)) / (v * v)
    else:
        value = float(r @ r)
        t = -2.0 * r
    span = upper - lower
    phim = phi * (1.0 - phi)
    gb = X.T @ (t * span * phim)
    gc = Z.T @ (t * (1.0 - phi))
    gd = Z.T @ (t * phi)
    return value, np.concatenate([gb, gc, gd])


def loglik_value(y, X, Z, b, c, d):
    """Bernoulli log-likelihood; probabilities clamped to [CLAMP, 1-CLAMP]."""
    _, _, _, pi = components(X, Z, b, c, d)
    pi = np.clip(pi, CLAMP, 1.0 - CLAMP)
    return float(np.sum(y * np.log(pi) + (1.0 - y) * np.log1p(-pi)))


def loglik_value_grad(y, X, Z, b, c, d):
    phi, lower, upper, pi = components(X, Z, b, c, d)
    pi = np.clip(pi, CLAMP, 1.0 - CLAMP)
    value = float(np.sum(y * np.log(pi) + (1.0 - y) * np.log1p(-pi)))
    u = (y - pi) / (pi * (1.0 - pi))
    span = upper - lower
    phim = phi * (1.0 - phi)
    gb = X.T @ (u * span * phim)
    gc = Z.T @ (u * (1.0 - phi))
    gd = Z.T @ (u * phi)
    return value, np.concatenate([gb, gc, gd])


def _prob_jacobian(X, Z, phi, span):
    """Per-row gradient of pi stacked as an (n, kb+2*kc) matrix."""
    phim = phi * (1.0 - phi)
    return np.hstack([
        X * (span * phim)[:, None],
        Z * (1.0 - phi)[:, None],
        Z * phi[:, None],
    ])


def _second_deriv_sum(X, Z, phi, span, w):
    """Sum over rows of w_p times the Hessian of pi at row p.

    Only the b-b, b-c and b-d blocks of that Hessian are nonzero.
    """
    kb = X.shape[1]
    kc = Z.shape[1]
    k = kb + 2 * kc
    phim = phi * (1.0 - phi)
    out = np.zeros((k, k))
    coef_bb = w * span * phim * (1.0 - 2.0 * phi)
    out[:kb, :kb] = X.T @ (coef_bb[:, None] * X)
    coef_bc = -w * phim
    bc = X.T @ (coef_bc[:, None] * Z)
    out[:kb, kb:kb + kc] = bc
    out[kb:kb + kc, :kb] = bc.T
    bd = -bc
    out[:kb, kb + kc:] = bd
    out[kb + kc:, :kb] = bd.T
    return out


def loglik_hessian(y, X, Z, b, c, d):
    """Analytic Hessian of the log-likelihood in (b, c, d) order."""
    phi, lower, upper, pi = components(X, Z, b, c, d)
    pi = np.clip(pi, CLAMP, 1.0 - CLAMP)
    span = upper - lower
    u = (y - pi) / (pi * (1.0 - pi))
    uprime = -(y / pi**2 + (1.0 - y) / (1.0 - pi) ** 2)
    G = _prob_jacobian(X, Z, phi, span)
    H = G.T @ (uprime[:, None] * G)
    H += _second_deriv_sum(X, Z, phi, span, u)
    return H


def nls_sandwich_parts(y, X, Z, b, c, d):
    """Averaged outer matrices (Gamma, Sigma) for the NLS sandwich.

    Gamma is the mean Jacobian of the per-row estimating function
    psi = -2*(y-pi)*dpi; Sigma the mean of psi psi^T.
    """
    phi, lower, upper, pi = components(X, Z, b, c, d)
    span = upper - lower
    r = y - pi
    n = y.shape[0]
    G = _prob_jacobian(X, Z, phi, span)
    gamma = 2.0 * (G.T @ G - _second_deriv_sum(X, Z, phi, span, r)) / n
    sigma = 4.0 * (G.T @ ((r * r)[:, None] * G)) / n
    return gamma, sigma


def em_weights(y, phi, lower, upper):
    """Expected latent category indicators (w1, w2, w3, w4, ok).

    ``ok`` is False when a denominator drops below CLAMP for a row that
    uses it.
    """
    pi = lower + (upper - lower) * phi
    om = 1.0 - pi
    used1 = y > 0.5
    ok = bool(np.all(pi[used1] >= CLAMP) and np.all(om[~used1] >= CLAMP))
    w1 = np.where(used1, lower * y / np.maximum(pi, CLAMP), 0.0)
    w2 = y - w1
    w4 = np.where(used1, 0.0, (1.0 - upper) * (1.0 - y) / np.maximum(om, CLAMP))
    w3 = (1.0 - y) - w4
    return w1, w2, w3, w4, ok


def l1_value_grad_hess(X, w2, w3, b):
    """Weighted logistic log-likelihood in b with gradient and Hessian."""
    phi = sigmoid(X @ b)
    phic = np.clip(phi, CLAMP, 1.0 - CLAMP)
    value = float(np.sum(w2 * np.log(phic) + w3 * np.log1p(-phic)))
    grad = X.T @ (w2 - (w2 + w3) * phi)
    hw = (w2 + w3) * phi * (1.0 - phi)
    hess = -(X.T @ (hw[:, None] * X))
    return value, grad, hess


def l2_value_grad(Z, w1, w4, w23, c, d):
    """Asymptote block of the complete-data log-likelihood and gradient."""
    L = Z @ c
    U = Z @ d
    span = np.maximum(U - L, CLAMP)
    Lc = np.maximum(L, CLAMP)
    omU = np.maximum(1.0 - U, CLAMP)
    value = float(np.sum(w1 * np.log(Lc) + w4 * np.log(omU) + w23 * np.log(span)))
    gc = Z.T @ (w1 / Lc - w23 / span)
    gd = Z.T @ (w23 / span - w4 / omU)
    return value, np.concatenate([gc, gd])


def l2_value_grad_hess(Z, w1, w4, w23, c, d):
    """As l2_value_grad plus the (concave) analytic Hessian."""
    value, grad = l2_value_grad(Z, w1, w4, w23, c, d)
    L = np.maximum(Z @ c, CLAMP)
    U = Z @ d
    span = np.maximum(U - Z @ c, CLAMP)
    omU = np.maximum(1.0 - U, CLAMP)
    kc = Z.shape[1]
    hess = np.zeros((2 * kc, 2 * kc))
    wcc = -w1 / L**2 - w23 / span**2
    wcd = w23 / span**2
    wdd = -w4 / omU**2 - w23 / span**2
    hess[:kc, :kc] = Z.T @ (wcc[:, None] * Z)
    cross = Z.T @ (wcd[:, None] * Z)
    hess[:kc, kc:] = cross
    hess[kc:, :kc] = cross.T
    hess[kc:, kc:] = Z.T @ (wdd[:, None] * Z)
    return value, grad, hess


def asymptote_loglik_value_grad_hess(y, Z, phi, c, d):
    """Log-likelihood in (c, d) with the logistic part frozen.

    The probability is linear in (c, d) here, so the Hessian is exact
    from first derivatives alone.
    """
    L = Z @ c
    U = Z @ d
    pi = np.clip(L + (U - L) * phi, CLAMP, 1.0 - CLAMP)
    value = float(np.sum(y * np.log(pi) + (1.0 - y) * np.log1p(-pi)))
    u = (y - pi) / (pi * (1.0 - pi))
    uprime = -(y / pi**2 + (1.0 - y) / (1.0 - pi) ** 2)
    A = np.hstack([Z * (1.0 - phi)[:, None], Z * phi[:, None]])
    grad = A.T @ u
    hess = A.T @ (uprime[:, None] * A)
    return value, grad, hess
