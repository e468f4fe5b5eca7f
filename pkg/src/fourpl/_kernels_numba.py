"""Numba-compiled twins of the kernels in ``_kernels_numpy``.

Same signatures, loop-based bodies.  Import fails cleanly when numba is
not installed; ``fourpl.kernels`` then falls back to the numpy path.
"""

import math

import numpy as np
from numba import njit

CLAMP = 1e-12


@njit(cache=True, inline="always")
def _sig(e):
    if e >= 0.0:
        return 1.0 / (1.0 + math.exp(-e))
    t = math.exp(e)
    return t / (1.0 + t)


@njit(cache=True)
def sigmoid(eta):
    out = np.empty_like(eta)
    for i in range(eta.shape[0]):
        out[i] = _sig(eta[i])
    return out


@njit(cache=True)
def components(X, Z, b, c, d):
    n = X.shape[0]
    phi = np.empty(n)
    lower = np.empty(n)
    upper = np.empty(n)
    pi = np.empty(n)
    for p in range(n):
        eta = 0.0
        for j in range(X.shape[1]):
            eta += X[p, j] * b[j]
        phi[p] = _sig(eta)
        lo = 0.0
        up = 0.0
        for j in range(Z.shape[1]):
            lo += Z[p, j] * c[j]
            up += Z[p, j] * d[j]
        lower[p] = lo
        upper[p] = up
        pi[p] = lo + (up - lo) * phi[p]
    return phi, lower, upper, pi


@njit(cache=True)
def rss_value_grad(y, X, Z, b, c, d, weighted):
    n = X.shape[0]
    kb = X.shape[1]
    kc = Z.shape[1]
    grad = np.zeros(kb + 2 * kc)
    value = 0.0
    for p in range(n):
        eta = 0.0
        for j in range(kb):
            eta += X[p, j] * b[j]
        phi = _sig(eta)
        lo = 0.0
        up = 0.0
        for j in range(kc):
            lo += Z[p, j] * c[j]
            up += Z[p, j] * d[j]
        pi = lo + (up - lo) * phi
        r = y[p] - pi
        if weighted:
            v = pi * (1.0 - pi)
            if v < CLAMP:
                v = CLAMP
            value += r * r / v
            t = (-2.0 * r * v - r * r * (1.0 - 2.0 * pi)) / (v * v)
        else:
            value += r * r
            t = -2.0 * r
        wb = t * (up - lo) * phi * (1.0 - phi)
        for j in range(kb):
            grad[j] += wb * X[p, j]
        wc = t * (1.0 - phi)
        wd = t * phi
        for j in range(kc):
            grad[kb + j] += wc * Z[p, j]
            grad[kb + kc + j] += wd * Z[p, j]
    return value, grad


@njit(cache=True)
def loglik_value(y, X, Z, b, c, d):
    n = X.shape[0]
    value = 0.0
    for p in range(n):
        eta = 0.0
        for j in range(X.shape[1]):
            eta += X[p, j] * b[j]
        phi = _sig(eta)
        lo = 0.0
        up = 0.0
        for j in range(Z.shape[1]):
            lo += Z[p, j] * c[j]
            up += Z[p, j] * d[j]
        pi = lo + (up - lo) * phi
        if pi < CLAMP:
            pi = CLAMP
        elif pi > 1.0 - CLAMP:
            pi = 1.0 - CLAMP
        value += y[p] * math.log(pi) + (1.0 - y[p]) * math.log1p(-pi)
    return value


@njit(cache=True)
def loglik_value_grad(y, X, Z, b, c, d):
    n = X.shape[0]
    kb = X.shape[1]
    kc = Z.shape[1]
    grad = np.zeros(kb + 2 * kc)
    value = 0.0
    for p in range(n):
        eta = 0.0
        for j in range(kb):
            eta += X[p, j] * b[j]
        phi = _sig(eta)
        lo = 0.0
        up = 0.0
        for j in range(kc):
            lo += Z[p, j] * c[j]
            up += Z[p, j] * d[j]
        pi = lo + (up - lo) * phi
        if pi < CLAMP:
            pi = CLAMP
        elif pi > 1.0 - CLAMP:
            pi = 1.0 - CLAMP
        value += y[p] * math.log(pi) + (1.0 - y[p]) * math.log1p(-pi)
        u = (y[p] - pi) / (pi * (1.0 - pi))
        wb = u * (up - lo) * phi * (1.0 - phi)
        for j in range(kb):
            grad[j] += wb * X[p, j]
        wc = u * (1.0 - phi)
        wd = u * phi
        for j in range(kc):
            grad[kb + j] += wc * Z[p, j]
            grad[kb + kc + j] += wd * Z[p, j]
    return value, grad


@njit(cache=True, inline="always")
def _row_pi_grad(X, Z, p, kb, kc, phi, span, g):
    w = span * phi * (1.0 - phi)
    for j in range(kb):
        g[j] = w * X[p, j]
    for j in range(kc):
        g[kb + j] = (1.0 - phi) * Z[p, j]
        g[kb + kc + j] = phi * Z[p, j]


@njit(cache=True, inline="always")
def _add_second_deriv(H, X, Z, p, kb, kc, phi, span, w):
    pm = phi * (1.0 - phi)
    cbb = w * span * pm * (1.0 - 2.0 * phi)
    cbc = -w * pm
    for j in range(kb):
        xj = X[p, j]
        for l in range(kb):
            H[j, l] += cbb * xj * X[p, l]
        for l in range(kc):
            v = cbc * xj * Z[p, l]
            H[j, kb + l] += v
            H[kb + l, j] += v
            H[j, kb + kc + l] -= v
            H[kb + kc + l, j] -= v


@njit(cache=True)
def loglik_hessian(y, X, Z, b, c, d):
    n = X.shape[0]
    kb = X.shape[1]
    kc = Z.shape[1]
    k = kb + 2 * kc
    H = np.zeros((k, k))
    g = np.empty(k)
    for p in range(n):
        eta = 0.0
        for j in range(kb):
            eta += X[p, j] * b[j]
        phi = _sig(eta)
        lo = 0.0
        up = 0.0
        for j in range(kc):
            lo += Z[p, j] * c[j]
            up += Z[p, j] * d[j]
        pi = lo + (up - lo) * phi
        if pi < CLAMP:
            pi = CLAMP
        elif pi > 1.0 - CLAMP:
            pi = 1.0 - CLAMP
        u = (y[p] - pi) / (pi * (1.0 - pi))
        uprime = -(y[p] / (pi * pi) + (1.0 - y[p]) / ((1.0 - pi) * (1.0 - pi)))
        span = up - lo
        _row_pi_grad(X, Z, p, kb, kc, phi, span, g)
        for j in range(k):
            for l in range(k):
                H[j, l] += uprime * g[j] * g[l]
        _add_second_deriv(H, X, Z, p, kb, kc, phi, span, u)
    return H


@njit(cache=True)
def nls_sandwich_parts(y, X, Z, b, c, d):
    n = X.shape[0]
    kb = X.shape[1]
    kc = Z.shape[1]
    k = kb + 2 * kc
    gamma = np.zeros((k, k))
    sigma = np.zeros((k, k))
    g = np.empty(k)
    for p in range(n):
        eta = 0.0
        for j in range(kb):
            eta += X[p, j] * b[j]
        phi = _sig(eta)
        lo = 0.0
        up = 0.0
        for j in range(kc):
            lo += Z[p, j] * c[j]
            up += Z[p, j] * d[j]
        pi = lo + (up - lo) * phi
        r = y[p] - pi
        span = up - lo
        _row_pi_grad(X, Z, p, kb, kc, phi, span, g)
        for j in range(k):
            for l in range(k):
                gamma[j, l] += 2.0 * g[j] * g[l]
                sigma[j, l] += 4.0 * r * r * g[j] * g[l]
        _add_second_deriv(gamma, X, Z, p, kb, kc, phi, span, -2.0 * r)
    for j in range(k):
        for l in range(k):
            gamma[j, l] /= n
            sigma[j, l] /= n
    return gamma, sigma


@njit(cache=True)
def em_weights(y, phi, lower, upper):
    n = y.shape[0]
    w1 = np.zeros(n)
    w2 = np.zeros(n)
    w3 = np.zeros(n)
    w4 = np.zeros(n)
    ok = True
    for p in range(n):
        pi = lower[p] + (upper[p] - lower[p]) * phi[p]
        if y[p] > 0.5:
            if pi < CLAMP:
                ok = False
                pi = CLAMP
            w1[p] = lower[p] * y[p] / pi
            w2[p] = y[p] - w1[p]
        else:
            om = 1.0 - pi
            if om < CLAMP:
                ok = False
                om = CLAMP
            w4[p] = (1.0 - upper[p]) * (1.0 - y[p]) / om
            w3[p] = (1.0 - y[p]) - w4[p]
    return w1, w2, w3, w4, ok


@njit(cache=True)
def l1_value_grad_hess(X, w2, w3, b):
    n = X.shape[0]
    kb = X.shape[1]
    value = 0.0
    grad = np.zeros(kb)
    hess = np.zeros((kb, kb))
    for p in range(n):
        eta = 0.0
        for j in range(kb):
            eta += X[p, j] * b[j]
        phi = _sig(eta)
        phic = phi
        if phic < CLAMP:
            phic = CLAMP
        elif phic > 1.0 - CLAMP:
            phic = 1.0 - CLAMP
        value += w2[p] * math.log(phic) + w3[p] * math.log1p(-phic)
        r = w2[p] - (w2[p] + w3[p]) * phi
        hw = (w2[p] + w3[p]) * phi * (1.0 - phi)
        for j in range(kb):
            grad[j] += r * X[p, j]
            for l in range(kb):
                hess[j, l] -= hw * X[p, j] * X[p, l]
    return value, grad, hess


@njit(cache=True)
def l2_value_grad(Z, w1, w4, w23, c, d):
    n = Z.shape[0]
    kc = Z.shape[1]
    value = 0.0
    grad = np.zeros(2 * kc)
    for p in range(n):
        lo = 0.0
        up = 0.0
        for j in range(kc):
            lo += Z[p, j] * c[j]
            up += Z[p, j] * d[j]
        span = up - lo
        if span < CLAMP:
            span = CLAMP
        if lo < CLAMP:
            lo = CLAMP
        om = 1.0 - up
        if om < CLAMP:
            om = CLAMP
        value += w1[p] * math.log(lo) + w4[p] * math.log(om) + w23[p] * math.log(span)
        tc = w1[p] / lo - w23[p] / span
        td = w23[p] / span - w4[p] / om
        for j in range(kc):
            grad[j] += tc * Z[p, j]
            grad[kc + j] += td * Z[p, j]
    return value, grad


@njit(cache=True)
def l2_value_grad_hess(Z, w1, w4, w23, c, d):
    n = Z.shape[0]
    kc = Z.shape[1]
    value = 0.0
    grad = np.zeros(2 * kc)
    hess = np.zeros((2 * kc, 2 * kc))
    for p in range(n):
        lo = 0.0
        up = 0.0
        for j in range(kc):
            lo += Z[p, j] * c[j]
            up += Z[p, j] * d[j]
        span = up - lo
        if span < CLAMP:
            span = CLAMP
        if lo < CLAMP:
            lo = CLAMP
        om = 1.0 - up
        if om < CLAMP:
            om = CLAMP
        value += w1[p] * math.log(lo) + w4[p] * math.log(om) + w23[p] * math.log(span)
        tc = w1[p] / lo - w23[p] / span
        td = w23[p] / span - w4[p] / om
        wcc = -w1[p] / (lo * lo) - w23[p] / (span * span)
        wcd = w23[p] / (span * span)
        wdd = -w4[p] / (om * om) - w23[p] / (span * span)
        for j in range(kc):
            zj = Z[p, j]
            grad[j] += tc * zj
            grad[kc + j] += td * zj
            for l in range(kc):
                zl = Z[p, l]
                hess[j, l] += wcc * zj * zl
                hess[j, kc + l] += wcd * zj * zl
                hess[kc + j, l] += wcd * zj * zl
                hess[kc + j, kc + l] += wdd * zj * zl
    return value, grad, hess


@njit(cache=True)
def asymptote_loglik_value_grad_hess(y, Z, phi, c, d):
    n = Z.shape[0]
    kc = Z.shape[1]
    value = 0.0
    grad = np.zeros(2 * kc)
    hess = np.zeros((2 * kc, 2 * kc))
    a = np.empty(2 * kc)
    for p in range(n):
        lo = 0.0
        up = 0.0
        for j in range(kc):
            lo += Z[p, j] * c[j]
            up += Z[p, j] * d[j]
        pi = lo + (up - lo) * phi[p]
        if pi < CLAMP:
            pi = CLAMP
        elif pi > 1.0 - CLAMP:
            pi = 1.0 - CLAMP
        value += y[p] * math.log(pi) + (1.0 - y[p]) * math.log1p(-pi)
        u = (y[p] - pi) / (pi * (1.0 - pi))
        uprime = -(y[p] / (pi * pi) + (1.0 - y[p]) / ((1.0 - pi) * (1.0 - pi)))
        for j in range(kc):
            a[j] = (1.0 - phi[p]) * Z[p, j]
            a[kc + j] = phi[p] * Z[p, j]
        for j in range(2 * kc):
            grad[j] += u * a[j]
            for l in range(2 * kc):
                hess[j, l] += uprime * a[j] * a[l]
    return value, grad, hess
