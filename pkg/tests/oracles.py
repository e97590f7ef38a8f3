"""Independent reference computations used by the tests.

Nothing here calls into ``mccaspeech``'s numerical core: eigenvalues come
from closed-form polynomial roots, CCA from Cholesky whitening plus an SVD,
gradients from central differences.
"""

import cmath
import math

import numpy as np
from scipy import linalg


def char_poly(a):
    """Monic characteristic polynomial coefficients of a small matrix.

    Faddeev-LeVerrier: returns ``[1, c1, ..., cn]`` with
    ``det(lambda I - a) = lambda^n + c1 lambda^{n-1} + ... + cn``.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    coeffs = [1.0]
    m = np.zeros_like(a)
    c = 1.0
    for k in range(1, n + 1):
        m = a @ m + c * np.eye(n)
        c = -np.trace(a @ m) / k
        coeffs.append(c)
    return coeffs


def _cubic_real_roots(b, c, d):
    """Roots of x^3 + b x^2 + c x + d known to be all real (trigonometric form)."""
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    shift = -b / 3.0
    if p >= 0.0:  # triple root up to rounding
        return [shift - np.cbrt(q)] * 3
    r = 2.0 * math.sqrt(-p / 3.0)
    arg = 3.0 * q / (p * r)
    arg = max(-1.0, min(1.0, arg))
    phi = math.acos(arg) / 3.0
    return [shift + r * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)]


def _quartic_real_roots(b, c, d, e):
    """Roots of x^4 + b x^3 + c x^2 + d x + e known to be all real (Ferrari)."""
    shift = -b / 4.0
    p = c - 3.0 * b * b / 8.0
    q = b**3 / 8.0 - b * c / 2.0 + d
    r = -3.0 * b**4 / 256.0 + b * b * c / 16.0 - b * d / 4.0 + e
    # resolvent: 8 m^3 + 8 p m^2 + (2 p^2 - 8 r) m - q^2 = 0, take its largest root
    m = max(_cubic_real_roots(p, p * p / 4.0 - r, -q * q / 8.0))
    if m <= 0.0:  # biquadratic
        disc = cmath.sqrt(p * p - 4.0 * r)
        ys = []
        for z in ((-p + disc) / 2.0, (-p - disc) / 2.0):
            s = cmath.sqrt(z)
            ys += [s, -s]
        return [shift + y.real for y in ys]
    s = math.sqrt(2.0 * m)
    roots = []
    for sign in (1.0, -1.0):
        inner = -(2.0 * p + 2.0 * m + sign * 2.0 * q / s)
        root = cmath.sqrt(inner)
        roots += [shift + (sign * s + root.real) / 2.0, shift + (sign * s - root.real) / 2.0]
    return roots


def closed_form_eigenvalues(a):
    """Eigenvalues of a symmetric matrix with n <= 4, descending, from polynomial roots."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    coeffs = char_poly(a)
    if n == 1:
        roots = [a[0, 0]]
    elif n == 2:
        b, c = coeffs[1], coeffs[2]
        disc = math.sqrt(max(b * b - 4.0 * c, 0.0))
        roots = [(-b + disc) / 2.0, (-b - disc) / 2.0]
    elif n == 3:
        roots = _cubic_real_roots(*coeffs[1:])
    elif n == 4:
        roots = _quartic_real_roots(*coeffs[1:])
    else:
        raise ValueError("closed form only for n <= 4")
    return np.sort(np.array(roots, dtype=float))[::-1]


def random_symmetric(rng, n):
    g = rng.uniform(-1.0, 1.0, (n, n))
    return (g + g.T) / 2.0


def cca_whitening(x1, x2, t, eps):
    """Two-view CCA by Cholesky whitening and an SVD of the whitened cross-Gram."""
    l1 = linalg.cholesky(x1.T @ x1 + eps * np.eye(x1.shape[1]), lower=True)
    l2 = linalg.cholesky(x2.T @ x2 + eps * np.eye(x2.shape[1]), lower=True)
    c = linalg.solve_triangular(l1, linalg.solve_triangular(l2, (x1.T @ x2).T, lower=True).T,
                                lower=True)
    u, s, vt = np.linalg.svd(c)
    w1 = linalg.solve_triangular(l1.T, u[:, :t], lower=False)
    w2 = linalg.solve_triangular(l2.T, vt.T[:, :t], lower=False)
    return w1, w2, s[:t]


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def random_orthonormal(rng, rows, cols):
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def central_difference(f, theta, h=1e-6):
    """Gradient of scalar ``f`` at flat vector ``theta`` by central differences."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (f(up) - f(dn)) / (2.0 * h)
    return grad
