"""Special functions: Jacobi elliptic functions, the integral of sqrt(cosh),
the cubic whose roots fix the elliptic solutions, and the phase integrals.
"""

import math

import numpy as np

EPS = np.finfo(float).eps


class SingularParameters(ValueError):
    """Parameters sit on a boundary where a formula degenerates."""


def _check_modulus(k):
    k = float(k)
    if not 0.0 <= k <= 1.0:
        raise ValueError(f"elliptic modulus must lie in [0, 1], got {k}")
    return k


def _agm_ladder(k):
    """Descending Landen/AGM sequences (a_n, c_n) starting from (1, k', k)."""
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    a, b, c = [1.0], kp, [k]
    while abs(c[-1]) > EPS * a[-1] and len(a) < 64:
        an = 0.5 * (a[-1] + b)
        cn = 0.5 * (a[-1] - b)
        b = math.sqrt(a[-1] * b)
        a.append(an)
        c.append(cn)
    return a, c


def quarter_period(k):
    """Complete elliptic integral K(k), from the same AGM ladder."""
    k = _check_modulus(k)
    if k == 1.0:
        return math.inf
    a, _ = _agm_ladder(k)
    return math.pi / (2.0 * a[-1])


def jacobi(t, k):
    """Jacobi elliptic functions (sn, cn, dn)(t, k) for modulus k in [0, 1].

    Computed by the descending Landen transformation; t may be an array.
    """
    k = _check_modulus(k)
    t = np.asarray(t, dtype=float)
    if k == 0.0:
        return np.sin(t), np.cos(t), np.ones_like(t)
    if k == 1.0:
        s = 1.0 / np.cosh(t)
        return np.tanh(t), s, s.copy()
    a, c = _agm_ladder(k)
    n = len(a) - 1
    phi = (2.0 ** n) * a[n] * t
    prev = phi
    for j in range(n, 0, -1):
        prev = phi
        phi = 0.5 * (phi + np.arcsin(c[j] / a[j] * np.sin(phi)))
    sn = np.sin(phi)
    cn = np.cos(phi)
    if k <= 0.99 or n == 0:
        dn = np.sqrt((1.0 - k * sn) * (1.0 + k * sn))
    else:
        dn = cn / np.cos(prev - phi)
    return sn, cn, dn


def _simpson(f, a, fa, b, fb, m, fm, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    # the panel tolerance never goes below the rounding floor of the panel sum
    floor = 8.0 * EPS * (abs(left) + abs(right))
    if depth <= 0 or abs(delta) <= max(15.0 * tol, floor):
        return left + right + delta / 15.0
    return (_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + _simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1))


def adaptive_simpson(f, a, b, tol=1e-12, depth=40):
    """Adaptive Simpson quadrature of a scalar function on [a, b]."""
    if a == b:
        return 0.0
    m = 0.5 * (a + b)
    fa, fb, fm = f(a), f(b), f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson(f, a, fa, b, fb, m, fm, whole, tol, depth)


def _sqrt_cosh(s):
    return math.sqrt(math.cosh(s))


def _sqrt_cosh_integral(lo, hi, tol):
    # split into unit panels so the tolerance is spread evenly
    edges = np.append(np.arange(lo, hi, 1.0), hi)
    return float(sum(adaptive_simpson(_sqrt_cosh, a, b, tol / len(edges))
                     for a, b in zip(edges[:-1], edges[1:])))


def f_cosh(t, tol=1e-12):
    """f(t) = integral from 0 to t of sqrt(cosh s) ds; t may be an array."""
    if np.ndim(t) == 0:
        t = float(t)
        if t < 0:
            return -f_cosh(-t, tol)
        return _sqrt_cosh_integral(0.0, t, tol)
    t = np.asarray(t, dtype=float)
    # accumulate along the sorted magnitudes so each gap is integrated once
    flat = np.abs(t).ravel()
    order = np.argsort(flat)
    out = np.empty_like(flat)
    acc, prev = 0.0, 0.0
    for i in order:
        s = flat[i]
        if s > prev:
            acc += _sqrt_cosh_integral(prev, s, tol)
            prev = s
        out[i] = acc
    return (np.sign(t).ravel() * out).reshape(t.shape)


def q_poly(alphas, u):
    a1, a2, a3 = alphas
    return (a1 + u) * (a2 - u) * (a3 - u)


def check_alphas(alphas, tol=1e-12):
    a1, a2, a3 = (float(a) for a in alphas)
    if min(a1, a2, a3) <= 0:
        raise ValueError("alphas must be positive")
    if abs(1.0 / a1 - 1.0 / a2 - 1.0 / a3) > tol * (1.0 / a1):
        raise ValueError("alphas must satisfy 1/a1 = 1/a2 + 1/a3")
    return a1, a2, a3


def cubic_roots_sorted(a1, a2, a3, A):
    """Real roots g1 <= 0 <= g2 <= g3 of Q(u) - A^2, Q(u) = (a1+u)(a2-u)(a3-u)."""
    a1, a2, a3 = check_alphas((a1, a2, a3))
    A2 = float(A) ** 2
    top = a1 * a2 * a3
    if not 0.0 < A2 < top:
        if A2 == top or abs(A2 - top) <= 1e-15 * top:
            raise SingularParameters(
                "A^2 = a1 a2 a3 gives the double root u = 0 (the circle case)")
        raise ValueError("need 0 < A^2 < a1 a2 a3")
    coeffs = [1.0, a1 - a2 - a3, a2 * a3 - a1 * a2 - a1 * a3, top - A2]
    roots = np.roots(coeffs)
    if np.max(np.abs(roots.imag)) > 1e-8 * max(1.0, np.max(np.abs(roots))):
        raise ArithmeticError("complex roots in the admissible range")
    roots = np.sort(roots.real)

    def g(u):
        return q_poly((a1, a2, a3), u) - A2

    def dg(u):
        return (a2 - u) * (a3 - u) - (a1 + u) * (a3 - u) - (a1 + u) * (a2 - u)

    polished = []
    for r in roots:
        for _ in range(6):
            d = dg(r)
            if d == 0:
                break
            step = g(r) / d
            r -= step
            if abs(step) < 4 * EPS * max(1.0, abs(r)):
                break
        polished.append(r)
    g1, g2, g3 = sorted(polished)
    return g1, g2, g3


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _gauss_cumulative(f, t, panel=0.25):
    """Composite Gauss-Legendre integral of f over [0, t] for array t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    for i, ti in enumerate(t):
        if ti == 0:
            continue
        m = max(1, int(math.ceil(abs(ti) / panel)))
        edges = np.linspace(0.0, ti, m + 1)
        lo, hi = edges[:-1], edges[1:]
        mid = 0.5 * (lo + hi)[:, None]
        half = 0.5 * (hi - lo)[:, None]
        nodes = mid + half * _GL_X[None, :]
        out[i] = np.sum(half * _GL_W[None, :] * f(nodes))
    return out


def theta_integrals(alphas, A, gammas, t, theta1_0=0.0):
    """Phase functions theta_j(t) of the elliptic case with A != 0.

    theta_1 = theta1_0 - A int ds / (a1 + u), theta_2 = A int ds / (a2 - u),
    theta_3 = A int ds / (a3 - u), with u(s) = g1 + (g2 - g1) sn^2(sigma s, tau).
    """
    a1, a2, a3 = alphas
    g1, g2, g3 = gammas
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if A == 0:
        th = np.zeros((3,) + t.shape)
        th[0] += theta1_0
        return tuple(float(x[0]) for x in th) if scalar else th
    sigma = math.sqrt(g3 - g1)
    tau = math.sqrt((g2 - g1) / (g3 - g1))

    def u_of(s):
        sn, _, _ = jacobi(sigma * s, tau)
        return g1 + (g2 - g1) * sn ** 2

    dens = [a1 + g1, a2 - g2, a3 - g2]
    if min(dens) <= 0:
        raise SingularParameters("a vanishing denominator in the phase integrals")
    th1 = theta1_0 - A * _gauss_cumulative(lambda s: 1.0 / (a1 + u_of(s)), t)
    th2 = A * _gauss_cumulative(lambda s: 1.0 / (a2 - u_of(s)), t)
    th3 = A * _gauss_cumulative(lambda s: 1.0 / (a3 - u_of(s)), t)
    if scalar:
        return float(th1[0]), float(th2[0]), float(th3[0])
    return np.array([th1, th2, th3])
