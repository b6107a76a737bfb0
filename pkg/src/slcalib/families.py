"""Closed-form solution families and the recursive Fourier solver for the
ruled k-family.

A family is evaluated through a ``Family`` object that knows which flow it
solves ("z" for the six-vector system, "pq" for the k-family), returns its
state and time derivative at any t, and assembles the map Phi.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import flow
from .cgeom import cross
from .specfun import (check_alphas, cubic_roots_sorted, f_cosh, jacobi,
                      q_poly, theta_integrals)

ADMISSIBLE_TOL = 1e-12


class InadmissibleParameters(ValueError):
    """Family parameters violate their defining constraint."""


# ---------------------------------------------------------------- exponential sums

class ExpSum:
    """Finite sum  sum_n coef[n] t^pow[n] exp(i freq[n] t)  with array-valued
    coefficients of a common shape."""

    def __init__(self, coef, freq, tpow=None, shape=None):
        coef = np.asarray(coef, dtype=complex)
        freq = np.asarray(freq, dtype=float).ravel()
        if shape is None:
            shape = coef.shape[1:]
        self.shape = tuple(shape)
        self.coef = coef.reshape((len(freq),) + self.shape)
        self.freq = freq
        self.tpow = (np.zeros(len(freq), dtype=int) if tpow is None
                     else np.asarray(tpow, dtype=int).ravel())

    @classmethod
    def zero(cls, shape=()):
        return cls(np.zeros((0,) + tuple(shape)), [], [], shape)

    @classmethod
    def term(cls, c, freq, tpow=0):
        return cls([c], [freq], [tpow], ())

    @classmethod
    def stack(cls, items, shape):
        """Arrange scalar sums into an array-valued sum of the given shape."""
        items = list(items)
        coefs, freqs, pows = [], [], []
        for idx, e in enumerate(items):
            for c, w, p in zip(e.coef, e.freq, e.tpow):
                z = np.zeros(len(items), dtype=complex)
                z[idx] = c
                coefs.append(z.reshape(shape))
                freqs.append(w)
                pows.append(p)
        if not coefs:
            return cls.zero(shape)
        return cls(np.array(coefs), freqs, pows, shape).simplify()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if len(self.freq) == 0:
            return np.zeros(t.shape + self.shape, dtype=complex)
        tt = t[..., None]
        basis = np.exp(1j * self.freq * tt) * tt ** self.tpow
        return np.tensordot(basis, self.coef, axes=(-1, 0))

    def component(self, index):
        return ExpSum(self.coef[(slice(None),) + tuple(np.atleast_1d(index))],
                      self.freq, self.tpow).simplify()

    def map_coef(self, fn, shape):
        """Apply a linear map to every coefficient array."""
        return ExpSum(np.array([fn(c) for c in self.coef]).reshape((len(self.freq),) + tuple(shape)),
                      self.freq, self.tpow, shape)

    def __add__(self, other):
        if not isinstance(other, ExpSum):
            other = ExpSum(np.asarray(other, dtype=complex)[None] * np.ones((1,) + self.shape), [0.0])
        return ExpSum(np.concatenate([self.coef, other.coef]),
                      np.concatenate([self.freq, other.freq]),
                      np.concatenate([self.tpow, other.tpow]), self.shape)

    __radd__ = __add__

    def __neg__(self):
        return ExpSum(-self.coef, self.freq, self.tpow, self.shape)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, ExpSum):
            c = (self.coef[:, None] * other.coef[None, :]).reshape((-1,) + np.broadcast_shapes(self.shape, other.shape))
            w = (self.freq[:, None] + other.freq[None, :]).ravel()
            p = (self.tpow[:, None] + other.tpow[None, :]).ravel()
            return ExpSum(c, w, p).simplify()
        return ExpSum(self.coef * other, self.freq, self.tpow, self.shape)

    __rmul__ = __mul__

    def conj(self):
        return ExpSum(np.conj(self.coef), -self.freq, self.tpow, self.shape)

    def deriv(self):
        terms = ExpSum(1j * self.freq.reshape((-1,) + (1,) * len(self.shape)) * self.coef,
                       self.freq, self.tpow, self.shape)
        mask = self.tpow > 0
        lower = ExpSum(self.coef[mask] * self.tpow[mask].reshape((-1,) + (1,) * len(self.shape)),
                       self.freq[mask], self.tpow[mask] - 1, self.shape)
        return (terms + lower).simplify()

    def antideriv(self, tol=0.0):
        """A primitive with no constant term.

        Zero-frequency coefficients no larger than ``tol`` are dropped; larger
        ones become polynomial terms in t.
        """
        out = ExpSum.zero(self.shape)
        for c, w, p in zip(self.coef, self.freq, self.tpow):
            if w == 0.0:
                if np.max(np.abs(c), initial=0.0) <= tol:
                    continue
                out = out + ExpSum(c[None] / (p + 1), [0.0], [p + 1], self.shape)
                continue
            # integral of t^p e^{iwt} by repeated parts
            iw = 1j * w
            coef, sign = c / iw, 1.0
            for m in range(p, -1, -1):
                out = out + ExpSum((sign * coef)[None], [w], [m], self.shape)
                if m:
                    coef = coef * m / iw
                    sign = -sign
        return out.simplify()

    def simplify(self, tol=0.0):
        if len(self.freq) == 0:
            return self
        keys = {}
        coefs = []
        for c, w, p in zip(self.coef, self.freq, self.tpow):
            key = (round(float(w), 10), int(p))
            if key in keys:
                coefs[keys[key]][0] += c
            else:
                keys[key] = len(coefs)
                coefs.append([c.copy(), w, p])
        keep = [x for x in coefs if np.max(np.abs(x[0]), initial=0.0) > tol]
        if not keep:
            return ExpSum.zero(self.shape)
        return ExpSum(np.array([x[0] for x in keep]), [x[1] for x in keep],
                      [x[2] for x in keep], self.shape)

    def scale(self):
        return float(np.max(np.abs(self.coef), initial=0.0))


def _es(*terms):
    """Scalar ExpSum from (coef, freq) or (coef, freq, tpow) tuples."""
    out = ExpSum.zero()
    for tm in terms:
        out = out + ExpSum.term(*tm)
    return out.simplify()


# ---------------------------------------------------------------- Phi assembly

def assemble_phi(state, u, v, system="z"):
    """Phi from a state: for "z", u, v are (y1, y2); for "pq", (x, y);
    for "wpqr" the state is first packed into z-form."""
    state = np.asarray(state, dtype=complex)
    if system == "wpqr":
        state, system = flow.pack_wpqr(state), "z"
    u = np.asarray(u, dtype=float)[..., None]
    v = np.asarray(v, dtype=float)[..., None]
    if system == "z":
        z = [state[..., j, :] for j in range(6)]
        return (0.5 * (u ** 2 + v ** 2) * z[0] + 0.5 * (u ** 2 - v ** 2) * z[1]
                + u * v * z[2] + u * z[3] + v * z[4] + z[5])
    if system == "pq":
        k = flow.pq_k(state)
        out = state[..., 0, :] + v * state[..., k + 1, :] + u * v * state[..., k + 2, :]
        for j in range(k, 0, -1):
            out = out + u ** j * state[..., j, :]
        return out
    raise ValueError(f"unknown system {system!r}")


def phi_partials(state, dstate, u, v, system="z"):
    """(dPhi/du, dPhi/dv, dPhi/dt) from a state and its time derivative."""
    state = np.asarray(state, dtype=complex)
    uu = np.asarray(u, dtype=float)[..., None]
    vv = np.asarray(v, dtype=float)[..., None]
    dt = assemble_phi(dstate, u, v, system)
    if system == "z":
        z = [state[..., j, :] for j in range(6)]
        du = uu * (z[0] + z[1]) + vv * z[2] + z[3]
        dv = vv * (z[0] - z[1]) + uu * z[2] + z[4]
        return du, dv, dt
    k = flow.pq_k(state)
    du = vv * state[..., k + 2, :]
    for j in range(k, 0, -1):
        du = du + j * uu ** (j - 1) * state[..., j, :]
    dv = state[..., k + 1, :] + uu * state[..., k + 2, :]
    return du, dv, dt


class Family:
    """A time-indexed solution of one of the flows."""

    system = "z"
    cross_factor = 1.0
    description = "family"

    def state(self, t):
        raise NotImplementedError

    def dstate(self, t):
        raise NotImplementedError

    def phi(self, u, v, t):
        return assemble_phi(self.state(t), u, v, self.system)

    def partials(self, u, v, t):
        return phi_partials(self.state(t), self.dstate(t), u, v, self.system)


class ExpSumFamily(Family):
    """Family given exactly by an exponential sum, with analytic derivative."""

    def __init__(self, es, system="z", description="closed form"):
        self.es = es
        self._des = es.deriv()
        self.system = system
        self.cross_factor = 2.0 if system == "pq" else 1.0
        self.description = description

    def state(self, t):
        return self.es(t)

    def dstate(self, t):
        return self._des(t)


def solve_at(rhs, y0, ts, t0=0.0, tol=1e-13):
    """Integrate from (t0, y0) to every time in ts with a high-order adaptive
    scheme; backward and forward branches are run separately."""
    ts = np.asarray(ts, dtype=float)
    flat = ts.ravel()
    y0 = np.asarray(y0, dtype=complex)
    out = np.empty((len(flat),) + y0.shape, dtype=complex)

    def f(_t, x):
        return rhs(x.reshape(y0.shape)).ravel()

    for sel, end in ((flat >= t0, None), (flat < t0, None)):
        idx = np.nonzero(sel)[0]
        if len(idx) == 0:
            continue
        targets = flat[idx]
        order = np.argsort(targets) if targets[0] >= t0 else np.argsort(-targets)
        tgt = targets[order]
        at_start = tgt == t0
        out[idx[order][at_start]] = y0
        rest = tgt[~at_start]
        if len(rest):
            sol = solve_ivp(f, (t0, rest[-1]), y0.ravel(), method="DOP853",
                            t_eval=rest, rtol=tol, atol=tol)
            if sol.status != 0:
                raise flow.IntegrationError(sol.message, float(sol.t[-1]))
            out[idx[order][~at_start]] = sol.y.T.reshape((-1,) + y0.shape)
    return out.reshape(ts.shape + y0.shape)


class IntegratedFamily(Family):
    """Family obtained by integrating a flow from its t = 0 state.

    The time derivative is a central difference of the integrated states, so
    that SL checks on it are not implied by the flow equations themselves.
    """

    def __init__(self, rhs, state0, system="z", pack=None, h=1e-5, tol=1e-13,
                 description="integrated"):
        self.rhs = rhs
        self.state0 = np.asarray(state0, dtype=complex)
        self.system = system
        self.cross_factor = 2.0 if system == "pq" else 1.0
        self.pack = pack
        self.h = h
        self.tol = tol
        self.description = description

    def _raw(self, t):
        s = solve_at(self.rhs, self.state0, t, tol=self.tol)
        return self.pack(s) if self.pack else s

    def state(self, t):
        return self._raw(t)

    def dstate(self, t):
        t = np.asarray(t, dtype=float)
        both = self._raw(np.stack([t + self.h, t - self.h]))
        return (both[0] - both[1]) / (2.0 * self.h)


# ---------------------------------------------------------------- case (iii)

@dataclass(frozen=True)
class CaseIIIParams:
    A: complex = 0j
    B: complex = 0j
    D: complex = 0j
    E: complex = 0j

    def __post_init__(self):
        res = self.residual()
        if not np.isfinite(res) or abs(res) > ADMISSIBLE_TOL:
            raise InadmissibleParameters(
                f"case-iii constraint Im(A conj(D) + B conj(E)) = 0 violated (residual {res:.3e})")

    def residual(self):
        A, B, D, E = (complex(x) for x in (self.A, self.B, self.D, self.E))
        return (A * D.conjugate() + B * E.conjugate()).imag


def caseiii_expsum(p):
    A, B, D, E = (complex(x) for x in (p.A, p.B, p.D, p.E))
    Ac, Bc, Dc, Ec = A.conjugate(), B.conjugate(), D.conjugate(), E.conjugate()
    h = 0.5
    zero = ExpSum.zero()
    z1 = [_es((1, 1)), _es((-1j, -1)), zero]
    z3 = [zero, zero, _es((1, 0))]
    z4 = [_es((D, h), (E, -h)),
          _es((-1j * Dc, -h), (1j * Ec, h)),
          _es((2 * A, -h), (-2 * Ac, h), (-2 / 3 * B, -3 * h), (-2 / 3 * Bc, 3 * h))]
    z5 = [_es((A, h), (B, -h)), _es((1j * Ac, -h), (-1j * Bc, h)), zero]
    r1 = _es((-A * Bc / 6, 2), (A * Ac + B * Bc / 3, 1), (-1j * (A * A + Ac * B), 0, 1),
             (-2 / 3 * A * B, -1), (-B * B / 6, -2))
    r2 = _es((1j / 6 * Bc * Bc, 2), (-2j / 3 * Ac * Bc, 1), (Ac * Ac - A * Bc, 0, 1),
             (-1j * (A * Ac + B * Bc / 3), -1), (-1j / 6 * Ac * B, -2))
    r3 = _es((-0.5 * (A * Ec + Bc * D), 1), (-1j * (A * Dc - B * Ec).real, 0, 1),
             (-0.5 * (Ac * E + B * Dc), -1))
    return ExpSum.stack(z1 + z1 + z3 + z4 + z5 + [r1, r2, r3], (6, 3))


def caseiii_family(p):
    return ExpSumFamily(caseiii_expsum(p), "z", "case-iii")


def caseiii_state(t, p):
    return caseiii_expsum(p)(t)


def caseiii_point(y1, y2, t, p):
    """The explicit point of the case-(iii) 3-fold, written out coordinate by
    coordinate rather than assembled from the state."""
    A, B, D, E = (complex(x) for x in (p.A, p.B, p.D, p.E))
    Ac, Bc, Dc, Ec = A.conjugate(), B.conjugate(), D.conjugate(), E.conjugate()
    y1, y2, t = (np.asarray(x, dtype=float) for x in (y1, y2, t))
    e = lambda w: np.exp(1j * w * t)  # noqa: E731
    x1 = (y1 ** 2 * e(1) + y1 * (D * e(0.5) + E * e(-0.5)) + y2 * (A * e(0.5) + B * e(-0.5))
          - A * Bc / 6 * e(2) + (A * Ac + B * Bc / 3) * e(1) - 1j * (A * A + Ac * B) * t
          - 2 / 3 * A * B * e(-1) - B * B / 6 * e(-2))
    x2 = (-1j * y1 ** 2 * e(-1) + 1j * y1 * (-Dc * e(-0.5) + Ec * e(0.5))
          + 1j * y2 * (Ac * e(-0.5) - Bc * e(0.5)) + 1j / 6 * Bc * Bc * e(2)
          - 2j / 3 * Ac * Bc * e(1) + (Ac * Ac - A * Bc) * t
          - 1j * (A * Ac + B * Bc / 3) * e(-1) - 1j / 6 * Ac * B * e(-2))
    x3 = (y1 * y2 + y1 * (2 * A * e(-0.5) - 2 * Ac * e(0.5) - 2 / 3 * B * e(-1.5) - 2 / 3 * Bc * e(1.5))
          - 0.5 * (A * Ec + Bc * D) * e(1) - 1j * (A * Dc - B * Ec).real * t
          - 0.5 * (Ac * E + B * Dc) * e(-1))
    return np.stack(np.broadcast_arrays(x1, x2, x3), axis=-1)


# ---------------------------------------------------------------- alphas

@dataclass(frozen=True)
class AlphaTriple:
    a1: float
    a2: float
    a3: float

    def __post_init__(self):
        try:
            check_alphas((self.a1, self.a2, self.a3))
        except ValueError as exc:
            raise InadmissibleParameters(str(exc)) from None

    @property
    def values(self):
        return np.array([self.a1, self.a2, self.a3], dtype=float)

    @classmethod
    def from_a23(cls, a2, a3):
        """The triple with the given a2, a3 and a1 fixed by the harmonic relation."""
        return cls(1.0 / (1.0 / a2 + 1.0 / a3), a2, a3)


def cased_frequencies(alphas):
    a1, a2, a3 = alphas.values
    return np.array([-math.sqrt(a2 * a3 / a1), math.sqrt(a3 * a1 / a2),
                     math.sqrt(a1 * a2 / a3)])


# ---------------------------------------------------------------- diagonal w-families

def casea_w(t, alpha1=1.0 / 3.0):
    s = math.sqrt(3.0 * alpha1)
    t = np.asarray(t, dtype=float)
    sech = 1.0 / np.cosh(s * t)
    return np.stack([s * np.tanh(s * t), s * sech, s * sech], axis=-1).astype(complex)


def caseb_w(t, alphas):
    a1, a2, a3 = alphas.values
    if not a2 < a3:
        raise InadmissibleParameters("case (b) needs alpha2 < alpha3")
    sigma = math.sqrt(a1 + a3)
    tau = math.sqrt((a1 + a2) / (a1 + a3))
    sn, cn, dn = jacobi(sigma * np.asarray(t, dtype=float), tau)
    m = math.sqrt(a1 + a2)
    return np.stack([m * sn, m * cn, sigma * dn], axis=-1).astype(complex)


def cased_w(t, alphas):
    a = cased_frequencies(alphas)
    t = np.asarray(t, dtype=float)[..., None]
    amp = np.sqrt(alphas.values) * np.array([1j, 1.0, 1.0])
    return amp * np.exp(1j * a * t)


def casec_wu(t, alphas, A, theta1_0=math.pi / 2):
    """Case (c): u(t), the phases theta_j(t) and the w-triple.

    At t = 0 the conserved quantity forces sin(theta1(0)) = 1, so theta1_0
    must be pi/2 modulo 2 pi.
    """
    a1, a2, a3 = alphas.values
    A = float(A)
    if not 0.0 < A < math.sqrt(a1 * a2 * a3):
        raise InadmissibleParameters("case (c) needs 0 < A < sqrt(a1 a2 a3)")
    if abs(math.sin(theta1_0) - 1.0) > 1e-12:
        raise InadmissibleParameters(
            "theta1(0) must satisfy sin(theta1(0)) = 1 for the conserved quantity to equal A")
    g1, g2, g3 = cubic_roots_sorted(a1, a2, a3, A)
    sigma = math.sqrt(g3 - g1)
    tau = math.sqrt((g2 - g1) / (g3 - g1))
    t = np.asarray(t, dtype=float)
    sn, _, _ = jacobi(sigma * t, tau)
    u = g1 + (g2 - g1) * sn ** 2
    th = np.asarray(theta_integrals((a1, a2, a3), A, (g1, g2, g3), t, theta1_0))
    th = np.moveaxis(th, 0, -1)
    mod = np.stack([np.sqrt(a1 + u), np.sqrt(np.maximum(a2 - u, 0.0)),
                    np.sqrt(np.maximum(a3 - u, 0.0))], axis=-1)
    return u, th, mod * np.exp(1j * th)


def casec_conserved(alphas, A, u, theta):
    """Q(u)^(1/2) sin(theta1 + theta2 + theta3), equal to A along solutions."""
    return np.sqrt(q_poly(alphas.values, u)) * np.sin(np.sum(theta, axis=-1))


def diagonal_family(w0, p0, q0, r0, description="diagonal, integrated"):
    """Integrated z-family in the diagonal packing from initial w, p, q, r."""
    s0 = np.array([w0, p0, q0, r0], dtype=complex)
    res = flow.lemma91_invariants(*s0[:3])
    if np.max(np.abs(res)) > flow.ADMISSIBLE_TOL:
        raise InadmissibleParameters(f"initial p, q violate the conserved pairings ({res})")
    return IntegratedFamily(flow.rhs_wpqr, s0, "z", pack=flow.pack_wpqr,
                            description=description)


# ---------------------------------------------------------------- case (a)

@dataclass(frozen=True)
class CaseAParams:
    B: float = 0.0
    C: float = 0.0
    E: float = 0.0
    F: float = 0.0
    Bp: float = 0.0
    Cp: float = 0.0
    Ep: float = 0.0
    Fp: float = 0.0

    def __post_init__(self):
        vals = [self.B, self.C, self.E, self.F, self.Bp, self.Cp, self.Ep, self.Fp]
        if any(isinstance(v, complex) for v in vals) or not np.all(np.isfinite(vals)):
            raise InadmissibleParameters("case-a parameters must be finite reals")
        res = self.residual()
        if abs(res) > ADMISSIBLE_TOL:
            raise InadmissibleParameters(
                f"case-a constraint B E' + C F' = B' E + C' F violated (residual {res:.3e})")

    def residual(self):
        return self.B * self.Ep + self.C * self.Fp - self.Bp * self.E - self.Cp * self.F


def _casea_pvec(B, C, E, F, t, f):
    ch = np.cosh(t)
    sc = np.sqrt(ch)
    th = np.tanh(t)
    half = np.sinh(t) / (2.0 * sc)
    p1 = B * (f * th - 2.0 * sc) + 1j * E / sc
    p2 = B * f / ch + C * sc + 1j * E * half + 1j * F / sc
    p3 = B * f / ch - C * sc + 1j * E * half - 1j * F / sc
    return np.stack([p1, p2, p3], axis=-1)


def _casea_dpvec(B, C, E, F, t, f):
    ch = np.cosh(t)
    sh = np.sinh(t)
    sc = np.sqrt(ch)
    th = np.tanh(t)
    sech = 1.0 / ch
    dsc = sh / (2.0 * sc)
    dinv = -sh / (2.0 * ch * sc)             # d/dt cosh^(-1/2)
    dhalf = sc / 2.0 - sh * sh / (4.0 * ch * sc)  # d/dt sinh / (2 sqrt cosh)
    dff = f * (-sh / ch ** 2) + sc / ch      # d/dt f sech
    dp1 = B * (sc * th + f * sech ** 2 - 2.0 * dsc) + 1j * E * dinv
    dp2 = B * dff + C * dsc + 1j * E * dhalf + 1j * F * dinv
    dp3 = B * dff - C * dsc + 1j * E * dhalf - 1j * F * dinv
    return np.stack([dp1, dp2, dp3], axis=-1)


def casea_wpq(t, p):
    """w, p, q of the case-(a) family at t, as an array of shape (..., 3, 3)."""
    t = np.asarray(t, dtype=float)
    f = f_cosh(t)
    w = casea_w(t)
    pv = _casea_pvec(p.B, p.C, p.E, p.F, t, f)
    qv = _casea_pvec(p.Bp, p.Cp, p.Ep, p.Fp, t, f)
    return np.stack([w, pv, qv], axis=-2)


def casea_dwpq(t, p):
    t = np.asarray(t, dtype=float)
    f = f_cosh(t)
    w = casea_w(t)
    dw = flow.rhs_w(w)
    return np.stack([dw, _casea_dpvec(p.B, p.C, p.E, p.F, t, f),
                     _casea_dpvec(p.Bp, p.Cp, p.Ep, p.Fp, t, f)], axis=-2)


class CaseAFamily(Family):
    """Case (a) with alpha1 = 1/3: closed-form w, p, q and r integrated from 0."""

    description = "case-a"

    def __init__(self, p):
        self.p = p
        s0 = np.zeros((4, 3), dtype=complex)
        s0[:3] = casea_wpq(0.0, p)
        self.s0 = s0

    def wpqr(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (4, 3), dtype=complex)
        out[..., :3, :] = casea_wpq(t, self.p)
        out[..., 3, :] = solve_at(flow.rhs_wpqr, self.s0, t)[..., 3, :]
        return out

    def state(self, t):
        return flow.pack_wpqr(self.wpqr(t))

    def dstate(self, t):
        s = self.wpqr(t)
        d = np.empty_like(s)
        d[..., :3, :] = casea_dwpq(t, self.p)
        d[..., 3, :] = flow.rhs_r(s[..., 1, :], s[..., 2, :])
        return flow.pack_wpqr(d)


# ---------------------------------------------------------------- case (d)

@dataclass
class Eigensystem:
    alphas: AlphaTriple
    a: np.ndarray
    lam: float
    M: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    f: np.ndarray

    @property
    def sqrt_alpha(self):
        return np.sqrt(self.alphas.values)


def cased_matrix(alphas):
    a1, a2, a3 = cased_frequencies(alphas)
    s1, s2, s3 = np.sqrt(alphas.values)
    return np.array([
        [-2 * a1, 0, 0, 0, -s3, -s2],
        [0, -2 * a2, 0, s3, 0, s1],
        [0, 0, -2 * a3, s2, s1, 0],
        [0, s3, s2, 2 * a1, 0, 0],
        [-s3, 0, -s1, 0, 2 * a2, 0],
        [-s2, -s1, 0, 0, 0, 2 * a3],
    ])


def _real_eigvec(M, mu):
    vals, vecs = np.linalg.eig(M)
    i = int(np.argmin(np.abs(vals - mu)))
    v = vecs[:, i]
    v = v / v[np.argmax(np.abs(v))]
    v = v.real / np.linalg.norm(v.real)
    if np.linalg.norm(M @ v - mu * v) > 1e-10 * max(1.0, abs(mu)):
        raise ArithmeticError(f"defective eigenpair near {mu}; check the alphas")
    first = v[np.nonzero(np.abs(v) > 1e-14)[0][0]]
    return v if first > 0 else -v


def cased_eigensystem(alphas):
    a = cased_frequencies(alphas)
    a1, a2, a3 = a
    lam = math.sqrt(a1 * a1 - a2 * a3)
    M = cased_matrix(alphas)
    s1, s2, s3 = np.sqrt(alphas.values)
    K = -np.array([[2 * a1, -s3, -s2], [s3, 2 * a2, s1], [s2, s1, 2 * a3]])
    b = np.linalg.solve(K, np.array([s1, s2, s3]))
    v1 = _real_eigvec(M, lam)
    v3 = _real_eigvec(M, 3 * lam)
    return Eigensystem(alphas, a, lam, M, b, v1[:3], v1[3:], v3[:3], v3[3:])


def eigensystem_residuals(es):
    """Maxima of the matrix relations and of the six orthogonality identities."""
    M, lam = es.M, es.lam
    s = es.sqrt_alpha
    b, c, d, e, f = es.b, es.c, es.d, es.e, es.f
    eta = np.array([1.0, -1.0, -1.0])
    matrix = max(
        np.abs(M @ np.concatenate([s, s])).max(),
        np.abs(M @ np.concatenate([b, -b]) - np.concatenate([s, s])).max(),
        np.abs(M @ np.concatenate([c, d]) - lam * np.concatenate([c, d])).max(),
        np.abs(M @ np.concatenate([d, c]) + lam * np.concatenate([d, c])).max(),
        np.abs(M @ np.concatenate([e, f]) - 3 * lam * np.concatenate([e, f])).max(),
        np.abs(M @ np.concatenate([f, e]) + 3 * lam * np.concatenate([f, e])).max(),
    )
    ident = np.array([
        np.sum(eta * s * c) - np.sum(eta * s * d),
        np.sum(eta * s * e) - np.sum(eta * s * f),
        np.sum(eta * b * c) + np.sum(eta * b * d),
        np.sum(eta * b * e) + np.sum(eta * b * f),
        np.sum(eta * c * e) - np.sum(eta * d * f),
        np.sum(eta * c * f) - np.sum(eta * d * e),
    ])
    return matrix, np.abs(ident).max()


def resonant_denominators(a, lam):
    a = np.asarray(a, dtype=float)
    return np.concatenate([a + lam, a - lam, a + 3 * lam, a - 3 * lam])


@dataclass(frozen=True)
class CaseDParams:
    alphas: AlphaTriple
    C: complex = 0j
    D: complex = 0j
    Cp: complex = 0j
    Dp: complex = 0j
    E1: complex = 0j
    E2: complex = 0j
    E3: complex = 0j
    eig: Eigensystem = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.eig is None:
            object.__setattr__(self, "eig", cased_eigensystem(self.alphas))
        res = self.residual()
        if not np.isfinite(res) or abs(res) > ADMISSIBLE_TOL:
            raise InadmissibleParameters(
                f"case-d constraint Im(C conj(C'))(c,d) + Im(D conj(D'))(e,f) = 0 violated "
                f"(residual {res:.3e})")

    def residual(self):
        return cased_constraint(self.eig, self.C, self.D, self.Cp, self.Dp)


def cased_lorentz_sums(eig):
    eta = np.array([1.0, -1.0, -1.0])
    return (np.sum(eta * eig.c ** 2) - np.sum(eta * eig.d ** 2),
            np.sum(eta * eig.e ** 2) - np.sum(eta * eig.f ** 2))


def cased_constraint(eig, C, D, Cp, Dp):
    kc, ke = cased_lorentz_sums(eig)
    return ((complex(C) * complex(Cp).conjugate()).imag * kc
            + (complex(D) * complex(Dp).conjugate()).imag * ke)


def _cased_pvec(eig, C, D):
    a, lam = eig.a, eig.lam
    C, D = complex(C), complex(D)
    comps = []
    for j in range(3):
        pre = 1j if j == 0 else 1.0
        comps.append(_es((pre * C * eig.c[j], a[j] + lam / 2), (pre * C.conjugate() * eig.d[j], a[j] - lam / 2),
                         (pre * D * eig.e[j], a[j] + 1.5 * lam), (pre * D.conjugate() * eig.f[j], a[j] - 1.5 * lam)))
    return comps


def random_cased_params(rng, alphas, scale=1.0, eig=None):
    """Random admissible case-(d) parameters: C, C', D and the E's are drawn
    and D' is then fixed by the constraint."""
    eig = eig if eig is not None else cased_eigensystem(alphas)
    rc = lambda: scale * complex(*rng.normal(size=2))  # noqa: E731
    C, Cp, D = rc(), rc(), rc()
    kc, ke = cased_lorentz_sums(eig)
    if abs(ke) < 1e-12 or abs(D) == 0:
        raise ArithmeticError("cannot solve the case-d constraint for D'")
    target = -(C * Cp.conjugate()).imag * kc / ke
    Dp = complex(rng.normal() * scale, -target) * D / abs(D) ** 2
    return CaseDParams(alphas, C, D, Cp, Dp, rc(), rc(), rc(), eig=eig)


def cased_wpqr_expsum(p):
    """Case (d) as an exponential sum in the w, p, q, r layout.

    The r's are the exact primitives of their defining equations plus E_j.
    """
    eig = p.eig
    if np.min(np.abs(resonant_denominators(eig.a, eig.lam))) < 1e-12:
        raise ArithmeticError("resonant denominator a_j +- lambda or a_j +- 3 lambda")
    amp = np.sqrt(p.alphas.values) * np.array([1j, 1.0, 1.0])
    w = [_es((amp[j], eig.a[j])) for j in range(3)]
    pv = _cased_pvec(eig, p.C, p.D)
    qv = _cased_pvec(eig, p.Cp, p.Dp)
    pc = [x.conj() for x in pv]
    qc = [x.conj() for x in qv]
    dr = [0.5 * (pc[1] * pc[2] + qc[2] * qc[1]),
          0.5 * (qc[2] * qc[0] - pc[0] * pc[2]),
          -0.5 * (pc[0] * qc[1] + pc[1] * qc[0])]
    scale = max(1.0, max(x.scale() for x in dr))
    r = [x.antideriv(tol=1e-13 * scale) + E for x, E in zip(dr, (p.E1, p.E2, p.E3))]
    return ExpSum.stack(w + pv + qv + r, (4, 3))


def cased_state(t, p):
    return cased_wpqr_expsum(p)(t)


def cased_family(p):
    es = cased_wpqr_expsum(p)
    return ExpSumFamily(es.map_coef(flow.pack_wpqr, (6, 3)), "z", "case-d")


def cased_r_short(t, p):
    """The r's keeping only the frequencies a_j +- lambda and a_j +- 3 lambda.

    This short form agrees with the exact primitive at those frequencies but
    drops the terms at a_j and a_j +- 2 lambda, so it does not solve the r
    equations on its own; it is kept for comparison.
    """
    eig = p.eig
    a, lam = eig.a, eig.lam
    c, d, e, f = eig.c, eig.d, eig.e, eig.f
    C, D, Cp, Dp = (complex(x) for x in (p.C, p.D, p.Cp, p.Dp))
    Cc, Dc, Cpc, Dpc = C.conjugate(), D.conjugate(), Cp.conjugate(), Dp.conjugate()
    t = np.asarray(t, dtype=float)
    ex = lambda w: np.exp(1j * w * t)  # noqa: E731
    a1, a2, a3 = a
    r1 = (-1j / (2 * (a1 + 3 * lam)) * (D ** 2 + Dp ** 2) * f[1] * f[2] * ex(a1 + 3 * lam)
          - 1j / (2 * (a1 - 3 * lam)) * (Dc ** 2 + Dpc ** 2) * e[1] * e[2] * ex(a1 - 3 * lam)
          - 1j / (2 * (a1 + lam)) * ((C ** 2 + Cp ** 2) * d[1] * d[2]
                                      + (Cc * D + Cpc * Dp) * (c[1] * f[2] + f[1] * c[2])) * ex(a1 + lam)
          - 1j / (2 * (a1 - lam)) * ((Cc ** 2 + Cpc ** 2) * c[1] * c[2]
                                      + (C * Dc + Cp * Dpc) * (d[1] * e[2] + e[1] * d[2])) * ex(a1 - lam)
          + p.E1)
    r2 = (1 / (2 * (a2 + 3 * lam)) * (D ** 2 - Dp ** 2) * f[0] * f[2] * ex(a2 + 3 * lam)
          + 1 / (2 * (a2 - 3 * lam)) * (Dc ** 2 - Dpc ** 2) * e[0] * e[2] * ex(a2 - 3 * lam)
          + 1 / (2 * (a2 + lam)) * ((C ** 2 - Cp ** 2) * d[0] * d[2]
                                     + (Cc * D - Cpc * Dp) * (c[0] * f[2] + f[0] * c[2])) * ex(a2 + lam)
          + 1 / (2 * (a2 - lam)) * ((Cc ** 2 - Cpc ** 2) * c[0] * c[2]
                                     + (C * Dc - Cp * Dpc) * (d[0] * e[2] + e[0] * d[2])) * ex(a2 - lam)
          + p.E2)
    r3 = (1 / (a3 + 3 * lam) * D * Dp * f[0] * f[1] * ex(a3 + 3 * lam)
          + 1 / (a3 - 3 * lam) * Dc * Dpc * e[0] * e[1] * ex(a3 - 3 * lam)
          + 1 / (2 * (a3 + lam)) * (2 * C * Cp * d[0] * d[1]
                                     + (Cc * Dp + Cpc * D) * (c[0] * f[1] + f[0] * c[1])) * ex(a3 + lam)
          + 1 / (2 * (a3 - lam)) * (2 * Cc * Cpc * c[0] * c[1]
                                     + (C * Dpc + Cp * Dc) * (d[0] * e[1] + e[0] * d[1])) * ex(a3 - lam)
          + p.E3)
    return np.stack(np.broadcast_arrays(r1, r2, r3), axis=-1)


def cased_phi0(y1, y2, t, alphas):
    """Leading quadratic part of the case-(d) map: the cone model at infinity."""
    w = cased_w(t, alphas)
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    return np.stack([0.5 * (y1 ** 2 + y2 ** 2) * w[..., 0], 0.5 * (y1 ** 2 - y2 ** 2) * w[..., 1],
                     y1 * y2 * w[..., 2]], axis=-1)


def cased_shift(p, c):
    """Parameters whose family is the time-translate by c, up to the unitary
    diag(exp(i a_j c)) applied to the result."""
    lam = p.eig.lam
    ph1 = np.exp(0.5j * lam * c)
    ph3 = np.exp(1.5j * lam * c)
    a = p.eig.a
    return CaseDParams(p.alphas, p.C * ph1, p.D * ph3, p.Cp * ph1, p.Dp * ph3,
                       p.E1 * np.exp(-1j * a[0] * c), p.E2 * np.exp(-1j * a[1] * c),
                       p.E3 * np.exp(-1j * a[2] * c), eig=p.eig)


# ---------------------------------------------------------------- k-family

class FourierPoly:
    """sum_n coeffs[n] exp(i n t) + linear * t, n integer."""

    def __init__(self, coeffs=None, linear=0j):
        self.coeffs = {int(n): complex(c) for n, c in (coeffs or {}).items() if c != 0}
        self.linear = complex(linear)

    def copy(self):
        return FourierPoly(self.coeffs, self.linear)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.linear * t + 0j
        for n, c in self.coeffs.items():
            out = out + c * np.exp(1j * n * t)
        return out

    def __add__(self, other):
        out = dict(self.coeffs)
        for n, c in other.coeffs.items():
            out[n] = out.get(n, 0j) + c
        return FourierPoly(out, self.linear + other.linear)

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, a):
        a = complex(a)
        return FourierPoly({n: a * c for n, c in self.coeffs.items()}, a * self.linear)

    __rmul__ = __mul__

    def shift(self, m):
        """Multiply by exp(i m t); only defined without a t-linear part."""
        if self.linear != 0:
            raise ArithmeticError("shifting a t-linear term leaves the Fourier basis")
        return FourierPoly({n + m: c for n, c in self.coeffs.items()})

    def conj(self):
        return FourierPoly({-n: c.conjugate() for n, c in self.coeffs.items()},
                           self.linear.conjugate())

    def deriv(self):
        out = {n: 1j * n * c for n, c in self.coeffs.items() if n != 0}
        if self.linear != 0:
            out[0] = self.linear
        return FourierPoly(out)

    def antideriv(self):
        if self.linear != 0:
            raise ArithmeticError("integrating a t-linear term leaves the Fourier basis")
        out = {n: c / (1j * n) for n, c in self.coeffs.items() if n != 0}
        return FourierPoly(out, self.coeffs.get(0, 0j))

    def coeff(self, n):
        return self.coeffs.get(n, 0j)

    def support(self, tol=1e-12):
        return {n for n, c in self.coeffs.items() if abs(c) > tol}

    def to_expsum(self):
        terms = [(c, float(n)) for n, c in self.coeffs.items()]
        if self.linear != 0:
            terms.append((self.linear, 0.0, 1))
        return _es(*terms) if terms else ExpSum.zero()

    def __repr__(self):
        parts = [f"{c:.6g} e^{{{n}it}}" for n, c in sorted(self.coeffs.items())]
        if self.linear != 0:
            parts.append(f"{self.linear:.6g} t")
        return "FourierPoly(" + " + ".join(parts or ["0"]) + ")"


@dataclass(frozen=True)
class KFamilyParams:
    k: int
    A: tuple = ()
    B: tuple = ()

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InadmissibleParameters("k must be an integer >= 1")
        A = tuple(complex(x) for x in self.A) + (0j,) * (self.k - len(self.A))
        B = tuple(complex(x) for x in self.B) + (0j,) * (self.k - len(self.B))
        if len(A) != self.k or len(B) != self.k:
            raise InadmissibleParameters("at most k coefficients A_j and B_j")
        if abs(A[0].imag) > ADMISSIBLE_TOL:
            raise InadmissibleParameters("A1 must be real")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    def Aj(self, j):
        return self.A[j - 1] if 1 <= j <= self.k else 0j

    def Bj(self, j):
        return self.B[j - 1] if 1 <= j <= self.k else 0j

    @property
    def periodic(self):
        return self.Aj(1) == 0 and self.Aj(2) == 0


def generic_k_solve(p, resonance_tol=1e-12, sink=None):
    """Solve the k-family recursion on the Fourier basis.

    Returns a list of (a_j, b_j, c_j) FourierPolys for j = 0..k, with the
    integration constants C_j and those of p_0 set to zero. If sink is a
    list, the magnitudes of all resonant forcing coefficients are appended.
    """
    k = p.k
    a, b, c = [None] * (k + 1), [None] * (k + 1), [None] * (k + 1)
    Ak, Bk = p.Aj(k), p.Bj(k)
    a[k] = FourierPoly({k: Ak, -k: Bk})
    b[k] = FourierPoly({k: 1j * Bk.conjugate(), -k: -1j * Ak.conjugate()})
    c[k] = FourierPoly()
    for j in range(k - 1, 0, -1):
        cbar = c[j + 1].conj()
        F = (j + 1) * 1j * cbar.shift(1)
        G = (j + 1) * cbar.shift(-1)
        H = -(j + 1) * (1j * a[j + 1].conj().shift(1) + b[j + 1].conj().shift(-1))
        if sink is not None:
            sink.append(abs(H.coeff(0)))
        if abs(H.coeff(0)) > resonance_tol:
            raise ArithmeticError(f"constant forcing in dc_{j}/dt would create a t-term")
        c[j] = H.antideriv()
        rhs = j * G.conj() + F.deriv()
        for n in (j, -j):
            if sink is not None:
                sink.append(abs(rhs.coeff(n)))
            if abs(rhs.coeff(n)) > resonance_tol:
                raise ArithmeticError(f"resonant forcing at frequency {n} for a_{j}")
        part = FourierPoly({n: cf / (j * j - n * n) for n, cf in rhs.coeffs.items()
                            if n not in (j, -j)})
        a[j] = part + FourierPoly({j: p.Aj(j), -j: p.Bj(j)})
        b[j] = ((a[j].deriv() - F) * (1.0 / j)).conj()
    cbar = c[1].conj()
    a[0] = (1j * cbar.shift(1)).antideriv()
    b[0] = cbar.shift(-1).antideriv()
    c[0] = (-(1j * a[1].conj().shift(1) + b[1].conj().shift(-1))).antideriv()
    return list(zip(a, b, c))


def k_q_vectors():
    q1 = [_es((1, 1)), _es((1j, -1)), ExpSum.zero()]
    q2 = [ExpSum.zero(), ExpSum.zero(), _es((1, 0))]
    return q1, q2


def kfamily_expsum(solution):
    comps = []
    for abc in solution:
        comps.extend(x.to_expsum() for x in abc)
    q1, q2 = k_q_vectors()
    k = len(solution) - 1
    return ExpSum.stack(comps + q1 + q2, (k + 3, 3))


def k_family(p):
    return ExpSumFamily(kfamily_expsum(generic_k_solve(p)), "pq", f"k-family k={p.k}")


def k4_fourier(p):
    """The k = 4 solution written out term by term, independently of the
    recursive solver."""
    if p.k != 4:
        raise InadmissibleParameters("k4_state needs k = 4")
    A1 = p.Aj(1).real
    A2, A3, A4 = p.Aj(2), p.Aj(3), p.Aj(4)
    B1, B2, B3, B4 = p.Bj(1), p.Bj(2), p.Bj(3), p.Bj(4)
    cj = complex.conjugate
    A2c, A3c, A4c = cj(A2), cj(A3), cj(A4)
    B1c, B2c, B3c, B4c = cj(B1), cj(B2), cj(B3), cj(B4)
    FP = FourierPoly
    p0 = (FP({2: A2, 4: -(B2c - 4 * A4) / 6, -2: (B2 + 2 * A4c) / 3, 6: -B4c / 10, -4: 3 * B4 / 20},
             -2j * A2c),
          FP({-2: -1j * A2c, 2: 1j / 3 * (B2c - 4 * A4), -4: -1j / 6 * (B2 + 2 * A4c),
              -6: -1j / 10 * B4, 4: 3j / 20 * B4c}, 2 * A2),
          FP({-2: -0.5 * (B1 - 4.5 * A3c), 2: -0.5 * (B1c + 1.5 * A3), -4: -B3 / 4, 4: -B3c / 4},
             -2j * A1))
    p1 = (FP({1: A1, -1: B1, 3: 1.5 * A3, -3: 0.75 * B3, 5: -0.25 * B3c}),
          FP({1: 1j * (B1c - 3 * A3), -1: -1j * A1, -5: -0.25j * B3, 3: 0.75j * B3c, -3: -1.5j * A3c}),
          FP({1: -2 * A2, -1: 2 * A2c, -3: -2 / 3 * (B2 - 4 * A4c), 3: -2 / 3 * (B2c + 2 * A4),
              -5: -0.6 * B4, 5: -0.6 * B4c}))
    p2 = (FP({2: A2, -2: B2, 4: 2 * A4, -4: 1.2 * B4, 6: -0.3 * B4c}),
          FP({2: 1j * (B2c - 2 * A4), -2: -1j * A2c, -6: -0.3j * B4, 4: 1.2j * B4c, -4: -2j * A4c}),
          FP({2: -1.5 * A3, -2: 1.5 * A3c, -4: -0.75 * B3, 4: -0.75 * B3c}))
    p3 = (FP({3: A3, -3: B3}), FP({3: 1j * B3c, -3: -1j * A3c}),
          FP({3: -4 / 3 * A4, -3: 4 / 3 * A4c, -5: -0.8 * B4, 5: -0.8 * B4c}))
    p4 = (FP({4: A4, -4: B4}), FP({4: 1j * B4c, -4: -1j * A4c}), FP())
    return [p0, p1, p2, p3, p4]


def k4_state(t, p):
    return kfamily_expsum(k4_fourier(p))(t)


def support_terms(j, comp):
    """Predicted (parameter name, index, conjugated, prefactor, frequency)
    terms of component comp of p_j, for l = 0, 1, 2, ... (filter by k later)."""
    out = []
    for l in range(0, 32):
        m = j + 2 * l
        if j >= 1:
            if comp == "a":
                out += [("A", m, False, 1, m), ("B", m, False, 1, -m),
                        ("A", m + 4, True, 1, -(m + 2)), ("B", m + 2, True, 1, m + 4)]
            elif comp == "b":
                out += [("A", m + 2, False, 1j, m), ("B", m + 2, False, 1j, -(m + 4)),
                        ("A", m, True, 1j, -m), ("B", m, True, 1j, m)]
            else:
                out += [("A", m + 1, False, 1, m), ("B", m + 1, False, 1, -(m + 2)),
                        ("A", m + 1, True, 1, -m), ("B", m + 1, True, 1, m + 2)]
        else:
            n = 2 * l
            if comp == "a":
                out += [("A", n + 2, False, 1, n + 2), ("B", n + 2, False, 1, -(n + 2)),
                        ("A", n + 4, True, 1, -(n + 2)), ("B", n + 2, True, 1, n + 4)]
            elif comp == "b":
                out += [("A", n + 4, False, 1j, n + 2), ("B", n + 2, False, 1j, -(n + 4)),
                        ("A", n + 2, True, 1j, -(n + 2)), ("B", n + 2, True, 1j, n + 2)]
            else:
                out += [("A", n + 3, False, 1, n + 2), ("B", n + 1, False, 1, -(n + 2)),
                        ("A", n + 3, True, 1, -(n + 2)), ("B", n + 1, True, 1, n + 2)]
    return out


def support_linear(comp):
    """Predicted t-linear terms of a_0, b_0, c_0."""
    return {"a": ("A", 2, True, 1j), "b": ("A", 2, False, 1), "c": ("A", 1, False, 1j)}[comp]
