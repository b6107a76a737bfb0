"""Geometric validation of the assembled 3-folds: SL residuals, immersion and
singularity detection, the local branched-cover model, periodicity and
asymptotic exponent fits.

Every routine works on a ``Family`` (analytic partials) or on a bare callable
``phi(u, v, t)`` (central differences).
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import flow
from .cgeom import cross, det3, norm2, omega, realify
from .families import AlphaTriple, Family, IntegratedFamily

FD_STEP = 1e-5
DEGENERATE_TOL = 1e-8


def sample_grid(rng, n, y_range=(-2.0, 2.0), t_range=(0.0, 4 * math.pi)):
    """n random sample points (y1, y2, t) with uniform coordinates."""
    y1 = rng.uniform(*y_range, size=n)
    y2 = rng.uniform(*y_range, size=n)
    t = rng.uniform(*t_range, size=n)
    return y1, y2, t


def _phi_fn(source):
    return source.phi if isinstance(source, Family) else source


def fd_partials(phi, u, v, t, h=FD_STEP):
    """Central-difference partials of a callable phi(u, v, t)."""
    u, v, t = (np.asarray(x, dtype=float) for x in (u, v, t))
    du = (phi(u + h, v, t) - phi(u - h, v, t)) / (2 * h)
    dv = (phi(u, v + h, t) - phi(u, v - h, t)) / (2 * h)
    dt = (phi(u, v, t + h) - phi(u, v, t - h)) / (2 * h)
    return du, dv, dt


def partials_of(source, u, v, t, h=FD_STEP):
    if isinstance(source, Family):
        return source.partials(u, v, t)
    return fd_partials(source, u, v, t, h)


# ---------------------------------------------------------------- SL residuals

@dataclass(frozen=True)
class SLResidualReport:
    max_omega: float
    max_im_omega3: float
    max_lemma61: float
    samples: int
    flagged: int = 0
    lemma_checked: bool = True

    def passes(self, tol):
        return max(self.max_omega, self.max_im_omega3, self.max_lemma61) <= tol

    def as_text(self):
        lines = [f"samples = {self.samples}",
                 f"flagged = {self.flagged}",
                 f"max_omega = {self.max_omega:.6e}",
                 f"max_im_omega3 = {self.max_im_omega3:.6e}"]
        if self.lemma_checked:
            lines.append(f"max_lemma61 = {self.max_lemma61:.6e}")
        else:
            lines.append("max_lemma61 = not checked")
        return "\n".join(lines) + "\n"


def frame_degenerate(d1, d2, dt, tol=DEGENERATE_TOL):
    """True where the three tangent vectors fail to span a real 3-plane."""
    frame = np.stack([d1, d2, dt], axis=-1)
    real = np.concatenate([frame.real, frame.imag], axis=-2)
    sv = np.linalg.svd(real, compute_uv=False)
    return sv[..., -1] <= tol * np.maximum(sv[..., 0], np.finfo(float).tiny)


def sl_residual(source, grid, h=FD_STEP, cross_factor=None, degenerate_tol=DEGENERATE_TOL):
    """Maxima over the grid of the omega and Im Omega residuals of the tangent
    frame, and of |dPhi/du x dPhi/dv - dPhi/dt / cross_factor|.

    The last check applies only when the parametrisation comes from one of
    the flows; for a bare callable it is skipped unless cross_factor is given.
    """
    u, v, t = (np.ravel(np.asarray(x, dtype=float)) for x in grid)
    d1, d2, dt = partials_of(source, u, v, t, h)
    om = np.max(np.abs(np.stack([omega(d1, d2), omega(d1, dt), omega(d2, dt)])), initial=0.0)
    bad = frame_degenerate(d1, d2, dt, degenerate_tol)
    norms = np.sqrt(norm2(d1) * norm2(d2) * norm2(dt))
    good = ~bad
    im3 = np.abs(det3(d1, d2, dt).imag)[good]
    im3 = np.max(im3 / norms[good], initial=0.0)
    if cross_factor is None and isinstance(source, Family):
        cross_factor = source.cross_factor
    if cross_factor is None:
        lem, checked = 0.0, False
    else:
        gap = cross(d1, d2) - dt / cross_factor
        lem, checked = float(np.max(np.sqrt(norm2(gap)), initial=0.0)), True
    return SLResidualReport(float(om), float(im3), lem, int(u.size), int(bad.sum()), checked)


def immersion_test(source, point, tol=1e-8, h=FD_STEP):
    """(is_immersion, |dPhi/dt|) at a point; for the flow families the map is
    an immersion exactly where dPhi/dt is nonzero."""
    u, v, t = (np.asarray(x, dtype=float) for x in point)
    dt = partials_of(source, u, v, t, h)[2]
    size = float(np.sqrt(norm2(dt)))
    return size > tol, size


# ---------------------------------------------------------------- singularities

def _frame_at_origin(source, t):
    """The pair of vectors whose dependence makes the map singular: z4, z5 for
    the z-system, p1, q1 for the k-family."""
    s = np.asarray(source.state(t), dtype=complex)
    if source.system == "pq":
        k = flow.pq_k(s)
        return s[..., 1, :], s[..., k + 1, :]
    return s[..., 3, :], s[..., 4, :]


def frame_sigma_min(source, t):
    a, b = _frame_at_origin(source, np.atleast_1d(np.asarray(t, dtype=float)))
    real = np.stack([np.concatenate([a.real, a.imag], axis=-1),
                     np.concatenate([b.real, b.imag], axis=-1)], axis=-1)
    return np.linalg.svd(real, compute_uv=False)[..., -1]


def singular_scan(source, ts, threshold=1e-6, xtol=1e-10):
    """Times where the singular frame becomes linearly dependent.

    Intervals where the smallest singular value drops below the threshold are
    bracketed by sign changes on the grid (refined by bisection) and the
    minimiser inside each interval is reported if it is below the threshold.
    """
    ts = np.sort(np.asarray(ts, dtype=float))
    sig = frame_sigma_min(source, ts)

    def f(x):
        return float(frame_sigma_min(source, x)[0]) - threshold

    brackets = []
    below = sig < threshold
    n = len(ts)
    i = 0
    while i < n:
        if below[i]:
            j = i
            while j + 1 < n and below[j + 1]:
                j += 1
            lo = ts[i] if i == 0 else brentq(f, ts[i - 1], ts[i], xtol=xtol)
            hi = ts[j] if j == n - 1 else brentq(f, ts[j], ts[j + 1], xtol=xtol)
            brackets.append((lo, hi))
            i = j + 1
        else:
            i += 1
    # dips that fall between grid points
    for i in range(1, n - 1):
        if not below[i] and sig[i] <= sig[i - 1] and sig[i] <= sig[i + 1]:
            res = minimize_scalar(lambda x: f(x), bounds=(ts[i - 1], ts[i + 1]),
                                  method="bounded", options={"xatol": xtol})
            if res.fun < 0 and not any(lo <= res.x <= hi for lo, hi in brackets):
                a = brentq(f, ts[i - 1], res.x, xtol=xtol)
                b = brentq(f, res.x, ts[i + 1], xtol=xtol)
                brackets.append((a, b))
    roots = []
    for lo, hi in sorted(brackets):
        if hi - lo <= xtol:
            roots.append(0.5 * (lo + hi))
            continue
        res = minimize_scalar(lambda x: f(x), bounds=(lo, hi), method="bounded",
                              options={"xatol": xtol})
        cands = [(f(lo), lo), (f(hi), hi), (res.fun, res.x)]
        roots.append(float(min(cands)[1]))
    return roots


# ---------------------------------------------------------------- local model

class UnsupportedConfiguration(ValueError):
    """The singular data lies outside the case treated by the local model."""


@dataclass(frozen=True)
class SingularData:
    """u, v, w, x defining z1 = v + w, z2 = v - w, z3 = x, z4 = u, z5 = z6 = 0."""
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    x: np.ndarray

    def state(self):
        u, v, w, x = (np.asarray(a, dtype=complex) for a in (self.u, self.v, self.w, self.x))
        zero = np.zeros(3, dtype=complex)
        return np.array([v + w, v - w, x, u, zero, zero])

    def residuals(self):
        pairs = ((self.u, self.w), (self.u, self.x), (self.v, self.w), (self.v, self.x),
                 (self.w, self.x))
        return np.array([omega(a, b) for a, b in pairs])


def random_singular_data(rng, scale=1.0):
    """Random u, v, w, x with the five omega-pairings that the flow
    constraints require set to zero."""
    def rc():
        return rng.normal(size=3) + 1j * rng.normal(size=3)

    w = rc()
    x = flow.project_omega(rc(), [w], [0.0])
    u = flow.project_omega(rc(), [w, x], [0.0, 0.0])
    v = flow.project_omega(rc(), [w, x], [0.0, 0.0])
    return SingularData(scale * u, scale * v, scale * w, scale * x)


def singular_family(data, tol=1e-13):
    return IntegratedFamily(flow.rhs_z, data.state(), "z", tol=tol, description="singular")


def branch_model(data, y1, y2, t):
    """Leading part of the map near the singular point: a double cover of a
    plane, branched along a line."""
    u = np.asarray(data.u, dtype=complex)
    w = np.asarray(data.w, dtype=complex)
    y1, y2, t = (np.asarray(a, dtype=float)[..., None] for a in (y1, y2, t))
    g = float(np.real(np.vdot(u, w)))
    return ((y1 + 0.25 * g * t ** 2) * u + (y2 ** 2 - 0.25 * norm2(u) * t ** 2) * w
            + 2 * y2 * t * cross(u, w))


def scaling_slope(eps, values):
    """Least-squares slope of log(values) against log(eps)."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    return float(np.polyfit(np.log(eps), np.log(values), 1)[0])


@dataclass(frozen=True)
class BranchFit:
    kind: str
    slope: float = float("nan")
    eps: tuple = ()
    deviations: tuple = ()
    note: str = ""


def branch_model_fit(data, eps=None, points=None, family=None, rank_tol=1e-9):
    """Exponent of |Phi(e^2 y1, e y2, e t) - e^2 L(y1, y2, t)| against e.

    With u = 0 the 3-fold is a cone at the singular point and a cone report is
    returned instead; dependent nonzero u, w are not supported.
    """
    u = np.asarray(data.u, dtype=complex)
    w = np.asarray(data.w, dtype=complex)
    if np.sqrt(norm2(u)) <= rank_tol * max(1.0, np.sqrt(norm2(w))):
        return BranchFit("cone", note="u = 0: the 3-fold is a cone with vertex at the singular point")
    sv = np.linalg.svd(realify([u, w]), compute_uv=False)
    if sv[-1] <= rank_tol * sv[0]:
        raise UnsupportedConfiguration("u and w are linearly dependent; the local model needs "
                                       "higher-order terms that are not implemented")
    if eps is None:
        eps = np.geomspace(0.03, 0.003, 8)
    if points is None:
        points = (np.array([0.7, -0.4, 1.1]), np.array([0.9, 1.3, -0.6]),
                  np.array([-1.2, 0.5, 0.8]))
    fam = family if family is not None else singular_family(data)
    devs = []
    for e in eps:
        y1, y2, t = points
        val = fam.phi(e * e * y1, e * y2, e * t)
        model = e * e * branch_model(data, y1, y2, t)
        devs.append(float(np.max(np.sqrt(norm2(val - model)))))
    return BranchFit("branch", scaling_slope(eps, devs), tuple(eps), tuple(devs))


# ---------------------------------------------------------------- periodicity

@dataclass(frozen=True)
class PeriodicitySpec:
    p: int
    q: int
    s: Fraction
    sigma: Fraction
    tau: Fraction
    a1: int
    a2: int
    a3: int
    lam: int
    period: float = 4 * math.pi

    @property
    def a(self):
        return (self.a1, self.a2, self.a3)

    @property
    def alpha_ints(self):
        return (self.a2 * self.a3, -self.a3 * self.a1, -self.a1 * self.a2)


def periodicity_from_pq(p, q):
    """Integer frequencies of the rational case-(d) family for coprime p, q
    with 0 < 2p < q, and the alpha triple producing them."""
    if int(p) != p or int(q) != q:
        raise ValueError("p and q must be integers")
    p, q = int(p), int(q)
    if not 0 < 2 * p < q:
        raise ValueError(f"need 0 < 2p < q, got p={p}, q={q}")
    if math.gcd(p, q) != 1:
        raise ValueError(f"p={p} and q={q} are not coprime")
    a1, a2, a3 = p * p - q * q, q * q - 2 * p * q, 2 * p * q - p * p
    lam = p * p - p * q + q * q
    if (p + q) % 3 == 0:
        a1, a2, a3, lam = a1 // 3, a2 // 3, a3 // 3, lam // 3
    s = Fraction(p, q)
    sigma = (1 - 2 * s) / (1 - s * s)
    tau = (1 - s + s * s) / (1 - s * s)
    assert a1 + a2 + a3 == 0
    assert lam * lam == a1 * a1 - a2 * a3
    assert math.gcd(math.gcd(abs(a1), abs(a2)), abs(a3)) == 1
    assert lam % 2 == 1
    assert tau * tau == sigma * sigma - sigma + 1
    assert Fraction(a2, a1) == -sigma and Fraction(lam, a1) == -tau
    per = PeriodicitySpec(p, q, s, sigma, tau, a1, a2, a3, lam)
    return per, AlphaTriple(*(float(x) for x in per.alpha_ints))


def coprime_pairs(qmax):
    """All (p, q) with 0 < 2p < q <= qmax and hcf(p, q) = 1, sorted by q then p."""
    return [(p, q) for q in range(3, qmax + 1) for p in range(1, (q - 1) // 2 + 1)
            if 2 * p < q and math.gcd(p, q) == 1]


def check_periodicity(source, relation, shift, grid):
    """max |Phi(u, v, t + shift) - Phi(+-u, +-v, t)| over the grid.

    relation is "periodic" (same u, v) or "flip" (u, v negated).
    """
    phi = _phi_fn(source)
    u, v, t = (np.asarray(x, dtype=float) for x in grid)
    if relation == "periodic":
        rhs = phi(u, v, t)
    elif relation == "flip":
        rhs = phi(-u, -v, t)
    else:
        raise ValueError(f"unknown relation {relation!r}")
    lhs = phi(u, v, t + shift)
    return float(np.max(np.abs(lhs - rhs), initial=0.0))


def box_grid(n=(5, 5, 9), y_range=(-2.0, 2.0), t_range=(0.0, 4 * math.pi)):
    """Regular (u, v, t) grid flattened to three 1-d arrays."""
    axes = (np.linspace(*y_range, n[0]), np.linspace(*y_range, n[1]), np.linspace(*t_range, n[2]))
    mesh = np.meshgrid(*axes, indexing="ij")
    return tuple(m.ravel() for m in mesh)


# ---------------------------------------------------------------- asymptotics

@dataclass(frozen=True)
class AsymptoticFit:
    slope: float
    radii: tuple
    deviations: tuple
    skipped: bool = False


def asymptotic_fit(phi, phi0, points, scales, zero_tol=1e-300):
    """Slope of log max|Phi - Phi0| against log r along a ladder.

    points(scale) returns sample coordinates (u, v, t) at that scale; r is the
    mean distance of the sampled points from the origin. A deviation that
    vanishes identically skips the fit.
    """
    radii, devs = [], []
    for sc in scales:
        u, v, t = points(sc)
        val = phi(u, v, t)
        radii.append(float(np.mean(np.sqrt(norm2(val)))))
        devs.append(float(np.max(np.sqrt(norm2(val - phi0(u, v, t))))))
    if max(devs) <= zero_tol * max(1.0, max(radii)) or min(devs) == 0.0:
        return AsymptoticFit(float("nan"), tuple(radii), tuple(devs), True)
    return AsymptoticFit(scaling_slope(radii, devs), tuple(radii), tuple(devs))


_DIRS = (np.array([0.83, -0.41, 0.27, -0.66, 0.95]), np.array([0.37, 0.92, -0.74, -0.58, 0.21]),
         np.array([0.3, 1.7, 2.9, 4.4, 5.6]))


def cased_asymptotic_fit(family, alphas, r_range=(1e2, 1e6), n=8):
    """Deviation of a case-(d) family from its quadratic cone model."""
    from .families import cased_phi0

    def points(r):
        s = math.sqrt(r)
        return s * _DIRS[0], s * _DIRS[1], _DIRS[2]

    return asymptotic_fit(family.phi, lambda u, v, t: cased_phi0(u, v, t, alphas), points,
                          np.geomspace(*r_range, n))


def k_regime1_fit(family, r_range=(1e2, 1e6), n=8):
    """Deviation of a k-family from x^k p_k + x y q2 in the regime x > 0,
    x of order r^(1/k), y of order r^((k-1)/k)."""
    k = flow.pq_k(family.state(0.0))

    def points(r):
        return (r ** (1.0 / k) * np.abs(_DIRS[0]), r ** ((k - 1.0) / k) * _DIRS[1], _DIRS[2])

    def phi0(x, y, t):
        s = family.state(t)
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        return x ** k * s[..., k, :] + x * y * s[..., k + 2, :]

    return asymptotic_fit(family.phi, phi0, points, np.geomspace(*r_range, n))
