"""Internal symmetries of the two flows, the division into cases by the span
of z1, z2, z3, and normal forms for the rank-2 and rank-3 cases.

Both symmetry actions are linear in the state rows, so each is realised as a
real matrix L acting on the rows together with a time dilation delta:
state'(t) = L state(delta t).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .cgeom import realify, su3_to_axis
from .families import Family, assemble_phi

RANK_TOL = 1e-9
ETA = np.diag([1.0, -1.0, -1.0])


class DegenerateData(ValueError):
    """Initial data cannot be brought to the requested normal form."""


# ---------------------------------------------------------------- GL(2,R) x R^2

@dataclass(frozen=True)
class GL2AffineParams:
    """The affine map (y1, y2) -> (a y1 + b y2 + e, c y1 + d y2 + f)."""

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 1.0
    e: float = 0.0
    f: float = 0.0

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.d, self.e, self.f)
        if not all(math.isfinite(float(v)) for v in vals):
            raise ValueError("affine parameters must be finite")
        if self.delta == 0:
            raise ValueError("the linear part must be invertible (ad - bc != 0)")

    @property
    def delta(self):
        return self.a * self.d - self.b * self.c

    @property
    def linear(self):
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    def apply(self, y1, y2):
        """Image of (y1, y2) under the affine map."""
        return (self.a * y1 + self.b * y2 + self.e, self.c * y1 + self.d * y2 + self.f)

    def compose(self, other):
        """Parameters of y -> self(other(y)); acting by the result equals acting
        by self and then by other."""
        G = self.linear @ other.linear
        t = self.linear @ np.array([other.e, other.f]) + np.array([self.e, self.f])
        return GL2AffineParams(G[0, 0], G[0, 1], G[1, 0], G[1, 1], t[0], t[1])

    @classmethod
    def from_matrix(cls, G, e=0.0, f=0.0):
        G = np.asarray(G, dtype=float)
        return cls(G[0, 0], G[0, 1], G[1, 0], G[1, 1], e, f)


def gl2_matrix(g):
    """The 6 x 6 real matrix L with z'_i = sum_j L_ij z_j(delta t)."""
    a, b, c, d, e, f = g.a, g.b, g.c, g.d, g.e, g.f
    return np.array([
        [0.5 * (a * a + b * b + c * c + d * d), 0.5 * (a * a + b * b - c * c - d * d), a * c + b * d, 0, 0, 0],
        [0.5 * (a * a - b * b + c * c - d * d), 0.5 * (a * a - b * b - c * c + d * d), a * c - b * d, 0, 0, 0],
        [a * b + c * d, a * b - c * d, a * d + b * c, 0, 0, 0],
        [a * e + c * f, a * e - c * f, a * f + c * e, a, c, 0],
        [b * e + d * f, b * e - d * f, b * f + d * e, b, d, 0],
        [0.5 * (e * e + f * f), 0.5 * (e * e - f * f), e * f, e, f, 1],
    ])


def gl2_state(g, state):
    """Transform a z-state (or a stack of them) by the linear part of the action."""
    return np.einsum("ij,...jk->...ik", gl2_matrix(g), np.asarray(state, dtype=complex))


def sl2_from_lorentz(T, tol=1e-9):
    """Recover G in SL(2,R) whose induced action on (z1, z2, z3) is T.

    T must lie in the identity component of the Lorentz group of
    a1^2 - a2^2 - a3^2. The answer is fixed up to the sign -G.
    """
    T = np.asarray(T, dtype=float)
    sq = 0.5 * np.array([T[0, 0] + T[0, 1] + T[1, 0] + T[1, 1],
                         T[0, 0] + T[0, 1] - T[1, 0] - T[1, 1],
                         T[0, 0] - T[0, 1] + T[1, 0] - T[1, 1],
                         T[0, 0] - T[0, 1] - T[1, 0] + T[1, 1]])
    # pairwise products ab, ac, ad, bc, bd, cd
    prod = {(0, 1): 0.5 * (T[2, 0] + T[2, 1]), (0, 2): 0.5 * (T[0, 2] + T[1, 2]),
            (0, 3): 0.5 * (T[2, 2] + 1.0), (1, 2): 0.5 * (T[2, 2] - 1.0),
            (1, 3): 0.5 * (T[0, 2] - T[1, 2]), (2, 3): 0.5 * (T[2, 0] - T[2, 1])}
    i = int(np.argmax(sq))
    x = np.empty(4)
    x[i] = math.sqrt(max(sq[i], 0.0))
    for j in range(4):
        if j != i:
            x[j] = prod[(min(i, j), max(i, j))] / x[i]
    G = x.reshape(2, 2)
    if not np.all(np.isfinite(G)) or abs(np.linalg.det(G) - 1.0) > tol * max(1.0, np.max(np.abs(T))):
        raise DegenerateData("matrix is not induced by an element of SL(2,R)")
    back =gl2_matrix(GL2AffineParams.from_matrix(G))[:3, :3]
    if np.max(np.abs(back - T)) > tol * max(1.0, np.max(np.abs(T))):
        raise DegenerateData("matrix is not induced by an element of SL(2,R)")
    return G


class TransformedFamily(Family):
    """The family s'(t) = L s(delta t) for a linear symmetry (L, delta)."""

    def __init__(self, base, L, delta, system, description="transformed"):
        self.base = base
        self.L = np.asarray(L, dtype=float)
        self.delta = float(delta)
        self.system = system
        self.cross_factor = base.cross_factor
        self.description = description

    def state(self, t):
        return np.einsum("ij,...jk->...ik", self.L, self.base.state(self.delta * np.asarray(t, dtype=float)))

    def dstate(self, t):
        ds = self.base.dstate(self.delta * np.asarray(t, dtype=float))
        return self.delta * np.einsum("ij,...jk->...ik", self.L, ds)


class _Accessor(Family):
    def __init__(self, fn, system):
        self.fn = fn
        self.system = system

    def state(self, t):
        return self.fn(t)


def _as_family(s, system):
    return s if isinstance(s, Family) else _Accessor(s, system)


def gl2_act(g, s):
    """Act on a time-indexed z-state (a Family or a callable t -> state)."""
    return TransformedFamily(_as_family(s, "z"), gl2_matrix(g), g.delta, "z", "gl2-transformed")


# ---------------------------------------------------------------- k-family group

@dataclass(frozen=True)
class KGroupParams:
    """The map (x, y) -> (a x + b, c y + d0 + d1 x + ... + d_{k-1} x^(k-1))."""

    k: int
    a: float = 1.0
    b: float = 0.0
    c: float = 1.0
    d: tuple = ()

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be an integer >= 1")
        d = tuple(float(x) for x in self.d) + (0.0,) * (self.k - len(self.d))
        if len(d) != self.k:
            raise ValueError("at most k shift coefficients d_0..d_{k-1}")
        object.__setattr__(self, "d", d)
        if self.delta == 0:
            raise ValueError("need delta = a c != 0")

    @property
    def delta(self):
        return self.a * self.c

    def apply(self, x, y):
        shift = sum(dj * np.asarray(x, dtype=float) ** j for j, dj in enumerate(self.d))
        return self.a * x + self.b, self.c * y + shift


def k_matrix(g):
    """The (k+3) x (k+3) real matrix acting on the rows p_0..p_k, q_1, q_2."""
    k, a, b, c, d = g.k, g.a, g.b, g.c, g.d
    L = np.zeros((k + 3, k + 3))
    for j in range(k + 1):
        for i in range(j, k + 1):
            L[j, i] = math.comb(i, j) * a ** j * b ** (i - j)
    L[0, k + 1] = d[0]
    L[0, k + 2] = b * d[0]
    for j in range(1, k):
        L[j, k + 1] = d[j]
        L[j, k + 2] = a * d[j - 1] + b * d[j]
    L[k, k + 2] = a * d[k - 1]
    L[k + 1, k + 1] = c
    L[k + 1, k + 2] = b * c
    L[k + 2, k + 2] = a * c
    return L


def k_act(g, s):
    """Act on a time-indexed pq-state (a Family or a callable t -> state)."""
    return TransformedFamily(_as_family(s, "pq"), k_matrix(g), g.delta, "pq", "k-group-transformed")


def point_set_defect(g, base, transformed, u, v, t):
    """Max |Phi'(u, v, t) - Phi(g(u, v), delta t)| over the samples."""
    system = transformed.system
    uu, vv = g.apply(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    lhs = assemble_phi(transformed.state(t), u, v, system)
    rhs = assemble_phi(base.state(g.delta * np.asarray(t, dtype=float)), uu, vv, system)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------- classification

CASE_NAMES = {0: "i", 1: "ii", 2: "iii", 3: "iv"}


@dataclass(frozen=True)
class CaseReport:
    case: str
    dimension: int
    singular_values: tuple
    quadric: str = ""


def span_dimension(vectors, tol=RANK_TOL):
    M = realify(vectors)
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0, tuple(s)
    return int(np.sum(s > tol * s[0])), tuple(float(x) for x in s)


def quadric_tag(z1, z2, z3):
    """Standard form of the quadratic Q(y) attached to proportional z1, z2, z3."""
    zs = np.array([z1, z2, z3], dtype=complex)
    j = int(np.argmax(np.abs(zs).sum(axis=1)))
    ref = zs[j]
    k = int(np.argmax(np.abs(ref)))
    c = (zs[:, k] / ref[k]).real
    Q = 0.5 * np.array([[c[0] + c[1], c[2]], [c[2], c[0] - c[1]]])
    ev = np.linalg.eigvalsh(Q)
    tol = RANK_TOL * np.max(np.abs(ev))
    pos, neg = int(np.sum(ev > tol)), int(np.sum(ev < -tol))
    if pos == 2 or neg == 2:
        return "y1^2+y2^2" if pos == 2 else "-y1^2-y2^2"
    if pos == 1 and neg == 1:
        return "y1^2-y2^2"
    return "y1^2"


def classify_case(z1, z2, z3, tol=RANK_TOL):
    """Case (i)-(iv) from the real span dimension of z1, z2, z3."""
    dim, s = span_dimension([z1, z2, z3], tol)
    tag = quadric_tag(z1, z2, z3) if dim == 1 else ""
    return CaseReport(CASE_NAMES[dim], dim, s, tag)


# ---------------------------------------------------------------- normal forms

@dataclass
class Normalization:
    """g and U with U (gl2_state(g, z)) in normal form at t = 0."""

    g: GL2AffineParams
    U: np.ndarray
    z: np.ndarray
    degenerate: bool = False
    info: dict = None

    def apply(self, state):
        return np.einsum("ij,...kj->...ki", self.U, gl2_state(self.g, state))


def _check_triple(z1, z2, z3):
    zs = np.array([z1, z2, z3], dtype=complex)
    if zs.shape != (3, 3) or not np.all(np.isfinite(zs)):
        raise ValueError("need three finite complex 3-vectors")
    return zs


def _state6(zs):
    s = np.zeros((6, 3), dtype=complex)
    s[:3] = zs
    return s


def _lorentz_form(x):
    return x[0] ** 2 - x[1] ** 2 - x[2] ** 2


def normalize_case_iii(z1, z2, z3, null_tol=1e-8):
    """Bring a rank-2 triple at t = 0 to z1 = z2 = (1, -i, 0), z3 = (0, 0, 1)."""
    zs = _check_triple(z1, z2, z3)
    rep = classify_case(*zs)
    if rep.case != "iii":
        raise DegenerateData(f"data is in case ({rep.case}), not case (iii)")
    # kernel of the real 6 x 3 matrix with columns z1, z2, z3
    _, s, vt = np.linalg.svd(realify(zs))
    kern = vt[-1]
    form = _lorentz_form(kern)
    if abs(form) > null_tol * float(kern @ kern):
        kind = "timelike" if form > 0 else "spacelike"
        raise DegenerateData(f"kernel vector is {kind}, inconsistent with case (iii)")
    # a1 z1 + a2 z2 + a3 z3 = 0 reads v^T S v = 0 for S the symmetric matrix
    # of the quadratic part; K = [[a1+a2, a3], [a3, a1-a2]] is rank one, = +-v v^T
    K = np.array([[kern[0] + kern[1], kern[2]], [kern[2], kern[0] - kern[1]]])
    w, V = np.linalg.eigh(K)
    v = V[:, int(np.argmax(np.abs(w)))]
    # rotation whose second column is v: then z1' - z2' = 2 v^T S v = 0
    g1 = GL2AffineParams(v[1], v[0], -v[0], v[1])
    zp = gl2_state(g1, _state6(zs))[:3]
    n3 = math.sqrt(float(np.sum(np.abs(zp[2]) ** 2)))
    if n3 <= RANK_TOL * max(1.0, float(np.abs(zs).max())):
        raise DegenerateData("z3 vanishes after the kernel rotation")
    r = n3 ** -0.5
    g2 = GL2AffineParams(r, 0.0, 0.0, r)
    zp = gl2_state(g2, _state6(zp))[:3]
    U1 = su3_to_axis(zp[2])
    zp = zp @ U1.T
    w1, w2, Z = zp[0]
    X = 0.5 * (w1 - 1j * np.conj(w2))
    Y = 0.5 * (w1 + 1j * np.conj(w2))
    Z = Z.real
    nrm = abs(X) ** 2 + abs(Y) ** 2
    if nrm == 0:
        raise DegenerateData("z1 reduces to a multiple of z3")
    # z1'' = a^2 z1' + a c z3' must have |X''|^2 + |Y''|^2 = 1 and no third component
    a = nrm ** -0.25
    g3 = GL2AffineParams(a, 0.0, -a * Z, 1.0 / a)
    X2, Y2 = a * a * X, a * a * Y
    U2 = np.array([[np.conj(X2), -1j * Y2, 0], [-1j * np.conj(Y2), X2, 0], [0, 0, 1]])
    g = g1.compose(g2).compose(g3)
    U = U2 @ U1
    out = Normalization(g, U, None, False, {"kernel": kern, "X": X, "Y": Y, "Z": Z})
    out.z = out.apply(_state6(zs))[:3]
    return out


def normalize_case_iv(z1, z2, z3, degenerate_tol=1e-8):
    """Bring a rank-3 triple at t = 0 to diagonal form by SL(2,R) and SU(3)."""
    zs = _check_triple(z1, z2, z3)
    rep = classify_case(*zs)
    if rep.case != "iv":
        raise DegenerateData(f"data is in case ({rep.case}), not case (iv)")
    gram = np.real(np.conj(zs) @ zs.T)
    nu, Y = eigh(ETA, gram)
    # eta y = nu gram y with gram-orthonormal y; rescale so Y^T eta Y = diag(+-1)
    Y = Y / np.sqrt(np.abs(nu))
    pos = [i for i in range(3) if nu[i] > 0]
    neg = [i for i in range(3) if nu[i] < 0]
    if len(pos) != 1 or len(neg) != 2:
        raise DegenerateData("pencil has the wrong signature")
    if abs(Y[1, neg[0]]) < abs(Y[1, neg[1]]):
        neg = neg[::-1]
    Y = Y[:, pos + neg]
    nus = nu[pos + neg]
    if Y[0, 0] < 0:
        Y[:, 0] = -Y[:, 0]
    if Y[1, 1] < 0:
        Y[:, 1] = -Y[:, 1]
    if np.linalg.det(Y) < 0:
        Y[:, 2] = -Y[:, 2]
    degenerate = bool(abs(nus[1] - nus[2]) <= degenerate_tol * max(abs(nus[1]), abs(nus[2])))
    G = sl2_from_lorentz(Y.T)
    if G[0, 0] < 0 or (G[0, 0] == 0 and G[0, 1] < 0):
        G = -G
    g = GL2AffineParams.from_matrix(G)
    zp = gl2_state(g, _state6(zs))[:3]
    norms = np.sqrt(np.sum(np.abs(zp) ** 2, axis=1))
    # rows conj(z_j / |z_j|) align the orthogonal images with the axes; the
    # phase of each row is chosen to keep the diagonal entry z_jj's phase
    V = np.conj(zp / norms[:, None])
    diag = np.diag(zp)
    ph = np.where(np.abs(diag) > 0, diag / np.where(np.abs(diag) > 0, np.abs(diag), 1.0), 1.0)
    U = V * ph[:, None]
    U[2] = U[2] / np.linalg.det(U)
    out = Normalization(g, U, None, degenerate, {"nu": nus})
    out.z = out.apply(_state6(zs))[:3]
    return out


def diagonal_defect(z):
    """Largest off-diagonal modulus of a normalized triple."""
    z = np.asarray(z, dtype=complex)
    return float(np.max(np.abs(z - np.diag(np.diag(z)))))


def gram_offdiag(zs):
    gram = np.real(np.conj(zs) @ np.asarray(zs).T)
    return float(np.max(np.abs(gram - np.diag(np.diag(gram)))))

