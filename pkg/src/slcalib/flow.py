"""Right-hand sides, a deterministic integrator and first-integral monitors.

State layouts (complex arrays, coordinate axis last, leading batch axes allowed):

* ZState: shape (6, 3), rows z1..z6.
* PQState: shape (k + 3, 3), rows p0..pk, q1, q2.
* WPQRState: shape (4, 3), rows w, p, q, r, each a triple of scalars.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .cgeom import cross, omega

ADMISSIBLE_TOL = 1e-9


class IntegrationError(ArithmeticError):
    """Integration aborted; ``t`` records where."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class InadmissibleState(ValueError):
    """Initial data violates the constraints beyond the admissibility tolerance."""


# ---------------------------------------------------------------- z-system

def rhs_z(s):
    s = np.asarray(s, dtype=complex)
    z1, z2, z3, z4, z5 = (s[..., j, :] for j in range(5))
    out = np.empty_like(s)
    out[..., 0, :] = 2.0 * cross(z2, z3)
    out[..., 1, :] = 2.0 * cross(z1, z3)
    out[..., 2, :] = -2.0 * cross(z1, z2)
    out[..., 3, :] = cross(z1 + z2, z5) - cross(z3, z4)
    out[..., 4, :] = cross(z2 - z1, z4) + cross(z3, z5)
    out[..., 5, :] = cross(z4, z5)
    return out


def constraint_residuals_z(s):
    """The six omega-expressions that vanish on admissible z-states."""
    s = np.asarray(s, dtype=complex)
    z1, z2, z3, z4, z5 = (s[..., j, :] for j in range(5))
    return np.stack([
        omega(z2, z3),
        omega(z1, z3),
        omega(z1, z2),
        omega(z1, z5) + omega(z2, z5) - omega(z3, z4),
        -omega(z1, z4) + omega(z2, z4) + omega(z3, z5),
        omega(z4, z5),
    ], axis=-1)


def corollary51_z45(z1, z2, z3, e, f):
    """The z4, z5 built linearly from z1, z2, z3; they solve the z4, z5 equations."""
    z1, z2, z3 = (np.asarray(z, dtype=complex) for z in (z1, z2, z3))
    return e * (z1 + z2) + f * z3, f * (z1 - z2) + e * z3


# ---------------------------------------------------------------- pq-system

def pq_k(s):
    return np.shape(s)[-2] - 3


def rhs_pq(s):
    s = np.asarray(s, dtype=complex)
    k = pq_k(s)
    if k < 1:
        raise ValueError("a pq-state needs at least p0, p1, q1, q2")
    ps = s[..., 1:k + 1, :]
    q1, q2 = s[..., k + 1:k + 2, :], s[..., k + 2:k + 3, :]
    with_q1 = cross(ps, q1)
    with_q2 = cross(ps, q2)
    j = np.arange(1, k + 1, dtype=float)[:, None]
    out = np.zeros_like(s)
    out[..., 0, :] = 2.0 * with_q1[..., 0, :]
    out[..., 1:k + 1, :] = 2.0 * j * with_q2
    out[..., 1:k, :] += 2.0 * j[1:] * with_q1[..., 1:, :]
    out[..., k + 1, :] = -2.0 * cross(q1[..., 0, :], q2[..., 0, :])
    return out


def constraint_residuals_pq(s):
    """The k + 2 omega-expressions that vanish on admissible pq-states."""
    s = np.asarray(s, dtype=complex)
    k = pq_k(s)
    p = [s[..., j, :] for j in range(k + 1)]
    q1, q2 = s[..., k + 1, :], s[..., k + 2, :]
    res = [omega(q1, q2), omega(p[k], q2)]
    for j in range(1, k + 1):
        res.append(j * omega(p[j], q1) + (j - 1) * omega(p[j - 1], q2))
    return np.stack(res, axis=-1)


# ---------------------------------------------------------------- diagonal system

def rhs_w(w):
    w = np.asarray(w, dtype=complex)
    w1, w2, w3 = w[..., 0], w[..., 1], w[..., 2]
    return np.conj(np.stack([w2 * w3, -w3 * w1, -w1 * w2], axis=-1))


def rhs_pq_linear(w, p):
    """Linear equations for p (and, identically, for q) given w."""
    w = np.conj(np.asarray(w, dtype=complex))
    p = np.conj(np.asarray(p, dtype=complex))
    return 0.5 * np.stack([
        w[..., 1] * p[..., 2] + w[..., 2] * p[..., 1],
        -(w[..., 2] * p[..., 0] + w[..., 0] * p[..., 2]),
        -(w[..., 0] * p[..., 1] + w[..., 1] * p[..., 0]),
    ], axis=-1)


def rhs_r(p, q):
    p = np.conj(np.asarray(p, dtype=complex))
    q = np.conj(np.asarray(q, dtype=complex))
    return 0.5 * np.stack([
        p[..., 1] * p[..., 2] + q[..., 2] * q[..., 1],
        q[..., 2] * q[..., 0] - p[..., 0] * p[..., 2],
        -(p[..., 0] * q[..., 1] + p[..., 1] * q[..., 0]),
    ], axis=-1)


def rhs_wpqr(s):
    s = np.asarray(s, dtype=complex)
    w, p, q = s[..., 0, :], s[..., 1, :], s[..., 2, :]
    out = np.empty_like(s)
    out[..., 0, :] = rhs_w(w)
    out[..., 1, :] = rhs_pq_linear(w, p)
    out[..., 2, :] = rhs_pq_linear(w, q)
    out[..., 3, :] = rhs_r(p, q)
    return out


def pack_wpqr(s):
    """Embed a w,p,q,r state as the z-state z1=(w1,0,0), z2=(0,w2,0),
    z3=(0,0,w3), z4=(p1,p2,q3), z5=(q1,-q2,p3), z6=r."""
    s = np.asarray(s, dtype=complex)
    w, p, q, r = (s[..., j, :] for j in range(4))
    z = np.zeros(s.shape[:-2] + (6, 3), dtype=complex)
    for j in range(3):
        z[..., j, j] = w[..., j]
    z[..., 3, :] = np.stack([p[..., 0], p[..., 1], q[..., 2]], axis=-1)
    z[..., 4, :] = np.stack([q[..., 0], -q[..., 1], p[..., 2]], axis=-1)
    z[..., 5, :] = r
    return z


def unpack_wpqr(z):
    z = np.asarray(z, dtype=complex)
    w = np.stack([z[..., 0, 0], z[..., 1, 1], z[..., 2, 2]], axis=-1)
    p = np.stack([z[..., 3, 0], z[..., 3, 1], z[..., 4, 2]], axis=-1)
    q = np.stack([z[..., 4, 0], -z[..., 4, 1], z[..., 3, 2]], axis=-1)
    return np.stack([w, p, q, z[..., 5, :]], axis=-2)


def _im_lorentz(a, b):
    """Im(a1 conj(b1) - a2 conj(b2) - a3 conj(b3))."""
    x = a * np.conj(b)
    return np.imag(x[..., 0] - x[..., 1] - x[..., 2])


def lemma91_invariants(w, p, q):
    """The three conserved imaginary parts pairing w, p and q."""
    w, p, q = (np.asarray(x, dtype=complex) for x in (w, p, q))
    return np.stack([_im_lorentz(w, p), _im_lorentz(w, q), _im_lorentz(p, q)], axis=-1)


def rhs_u_real(w, u):
    """Real system for the real parts of p when w is real."""
    w1, w2, w3 = w[..., 0], w[..., 1], w[..., 2]
    u1, u2, u3 = u[..., 0], u[..., 1], u[..., 2]
    return 0.5 * np.stack([w2 * u3 + w3 * u2, -(w3 * u1 + w1 * u3),
                           -(w1 * u2 + w2 * u1)], axis=-1)


def rhs_v_real(w, v):
    """Real system for the imaginary parts of p when w is real."""
    return -rhs_u_real(w, v)


def dual_solutions(U):
    """Given three u-solutions as the rows of U, the matrix whose columns are
    three v-solutions, so that U diag(1,-1,-1) V is the identity."""
    U = np.asarray(U, dtype=float)
    M = U * np.array([1.0, -1.0, -1.0])
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise np.linalg.LinAlgError("u-solutions are linearly dependent")
    return np.linalg.inv(M)


# ---------------------------------------------------------------- integrator

@dataclass(frozen=True)
class IntegratorCfg:
    method: str = "rk4"
    step: float = 1e-3
    tol: float = 1e-10
    max_steps: int = 10_000_000
    record_every: int = 1

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if not (self.step > 0 and self.tol > 0 and self.max_steps > 0 and self.record_every > 0):
            raise ValueError("step, tolerance, max_steps and record_every must be positive")


@dataclass
class Trajectory:
    ts: np.ndarray
    states: np.ndarray
    steps: int = 0
    info: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(zip(self.ts, self.states))

    def __len__(self):
        return len(self.ts)

    @property
    def final(self):
        return self.states[-1]


def _check_finite(y, t):
    if not np.all(np.isfinite(y)):
        raise IntegrationError(f"non-finite state at t = {t!r}", t)


def _rk4(rhs, y, t0, t1, cfg):
    n = int(np.ceil(abs(t1 - t0) / cfg.step - 1e-9))
    n = max(n, 1)
    if n > cfg.max_steps:
        raise IntegrationError(f"{n} steps needed, max_steps is {cfg.max_steps}", t0)
    h = (t1 - t0) / n
    ts, ys = [t0], [y]
    for i in range(n):
        t = t0 + i * h
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_next = t1 if i == n - 1 else t0 + (i + 1) * h
        _check_finite(y, t_next)
        if (i + 1) % cfg.record_every == 0 or i == n - 1:
            ts.append(t_next)
            ys.append(y)
    return Trajectory(np.array(ts), np.array(ys), n)


def _rk45(rhs, y, t0, t1, cfg):
    shape = y.shape
    calls = [0]

    def f(_t, x):
        calls[0] += 1
        if calls[0] > 6 * cfg.max_steps:
            raise IntegrationError("max_steps exceeded", _t)
        return rhs(x.reshape(shape)).ravel()

    sol = solve_ivp(f, (t0, t1), y.ravel(), method="RK45", rtol=cfg.tol, atol=cfg.tol)
    if sol.status != 0:
        raise IntegrationError(sol.message, float(sol.t[-1]))
    ys = sol.y.T.reshape((-1,) + shape)
    for t, x in zip(sol.t, ys):
        _check_finite(x, t)
    keep = np.arange(0, len(sol.t), cfg.record_every)
    if keep[-1] != len(sol.t) - 1:
        keep = np.append(keep, len(sol.t) - 1)
    return Trajectory(sol.t[keep], ys[keep], len(sol.t) - 1, {"nfev": sol.nfev})


def integrate(rhs, state0, t0, t1, cfg=None, constraints=None):
    """Integrate dy/dt = rhs(y) from t0 to t1 (either direction).

    If ``constraints`` is given it is evaluated on the initial state and any
    residual above the admissibility tolerance rejects the data.
    """
    cfg = cfg or IntegratorCfg()
    t0, t1 = float(t0), float(t1)
    if t0 == t1:
        raise ValueError("t1 must differ from t0")
    y = np.array(state0, dtype=complex)
    _check_finite(y, t0)
    if constraints is not None:
        worst = float(np.max(np.abs(constraints(y)), initial=0.0))
        if worst > ADMISSIBLE_TOL:
            raise InadmissibleState(f"initial constraint residual {worst:.3e} exceeds {ADMISSIBLE_TOL}")
    if cfg.method == "rk4":
        return _rk4(rhs, y, t0, t1, cfg)
    return _rk45(rhs, y, t0, t1, cfg)


def evolve_z(state0, t0, t1, cfg=None):
    return integrate(rhs_z, state0, t0, t1, cfg, constraints_for("z"))


def evolve_pq(state0, t0, t1, cfg=None):
    return integrate(rhs_pq, state0, t0, t1, cfg, constraints_for("pq"))


def evolve_wpqr(state0, t0, t1, cfg=None):
    return integrate(rhs_wpqr, state0, t0, t1, cfg, constraints_for("wpqr"))


def constraints_for(system):
    if system == "z":
        return constraint_residuals_z
    if system == "pq":
        return constraint_residuals_pq
    if system == "wpqr":
        return lambda s: constraint_residuals_z(pack_wpqr(s))
    if system == "w":
        return None
    raise ValueError(f"unknown system {system!r}")


RHS = {"z": rhs_z, "pq": rhs_pq, "w": rhs_w, "wpqr": rhs_wpqr}


# ---------------------------------------------------------------- random admissible data

def project_omega(p, qs, targets):
    """Smallest change to p making omega(p, q_i) = targets_i."""
    p = np.asarray(p, dtype=complex)
    qs = np.atleast_2d(np.asarray(qs, dtype=complex))
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    # omega(p, q) = Re p . Im q - Im p . Re q, linear in (Re p, Im p)
    G = np.hstack([qs.imag, -qs.real])
    x = np.concatenate([p.real, p.imag])
    dx = np.linalg.lstsq(G, targets - G @ x, rcond=None)[0]
    x = x + dx
    return x[:3] + 1j * x[3:]


def random_admissible_z(rng, scale=1.0):
    """Random z-state satisfying all six constraints."""
    from .cgeom import random_su3
    U = random_su3(rng)
    z = np.zeros((6, 3), dtype=complex)
    for j in range(3):
        z[j] = U @ rng.normal(size=3)
    z[3] = rng.normal(size=3) + 1j * rng.normal(size=3)
    z[5] = rng.normal(size=3) + 1j * rng.normal(size=3)
    z5 = rng.normal(size=3) + 1j * rng.normal(size=3)
    z1, z2, z3, z4 = z[:4]
    z[4] = project_omega(z5, [z1 + z2, z3, z4],
                         [-omega(z3, z4), omega(z2, z4) - omega(z1, z4), 0.0])
    return scale * z


def random_admissible_pq(rng, k, scale=1.0):
    """Random pq-state satisfying all k + 2 constraints."""
    def rc():
        return rng.normal(size=3) + 1j * rng.normal(size=3)

    s = np.zeros((k + 3, 3), dtype=complex)
    q2 = rc()
    q1 = project_omega(rc(), [q2], [0.0])
    s[k + 1], s[k + 2] = q1, q2
    s[0] = rc()
    for j in range(1, k + 1):
        qs = [q1]
        targets = [-(j - 1) * omega(s[j - 1], q2) / j]
        if j == k:
            qs.append(q2)
            targets.append(0.0)
        s[j] = project_omega(rc(), qs, targets)
    return scale * s


def random_wpqr(rng, scale=1.0, w=None):
    """Random w,p,q,r state whose packed z-state is admissible; a given w is
    kept and only p, q, r are drawn."""
    def rc():
        return rng.normal(size=3) + 1j * rng.normal(size=3)

    if w is None:
        w = rc()
    else:
        w = np.asarray(w, dtype=complex) / scale
    r = rc()
    eta = np.array([1.0, -1.0, -1.0])
    # the Lorentzian pairing Im(sum eta_j a_j conj(b_j)) equals omega(b, eta a)
    p = project_omega(rc(), [eta * w], [0.0])
    q = project_omega(rc(), [eta * w, eta * p], [0.0, 0.0])
    return scale * np.array([w, p, q, r])
