"""Complex 3-vector algebra on C^3.

Vectors are numpy arrays of shape (3,) with complex dtype. Most functions
also accept stacks of vectors with the coordinate axis last.
"""

import numpy as np


def complex3(c1, c2=None, c3=None):
    """Build a finite complex 3-vector from three scalars or one sequence."""
    if c2 is None and c3 is None:
        v = np.asarray(c1, dtype=complex)
    else:
        v = np.array([c1, c2, c3], dtype=complex)
    if v.shape[-1] != 3:
        raise ValueError("a complex 3-vector needs exactly three components")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite component in complex 3-vector")
    return v


def herm(u, v):
    """Hermitian pairing sum_j conj(u_j) v_j."""
    return np.sum(np.conj(u) * v, axis=-1)


def metric(u, v):
    """Euclidean metric g(u, v) = Re herm(u, v)."""
    return np.real(herm(u, v))


def omega(u, v):
    """Kahler form omega(u, v) = Im herm(u, v)."""
    return np.imag(herm(u, v))


def norm2(u):
    """Squared length |u|^2."""
    return np.real(herm(u, u))


def cross(r, s):
    """Anti-bilinear cross product on C^3.

    r x s = 1/2 conj(r' x s') where r' x s' is the usual cross product, so
    that herm(r x s, w) = det[r s w] / 2.
    """
    r = np.asarray(r)
    s = np.asarray(s)
    out = np.empty(np.broadcast_shapes(r.shape, s.shape), dtype=complex)
    out[..., 0] = r[..., 1] * s[..., 2] - r[..., 2] * s[..., 1]
    out[..., 1] = r[..., 2] * s[..., 0] - r[..., 0] * s[..., 2]
    out[..., 2] = r[..., 0] * s[..., 1] - r[..., 1] * s[..., 0]
    return 0.5 * np.conj(out)


def det3(u, v, w):
    """Complex determinant of the matrix with columns u, v, w."""
    u, v, w = np.asarray(u), np.asarray(v), np.asarray(w)
    return (u[..., 0] * (v[..., 1] * w[..., 2] - v[..., 2] * w[..., 1])
            - v[..., 0] * (u[..., 1] * w[..., 2] - u[..., 2] * w[..., 1])
            + w[..., 0] * (u[..., 1] * v[..., 2] - u[..., 2] * v[..., 1]))


def re_omega3(u, v, w):
    """Real part of the holomorphic volume form dz1^dz2^dz3 on (u, v, w)."""
    return np.real(det3(u, v, w))


def im_omega3(u, v, w):
    """Imaginary part of the holomorphic volume form on (u, v, w)."""
    return np.imag(det3(u, v, w))


def realify(vectors):
    """Stack complex 3-vectors as columns of a real 6 x n matrix."""
    vs = np.atleast_2d(np.asarray(vectors, dtype=complex))
    return np.vstack([vs.real.T, vs.imag.T])


def random_su3(rng):
    """Haar-ish random special unitary 3x3 matrix."""
    z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    d = np.linalg.det(q)
    return q / d ** (1.0 / 3.0)


def su3_to_axis(v):
    """Special unitary matrix U with U v = |v| e3."""
    v = np.asarray(v, dtype=complex)
    n = np.sqrt(norm2(v))
    if n == 0:
        raise ValueError("cannot align the zero vector")
    e = v / n
    # complete e to a unitary basis by Gram-Schmidt on the standard axes
    basis = []
    for k in np.argsort(np.abs(e)):
        x = np.zeros(3, dtype=complex)
        x[k] = 1.0
        x = x - herm(e, x) * e
        for b in basis:
            x = x - herm(b, x) * b
        nx = np.sqrt(norm2(x))
        if nx > 1e-8:
            basis.append(x / nx)
        if len(basis) == 2:
            break
    cols = np.column_stack([basis[0], basis[1], e])
    u = np.conj(cols.T)
    d = np.linalg.det(u)
    u[0] = u[0] / d
    return u
