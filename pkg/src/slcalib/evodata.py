"""The two concrete affine evolution-data sets and their exterior algebra checks.

``Ex41`` lives in R^5 with the parameter plane embedded by
psi(y1, y2) = (½(y1²+y2²), ½(y1²-y2²), y1 y2, y1, y2).
``Ex42(k)`` lives in R^(k+2) with coordinates (x1..xk, y1, y2) and
psi(x, y) = (x, x², ..., x^k, y, xy).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvolutionDataId:
    which: str = "ex41"
    k: int = 0

    def __post_init__(self):
        if self.which not in ("ex41", "ex42"):
            raise ValueError(f"unknown evolution data {self.which!r}")
        if self.which == "ex42" and self.k < 1:
            raise ValueError("Ex42 needs k >= 1")

    @property
    def n(self):
        return 5 if self.which == "ex41" else self.k + 2

    @property
    def factor(self):
        """Scale between chi and the pushforward wedge on P."""
        return 1.0 if self.which == "ex41" else 2.0


EX41 = EvolutionDataId("ex41")


def ex42(k):
    return EvolutionDataId("ex42", k)


class Bivector:
    """Element of Lambda^2 R^n stored as an antisymmetric matrix."""

    def __init__(self, n, coeffs=None):
        self.n = n
        self.coeffs = np.zeros((n, n))
        if coeffs is not None:
            c = np.asarray(coeffs, dtype=float)
            upper = np.triu(c, 1)
            self.coeffs = upper - upper.T

    def add(self, i, j, value):
        """Add value * e_i ^ e_j (zero-based indices)."""
        self.coeffs[i, j] += value
        self.coeffs[j, i] -= value
        return self

    def coefficient(self, i, j):
        return self.coeffs[i, j]

    def norm(self):
        return np.max(np.abs(self.coeffs)) if self.n else 0.0

    def __sub__(self, other):
        return Bivector(self.n, self.coeffs - other.coeffs)

    def __mul__(self, a):
        return Bivector(self.n, a * self.coeffs)

    __rmul__ = __mul__

    def __repr__(self):
        terms = []
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if self.coeffs[i, j] != 0:
                    terms.append(f"{self.coeffs[i, j]:+g} e{i + 1}^e{j + 1}")
        return "Bivector(" + (" ".join(terms) or "0") + ")"


def wedge(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return Bivector(len(a), np.outer(a, b) - np.outer(b, a))


def psi(id, y):
    y1, y2 = float(y[0]), float(y[1])
    if id.which == "ex41":
        return np.array([0.5 * (y1 ** 2 + y2 ** 2), 0.5 * (y1 ** 2 - y2 ** 2),
                         y1 * y2, y1, y2])
    x = y1
    return np.array([x ** j for j in range(1, id.k + 1)] + [y2, x * y2])


def psi_jacobian(id, y):
    """The two columns d psi / d y1 and d psi / d y2."""
    y1, y2 = float(y[0]), float(y[1])
    if id.which == "ex41":
        return (np.array([y1, y1, y2, 1.0, 0.0]),
                np.array([y2, -y2, y1, 0.0, 1.0]))
    k = id.k
    cx = np.array([j * y1 ** (j - 1) for j in range(1, k + 1)] + [0.0, y2])
    cy = np.zeros(k + 2)
    cy[k] = 1.0
    cy[k + 1] = y1
    return cx, cy


def chi(id, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (id.n,):
        raise ValueError(f"chi expects a vector of length {id.n}, got shape {x.shape}")
    b = Bivector(id.n)
    if id.which == "ex41":
        x1, x2, x3, x4, x5 = x
        b.add(1, 2, 2 * x1).add(0, 2, 2 * x2).add(0, 1, -2 * x3)
        b.add(0, 4, x4).add(1, 4, x4).add(2, 3, -x4)
        b.add(0, 3, -x5).add(1, 3, x5).add(2, 4, x5)
        b.add(3, 4, 1.0)
        return b
    k = id.k
    iy1, iy2 = k, k + 1
    b.add(iy1, iy2, -2 * x[iy1])
    for j in range(1, k + 1):
        prev = 1.0 if j == 1 else x[j - 2]
        b.add(j - 1, iy1, 2 * j * prev)
        b.add(j - 1, iy2, 2 * j * x[j - 1])
    return b


def pushforward_wedge(id, y):
    cx, cy = psi_jacobian(id, y)
    return wedge(cx, cy)


def verify_evolution_data(id, grid):
    """Max residual of chi(psi(y)) - factor * psi_*(d1 ^ d2) over the grid.

    Raises ValueError if chi vanishes at a sample, since evolution data
    must be a nonzero bivector along P.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty sample grid")
    worst = 0.0
    for y in grid:
        c = chi(id, psi(id, y))
        if c.norm() == 0:
            raise ValueError(f"chi vanishes at {tuple(y)}")
        worst = max(worst, (c - id.factor * pushforward_wedge(id, y)).norm())
    return worst


def square_grid(lo=-2.0, hi=2.0, n=21):
    ys = np.linspace(lo, hi, n)
    return [(a, b) for a in ys for b in ys]
