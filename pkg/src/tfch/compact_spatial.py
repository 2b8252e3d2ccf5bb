"""Fourth-order compact spatial operators on a uniform interval grid.

Grid functions live on x_i = a + i h, i = 0..M, with zero Dirichlet values
pinned at both ends. The compact average A = tridiag(1,10,1)/12 and the
second difference D = tridiag(1,-2,1)/h^2 act on interior points; together
H = A^{-1} D approximates the Laplacian to fourth order. A and D share
eigenvectors (A = I + (h^2/12) D), so -H^{-1} is symmetric positive definite
and induces the negative-order inner product used by the energy estimates.

Tridiagonal solves use the Thomas recurrence without pivoting; both systems
here are strictly diagonally dominant, where that recurrence is stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridFunction",
    "sample",
    "apply_A",
    "apply_A_inv",
    "apply_dxx",
    "apply_H",
    "apply_negH_inv",
    "a_matrix",
    "dxx_matrix",
    "inner",
    "inner_negH",
    "quad_negH",
    "norm_l2",
    "norm_inf",
    "norm_gradH",
    "hadamard_pow",
]


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values on the closed grid of an interval, endpoints included.

    values has length M+1; boundary entries are carried verbatim (the
    operators treat them as pinned). eq is disabled: ndarray equality is
    elementwise and would poison hashing/comparison semantics.
    """

    values: np.ndarray
    h: float
    domain: tuple = (0.0, 1.0)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("values must be a 1-D array of at least 2 nodes")
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.size - 1

    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    def __array__(self, dtype=None):
        return np.asarray(self.values, dtype=dtype)


def sample(fn, M: int, domain: tuple = (0.0, 1.0)) -> GridFunction:
    """Evaluate fn on the M+1 uniform nodes of domain."""
    a, b = float(domain[0]), float(domain[1])
    if M < 2:
        raise ValueError("M must be at least 2")
    x = np.linspace(a, b, M + 1)
    return GridFunction(values=np.asarray(fn(x), dtype=float),
                        h=(b - a) / M, domain=(a, b))


def _interior(u) -> tuple[np.ndarray, float]:
    """Interior values and mesh width of a GridFunction or raw array pair."""
    if isinstance(u, GridFunction):
        return u.values[1:-1], u.h
    raise TypeError("expected a GridFunction")


def _rewrap(u: GridFunction, interior: np.ndarray) -> GridFunction:
    v = np.zeros_like(u.values)
    v[1:-1] = interior
    return GridFunction(values=v, h=u.h, domain=u.domain)


class _TridiagFactor:
    """Thomas factorization of a constant tridiagonal (lower, diag, upper).

    Forward elimination is precomputed once; solves then cost one sweep each
    and accept vector or matrix right-hand sides.
    """

    def __init__(self, lower: float, diag: float, upper: float, m: int):
        piv = np.empty(m)
        mult = np.empty(m)
        piv[0] = diag
        mult[0] = 0.0
        for i in range(1, m):
            mult[i] = lower / piv[i - 1]
            piv[i] = diag - mult[i] * upper
        self._piv = piv
        self._mult = mult
        self._upper = upper
        self.m = m

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        y = np.array(rhs, dtype=float, copy=True)
        mult, piv, up = self._mult, self._piv, self._upper
        for i in range(1, self.m):
            y[i] -= mult[i] * y[i - 1]
        y[-1] /= piv[-1]
        for i in range(self.m - 2, -1, -1):
            y[i] = (y[i] - up * y[i + 1]) / piv[i]
        return y


_factor_cache: dict = {}


def _a_factor(m: int) -> _TridiagFactor:
    key = ("A", m)
    if key not in _factor_cache:
        _factor_cache[key] = _TridiagFactor(1.0 / 12.0, 10.0 / 12.0, 1.0 / 12.0, m)
    return _factor_cache[key]


def _dxx_factor(m: int) -> _TridiagFactor:
    # Solving D w = r is done at unit scale: tridiag(1,-2,1) y = h^2 r.
    key = ("D", m)
    if key not in _factor_cache:
        _factor_cache[key] = _TridiagFactor(1.0, -2.0, 1.0, m)
    return _factor_cache[key]


def apply_A(u: GridFunction) -> GridFunction:
    """Compact average: (u_{i-1} + 10 u_i + u_{i+1})/12 inside, boundary kept."""
    v, _ = _interior(u)
    full = u.values
    out = (full[:-2] + 10.0 * v + full[2:]) / 12.0
    res = np.array(full, copy=True)
    res[1:-1] = out
    return GridFunction(values=res, h=u.h, domain=u.domain)


def apply_A_inv(u: GridFunction) -> GridFunction:
    """Inverse of the compact average on interior values, boundary kept."""
    v, _ = _interior(u)
    res = np.array(u.values, copy=True)
    res[1:-1] = _a_factor(v.size).solve(v)
    return GridFunction(values=res, h=u.h, domain=u.domain)


def apply_dxx(u: GridFunction) -> GridFunction:
    """Second difference (u_{i-1} - 2 u_i + u_{i+1})/h^2, zero at the ends."""
    v, h = _interior(u)
    full = u.values
    out = (full[:-2] - 2.0 * v + full[2:]) / (h * h)
    return _rewrap(u, out)


def apply_H(u: GridFunction) -> GridFunction:
    """Compact Laplacian H u = A^{-1} (D u)."""
    return apply_A_inv(apply_dxx(u))


def apply_negH_inv(u: GridFunction) -> GridFunction:
    """Solve -H w = u, i.e. D w = -(A u), with zero boundary."""
    v, h = _interior(u)
    full = u.values
    av = (full[:-2] + 10.0 * v + full[2:]) / 12.0
    w = _dxx_factor(v.size).solve(-av * h * h)
    return _rewrap(u, w)


def a_matrix(M: int) -> np.ndarray:
    """Dense interior matrix of the compact average ((M-1) x (M-1))."""
    m = M - 1
    A = np.eye(m) * (10.0 / 12.0)
    idx = np.arange(m - 1)
    A[idx, idx + 1] = 1.0 / 12.0
    A[idx + 1, idx] = 1.0 / 12.0
    return A


def dxx_matrix(M: int, h: float) -> np.ndarray:
    """Dense interior matrix of the second difference ((M-1) x (M-1))."""
    m = M - 1
    D = np.eye(m) * (-2.0 / (h * h))
    idx = np.arange(m - 1)
    D[idx, idx + 1] = 1.0 / (h * h)
    D[idx + 1, idx] = 1.0 / (h * h)
    return D


def _check_compatible(u: GridFunction, v: GridFunction) -> None:
    if u.values.size != v.values.size or u.h != v.h:
        raise ValueError("grid functions live on different grids")


def inner(u: GridFunction, v: GridFunction) -> float:
    """Discrete L2 pairing h * sum over interior nodes."""
    _check_compatible(u, v)
    return float(u.h * np.dot(u.interior(), v.interior()))


def norm_l2(u: GridFunction) -> float:
    return float(np.sqrt(max(inner(u, u), 0.0)))


def norm_inf(u: GridFunction) -> float:
    """Max absolute interior value."""
    return float(np.max(np.abs(u.interior()))) if u.M > 1 else 0.0


def norm_gradH(u: GridFunction) -> float:
    """sqrt((-H u, u)): the compact substitute for the H1 seminorm.

    The quadratic form is nonnegative in exact arithmetic; rounding can leave
    a tiny negative residue, clamped to zero before the square root.
    """
    return float(np.sqrt(max(quad_negH(u), 0.0)))


def quad_negH(u: GridFunction) -> float:
    """Quadratic form (-H u, u)."""
    w = apply_H(u)
    return -inner(w, u)


def inner_negH(u: GridFunction, v: GridFunction) -> float:
    """Negative-order pairing (u, (-H)^{-1} v)."""
    _check_compatible(u, v)
    return inner(u, apply_negH_inv(v))


def hadamard_pow(u: GridFunction, p: int) -> GridFunction:
    """Pointwise integer power, boundary included."""
    if not isinstance(p, int) or p < 1:
        raise ValueError("power must be a positive integer")
    return GridFunction(values=u.values ** p, h=u.h, domain=u.domain)
