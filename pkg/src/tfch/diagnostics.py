"""Energy, mass, and kernel-structure diagnostics.

The discrete free energy uses the compact negative Laplacian for its gradient
part; the modified energy augments it with a weighted history of negative-order
norms of increments, built from the auxiliary J kernels. The dissipation
estimate states exactly that the modified energy never increases, so these
routines are both the experiment observables and the acceptance instruments.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve as dense_solve
from scipy.special import gamma

from .caputo_l2 import kernel_row_J
from .compact_spatial import GridFunction, a_matrix, dxx_matrix, quad_negH
from .temporal_mesh import TemporalMesh

__all__ = [
    "EnergySeries",
    "mass",
    "free_energy",
    "G_functional",
    "modified_energy",
    "energy_series",
    "dgs_identity_check",
    "KernelPropertyReport",
    "kernel_property_check",
    "convergence_order",
    "write_energy_csv",
    "write_mass_csv",
    "write_convergence_csv",
]


def mass(u: GridFunction) -> float:
    """Trapezoid integral over the whole interval, boundary halves included."""
    v = u.values
    return float(u.h * (0.5 * v[0] + v[1:-1].sum() + 0.5 * v[-1]))


def free_energy(u: GridFunction, epsilon: float) -> float:
    """(eps^2/2) (-H u, u) + (1/4) ||u.^2 - 1||^2 with the interior product."""
    w = u.interior()
    double_well = 0.25 * u.h * np.sum((w * w - 1.0) ** 2)
    return float(0.5 * epsilon ** 2 * quad_negH(u) + double_well)


def _g_weights(n: int, mesh: TemporalMesh, alpha: float):
    """Leading weight and J row entering the history functional at level n.

    rho_{N+1} is taken as 1: the functional at the final level is evaluated
    as if one more equal step followed.
    """
    J = kernel_row_J(n, mesh, alpha)
    rho_next = mesh.ratios[n] if n < mesh.N else 1.0
    tau_n = mesh.steps[n - 1]
    lead = alpha * rho_next ** (2.0 - 0.5 * alpha) \
        / (2.0 * (1.0 + rho_next) * tau_n ** alpha * gamma(3.0 - alpha))
    return lead, J


def G_functional(history, mesh: TemporalMesh, alpha: float):
    """History quadratic functional at level n = len(history) - 1:

        lead_n (w^n - w^{n-1})^2
        + 1/2 sum_{j=1}^{n-1} (J_{n-j-1} - J_{n-j}) (w^n - w^j)^2
        + 1/2 J_{n-1} (w^n - w^0)^2,

    evaluated elementwise, so scalar histories give a scalar and grid-function
    histories give elementwise values.
    """
    W = np.stack([np.asarray(w, dtype=float) for w in history])
    n = len(W) - 1
    if n < 1:
        raise ValueError("history must contain at least two levels")
    lead, J = _g_weights(n, mesh, alpha)
    out = lead * (W[n] - W[n - 1]) ** 2
    out = out + 0.5 * J[0] * (W[n] - W[0]) ** 2
    for j in range(1, n):
        out = out + 0.5 * (J[j] - J[j - 1]) * (W[n] - W[j]) ** 2
    return float(out) if np.ndim(out) == 0 else out


def _neg_h_inverse_matrix(M: int, h: float) -> np.ndarray:
    """Dense interior matrix of (-H)^{-1} = -D^{-1} A (symmetric)."""
    return -dense_solve(dxx_matrix(M, h), a_matrix(M))


def modified_energy(history) -> np.ndarray:
    """Dissipated Lyapunov sequence of a finished run, one value per level.

    Level n >= 1 value:

        E^n + (1/kappa) [ lead_n |u^n - u^{n-1}|^2
                          + 1/2 sum_{j=1}^{n-1} (J_{n-j-1} - J_{n-j}) |u^n - u^j|^2
                          + 1/2 J_{n-1} |u^n - u^0|^2 ],

    every |.|^2 the negative-order norm (v, (-H)^{-1} v). The level-0 entry
    is nan: the history functional needs at least one increment.
    """
    return energy_series(history).modified_energy


@dataclass(frozen=True, eq=False)
class EnergySeries:
    """Per-level observables of a run: levels, times, E, modified E, mass."""

    levels: np.ndarray
    times: np.ndarray
    free_energy: np.ndarray
    modified_energy: np.ndarray
    mass: np.ndarray


def energy_series(history) -> EnergySeries:
    """Free energy, modified energy, and mass at every level of a run."""
    cfg = history.config
    mesh = cfg.mesh
    N = mesh.N
    S = history.interior_matrix()
    h = cfg.h
    neg_h_inv = _neg_h_inverse_matrix(cfg.M, h)

    free = np.array([free_energy(u, cfg.epsilon) for u in history.states])
    masses = np.array([mass(u) for u in history.states])

    modified = np.empty(N + 1)
    modified[0] = np.nan
    for n in range(1, N + 1):
        lead, J = _g_weights(n, mesh, cfg.alpha)
        X = S[n] - S[:n]                       # row j holds u^n - u^j
        Q = h * np.einsum("ij,ij->i", X, X @ neg_h_inv)
        Q[Q < 0.0] = 0.0
        hist_part = lead * Q[n - 1] + 0.5 * J[0] * Q[0]
        if n > 1:
            hist_part += 0.5 * np.dot(np.diff(J[:n]), Q[1:n])
        modified[n] = free[n] + hist_part / cfg.kappa
    return EnergySeries(
        levels=np.arange(N + 1),
        times=mesh.nodes.copy(),
        free_energy=free,
        modified_energy=modified,
        mass=masses,
    )


def dgs_identity_check(chi_rows, sigma: float, phis) -> float:
    """Max absolute residual of the summation-by-parts identity.

    chi_rows[m-1] is the level-m kernel row (length m, interval order) for
    m = 1..n; phis are the n increments. With a_s = chi_s except
    a_0 = (2 - sigma) chi_0, the identity at each level m is

        2 phi_m sum_j chi_{m-j} phi_j
            = Y_m - Y_{m-1} + sigma chi_0 phi_m^2 + YR_m,

    where Y and YR are the weighted squares of suffix sums written in the
    docstring of kernel_property_check. It is an algebraic rearrangement, so
    the residual is rounding noise for any row data; the positive-definiteness
    corollary additionally needs every Y/YR weight nonnegative, and a
    RuntimeWarning reports which weight family fails that (the residual is
    still evaluated and returned).
    """
    phis = np.asarray(phis, dtype=float)
    n = phis.size
    if len(chi_rows) < n:
        raise ValueError("need a kernel row for every level")
    a_rows = []
    for m in range(1, n + 1):
        row = np.asarray(chi_rows[m - 1], dtype=float)
        if row.size != m:
            raise ValueError("level-%d row must have length %d" % (m, m))
        a = row.copy()
        a[m - 1] = (2.0 - sigma) * row[m - 1]
        a_rows.append(a)

    bad = set()
    if sigma < 0.0:
        bad.add("sigma")
    worst = 0.0
    prev_Y = 0.0
    for m in range(1, n + 1):
        a = a_rows[m - 1]
        chi = np.asarray(chi_rows[m - 1], dtype=float)
        # suffix sums T[j] = sum_{l=j+1}^{m} phi_l, j = 0..m-1
        T = np.cumsum(phis[:m][::-1])[::-1]
        coeff = np.diff(a)                     # Y weight for j = 1..m-1
        if (coeff < 0.0).any() or a[0] < 0.0:
            bad.add("Y")
        Y = float(np.dot(coeff, T[1:] ** 2) + a[0] * T[0] ** 2)

        YR = 0.0
        if m >= 2:
            a_prev = a_rows[m - 2]
            Tp = np.cumsum(phis[: m - 1][::-1])[::-1]
            last = a_prev[0] - a[0]
            if last < 0.0:
                bad.add("YR")
            YR = last * Tp[0] ** 2
            if m >= 3:
                rc = np.diff(a_prev) - np.diff(a[: m - 1])
                if (rc < 0.0).any():
                    bad.add("YR")
                YR += float(np.dot(rc, Tp[1:] ** 2))

        lhs = 2.0 * phis[m - 1] * float(np.dot(chi, phis[:m]))
        rhs = Y - prev_Y + sigma * chi[m - 1] * phis[m - 1] ** 2 + YR
        worst = max(worst, abs(lhs - rhs))
        prev_Y = Y
    if bad:
        warnings.warn(
            "nonnegativity precondition violated for: %s; identity residual "
            "is still exact but positive definiteness is not implied"
            % ", ".join(sorted(bad)), RuntimeWarning, stacklevel=2)
    return worst


@dataclass(frozen=True)
class KernelPropertyReport:
    """Outcome of the three structural J-kernel checks up to some level.

    Margins are the most negative slack seen, normalized by the largest row
    entry at the offending level (0.0 when every comparison held with room).
    """

    n_max: int
    monotonicity_violations: int
    convexity_violations: int
    dominance_violations: int
    monotonicity_margin: float
    convexity_margin: float
    dominance_margin: float

    @property
    def clean(self) -> bool:
        return (self.monotonicity_violations == 0
                and self.convexity_violations == 0
                and self.dominance_violations == 0)


def kernel_property_check(mesh: TemporalMesh, alpha: float,
                          n_max: int = None) -> KernelPropertyReport:
    """Check monotonicity, convexity, and level dominance of the J rows.

    In interval order (index k, subscripts reversed) the three claims are,
    for rows J = J^{(n)} and Jp = J^{(n-1)}:

        monotonicity:  J[k] >= J[k-1]                 k = 1..n-1
        convexity:     Jp[k]-Jp[k-1] >= J[k]-J[k-1]   k = 1..n-2
        dominance:     Jp[k-1] >= J[k-1]              k = 1..n-1

    These hold whenever every step ratio is in [1, rho_star(alpha)] and are
    the backbone of the dissipation proof.
    """
    if n_max is None:
        n_max = mesh.N
    if not 1 <= n_max <= mesh.N:
        raise ValueError("n_max outside 1..%d" % mesh.N)
    counts = {"mono": 0, "conv": 0, "dom": 0}
    margins = {"mono": 0.0, "conv": 0.0, "dom": 0.0}

    def _tally(kind: str, diffs: np.ndarray, scale: float) -> None:
        neg = diffs < 0.0
        counts[kind] += int(neg.sum())
        if neg.any():
            margins[kind] = min(margins[kind], float(diffs.min()) / scale)

    prev = None
    for n in range(1, n_max + 1):
        J = kernel_row_J(n, mesh, alpha)
        scale = float(np.max(np.abs(J)))
        if n >= 2:
            _tally("mono", np.diff(J), scale)
            _tally("dom", prev - J[: n - 1], scale)
            if n >= 3:
                _tally("conv", np.diff(prev) - np.diff(J[: n - 1]), scale)
        prev = J
    return KernelPropertyReport(
        n_max=n_max,
        monotonicity_violations=counts["mono"],
        convexity_violations=counts["conv"],
        dominance_violations=counts["dom"],
        monotonicity_margin=margins["mono"],
        convexity_margin=margins["conv"],
        dominance_margin=margins["dom"],
    )


def convergence_order(errors, Ns=None) -> np.ndarray:
    """Observed orders between successive errors.

    With Ns given, order_i = log(e_i/e_{i+1}) / log(N_{i+1}/N_i); without,
    successive resolutions are assumed to double.
    """
    e = np.asarray(errors, dtype=float)
    if (e <= 0.0).any():
        raise ValueError("errors must be positive to take logarithms")
    if e.size < 2:
        return np.empty(0)
    ratios = np.log(e[:-1] / e[1:])
    if Ns is None:
        return ratios / np.log(2.0)
    Ns = np.asarray(Ns, dtype=float)
    if Ns.shape != e.shape:
        raise ValueError("Ns must match errors in length")
    return ratios / np.log(Ns[1:] / Ns[:-1])


def write_energy_csv(series: EnergySeries, target) -> None:
    """Emit `n,t_n,E,E_modified` (modified blank at level 0)."""
    from ._fmt import fmt, open_out

    f, close = open_out(target)
    try:
        f.write("n,t_n,E,E_modified\n")
        for n in series.levels:
            em = series.modified_energy[n]
            f.write("%d,%s,%s,%s\n" % (
                n, fmt(series.times[n]), fmt(series.free_energy[n]),
                "" if np.isnan(em) else fmt(em)))
    finally:
        if close:
            f.close()


def write_mass_csv(series: EnergySeries, target) -> None:
    """Emit `n,t_n,mass`."""
    from ._fmt import fmt, open_out

    f, close = open_out(target)
    try:
        f.write("n,t_n,mass\n")
        for n in series.levels:
            f.write("%d,%s,%s\n" % (n, fmt(series.times[n]), fmt(series.mass[n])))
    finally:
        if close:
            f.close()


def write_convergence_csv(Ns, errors, orders, target) -> None:
    """Emit `N,error,order` (order blank on the first row)."""
    from ._fmt import fmt, open_out

    f, close = open_out(target)
    try:
        f.write("N,error,order\n")
        for i, (n_val, err) in enumerate(zip(Ns, errors)):
            order = "" if i == 0 else fmt(orders[i - 1])
            f.write("%d,%s,%s\n" % (n_val, fmt(err), order))
    finally:
        if close:
            f.close()
