"""Forward solvers for the time-fractional diffusion problem

    d_t^alpha u = u_xx + q(x) u          in (0,1) x (0,T),
    u_x(0,t) - h u(0,t) = 0,
    u_x(1,t) + H u(1,t) = eta(t),
    u(x,0) = 0,

by (a) the eigenfunction series

    u(x,t) = sum_n (int_0^t s^{a-1} E_{a,a}(-lam_n s^a) eta(t-s) ds) e_n(x) e_n(1)

with the convolution integrated exactly against the piecewise-linear drive
(differences of the relaxation antiderivative, no singular quadrature), and
(b) an independent L1 finite-difference scheme (implicit Caputo time stepping,
central differences, Robin ghost nodes) used as a cross-validation oracle.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import polygamma

from .errors import (
    DomainError,
    IncompatibleGrids,
    LinearSolveFailure,
    TruncationTooCoarse,
)
from .mittleff import l1_weights, relax_antiderivative, relax_primitive
from .sl_core import EigenSystem, PotentialSpec, RobinPair, eval_modes_at


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass
class DriveSignal:
    """Boundary drive eta on a time grid; eta(0) = 0 is enforced."""

    t_grid: np.ndarray
    values: np.ndarray
    description: str = ""

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.t_grid.size != self.values.size:
            raise DomainError("t_grid and values must have the same length")
        if self.t_grid[0] != 0.0 or np.any(np.diff(self.t_grid) <= 0):
            raise DomainError("t_grid must increase from 0")
        if self.values[0] != 0.0:
            raise DomainError("drive must start at zero (eta(0) = 0)")

    @classmethod
    def from_callable(cls, fn, T: float, nt: int, description: str = "") -> "DriveSignal":
        t = np.linspace(0.0, T, nt + 1)
        vals = np.asarray([fn(ti) for ti in t], dtype=float)
        vals[0] = 0.0
        return cls(t, vals, description)

    def __call__(self, t):
        return np.interp(t, self.t_grid, self.values)

    @property
    def T(self) -> float:
        return float(self.t_grid[-1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,eta\n")
        for t, v in zip(self.t_grid, self.values):
            buf.write(f"{t:.12g},{v:.12g}\n")
        return buf.getvalue()


@dataclass
class SpaceTimeField:
    """u(x, t) samples; values[i, j] = u(x_grid[i], t_grid[j])."""

    x_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray
    method: str  # "spectral" | "l1fd"
    n_modes_used: int | None = None
    resolution: tuple[int, int] | None = None
    tail_bound: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise DomainError("field values must be finite")

    def at_x(self, x: float) -> np.ndarray:
        """Time series at spatial location x (linear interpolation in x)."""
        out = np.empty_like(self.t_grid)
        for j in range(self.t_grid.size):
            out[j] = np.interp(x, self.x_grid, self.values[:, j])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,t,u,method\n")
        for i, x in enumerate(self.x_grid):
            for j, t in enumerate(self.t_grid):
                buf.write(f"{x:.12g},{t:.12g},{self.values[i, j]:.15g},{self.method}\n")
        return buf.getvalue()


@dataclass
class KernelTrace:
    """K(x, t) on a time grid with the reported mode-truncation tail bound."""

    x: float
    t_grid: np.ndarray
    values: np.ndarray
    n_modes: int
    tail_bound: float


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _lam_nonneg(lam: float) -> float:
    """Clamp roundoff-level negatives of the degenerate lam = 0 mode."""
    if lam < -1e-9:
        raise DomainError(f"negative eigenvalue {lam:.3e}: relaxation undefined")
    return max(lam, 0.0)


def _mode_tail_bound(es: EigenSystem, n_used: int, drive_sup: float) -> float:
    """Bound sum_{n >= n_used} |e_n e_n(1)| sup_t |conv_n| <= 2 ||eta||_inf / lam_n.

    For admissible data lam_n >= n^2 pi^2 - shift with shift = max(q, 0); the
    trigamma function gives the exact tail sum of 1/n^2.
    """
    shift = max(float(es.q.samples.max()), 0.0)
    lam_floor = n_used ** 2 * np.pi ** 2 - shift
    if lam_floor <= 0:
        return np.inf
    # sum_{n >= n_used} 1/(n^2 pi^2 - shift) <= trigamma(n_used)/pi^2 * margin
    margin = 1.0 / (1.0 - shift / (n_used ** 2 * np.pi ** 2))
    tail = float(polygamma(1, n_used)) / np.pi ** 2 * margin
    return 2.0 * drive_sup * tail


def _modes_at_points(es: EigenSystem, xs: np.ndarray, n_used: int) -> np.ndarray:
    """e_n(x) for n < n_used at each requested x (grid column when aligned)."""
    out = np.empty((n_used, xs.size))
    N = es.grid_size
    for i, x in enumerate(xs):
        idx = x * N
        if abs(idx - round(idx)) < 1e-9:
            out[:, i] = es.efuncs[:n_used, int(round(idx))]
        else:
            vals, _ = eval_modes_at(es, float(x))
            out[:, i] = vals[:n_used]
    return out


def _exact_convolutions(es, alpha, eta, t_grid, n_used):
    """conv_n(t) = int_0^t s^{a-1}E_{a,a}(-lam_n s^a) eta(t-s) ds for each mode.

    Exact against the piecewise-linear interpolant of eta: with S_n the
    relaxation antiderivative and m_j the drive slopes,
    conv_n(t) = sum_j m_j [S_n((t - tau_j)+) - S_n((t - tau_{j+1})+)].
    Returns an array (n_used, len(t_grid)).
    """
    tau = eta.t_grid
    slopes = np.diff(eta.values) / np.diff(tau)
    t_grid = np.asarray(t_grid, dtype=float)
    out = np.empty((n_used, t_grid.size))

    dt_eta = np.diff(tau)
    uniform = (np.allclose(dt_eta, dt_eta[0], rtol=1e-12, atol=1e-15)
               and t_grid.size > 1)
    if uniform:
        step = dt_eta[0]
        ratio = t_grid / step
        uniform &= bool(np.all(np.abs(ratio - np.round(ratio)) < 1e-9))
    if uniform:
        # Toeplitz structure: S only needed at integer multiples of the step
        step = dt_eta[0]
        kmax = int(round(t_grid[-1] / step))
        grid_k = np.arange(kmax + 1) * step
        idx_t = np.round(t_grid / step).astype(int)
        for n in range(n_used):
            S = relax_antiderivative(alpha, _lam_nonneg(float(es.lambdas[n])), grid_k)
            dS = np.empty(kmax + 1)
            dS[0] = 0.0
            dS[1:] = S[1:] - S[:-1]
            full = np.convolve(slopes[:kmax], dS)[:kmax + 1]
            out[n] = full[idx_t]
        return out

    offs_lo = np.maximum(t_grid[:, None] - tau[None, 1:], 0.0)
    offs_hi = np.maximum(t_grid[:, None] - tau[None, :-1], 0.0)
    for n in range(n_used):
        lam = _lam_nonneg(float(es.lambdas[n]))
        S_hi = relax_antiderivative(alpha, lam, offs_hi)
        S_lo = relax_antiderivative(alpha, lam, offs_lo)
        out[n] = ((S_hi - S_lo) * slopes[None, :]).sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def solve_spectral(es: EigenSystem, alpha: float, eta: DriveSignal,
                   x_points, t_grid, n_modes: int | None = None,
                   trunc_tol: float = 5e-3) -> SpaceTimeField:
    """Eigenfunction-series solution at the requested space-time points.

    Modes are summed in ascending order; raises TruncationTooCoarse when the
    tail bound exceeds trunc_tol * sup|eta| and IncompatibleGrids when t_grid
    leaves the drive support.
    """
    xs = np.asarray(x_points, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] < 0 or t_grid[-1] > eta.T * (1 + 1e-12) + 1e-15:
        raise IncompatibleGrids("t_grid must lie inside the drive support")
    n_used = es.n_max + 1 if n_modes is None else int(n_modes)
    if n_used > es.n_max + 1:
        raise DomainError("n_modes exceeds the computed eigensystem")
    drive_sup = float(np.abs(eta.values).max())
    tail = _mode_tail_bound(es, n_used, drive_sup)
    if drive_sup > 0 and tail > trunc_tol * drive_sup:
        raise TruncationTooCoarse(
            f"tail bound {tail:.3e} exceeds {trunc_tol:.1e} * sup|eta|; "
            "increase n_max")
    conv = _exact_convolutions(es, alpha, eta, t_grid, n_used)
    emat = _modes_at_points(es, xs, n_used)
    weights = es.efuncs[:n_used, -1]
    u = np.einsum("ni,nj->ij", emat * weights[:, None], conv)
    return SpaceTimeField(x_grid=xs, t_grid=t_grid, values=u,
                          method="spectral", n_modes_used=n_used,
                          tail_bound=tail)


def kernel_K(es: EigenSystem, alpha: float, x: float, t_grid,
             n_modes: int) -> KernelTrace:
    """K(x,t) = sum_n e_n(x) e_n(1) int_0^t s^{a-1} E_{a,a}(-lam_n s^a) ds.

    The lam = 0 mode contributes t^a/Gamma(a+1) through the primitive's
    zero-rate branch; the tail bound follows the 1/lam_n decay.
    """
    if n_modes > es.n_max + 1:
        raise DomainError("n_modes exceeds the computed eigensystem")
    t_grid = np.asarray(t_grid, dtype=float)
    e_x = _modes_at_points(es, np.asarray([x], dtype=float), n_modes)[:, 0]
    e_1 = es.efuncs[:n_modes, -1]
    vals = np.zeros_like(t_grid)
    for n in range(n_modes):
        vals += e_x[n] * e_1[n] * relax_primitive(alpha, _lam_nonneg(float(es.lambdas[n])), t_grid)
    tail = _mode_tail_bound(es, n_modes, 1.0)
    return KernelTrace(x=float(x), t_grid=t_grid, values=vals,
                       n_modes=n_modes, tail_bound=tail)


def duhamel_residual(field: SpaceTimeField, kernel: KernelTrace,
                     eta: DriveSignal) -> float:
    """max_t |int_0^t u(x,s) ds - (K(x,.) * eta)(t)| on the shared time grid.

    Left side by cumulative trapezoid of the field row at kernel.x; right side
    by exact product integration of the two piecewise-linear interpolants.
    """
    if field.method != "spectral":
        raise IncompatibleGrids("field must come from the spectral solver")
    if field.t_grid.size != kernel.t_grid.size or \
            not np.allclose(field.t_grid, kernel.t_grid, rtol=0, atol=1e-12):
        raise IncompatibleGrids("field and kernel time grids differ")
    ix = np.flatnonzero(np.abs(field.x_grid - kernel.x) < 1e-12)
    if ix.size == 0:
        raise IncompatibleGrids("kernel.x is not a field grid point")
    u = field.values[ix[0]]
    t = field.t_grid
    dt = np.diff(t)
    lhs = np.concatenate([[0.0], np.cumsum(0.5 * dt * (u[1:] + u[:-1]))])

    K = kernel.values
    resid = 0.0
    for i in range(t.size):
        if i == 0:
            rhs = 0.0
        else:
            ta = t[i] - t[:i]
            tb = t[i] - t[1:i + 1]
            ea = eta(ta)
            eb = eta(tb)
            ka = K[:i]
            kb = K[1:i + 1]
            cells = dt[:i] / 6.0 * (2 * ka * ea + ka * eb + kb * ea + 2 * kb * eb)
            rhs = cells.sum()
        resid = max(resid, abs(lhs[i] - rhs))
    return float(resid)


def solve_l1_fd(q: PotentialSpec, robin: RobinPair, alpha: float,
                eta: DriveSignal, nx: int, nt: int) -> SpaceTimeField:
    """Implicit L1/Caputo finite-difference solution on an (nx+1) x (nt+1) grid.

    Second-order central differences in space with Robin conditions through
    ghost nodes (u'(0) = h u(0), u'(1) = eta - H u(1)); at alpha = 1 the
    scheme reduces to backward Euler.
    """
    if nx < 32 or nt < 32:
        raise DomainError("nx and nt must be at least 32")
    if not (0.0 < alpha <= 1.0):
        raise DomainError("alpha must lie in (0, 1]")
    T = eta.T
    tau = T / nt
    t_nodes = np.linspace(0.0, T, nt + 1)
    x_nodes = np.linspace(0.0, 1.0, nx + 1)
    dx = 1.0 / nx
    qv = q(x_nodes)
    eta_nodes = eta(t_nodes)
    b = l1_weights(alpha, tau, nt).weights
    c_hist = b[:-1] - b[1:]  # c_hist[j] = b_j - b_{j+1} > 0

    # banded (b0 I - A): A u = u_xx + q u with ghost-node Robin rows
    ab = np.zeros((3, nx + 1))
    ab[0, 1:] = -1.0 / dx ** 2                      # superdiagonal
    ab[2, :-1] = -1.0 / dx ** 2                     # subdiagonal
    ab[1, :] = b[0] + 2.0 / dx ** 2 - qv            # diagonal
    ab[0, 1] = -2.0 / dx ** 2
    ab[1, 0] = b[0] + 2.0 * (1.0 + dx * robin.h) / dx ** 2 - qv[0]
    ab[2, nx - 1] = -2.0 / dx ** 2
    ab[1, nx] = b[0] + 2.0 * (1.0 + dx * robin.H) / dx ** 2 - qv[nx]

    U = np.zeros((nt + 1, nx + 1))
    for m in range(1, nt + 1):
        rhs = np.zeros(nx + 1)
        if m > 1:
            # history sum_{k=1}^{m-1} (b_{m-k-1} - b_{m-k}) u^k
            rhs += U[1:m].T @ c_hist[m - 2::-1]
        rhs[nx] += 2.0 * eta_nodes[m] / dx
        try:
            U[m] = solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise LinearSolveFailure(str(exc)) from exc
        if not np.all(np.isfinite(U[m])):
            raise LinearSolveFailure(f"non-finite state at step {m}")
    return SpaceTimeField(x_grid=x_nodes, t_grid=t_nodes, values=U.T.copy(),
                          method="l1fd", resolution=(nx, nt))
