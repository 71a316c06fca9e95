"""Energies, Euler-Lagrange residuals, and descent solvers.

Two families: a 1D Lagrangian integral with fixed endpoints, and the
weighted p-Dirichlet energy on 2D grids (weight y^(p-2) on the
hyperbolic model, 1 on the flat model, so that the discrete sum
approximates the invariant energy integral).

The 2D quadrature evaluates the squared gradient per cell as the mean
of the squared edge differences.  The discrete Euler-Lagrange residual
is then the exact gradient of the discrete energy with respect to node
values (scaled by -1/(p * cell area)), and for p = 2 on the flat model
the stationarity system is exactly the five-point Laplacian, which the
independent linear oracle exploits.

Circle-valued maps on an annulus are represented by a continuous part
plus an analytic angular one-form carrying the winding; gradients of
lifted maps are gradients of the stored field plus that closed form,
which is equivalent to jump-corrected stencils across a cut but keeps
every stencil ordinary.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .fields import Grid2, OneFormField, ScalarField
from .geometry import GeometryModel
from .linalg import pcg

__all__ = [
    "Lagrangian1D",
    "PDirichletSpec",
    "AngularOffset",
    "AnnulusInfo",
    "BoundarySpec",
    "SolverConfig",
    "ConvergenceReport",
    "NanIterateError",
    "dirichlet_rectangle",
    "annulus_spec",
    "lift_annulus",
    "energy_total",
    "energy_gradient",
    "el_residual_2d",
    "total_gradient",
    "solve_dirichlet",
    "discrete_action",
    "action_gradient",
    "solve_ode_1d",
    "gradient_check",
    "laplace_five_point_oracle",
    "lifted_field",
]


class NanIterateError(RuntimeError):
    """The descent iterate became non-finite."""


@dataclass(frozen=True)
class Lagrangian1D:
    """L(y, y') with analytic partial derivatives, all vectorized."""

    lagrangian: callable
    dL_dy: callable
    dL_dyp: callable

    def partials_consistent(self, probes, delta=1e-6) -> float:
        """Max relative mismatch of the partials vs centered differences."""
        worst = 0.0
        for y, yp in probes:
            fy = (self.lagrangian(y + delta, yp) - self.lagrangian(y - delta, yp)) / (2 * delta)
            fyp = (self.lagrangian(y, yp + delta) - self.lagrangian(y, yp - delta)) / (2 * delta)
            scale = max(abs(fy), abs(fyp), 1.0)
            worst = max(
                worst,
                abs(fy - self.dL_dy(y, yp)) / scale,
                abs(fyp - self.dL_dyp(y, yp)) / scale,
            )
        return worst


@dataclass(frozen=True)
class PDirichletSpec:
    """Weighted p-Dirichlet energy specification."""

    p: float
    model: GeometryModel = field(default_factory=GeometryModel.flat)
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.p < 2.0:
            raise ValueError("p < 2 is not supported")
        if self.epsilon < 0.0:
            raise ValueError("regularization must be >= 0")

    def weight(self, y):
        """Energy density weight: y^(p-2) hyperbolic, 1 flat."""
        y = np.asarray(y, dtype=float)
        if not self.model.is_hyperbolic:
            return np.ones_like(y)
        return y ** (self.p - 2.0)


@dataclass(frozen=True)
class AngularOffset:
    """w * d(angle) about a center: the closed one-form carried by a
    circle-valued map of winding w."""

    cx: float
    cy: float
    winding: int

    def form_at(self, x, y):
        dx = np.asarray(x, dtype=float) - self.cx
        dy = np.asarray(y, dtype=float) - self.cy
        r2 = dx**2 + dy**2
        return -self.winding * dy / r2, self.winding * dx / r2

    def branch_angle(self, x, y):
        """Angle in (-pi, pi]; the branch cut sits on the negative x ray."""
        return np.arctan2(np.asarray(y, dtype=float) - self.cy,
                          np.asarray(x, dtype=float) - self.cx)


@dataclass(frozen=True)
class AnnulusInfo:
    cx: float
    cy: float
    r_inner: float
    r_outer: float


@dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet data: full value array, free-node mask, optional winding.

    ``values`` at frozen nodes are the boundary condition; at free nodes
    they seed the initial iterate.  Free nodes may not sit on the grid
    perimeter.
    """

    grid: Grid2
    values: np.ndarray
    free: np.ndarray
    offset: AngularOffset | None = None
    annulus: AnnulusInfo | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        free = np.asarray(self.free, dtype=bool)
        if values.shape != self.grid.shape or free.shape != self.grid.shape:
            raise ValueError("boundary arrays must match the grid")
        if not np.all(np.isfinite(values)):
            raise ValueError("boundary data must be finite")
        perim = np.zeros(self.grid.shape, dtype=bool)
        perim[0, :] = perim[-1, :] = True
        perim[:, 0] = perim[:, -1] = True
        if np.any(free & perim):
            raise ValueError("free nodes on the grid perimeter are not allowed")
        if not np.any(free):
            raise ValueError("no free nodes")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "free", free)


def dirichlet_rectangle(grid: Grid2, fn_or_array) -> BoundarySpec:
    """Plain rectangle problem: perimeter frozen, interior free.

    A callable is sampled everywhere, which also provides a smooth
    initial iterate.
    """
    if callable(fn_or_array):
        values = fn_or_array(grid.x_nodes, grid.y_nodes)
    else:
        values = np.asarray(fn_or_array, dtype=float)
    free = np.zeros(grid.shape, dtype=bool)
    free[1:-1, 1:-1] = True
    return BoundarySpec(grid, values, free)


def annulus_spec(grid: Grid2, cx, cy, r_inner, r_outer, inner_value=0.0,
                 outer_value=1.0, winding: int = 0) -> BoundarySpec:
    """Annulus r_inner < r < r_outer on a masked Cartesian grid.

    Nodes inside the inner disc are frozen at inner_value, nodes at or
    beyond the outer radius at outer_value; free nodes start from a
    linear radial ramp.  A nonzero winding attaches the angular offset
    form (boundary values are then offsets relative to the winding part).
    """
    if not (0.0 < r_inner < r_outer):
        raise ValueError("need 0 < r_inner < r_outer")
    r = np.hypot(grid.x_nodes - cx, grid.y_nodes - cy)
    free = (r > r_inner) & (r < r_outer)
    free[0, :] = free[-1, :] = False
    free[:, 0] = free[:, -1] = False
    ramp = (r - r_inner) / (r_outer - r_inner)
    values = inner_value + (outer_value - inner_value) * np.clip(ramp, 0.0, 1.0)
    info = AnnulusInfo(cx, cy, r_inner, r_outer)
    bc = BoundarySpec(grid, values, free, annulus=info)
    if winding != 0:
        bc = lift_annulus(bc, winding)
    return bc


def lift_annulus(bc: BoundarySpec, winding: int) -> BoundarySpec:
    """Attach a 2*pi*winding jump (angular offset form) to an annulus problem."""
    if winding == 0:
        return replace(bc, offset=None)
    if bc.annulus is None:
        raise ValueError("winding requires an annulus-type domain")
    off = AngularOffset(bc.annulus.cx, bc.annulus.cy, int(winding))
    return replace(bc, offset=off)


def lifted_field(u: ScalarField, offset: AngularOffset) -> ScalarField:
    """The discontinuous representative u + w * angle, with the jump on
    the branch cut of atan2 (negative x ray from the center)."""
    theta = offset.branch_angle(u.grid.x_nodes, u.grid.y_nodes)
    return u.with_values(u.values + offset.winding * theta)


@dataclass(frozen=True)
class SolverConfig:
    """Descent parameters.

    ``scaling = "laplacian"`` applies a fixed graph-Laplacian scaling to
    the gradient direction (factorized once); the method stays a
    first-order monotone descent with two-point step estimates, but the
    grid-induced conditioning drops out.  ``"none"`` is the plain
    Barzilai-Borwein iteration.
    """

    tol: float = 1e-6
    max_iter: int = 100_000
    scaling: str = "laplacian"
    step_min: float = 1e-14
    step_max: float = 1e14
    max_backtracks: int = 45
    record_energies: bool = False

    def __post_init__(self):
        if self.tol < 0.0:
            raise ValueError("tol must be >= 0")
        if self.max_iter <= 0:
            raise ValueError("max_iter must be positive")
        if self.scaling not in ("none", "laplacian"):
            raise ValueError("scaling must be 'none' or 'laplacian'")


@dataclass
class ConvergenceReport:
    iterations: int
    residual: float
    energy: float
    converged: bool
    backtracks: int = 0
    energies: list | None = None

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "energy": self.energy,
            "converged": self.converged,
            "backtracks": self.backtracks,
        }


# --- 2D energy core -----------------------------------------------------


def _cell_weight(spec: PDirichletSpec, grid: Grid2) -> np.ndarray:
    yc = 0.5 * (grid.ys[:-1] + grid.ys[1:])
    w = spec.weight(yc)
    return np.broadcast_to(w[None, :], (grid.nx - 1, grid.ny - 1))


def _offset_at_cells(offset: AngularOffset | None, grid: Grid2):
    if offset is None:
        return None
    xc = 0.5 * (grid.xs[:-1] + grid.xs[1:])
    yc = 0.5 * (grid.ys[:-1] + grid.ys[1:])
    return offset.form_at(xc[:, None], yc[None, :])


def _active_cells(free: np.ndarray | None, shape) -> np.ndarray | None:
    """Cells with at least one free corner; None means all cells."""
    if free is None:
        return None
    act = free[:-1, :-1] | free[1:, :-1] | free[:-1, 1:] | free[1:, 1:]
    return act


def _energy_core(spec, grid, values, offset_cells, active, want_grad):
    hx, hy = grid.hx, grid.hy
    dxe = (values[1:, :] - values[:-1, :]) / hx          # (nx-1, ny)
    dye = (values[:, 1:] - values[:, :-1]) / hy          # (nx, ny-1)
    if offset_cells is not None:
        t1, t2 = offset_cells
        gx0 = dxe[:, :-1] + t1
        gx1 = dxe[:, 1:] + t1
        gy0 = dye[:-1, :] + t2
        gy1 = dye[1:, :] + t2
    else:
        gx0, gx1 = dxe[:, :-1], dxe[:, 1:]
        gy0, gy1 = dye[:-1, :], dye[1:, :]
    q = 0.5 * (gx0**2 + gx1**2) + 0.5 * (gy0**2 + gy1**2)
    m2 = q + spec.epsilon**2
    w = _cell_weight(spec, grid)
    area = grid.cell_area
    dens = w * m2 ** (spec.p / 2.0)
    if active is not None:
        dens = np.where(active, dens, 0.0)
    energy = area * float(np.sum(dens))
    if not want_grad:
        return energy, None

    phi = area * w * (spec.p / 2.0) * m2 ** (spec.p / 2.0 - 1.0)
    if active is not None:
        phi = np.where(active, phi, 0.0)
    fx = np.zeros_like(dxe)
    fx[:, :-1] += phi * gx0
    fx[:, 1:] += phi * gx1
    fy = np.zeros_like(dye)
    fy[:-1, :] += phi * gy0
    fy[1:, :] += phi * gy1
    grad = np.zeros_like(values)
    grad[1:, :] += fx / hx
    grad[:-1, :] -= fx / hx
    grad[:, 1:] += fy / hy
    grad[:, :-1] -= fy / hy
    return energy, grad


def energy_total(spec: PDirichletSpec, u: ScalarField,
                 offset: AngularOffset | None = None,
                 free: np.ndarray | None = None) -> float:
    """Discrete weighted p-Dirichlet energy (cell quadrature).

    With ``free`` given, only cells touching a free node are summed,
    which drops constant frozen-region contributions on masked domains.
    """
    e, _ = _energy_core(spec, u.grid, u.values, _offset_at_cells(offset, u.grid),
                        _active_cells(free, u.grid.shape), False)
    return e


def energy_gradient(spec: PDirichletSpec, u: ScalarField,
                    offset: AngularOffset | None = None,
                    free: np.ndarray | None = None) -> np.ndarray:
    """Exact gradient of energy_total with respect to node values."""
    _, g = _energy_core(spec, u.grid, u.values, _offset_at_cells(offset, u.grid),
                        _active_cells(free, u.grid.shape), True)
    return g


def el_residual_2d(spec: PDirichletSpec, u: ScalarField,
                   offset: AngularOffset | None = None,
                   free: np.ndarray | None = None) -> ScalarField:
    """Discrete Euler-Lagrange residual: the flux divergence.

    Equals -1/(p * cell area) times the exact energy gradient, so it
    vanishes exactly at discrete minimizers and reproduces the Laplacian
    for p = 2 on the flat model.
    """
    g = energy_gradient(spec, u, offset, free)
    return u.with_values(-g / (spec.p * u.grid.cell_area))


def total_gradient(u: ScalarField, offset: AngularOffset | None = None) -> OneFormField:
    """Nodal du of a (possibly lifted) solution: grad_fd plus the winding form."""
    from .calculus import grad_fd

    du = grad_fd(u)
    if offset is None:
        return du
    t1, t2 = offset.form_at(u.grid.x_nodes, u.grid.y_nodes)
    return OneFormField(u.grid, du.a1 + t1, du.a2 + t2)


# --- descent loop -------------------------------------------------------


def _bb_descend(x0, free_flat, energy_fn, grad_fn, residual_scale, cfg: SolverConfig,
                m_solve=None):
    """Monotone descent with two-point (secant) step estimates.

    The direction is the (optionally Laplacian-scaled) gradient; step
    sizes alternate the long and short Barzilai-Borwein estimates in the
    scaled metric, and a halving backtrack enforces non-increasing energy
    on every accepted step.
    """
    x = x0.copy()
    e = energy_fn(x)
    if not np.isfinite(e):
        raise NanIterateError("non-finite energy at the initial iterate")
    g = grad_fn(x)
    g[~free_flat] = 0.0
    res = float(np.max(np.abs(g))) * residual_scale
    energies = [e] if cfg.record_energies else None
    backtracks = 0
    it = 0
    if res <= cfg.tol:
        return x, ConvergenceReport(0, res, e, True, 0, energies)

    def scaled(grad):
        if m_solve is None:
            return grad
        z = m_solve(grad)
        z[~free_flat] = 0.0
        return z

    z = scaled(g)
    # probe step: short-variant secant estimate for the initial step size
    znorm = float(np.linalg.norm(z))
    t = 1e-6 * max(1.0, float(np.max(np.abs(x)))) / max(znorm, 1e-300)
    gp = grad_fn(x - t * z)
    gp[~free_flat] = 0.0
    yv0 = gp - g
    denom = float(yv0 @ (scaled(gp) - z))
    alpha = -t * float(z @ yv0) / denom if denom > 0 else 1.0
    alpha = min(max(abs(alpha), cfg.step_min), cfg.step_max)

    while it < cfg.max_iter:
        it += 1
        a = alpha
        accepted = False
        for _ in range(cfg.max_backtracks):
            xt = x - a * z
            et = energy_fn(xt)
            if np.isfinite(et) and et <= e:
                accepted = True
                break
            backtracks += 1
            a *= 0.5
        if not accepted:
            break  # no descent at the smallest step: numerically stationary
        gt = grad_fn(xt)
        gt[~free_flat] = 0.0
        if not np.all(np.isfinite(gt)):
            raise NanIterateError(f"non-finite gradient at iteration {it}")
        zt = scaled(gt)
        yv = gt - g
        sy = -a * float(z @ yv)          # (x_t - x) . (g_t - g)
        if sy > 0.0:
            if it % 2 == 1:
                alpha = a * a * float(z @ g) / sy        # long: <s, M s> / <s, y>
            else:
                alpha = sy / max(float(yv @ (zt - z)), 1e-300)   # short
        else:
            alpha = a * 2.0
        alpha = min(max(alpha, cfg.step_min), cfg.step_max)
        x, g, z, e = xt, gt, zt, et
        if energies is not None:
            energies.append(e)
        res = float(np.max(np.abs(g))) * residual_scale
        if res <= cfg.tol:
            return x, ConvergenceReport(it, res, e, True, backtracks, energies)

    return x, ConvergenceReport(it, res, e, False, backtracks, energies)


def _assemble_five_point(bc: BoundarySpec):
    """Five-point Laplace system restricted to the free nodes.

    Returns (matrix, rhs, order) where order[k] is the (i, j) node of
    unknown k (C order) and rhs collects frozen-neighbor contributions.
    """
    grid = bc.grid
    free = bc.free
    idx = -np.ones(grid.shape, dtype=int)
    order = np.argwhere(free)
    idx[free] = np.arange(len(order))
    cx, cy = 1.0 / grid.hx**2, 1.0 / grid.hy**2
    diag = 2.0 * (cx + cy)
    rows, cols, vals = [], [], []
    b = np.zeros(len(order))
    for k, (i, j) in enumerate(order):
        rows.append(k)
        cols.append(k)
        vals.append(diag)
        for (ii, jj, c) in ((i - 1, j, cx), (i + 1, j, cx), (i, j - 1, cy), (i, j + 1, cy)):
            if free[ii, jj]:
                rows.append(k)
                cols.append(idx[ii, jj])
                vals.append(-c)
            else:
                b[k] += c * bc.values[ii, jj]
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(len(order), len(order)))
    return mat, b, order


def _laplacian_scaling(bc: BoundarySpec):
    from scipy.sparse.linalg import splu

    mat, _, _ = _assemble_five_point(bc)
    lu = splu(mat.tocsc())
    free_flat = np.flatnonzero(bc.free.ravel())

    def m_solve(gflat):
        z = np.zeros_like(gflat)
        z[free_flat] = lu.solve(gflat[free_flat])
        return z

    return m_solve


def solve_dirichlet(spec: PDirichletSpec, bc: BoundarySpec,
                    cfg: SolverConfig = SolverConfig()):
    """Minimize the discrete p-Dirichlet energy over the free nodes.

    Returns (solution, report); report.converged is False when the
    residual target was not met (no exception).  For winding problems
    the returned field is the continuous part; combine with bc.offset
    via total_gradient / lifted_field.
    """
    grid = bc.grid
    offset_cells = _offset_at_cells(bc.offset, grid)
    active = _active_cells(bc.free, grid.shape)
    free_flat = bc.free.ravel()

    def energy_fn(flat):
        e, _ = _energy_core(spec, grid, flat.reshape(grid.shape), offset_cells, active, False)
        return e

    def grad_fn(flat):
        _, g = _energy_core(spec, grid, flat.reshape(grid.shape), offset_cells, active, True)
        return g.ravel()

    m_solve = _laplacian_scaling(bc) if cfg.scaling == "laplacian" else None
    scale = 1.0 / (spec.p * grid.cell_area)
    x, report = _bb_descend(bc.values.ravel(), free_flat, energy_fn, grad_fn, scale, cfg,
                            m_solve=m_solve)
    u = ScalarField(grid, x.reshape(grid.shape))
    return u, report


# --- 1D Lagrangian problems ---------------------------------------------


def discrete_action(lag: Lagrangian1D, traj: np.ndarray, h: float) -> float:
    """Sum of L(u_i, (u_{i+1}-u_i)/h) * h over the segments."""
    u = np.asarray(traj, dtype=float)
    d = (u[1:] - u[:-1]) / h
    return h * float(np.sum(lag.lagrangian(u[:-1], d)))


def action_gradient(lag: Lagrangian1D, traj: np.ndarray, h: float) -> np.ndarray:
    u = np.asarray(traj, dtype=float)
    d = (u[1:] - u[:-1]) / h
    ly = lag.dL_dy(u[:-1], d)
    lyp = lag.dL_dyp(u[:-1], d)
    grad = np.zeros_like(u)
    grad[:-1] += h * ly - lyp
    grad[1:] += lyp
    return grad


def solve_ode_1d(lag: Lagrangian1D, y0: float, y1: float, T: float, n: int,
                 cfg: SolverConfig = SolverConfig()):
    """Minimize the discrete action with fixed endpoints.

    Starts from the straight line between the endpoints; same descent
    contract as solve_dirichlet.  Returns (trajectory of n+1 values,
    report).
    """
    if n < 8:
        raise ValueError("need at least 8 segments")
    h = T / n
    x0 = np.linspace(y0, y1, n + 1)
    free = np.ones(n + 1, dtype=bool)
    free[0] = free[-1] = False

    def energy_fn(u):
        return discrete_action(lag, u, h)

    def grad_fn(u):
        return action_gradient(lag, u, h)

    m_solve = None
    if cfg.scaling == "laplacian":
        from scipy.sparse.linalg import splu

        path = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n - 1, n - 1)) / h
        lu = splu(path.tocsc())

        def m_solve(g):
            z = np.zeros_like(g)
            z[1:-1] = lu.solve(g[1:-1])
            return z

    traj, report = _bb_descend(x0, free, energy_fn, grad_fn, 1.0 / h, cfg, m_solve=m_solve)
    return traj, report


# --- verification helpers -----------------------------------------------


def gradient_check(spec: PDirichletSpec, u: ScalarField, nodes,
                   offset: AngularOffset | None = None, delta: float = 1e-5) -> float:
    """Max relative error of the analytic energy gradient against
    centered finite differences in single node values."""
    grid = u.grid
    offset_cells = _offset_at_cells(offset, grid)
    g = energy_gradient(spec, u, offset)
    worst = 0.0
    vals = u.values.copy()
    for (i, j) in nodes:
        orig = vals[i, j]
        vals[i, j] = orig + delta
        ep, _ = _energy_core(spec, grid, vals, offset_cells, None, False)
        vals[i, j] = orig - delta
        em, _ = _energy_core(spec, grid, vals, offset_cells, None, False)
        vals[i, j] = orig
        fd = (ep - em) / (2 * delta)
        scale = max(abs(g[i, j]), abs(fd), 1e-30)
        worst = max(worst, abs(fd - g[i, j]) / scale)
    return worst


def laplace_five_point_oracle(bc: BoundarySpec, rtol: float = 1e-12):
    """Independent p=2 oracle: direct conjugate-gradient solve of the
    five-point Laplace system on the free nodes."""
    a_mat, b, order = _assemble_five_point(bc)
    result = pcg(lambda v: a_mat @ v, b, rtol=rtol, max_iter=20 * len(b))
    out = bc.values.copy()
    out[tuple(order.T)] = result.x
    return ScalarField(bc.grid, out)
