"""Finite-difference exterior and covariant calculus on rectangular grids.

All stencils are second order: central differences at interior nodes,
one-sided second-order stencils at boundary nodes.  First and second
derivative stencils are exact on polynomials of degree <= 2, which the
verification suites rely on.  Residual norms are taken over interior
nodes only, so the (different) boundary stencil constants never enter
measured convergence orders.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .fields import OneFormField, ScalarField, SymTensorField, bilinear_sample
from .geometry import inverse_metric_factor

__all__ = [
    "grad_fd",
    "hessian_fd",
    "covariant_hessian",
    "row_closedness",
    "closedness_residual",
    "covariant_divergence",
    "loop_integral",
    "circle_path",
    "diff1_along",
    "diff2_along",
    "diff1_matrix",
    "diff2_matrix",
]


def _d1(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second-order first derivative along one axis."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def _d2(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second derivative; one-sided second order at the ends (n >= 4)."""
    v = np.moveaxis(values, axis, 0)
    n = v.shape[0]
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    if n >= 4:
        out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h**2
        out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h**2
    else:
        # 3 nodes: reuse the centered value, still exact on quadratics
        out[0] = out[1]
        out[-1] = out[1]
    return np.moveaxis(out, 0, axis)


def diff1_along(values, h, axis):
    return _d1(np.asarray(values, dtype=float), h, axis)


def diff2_along(values, h, axis):
    return _d2(np.asarray(values, dtype=float), h, axis)


def diff1_matrix(n: int, h: float) -> sp.csr_matrix:
    """Sparse matrix form of the 1D first-derivative stencil."""
    m = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        m[i, i - 1] = -1 / (2 * h)
        m[i, i + 1] = 1 / (2 * h)
    m[0, 0], m[0, 1], m[0, 2] = -3 / (2 * h), 4 / (2 * h), -1 / (2 * h)
    m[n - 1, n - 1], m[n - 1, n - 2], m[n - 1, n - 3] = 3 / (2 * h), -4 / (2 * h), 1 / (2 * h)
    return m.tocsr()


def diff2_matrix(n: int, h: float) -> sp.csr_matrix:
    """Sparse matrix form of the 1D second-derivative stencil."""
    m = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        m[i, i - 1], m[i, i], m[i, i + 1] = 1 / h**2, -2 / h**2, 1 / h**2
    if n >= 4:
        m[0, 0], m[0, 1], m[0, 2], m[0, 3] = 2 / h**2, -5 / h**2, 4 / h**2, -1 / h**2
        m[n - 1, n - 1], m[n - 1, n - 2] = 2 / h**2, -5 / h**2
        m[n - 1, n - 3], m[n - 1, n - 4] = 4 / h**2, -1 / h**2
    else:
        for row in (0, n - 1):
            m[row, 0], m[row, 1], m[row, 2] = 1 / h**2, -2 / h**2, 1 / h**2
    return m.tocsr()


def grad_fd(f: ScalarField) -> OneFormField:
    """Discrete exterior derivative of a scalar field."""
    g = f.grid
    return OneFormField(g, _d1(f.values, g.hx, 0), _d1(f.values, g.hy, 1))


def hessian_fd(f: ScalarField) -> SymTensorField:
    """Second-derivative tensor; the mixed entry is D_y(D_x f).

    The 1D operators act on different axes and therefore commute, so
    the off-diagonal entry is symmetric by construction.
    """
    g = f.grid
    s11 = _d2(f.values, g.hx, 0)
    s22 = _d2(f.values, g.hy, 1)
    s12 = _d1(_d1(f.values, g.hx, 0), g.hy, 1)
    return SymTensorField(g, s11, s12, s22)


def covariant_hessian(f: ScalarField) -> SymTensorField:
    """Hess f with the Levi-Civita correction: H_ij = d_i d_j f - Gamma^k_ij d_k f.

    Second derivatives from hessian_fd, first derivatives from grad_fd,
    Christoffel symbols analytic.  Flat model reduces to hessian_fd.
    """
    g = f.grid
    hess = hessian_fd(f)
    if not g.model.is_hyperbolic:
        return hess
    du = grad_fd(f)
    inv_y = 1.0 / g.y_nodes
    # Gamma^x_xy = -1/y, Gamma^y_xx = 1/y, Gamma^y_yy = -1/y
    h11 = hess.s11 - inv_y * du.a2
    h12 = hess.s12 + inv_y * du.a1
    h22 = hess.s22 + inv_y * du.a2
    return SymTensorField(g, h11, h12, h22)


def row_closedness(S: SymTensorField) -> tuple[float, float]:
    """Sup-norms of d(row) for both rows of a symmetric tensor.

    Row 1 is the one-form (s11, s12); its exterior derivative is
    d_1 s12 - d_2 s11 (row 2 likewise).  Interior nodes only.
    """
    g = S.grid
    r1 = _d1(S.s12, g.hx, 0) - _d1(S.s11, g.hy, 1)
    r2 = _d1(S.s22, g.hx, 0) - _d1(S.s12, g.hy, 1)
    inner = (slice(1, -1), slice(1, -1))
    return float(np.max(np.abs(r1[inner]))), float(np.max(np.abs(r2[inner])))


def closedness_residual(a: OneFormField) -> float:
    """Sup of cell-loop integrals divided by cell area (discrete curl).

    Trapezoidal integral of the one-form around each interior grid
    plaquette; plaquettes touching boundary nodes are excluded.
    """
    g = a.grid
    a1, a2 = a.a1, a.a2
    # counterclockwise: bottom, right, top (reversed), left (reversed)
    bottom = 0.5 * (a1[:-1, :-1] + a1[1:, :-1]) * g.hx
    right = 0.5 * (a2[1:, :-1] + a2[1:, 1:]) * g.hy
    top = 0.5 * (a1[1:, 1:] + a1[:-1, 1:]) * g.hx
    left = 0.5 * (a2[:-1, 1:] + a2[:-1, :-1]) * g.hy
    curl = (bottom + right - top - left) / g.cell_area
    interior = curl[1:-1, 1:-1] if min(g.nx, g.ny) > 3 else curl
    return float(np.max(np.abs(interior)))


def covariant_divergence(S: SymTensorField) -> OneFormField:
    """(D*S)_j = -g^{ik} (d_i S_kj - Gamma^l_ik S_lj - Gamma^l_ij S_kl).

    On the flat model this is the negative row divergence -d_i S_ij.
    """
    g = S.grid
    d1s11 = _d1(S.s11, g.hx, 0)
    d1s12 = _d1(S.s12, g.hx, 0)
    d2s12 = _d1(S.s12, g.hy, 1)
    d2s22 = _d1(S.s22, g.hy, 1)
    if not g.model.is_hyperbolic:
        return OneFormField(g, -(d1s11 + d2s12), -(d1s12 + d2s22))

    inv_y = 1.0 / g.y_nodes
    ginv = inverse_metric_factor(g.model, g.y_nodes)
    # (nabla_x S)_xx = d_x s11 - 2 Gamma^y_xx s12 = d_x s11 - (2/y) s12
    n_x_xx = d1s11 - 2.0 * inv_y * S.s12
    # (nabla_y S)_yx = d_y s12 - Gamma^y_yy s12 - Gamma^x_yx s12 = d_y s12 + (2/y) s12
    n_y_yx = d2s12 + 2.0 * inv_y * S.s12
    # (nabla_x S)_xy = d_x s12 - Gamma^y_xx s22 - Gamma^x_xy s11 = d_x s12 + (s11 - s22)/y
    n_x_xy = d1s12 + inv_y * (S.s11 - S.s22)
    # (nabla_y S)_yy = d_y s22 - 2 Gamma^y_yy s22 = d_y s22 + (2/y) s22
    n_y_yy = d2s22 + 2.0 * inv_y * S.s22
    b1 = -ginv * (n_x_xx + n_y_yx)
    b2 = -ginv * (n_x_xy + n_y_yy)
    return OneFormField(g, b1, b2)


def loop_integral(a: OneFormField, path) -> float:
    """Trapezoidal line integral of a one-form along a closed polygonal path.

    Path vertices may sit anywhere inside the grid; components are
    sampled bilinearly.  The path must be closed (first point equals
    last point).  Additive under concatenation, odd under reversal.
    """
    pts = np.asarray(path, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("path must be an (m, 2) array of points")
    if not np.allclose(pts[0], pts[-1], rtol=0.0, atol=1e-12):
        raise ValueError("path must be closed (first point == last point)")
    g = a.grid
    v1 = bilinear_sample(g, a.a1, pts[:, 0], pts[:, 1])
    v2 = bilinear_sample(g, a.a2, pts[:, 0], pts[:, 1])
    dx = np.diff(pts[:, 0])
    dy = np.diff(pts[:, 1])
    seg = 0.5 * (v1[:-1] + v1[1:]) * dx + 0.5 * (v2[:-1] + v2[1:]) * dy
    return float(np.sum(seg))


def circle_path(cx: float, cy: float, radius: float, segments: int = 256) -> np.ndarray:
    """Closed inscribed polygon approximating a circle, counterclockwise."""
    if segments < 8:
        raise ValueError("need at least 8 segments")
    t = np.linspace(0.0, 2.0 * np.pi, segments + 1)
    return np.column_stack([cx + radius * np.cos(t), cy + radius * np.sin(t)])
