"""Analytic geometry of the two supported domains.

Flat R^2 and the hyperbolic upper half-plane H^2 with the metric
g = (dx^2 + dy^2) / y^2 (Gauss curvature -1).  Killing fields, the
kernel functions of the operator (Hess + R g), the 2D Hodge star on
one-forms, and the dilation deck transformation used for cylinder
quotients are all hard-coded analytic closures with exact gradients.

Orientation convention for the Hodge star on one-forms:
*dx = -dy, *dy = dx, i.e. (a1, a2) -> (a2, -a1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "GeometryModel",
    "FLAT",
    "HYPERBOLIC",
    "Point2",
    "metric_at",
    "inverse_metric_factor",
    "conformal_factor",
    "christoffel_at",
    "hodge_star_oneform",
    "sharp",
    "killing_eval",
    "kernel_eval",
    "kernel_grad",
    "kernel_second",
    "hamiltonian_vector",
    "deck_transform",
    "deck_jacobian",
    "pullback_scalar",
    "pullback_symtensor",
]


class DomainError(ValueError):
    """A point lies outside the model's chart (e.g. y <= 0 on H^2)."""


FLAT = "flat"
HYPERBOLIC = "hyperbolic"

_KILLING_COUNT = 3


@dataclass(frozen=True)
class GeometryModel:
    """Flat plane or hyperbolic upper half-plane, with constant curvature."""

    kind: str

    def __post_init__(self):
        if self.kind not in (FLAT, HYPERBOLIC):
            raise ValueError(f"unknown geometry kind {self.kind!r}")

    @property
    def curvature(self) -> float:
        return -1.0 if self.kind == HYPERBOLIC else 0.0

    @property
    def is_hyperbolic(self) -> bool:
        return self.kind == HYPERBOLIC

    @staticmethod
    def flat() -> "GeometryModel":
        return GeometryModel(FLAT)

    @staticmethod
    def hyperbolic_half_plane() -> "GeometryModel":
        return GeometryModel(HYPERBOLIC)


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("point components must be finite")

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


def _check_domain(model: GeometryModel, y) -> None:
    if model.is_hyperbolic and np.any(np.asarray(y) <= 0.0):
        raise DomainError("hyperbolic model requires y > 0")


def _check_alpha(alpha: int) -> None:
    if alpha not in (0, 1, 2):
        raise ValueError(f"symmetry index must be 0, 1 or 2, got {alpha}")


def conformal_factor(model: GeometryModel, y):
    """Factor c with g = c * Id; 1 on the flat model, 1/y^2 on H^2."""
    y = np.asarray(y, dtype=float)
    if not model.is_hyperbolic:
        return np.ones_like(y)
    _check_domain(model, y)
    return 1.0 / y**2


def inverse_metric_factor(model: GeometryModel, y):
    """Factor of the inverse metric: 1 (flat) or y^2 (hyperbolic)."""
    y = np.asarray(y, dtype=float)
    if not model.is_hyperbolic:
        return np.ones_like(y)
    _check_domain(model, y)
    return y**2


def metric_at(model: GeometryModel, p: Point2) -> np.ndarray:
    """Metric tensor as a 2x2 symmetric matrix at a point."""
    c = float(conformal_factor(model, p.y))
    return np.array([[c, 0.0], [0.0, c]])


def christoffel_at(model: GeometryModel, p: Point2) -> np.ndarray:
    """Levi-Civita symbols Gamma[k, i, j], symmetric in (i, j).

    Flat: all zero.  Hyperbolic: the symbols of (dx^2+dy^2)/y^2,
    Gamma^x_xy = -1/y, Gamma^y_xx = 1/y, Gamma^y_yy = -1/y.
    """
    gamma = np.zeros((2, 2, 2))
    if not model.is_hyperbolic:
        return gamma
    _check_domain(model, p.y)
    inv_y = 1.0 / p.y
    gamma[0, 0, 1] = gamma[0, 1, 0] = -inv_y
    gamma[1, 0, 0] = inv_y
    gamma[1, 1, 1] = -inv_y
    return gamma


def hodge_star_oneform(a1, a2):
    """2D Hodge star on covector components: (a1, a2) -> (a2, -a1).

    Conformally invariant on one-forms, hence model-independent.
    """
    return np.asarray(a2, dtype=float), -np.asarray(a1, dtype=float)


def sharp(model: GeometryModel, a1, a2, y):
    """Raise a covector to a tangent vector with the inverse metric."""
    f = inverse_metric_factor(model, y)
    return f * np.asarray(a1, dtype=float), f * np.asarray(a2, dtype=float)


def killing_eval(alpha: int, x, y):
    """Components of the three Killing fields of H^2.

    Generators of the isometry group: dilation (x, y), horizontal
    translation (1, 0), and the special generator (x^2 - y^2, 2xy).
    """
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if alpha == 0:
        return x.copy(), y.copy()
    if alpha == 1:
        return np.ones_like(x), np.zeros_like(y)
    return x**2 - y**2, 2.0 * x * y


def kernel_eval(alpha: int, x, y):
    """The kernel functions x/y, 1/y, (x^2 + y^2)/y on H^2."""
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise DomainError("kernel functions require y > 0")
    if alpha == 0:
        return x / y
    if alpha == 1:
        return 1.0 / y
    return (x**2 + y**2) / y


def kernel_grad(alpha: int, x, y):
    """Closed-form differentials (d_x k, d_y k) of the kernel functions."""
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise DomainError("kernel functions require y > 0")
    if alpha == 0:
        return 1.0 / y, -x / y**2
    if alpha == 1:
        return np.zeros_like(x), -1.0 / y**2
    return 2.0 * x / y, (y**2 - x**2) / y**2


def kernel_second(alpha: int, x, y):
    """Closed-form second derivatives (k_xx, k_xy, k_yy)."""
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise DomainError("kernel functions require y > 0")
    if alpha == 0:
        return np.zeros_like(x), -1.0 / y**2, 2.0 * x / y**3
    if alpha == 1:
        z = np.zeros_like(x)
        return z, z.copy(), 2.0 / y**3
    return 2.0 / y, -2.0 * x / y**2, 2.0 * x**2 / y**3


def hamiltonian_vector(alpha: int, x, y):
    """sharp(*(dk_alpha)): the Hamiltonian vector field of k_alpha.

    Equals -killing_eval(alpha, .) identically; kept as the composed
    chain so the identity is testable rather than assumed.
    """
    kx, ky = kernel_grad(alpha, x, y)
    s1, s2 = hodge_star_oneform(kx, ky)
    model = GeometryModel.hyperbolic_half_plane()
    return sharp(model, s1, s2, y)


def deck_transform(lam: float, x, y):
    """The dilation (x, y) -> (lam*x, lam*y) generating the cylinder quotient."""
    if not lam > 1.0:
        raise ValueError("deck transform requires lam > 1")
    return lam * np.asarray(x, dtype=float), lam * np.asarray(y, dtype=float)


def deck_jacobian(lam: float) -> np.ndarray:
    if not lam > 1.0:
        raise ValueError("deck transform requires lam > 1")
    return lam * np.eye(2)


def pullback_scalar(lam: float, f):
    """Pullback f -> f o gamma of a scalar evaluator under the deck map."""
    if not lam > 1.0:
        raise ValueError("deck transform requires lam > 1")

    def pulled(x, y):
        return f(lam * np.asarray(x, dtype=float), lam * np.asarray(y, dtype=float))

    return pulled


def pullback_symtensor(lam: float, f):
    """Pullback of a symmetric 2-tensor evaluator: lam^2 * T o gamma.

    The Jacobian of the deck map is lam * Id, so each component picks
    up a factor lam^2.
    """
    if not lam > 1.0:
        raise ValueError("deck transform requires lam > 1")

    def pulled(x, y):
        xx = lam * np.asarray(x, dtype=float)
        yy = lam * np.asarray(y, dtype=float)
        t11, t12, t22 = f(xx, yy)
        return lam**2 * t11, lam**2 * t12, lam**2 * t22

    return pulled
