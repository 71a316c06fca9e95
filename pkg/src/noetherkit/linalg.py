"""Conjugate-direction solver shared by the reconstruction and oracle paths."""

from __future__ import annotations

import numpy as np

__all__ = ["pcg", "PcgResult", "LinearSolveError"]


class LinearSolveError(RuntimeError):
    """Iterative linear solve failed to reach the requested residual."""


class PcgResult:
    def __init__(self, x, iterations, relative_residual, converged):
        self.x = x
        self.iterations = iterations
        self.relative_residual = relative_residual
        self.converged = converged


def pcg(apply_a, b, rtol=1e-10, max_iter=5000, m_solve=None, project=None,
        raise_on_fail=True) -> PcgResult:
    """Preconditioned conjugate gradients for an SPD operator.

    apply_a : callable v -> A v
    m_solve : optional preconditioner application v -> M^-1 v
    project : optional orthogonal projector applied to keep iterates in a
              subspace (deflation of a known near-null space); it must
              commute with the exact solution being sought.

    Stops when ||r|| <= rtol * ||b||.  Deterministic: fixed reduction
    order, zero initial guess.
    """
    b = np.asarray(b, dtype=float)
    if project is not None:
        b = project(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return PcgResult(np.zeros_like(b), 0, 0.0, True)

    x = np.zeros_like(b)
    r = b.copy()
    z = m_solve(r) if m_solve is not None else r
    if project is not None:
        z = project(z)
    d = z.copy()
    rz = float(r @ z)
    for k in range(1, max_iter + 1):
        ad = apply_a(d)
        if project is not None:
            ad = project(ad)
        dad = float(d @ ad)
        if dad <= 0.0:
            break
        alpha = rz / dad
        x += alpha * d
        r -= alpha * ad
        rnorm = float(np.linalg.norm(r))
        if rnorm <= rtol * bnorm:
            return PcgResult(x, k, rnorm / bnorm, True)
        z = m_solve(r) if m_solve is not None else r
        if project is not None:
            z = project(z)
        rz_next = float(r @ z)
        beta = rz_next / rz
        d = z + beta * d
        rz = rz_next
    rel = float(np.linalg.norm(r)) / bnorm
    if raise_on_fail:
        raise LinearSolveError(
            f"conjugate gradients stalled at relative residual {rel:.3e} "
            f"after {max_iter} iterations"
        )
    return PcgResult(x, max_iter, rel, False)
