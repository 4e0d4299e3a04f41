"""Discrete state, adjoint and linearized state solves on a fixed OperatorSet."""

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .assembly import FEQuadrature

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised on divergence; ``report`` carries the residual history."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report

    @property
    def last_residual(self):
        return None if self.report is None else self.report.final_residual


@dataclass(frozen=True)
class NonlinearitySpec:
    """``a(x, u)`` with its first two derivatives in ``u``; each maps (points, values) -> values."""

    a: Callable
    da: Callable
    d2a: Callable
    name: str = "custom"


def zero_nonlinearity():
    zero = lambda x, u: np.zeros_like(u)  # noqa: E731
    return NonlinearitySpec(zero, zero, zero, "zero")


def cubic_nonlinearity():
    return NonlinearitySpec(lambda x, u: u ** 3, lambda x, u: 3.0 * u ** 2,
                            lambda x, u: 6.0 * u, "cubic")


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool
    history: list = field(default_factory=list)


def nonlinear_term(fe: FEQuadrature, nl, u, n):
    """``N(u)_i = int a(x, u_h) phi_i`` by the quadrature in ``fe``."""
    uq = fe.interpolate(u)
    return fe.load(nl.a(fe.points, uq), n)


def _check_coefficient(c):
    if not np.all(np.isfinite(c)):
        raise SolverError("non-finite reaction coefficient")
    if np.any(c < 0):
        raise SolverError("negative da/du; the nonlinearity must be monotone")


def linearized_factor(ops, nl, u):
    """Cholesky factor of ``A + R(da/du(., u_h))``."""
    fe, n = ops.fe, ops.n_dofs
    c = nl.da(fe.points, fe.interpolate(u))
    _check_coefficient(c)
    H = ops.A + fe.reaction(c, n).toarray()
    try:
        return cho_factor(H)
    except LinAlgError as exc:
        raise SolverError("Cholesky factorization of the linearized operator failed") from exc


def solve_state(ops, nl, rhs_load, tol=1e-11, max_iter=50, u0=None):
    """Newton with Armijo damping for ``A u + N(u) = rhs_load``; returns ``(u, SolveReport)``."""
    n = ops.n_dofs
    b = np.asarray(rhs_load, dtype=float)
    if not np.all(np.isfinite(b)):
        raise SolverError("non-finite right-hand side")
    u = np.zeros(n) if u0 is None else np.array(u0, dtype=float)

    def residual(v):
        return ops.A @ v + nonlinear_term(ops.fe, nl, v, n) - b

    r = residual(u)
    res = float(np.linalg.norm(r))
    hist = [res]
    it = 0
    while res > tol:
        if it >= max_iter:
            rep = SolveReport(it, res, False, hist)
            raise SolverError(f"Newton did not converge in {max_iter} iterations (residual {res:.3e})", rep)
        fac = linearized_factor(ops, nl, u)
        du = -cho_solve(fac, r)
        t = 1.0
        while True:
            u_new = u + t * du
            r_new = residual(u_new)
            res_new = float(np.linalg.norm(r_new))
            if not np.isfinite(res_new):
                raise SolverError("NaN encountered in the state residual", SolveReport(it, res, False, hist))
            if res_new <= (1.0 - 1e-4 * t) * res or t < 1e-10:
                break
            t *= 0.5
        if t < 1e-10 and res_new >= res:
            # stagnation at roundoff level
            rep = SolveReport(it + 1, res, res <= tol, hist)
            raise SolverError(f"line search failed (residual {res:.3e})", rep)
        u, r, res = u_new, r_new, res_new
        it += 1
        hist.append(res)
    return u, SolveReport(it, res, True, hist)


def _load_from(ops, field_fn, u):
    fe = ops.fe
    if callable(field_fn):
        vals = field_fn(fe.points, fe.interpolate(u))
    else:
        vals = np.asarray(field_fn, dtype=float)
    return fe.load(vals, ops.n_dofs)


def solve_adjoint(ops, nl, u_h, dL_du, factor=None):
    """Solve ``(A + R(da/du(., u_h))) p = load(dL/du(., u_h))``.

    ``dL_du`` is a callable ``(points, u values) -> values`` or quadrature-point values.
    """
    factor = factor or linearized_factor(ops, nl, u_h)
    return cho_solve(factor, _load_from(ops, dL_du, u_h))


def solve_linearized(ops, nl, u_h, w_load, factor=None):
    """Solve ``(A + R(da/du(., u_h))) phi = w_load`` for a load vector."""
    factor = factor or linearized_factor(ops, nl, u_h)
    return cho_solve(factor, np.asarray(w_load, dtype=float))
