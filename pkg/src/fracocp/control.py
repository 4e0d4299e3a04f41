"""Sparse optimal control: projection formulas, reduced functional and SSN loop.

Two control discretizations share one code path. Controls are vectors in a
space with weights ``w`` (the L2 inner product is ``sum(w * a * b)``), a load
map ``B`` (control -> P1 load vector) and an observation map ``P`` (P1 nodal
vector -> control space), with ``P = diag(w)^-1 B^T``:

* fully discrete: piecewise constants, ``w = |T|`` and ``P`` takes the cell
  average of the adjoint (mean of the three vertex values);
* semidiscrete: values at the quadrature points of the load rule. There is no
  control mesh: at a stationary point these values are the closed-form map of
  the discrete adjoint evaluated where the load quadrature needs it.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_solve

from .mesh import build_dofmap
from .quadrature import triangle_rule
from .solvers import (NonlinearitySpec, SolverError, linearized_factor, solve_state)

log = logging.getLogger(__name__)

FULLY_DISCRETE = "fully_discrete"
SEMIDISCRETE = "semidiscrete"
SCHEMES = (FULLY_DISCRETE, SEMIDISCRETE)


@dataclass(frozen=True)
class ProblemSpec:
    s: float
    lam: float
    mu: float
    alpha: float
    beta: float
    nl: NonlinearitySpec
    L: Callable
    dL: Callable
    d2L: Callable
    forcing: Optional[Callable] = None

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError("s must lie in (0, 1)")
        if not self.lam > 0 or not self.mu > 0:
            raise ValueError("lambda and mu must be positive")
        if not self.alpha < 0 < self.beta:
            raise ValueError("control bounds must satisfy alpha < 0 < beta")


def tracking_terms(target):
    """``L = (u - target)^2 / 2`` and its derivatives; ``target(x)`` is a callable."""
    return (lambda x, u: 0.5 * (u - target(x)) ** 2,
            lambda x, u: u - target(x),
            lambda x, u: np.ones_like(u))


# ---------------------------------------------------------------------------
# pointwise formulas


def proj_interval(a, b, v):
    """``min(b, max(a, v))``."""
    if not a < b:
        raise ValueError("empty interval")
    return np.minimum(b, np.maximum(a, v))


def eta_from_p_pointwise(p, mu):
    return proj_interval(-1.0, 1.0, -np.asarray(p, dtype=float) / mu)


def q_from_p_pointwise(p, spec):
    """Soft threshold at ``mu`` followed by the box projection."""
    p = np.asarray(p, dtype=float)
    shrink = p - proj_interval(-spec.mu, spec.mu, p)
    return proj_interval(spec.alpha, spec.beta, -shrink / spec.lam)


def _nodal(mesh, dofmap, p_h):
    p_h = np.asarray(p_h, dtype=float)
    if p_h.shape == (mesh.n_vertices,):
        return p_h
    if dofmap is None or p_h.shape != (dofmap.n_dofs,):
        raise ValueError("p_h must be an all-vertex vector or a DOF vector with its dofmap")
    out = np.zeros(mesh.n_vertices)
    out[dofmap.interior_nodes] = p_h
    return out


def cell_averages(mesh, p_h, dofmap=None):
    """Exact cell means of a P1 function: the mean of its three vertex values."""
    return _nodal(mesh, dofmap, p_h)[mesh.triangles].mean(axis=1)


def q_update_fully_discrete(mesh, p_h, spec, dofmap=None):
    """Cellwise control and subgradient from the cell averages of ``p_h``."""
    pbar = cell_averages(mesh, p_h, dofmap)
    return q_from_p_pointwise(pbar, spec), eta_from_p_pointwise(pbar, spec.mu)


def directional_derivative_j(q, v, mesh_or_areas):
    """Directional derivative of the L1 norm at a P0 field ``q`` in direction ``v``."""
    areas = getattr(mesh_or_areas, "areas", mesh_or_areas)
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(np.sum(areas * np.where(q != 0, v * np.sign(q), np.abs(v))))


# ---------------------------------------------------------------------------
# control spaces


@dataclass
class ControlSpace:
    scheme: str
    weights: np.ndarray
    B: sp.csr_matrix  # (n_dofs, m)
    P: sp.csr_matrix  # (m, n_dofs)

    @property
    def size(self):
        return len(self.weights)

    def norm(self, v):
        return float(np.sqrt(np.sum(self.weights * v * v)))


def control_space(mesh, dofmap, fe, scheme):
    n = dofmap.n_dofs
    if scheme == FULLY_DISCRETE:
        nT = mesh.n_triangles
        d = dofmap.node_to_dof[mesh.triangles]
        rows = d.ravel()
        cols = np.repeat(np.arange(nT), 3)
        keep = rows >= 0
        P = sp.csr_matrix((np.full(keep.sum(), 1.0 / 3.0), (cols[keep], rows[keep])), shape=(nT, n))
        w = np.asarray(mesh.areas, dtype=float).copy()
    elif scheme == SEMIDISCRETE:
        nT, nq = fe.weights.shape
        d = np.repeat(fe.dofs[:, None, :], nq, axis=1)  # (nT, nq, 3)
        vals = np.broadcast_to(fe.basis[None], d.shape)
        cols = np.broadcast_to(np.arange(nT * nq).reshape(nT, nq, 1), d.shape)
        keep = d >= 0
        P = sp.csr_matrix((vals[keep], (cols[keep], d[keep])), shape=(nT * nq, n))
        w = fe.weights.ravel().copy()
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    B = (P.T @ sp.diags(w)).tocsr()
    return ControlSpace(scheme, w, B, P)


# ---------------------------------------------------------------------------
# reduced problem


@dataclass
class ControlState:
    """Optimization result.

    For the semidiscrete scheme ``q`` and ``eta`` hold values at the load
    quadrature points, i.e. the closed-form maps of ``p`` sampled there.
    """

    scheme: str
    q: np.ndarray
    u: np.ndarray
    p: np.ndarray
    eta: np.ndarray
    residual_stationarity: float
    cost: float
    iterations: int = 0
    converged: bool = True
    history: list = field(default_factory=list)


class OCPError(RuntimeError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class ReducedProblem:
    """Control-to-state map, adjoint and derivatives for one (spec, mesh, ops, scheme)."""

    def __init__(self, spec, mesh, ops, scheme, dofmap=None, state_tol=1e-11):
        self.spec = spec
        self.mesh = mesh
        self.ops = ops
        self.dofmap = dofmap or build_dofmap(mesh)
        if self.dofmap.n_dofs != ops.n_dofs:
            raise ValueError("operator set does not match the mesh")
        self.fe = ops.fe
        self.space = control_space(mesh, self.dofmap, self.fe, scheme)
        self.scheme = scheme
        self.state_tol = state_tol
        n = ops.n_dofs
        if spec.forcing is not None:
            self.f_load = self.fe.load(spec.forcing(self.fe.points) * np.ones(self.fe.weights.shape), n)
        else:
            self.f_load = np.zeros(n)
        self._u_guess = None

    # --- solves
    def state(self, q):
        rhs = self.space.B @ q + self.f_load
        u, rep = solve_state(self.ops, self.spec.nl, rhs, tol=self.state_tol, u0=self._u_guess)
        self._u_guess = u
        return u

    def adjoint(self, u):
        fac = linearized_factor(self.ops, self.spec.nl, u)
        uq = self.fe.interpolate(u)
        p = cho_solve(fac, self.fe.load(self.spec.dL(self.fe.points, uq), self.ops.n_dofs))
        return p, fac

    def solve(self, q):
        u = self.state(q)
        p, fac = self.adjoint(u)
        return u, p, fac

    # --- functionals
    def tracking(self, u):
        uq = self.fe.interpolate(u)
        return self.fe.integrate(self.spec.L(self.fe.points, uq))

    def F(self, q, u=None):
        """Smooth part ``int L(x, u(q)) + lambda/2 ||q||^2``."""
        u = self.state(q) if u is None else u
        return self.tracking(u) + 0.5 * self.spec.lam * float(np.sum(self.space.weights * q * q))

    def cost(self, q, u=None):
        return self.F(q, u) + self.spec.mu * float(np.sum(self.space.weights * np.abs(q)))

    def gradient(self, q, p=None):
        """Vector ``g`` with ``F'(q) w = g . w``, i.e. ``g = B^T p + lambda W q``."""
        if p is None:
            _, p, _ = self.solve(q)
        return self.space.B.T @ p + self.spec.lam * self.space.weights * q

    def curvature_matrix(self, u, p):
        """Sparse ``R(d2L - p d2a)`` on the DOFs at the state ``u`` and adjoint ``p``."""
        fe = self.fe
        uq, pq = fe.interpolate(u), fe.interpolate(p)
        c = self.spec.d2L(fe.points, uq) - pq * self.spec.nl.d2a(fe.points, uq)
        return fe.reaction(c, self.ops.n_dofs)

    def curvature(self, u, p, fac, w):
        phi = cho_solve(fac, self.space.B @ w)
        Rm = self.curvature_matrix(u, p)
        return float(phi @ (Rm @ phi)) + self.spec.lam * float(np.sum(self.space.weights * w * w))

    # --- projection map
    def G(self, p):
        return q_from_p_pointwise(self.space.P @ p, self.spec)

    def eta(self, p):
        return eta_from_p_pointwise(self.space.P @ p, self.spec.mu)

    def residual(self, q, p):
        return self.space.norm(q - self.G(p))


def stationarity_residual(state, spec, mesh, ops=None, dofmap=None):
    """Weighted L2 norm of ``q - G(p_h)`` in the state's control space."""
    dofmap = dofmap or build_dofmap(mesh)
    if state.scheme == FULLY_DISCRETE:
        q_new, _ = q_update_fully_discrete(mesh, state.p, spec, dofmap)
        return float(np.sqrt(np.sum(mesh.areas * (state.q - q_new) ** 2)))
    if ops is None:
        raise ValueError("the semidiscrete residual needs the operator set (quadrature)")
    fe = ops.fe
    q_new = q_from_p_pointwise(fe.interpolate(state.p), spec).ravel()
    return float(np.sqrt(np.sum(fe.weights.ravel() * (state.q - q_new) ** 2)))


def cost(spec, mesh, q, u_h, ops, dofmap=None):
    """``int L(x, u_h) + lambda/2 ||q||^2 + mu ||q||_1``; ``q`` is P0 or quadrature-point valued."""
    fe = ops.fe
    u_q = fe.interpolate(u_h)
    track = fe.integrate(spec.L(fe.points, u_q))
    q = np.asarray(q, dtype=float)
    w = mesh.areas if q.shape == (mesh.n_triangles,) else fe.weights.ravel()
    return track + 0.5 * spec.lam * float(np.sum(w * q * q)) + spec.mu * float(np.sum(w * np.abs(q)))


def curvature_form(spec, mesh, ops, state, w, dofmap=None):
    """``F''(q)(w, w)`` at a solved state for a control direction ``w``."""
    rp = ReducedProblem(spec, mesh, ops, state.scheme, dofmap)
    fac = linearized_factor(ops, spec.nl, state.u)
    return rp.curvature(state.u, state.p, fac, np.asarray(w, dtype=float))


def solve_ocp(spec, mesh, ops, scheme=FULLY_DISCRETE, tol=1e-10, max_iter=100, dofmap=None,
              q0=None):
    """Semi-smooth Newton on ``r(q) = q - G(P p(q))`` with a damped fixed-point fallback."""
    rp = ReducedProblem(spec, mesh, ops, scheme, dofmap)
    sp_ = rp.space
    lam, mu = spec.lam, spec.mu
    q = np.zeros(sp_.size) if q0 is None else np.array(q0, dtype=float)
    u, p, fac = rp.solve(q)
    J = rp.cost(q, u)
    res = rp.residual(q, p)
    history = [(res, J, "init")]
    it = 0
    while res > tol:
        if it >= max_iter:
            raise OCPError(f"no convergence in {max_iter} outer iterations (residual {res:.3e})", history)
        it += 1
        pv = sp_.P @ p
        Gp = q_from_p_pointwise(pv, spec)
        r = q - Gp
        accepted = False
        # semi-smooth Newton step
        active = (np.abs(pv) > mu) & (Gp > spec.alpha) & (Gp < spec.beta)
        g = np.where(active, -1.0 / lam, 0.0)
        try:
            Rm = rp.curvature_matrix(u, p)

            def K1(v):
                return cho_solve(fac, Rm @ cho_solve(fac, v))
            Z = (sp_.B @ sp.diags(g) @ sp_.P).toarray()
            VU = K1(Z)
            Vr = K1(sp_.B @ r)
            z = np.linalg.solve(np.eye(len(Vr)) - VU, Vr)
            q_trial = proj_interval(spec.alpha, spec.beta, Gp - g * (sp_.P @ z))
            u_t, p_t, fac_t = rp.solve(q_trial)
            J_t = rp.cost(q_trial, u_t)
            res_t = rp.residual(q_trial, p_t)
            if res_t < res and J_t <= J + 1e-12 * max(1.0, abs(J)):
                q, u, p, fac, J, res = q_trial, u_t, p_t, fac_t, J_t, res_t
                accepted = True
                history.append((res, J, "newton"))
        except (np.linalg.LinAlgError, SolverError) as exc:
            log.debug("SSN step rejected: %s", exc)
        if not accepted:
            d = Gp - q
            dn2 = float(np.sum(sp_.weights * d * d))
            theta = 1.0
            while True:
                q_t = q + theta * d
                u_t, p_t, fac_t = rp.solve(q_t)
                J_t = rp.cost(q_t, u_t)
                if J_t <= J - 1e-4 * theta * lam * dn2 or theta < 1e-8:
                    break
                theta *= 0.5
            if J_t > J + 1e-12 * max(1.0, abs(J)):
                raise OCPError("damped step failed to decrease the cost", history)
            q, u, p, fac, J = q_t, u_t, p_t, fac_t, J_t
            res = rp.residual(q, p)
            history.append((res, J, f"damped({theta:g})"))
        log.debug("outer %d: residual %.3e cost %.12e %s", it, res, J, history[-1][2])
    # make q exactly the projection of the returned adjoint
    q_fix = rp.G(p)
    if np.any(q_fix != q):
        u_f, p_f, _ = rp.solve(q_fix)
        res_f = rp.residual(q_fix, p_f)
        if res_f <= max(res, tol):
            q, u, p, res = q_fix, u_f, p_f, res_f
            J = rp.cost(q, u)
    state = ControlState(scheme, q, u, p, rp.eta(p), res, J, it, True, history)
    return state


# ---------------------------------------------------------------------------
# serialization


def save_state(state, mesh, dofmap, path):
    """Plain-text fields: one line per cell (q, eta) then one per vertex (u, p)."""
    nT = mesh.n_triangles
    if state.scheme == FULLY_DISCRETE:
        qc, ec = state.q, state.eta
    else:
        q = state.q.reshape(nT, -1)
        e = state.eta.reshape(nT, -1)
        w = triangle_rule(4)[1]
        if len(w) != q.shape[1]:
            w = np.full(q.shape[1], 1.0 / q.shape[1])
        qc, ec = q @ w, e @ w
    u = _nodal(mesh, dofmap, state.u)
    p = _nodal(mesh, dofmap, state.p)
    lines = [f"# scheme {state.scheme} residual {state.residual_stationarity:.17g} cost {state.cost:.17g}",
             f"cells {nT}"]
    lines += [f"{t} {qc[t]:.17g} {ec[t]:.17g}" for t in range(nT)]
    lines.append(f"nodes {mesh.n_vertices}")
    lines += [f"{i} {u[i]:.17g} {p[i]:.17g}" for i in range(mesh.n_vertices)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_state_fields(path):
    """Read back the arrays written by :func:`save_state`."""
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    nT = int(rows[0][1])
    cells = np.array([[float(v) for v in r[1:]] for r in rows[1:1 + nT]])
    nodes = np.array([[float(v) for v in r[1:]] for r in rows[2 + nT:]])
    return {"q": cells[:, 0], "eta": cells[:, 1], "u": nodes[:, 0], "p": nodes[:, 1]}
