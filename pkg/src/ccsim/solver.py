"""Linear solves and the DC operating point.

The linear solver is a plain dense LU with partial pivoting.  A pivot
smaller than 1e-13 aborts with the name of the unknown whose column lost
rank, which is almost always a floating node.  The Newton loop damps
per-iteration voltage changes, and a gmin ladder (1e-3 S stepped down by
decades to 1e-12 S) rescues cold starts that plain iteration cannot.
A permanent gmin floor from every node to ground is always stamped, so
deliberately floating nodes (for example an unused conveyor Z terminal)
stay solvable without special cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mna
from .netlist import FlatCircuit, Mosfet

PIVOT_TOL = 1e-13


class SingularMatrixError(Exception):
    def __init__(self, column: int, unknown: str | None = None):
        self.column = column
        self.unknown = unknown
        what = f" (unknown {unknown})" if unknown else ""
        super().__init__(
            f"singular matrix: no usable pivot in column {column}{what}; "
            "a node is probably floating"
        )


class ConvergenceError(Exception):
    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


@dataclass
class Tolerances:
    reltol: float = 1e-6
    vntol: float = 1e-9
    abstol: float = 1e-12
    maxiter: int = 100
    damping: float = 0.5  # max per-iteration voltage change, volts
    gmin_floor: float = mna.GMIN_FLOOR


@dataclass
class OperatingPoint:
    x: np.ndarray
    residual_norm: float
    iterations: int
    gmin_final: float


def lu_factor(a: np.ndarray):
    """In-place-style LU factorization with partial pivoting.

    Returns (lu, perm) where lu packs both factors and perm records the
    row swap made at each elimination step.
    """
    lu = np.array(a, dtype=float, copy=True)
    n = lu.shape[0]
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < PIVOT_TOL:
            raise SingularMatrixError(k)
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[k] = p
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return lu, perm


def lu_solve(factors, b: np.ndarray) -> np.ndarray:
    """Back-substitute one right-hand side vector or a matrix of columns."""
    lu, perm = factors
    n = lu.shape[0]
    x = np.array(b, dtype=float, copy=True)
    # stored multipliers live in the fully permuted row order, so the whole
    # swap sequence is applied before the triangular solves
    for k in range(n):
        p = perm[k]
        if p != k:
            x[[k, p]] = x[[p, k]]
    for k in range(n):
        x[k + 1 :] -= np.multiply.outer(lu[k + 1 :, k], x[k])
    for k in range(n - 1, -1, -1):
        x[k] -= lu[k, k + 1 :] @ x[k + 1 :]
        x[k] /= lu[k, k]
    return x


def solve_linear(a: np.ndarray, b: np.ndarray, row_names: list[str] | None = None) -> np.ndarray:
    """Solve a*x = b by LU with partial pivoting.

    ``row_names`` (the unknown map's display names) makes the singular
    diagnostic name the offending unknown.
    """
    try:
        return lu_solve(lu_factor(a), b)
    except SingularMatrixError as exc:
        if row_names is not None and exc.unknown is None:
            raise SingularMatrixError(exc.column, row_names[exc.column]) from None
        raise


def is_linear(c: FlatCircuit) -> bool:
    return not any(isinstance(e, Mosfet) for e in c.elements)


def node_residual_norm(sys: mna.MnaSystem, x: np.ndarray, n_nodes: int) -> float:
    """Max KCL residual over the node-voltage rows, in amps."""
    r = sys.a @ x - sys.b
    return float(np.max(np.abs(r[:n_nodes]))) if n_nodes else 0.0


def _newton_attempt(
    c: FlatCircuit,
    u: mna.UnknownMap,
    tol: Tolerances,
    t: float,
    x0: np.ndarray,
    cap_state,
    gmin_extra: float,
):
    """One damped Newton run.  Returns (x, residual, iterations) or raises."""
    if is_linear(c):
        sys = mna.assemble(c, u, t, None, cap_state, gmin_extra, tol.gmin_floor)
        x = solve_linear(sys.a, sys.b, u.names)
        resid = node_residual_norm(sys, x, u.n_nodes)
        return x, resid, 1
    x = x0.copy()
    nv = u.n_nodes
    dx_ok = False
    last_resid = np.inf
    for it in range(1, tol.maxiter + 1):
        sys = mna.assemble(c, u, t, x, cap_state, gmin_extra, tol.gmin_floor)
        last_resid = node_residual_norm(sys, x, u.n_nodes)
        if dx_ok and last_resid < tol.abstol:
            return x, last_resid, it - 1
        x_new = solve_linear(sys.a, sys.b, u.names)
        dx = x_new - x
        np.clip(dx[:nv], -tol.damping, tol.damping, out=dx[:nv])
        x = x + dx
        dv = np.abs(dx[:nv])
        dx_ok = bool(np.all(dv <= tol.reltol * np.abs(x[:nv]) + tol.vntol))
    raise ConvergenceError(
        f"Newton did not converge in {tol.maxiter} iterations "
        f"(last KCL residual {last_resid:.3e} A)",
        residual=last_resid,
    )


def gmin_stepped_dc(
    c: FlatCircuit,
    u: mna.UnknownMap,
    tol: Tolerances,
    t: float = 0.0,
    x0: np.ndarray | None = None,
    cap_state=None,
    gmin_start: float = 1e-3,
) -> OperatingPoint:
    """Homotopy fallback: extra conductances from every node to ground,
    stepped down by decades from ``gmin_start`` to 1e-12 S, reusing each
    rung's solution as the next initial guess, then a final solve with
    only the permanent floor."""
    x = np.zeros(u.size) if x0 is None else x0.copy()
    total_iters = 0
    g = gmin_start
    while g >= 1e-12 * 0.999:
        try:
            x, _, its = _newton_attempt(c, u, tol, t, x, cap_state, g)
            total_iters += its
        except (ConvergenceError, SingularMatrixError):
            pass  # a failed rung keeps the previous rung's solution
        g /= 10.0
    try:
        x, resid, its = _newton_attempt(c, u, tol, t, x, cap_state, 0.0)
        return OperatingPoint(x, resid, total_iters + its, tol.gmin_floor)
    except ConvergenceError as exc:
        raise ConvergenceError(
            f"no DC convergence even with gmin stepping: {exc}", exc.residual
        ) from None


def newton_dc(
    c: FlatCircuit,
    u: mna.UnknownMap,
    tol: Tolerances | None = None,
    t: float = 0.0,
    x0: np.ndarray | None = None,
    cap_state=None,
    gmin_start: float = 1e-3,
) -> OperatingPoint:
    """Find the DC solution at time ``t`` (sources evaluated there).

    Plain damped Newton first, restarting with :func:`gmin_stepped_dc`
    when it fails.
    """
    tol = tol or Tolerances()
    x0 = np.zeros(u.size) if x0 is None else x0
    try:
        x, resid, its = _newton_attempt(c, u, tol, t, x0, cap_state, 0.0)
        return OperatingPoint(x, resid, its, tol.gmin_floor)
    except (ConvergenceError, SingularMatrixError):
        pass
    return gmin_stepped_dc(c, u, tol, t, x0, cap_state, gmin_start)
