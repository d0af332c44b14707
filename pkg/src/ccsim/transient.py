"""Fixed-step time-domain simulation.

Each step evaluates the sources at t_{n+1}, replaces capacitors by their
companion models and solves to DC tolerances.  The initial condition is
always the DC operating point with sources evaluated at t = 0.

Integration methods are backward Euler ("be") and trapezoidal ("trap").
A trapezoidal run takes its first step with backward Euler: at t = 0
there is no capacitor-current history, and seeding the trapezoid with a
zero current is wrong whenever a source steps right after t = 0.  The
backward-Euler first step has the same local order as the trapezoid's
global error, so the method keeps its second-order convergence.

Memoryless linear circuits (no MOSFETs, no capacitors) are solved with
one LU factorization and all time steps as simultaneous right-hand
sides, which is arithmetically identical to stepping but far faster.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import mna
from .devices import Dc, source_samples
from .netlist import Capacitor, Conveyor, FlatCircuit, ISource, Mosfet, VSource
from .solver import (
    ConvergenceError,
    Tolerances,
    lu_factor,
    lu_solve,
    newton_dc,
    solve_linear,
)


@dataclass
class Waveform:
    """Time-indexed record of every circuit unknown.

    ``columns`` maps unknown names (``v(node)``, ``i(element)``) to sample
    arrays, all the same length as ``times``.  ``vsource_nodes`` keeps each
    voltage source's terminal nodes so supply power can be computed from
    the record alone.
    """

    times: np.ndarray
    columns: dict[str, np.ndarray]
    dt: float
    method: str
    circuit_hash: str
    vsource_nodes: dict[str, tuple[str, str]] = field(default_factory=dict)
    time_label: str = "time"

    def column(self, name: str) -> np.ndarray:
        if name == "v(0)":
            return np.zeros_like(self.times)
        if name not in self.columns:
            raise KeyError(f"no recorded column {name!r}")
        return self.columns[name]


def circuit_hash(c: FlatCircuit) -> str:
    return hashlib.sha256(c.canonical_text().encode()).hexdigest()[:16]


def _vsource_nodes(c: FlatCircuit) -> dict[str, tuple[str, str]]:
    return {e.name: (e.p, e.n) for e in c.elements if isinstance(e, VSource)}


def _clip_rows(c: FlatCircuit, u: mna.UnknownMap):
    """(row, lo, hi) for every conveyor that asks for output clamping."""
    out = []
    for e in c.elements:
        if isinstance(e, Conveyor) and (e.vmin is not None or e.vmax is not None):
            r = u.node_row(c.nodes[e.z])
            if r >= 0:
                lo = -np.inf if e.vmin is None else e.vmin
                hi = np.inf if e.vmax is None else e.vmax
                out.append((r, lo, hi))
    return out


def _step_method(method: str, k: int) -> str:
    return "be" if method == "be" or k == 1 else "trap"


def run_transient(
    c: FlatCircuit,
    dt: float,
    tstop: float,
    method: str = "trap",
    tol: Tolerances | None = None,
) -> Waveform:
    """Simulate from t = 0 to tstop with a constant step dt."""
    if dt <= 0.0:
        raise ValueError("transient requires dt > 0")
    if tstop < dt:
        raise ValueError("transient requires tstop >= dt")
    if method not in ("be", "trap"):
        raise ValueError(f"unknown integration method {method!r}")
    tol = tol or Tolerances()
    u = mna.index_unknowns(c)
    n_steps = int(round(tstop / dt))
    times = np.arange(n_steps + 1) * dt
    clips = _clip_rows(c, u)

    op = newton_dc(c, u, tol, t=0.0)
    x0 = op.x.copy()
    for r, lo, hi in clips:
        x0[r] = min(max(x0[r], lo), hi)

    caps = [e for e in c.elements if isinstance(e, Capacitor)]
    has_mos = any(isinstance(e, Mosfet) for e in c.elements)

    if not caps and not has_mos:
        data = _run_batched(c, u, times, clips, tol)
        data[:, 0] = x0
        for r, lo, hi in clips:
            np.clip(data[r], lo, hi, out=data[r])
    else:
        data = np.empty((u.size, n_steps + 1))
        data[:, 0] = x0
        _run_stepped(c, u, times, method, tol, caps, has_mos, clips, data)

    columns = {name: data[i] for i, name in enumerate(u.names)}
    return Waveform(
        times,
        columns,
        dt,
        method,
        circuit_hash(c),
        _vsource_nodes(c),
    )


def _run_batched(c, u, times, clips, tol):
    """All steps of a memoryless linear circuit in one multi-RHS solve."""
    sys = mna.assemble(c, u, 0.0, gmin_floor=tol.gmin_floor)
    b = np.zeros((u.size, len(times)))
    for e in c.elements:
        if isinstance(e, VSource):
            b[u.branch_row(e.name)] += source_samples(e.spec, times)
        elif isinstance(e, ISource):
            s = source_samples(e.spec, times)
            p = u.node_row(c.nodes[e.p])
            n = u.node_row(c.nodes[e.n])
            if p >= 0:
                b[p] -= s
            if n >= 0:
                b[n] += s
    return lu_solve(lu_factor(sys.a), b)


def _run_stepped(c, u, times, method, tol, caps, has_mos, clips, data):
    x = data[:, 0].copy()

    def vdiff(xv, e):
        i = u.node_row(c.nodes[e.a])
        j = u.node_row(c.nodes[e.b])
        va = xv[i] if i >= 0 else 0.0
        vb = xv[j] if j >= 0 else 0.0
        return va - vb

    # capacitor history: voltage from the operating point, current zero
    # (a capacitor is an open circuit at DC)
    v_prev = {e.name: vdiff(x, e) for e in caps}
    i_prev = {e.name: 0.0 for e in caps}
    dt = times[1] - times[0]

    for k in range(1, len(times)):
        t = times[k]
        meth = _step_method(method, k)
        cap_state = {e.name: (meth, dt, v_prev[e.name], i_prev[e.name]) for e in caps}
        if has_mos:
            try:
                op = newton_dc(c, u, tol, t=t, x0=x, cap_state=cap_state)
            except ConvergenceError as exc:
                raise ConvergenceError(
                    f"transient Newton failure at t={t:.9e} s (step {k}): {exc}",
                    exc.residual,
                ) from None
            x = op.x
        else:
            sys = mna.assemble(c, u, t, None, cap_state, gmin_floor=tol.gmin_floor)
            x = solve_linear(sys.a, sys.b, u.names)
        for r, lo, hi in clips:
            x[r] = min(max(x[r], lo), hi)
        for e in caps:
            geq, ieq = mna.companion_values(e.farads, meth, dt, v_prev[e.name], i_prev[e.name])
            v_new = vdiff(x, e)
            i_prev[e.name] = geq * v_new - ieq
            v_prev[e.name] = v_new
        data[:, k] = x


def run_dc_sweep(
    c: FlatCircuit,
    source_name: str,
    start: float,
    stop: float,
    step: float,
    tol: Tolerances | None = None,
) -> Waveform:
    """Operating-point sweep of one independent source's DC value."""
    tol = tol or Tolerances()
    name = source_name.lower()
    idx = next(
        (i for i, e in enumerate(c.elements)
         if isinstance(e, (VSource, ISource)) and e.name == name),
        None,
    )
    if idx is None:
        raise ValueError(f"no independent source named {source_name!r} to sweep")
    if step == 0.0:
        raise ValueError("dc sweep step must be nonzero")
    n = int(round((stop - start) / step))
    values = start + np.arange(n + 1) * step
    u = mna.index_unknowns(c)
    data = np.empty((u.size, len(values)))
    x = None
    for k, v in enumerate(values):
        elems = list(c.elements)
        elems[idx] = replace(elems[idx], spec=Dc(float(v)))
        ck = FlatCircuit(c.nodes, c.node_names, elems, c.directives, c.params)
        op = newton_dc(ck, u, tol, t=0.0, x0=x)
        x = op.x
        data[:, k] = x
    columns = {nm: data[i] for i, nm in enumerate(u.names)}
    return Waveform(
        values,
        columns,
        float(step),
        "dc",
        circuit_hash(c),
        _vsource_nodes(c),
        time_label=name,
    )


# --------------------------------------------------------------------------
# CSV export / import
# --------------------------------------------------------------------------

def format_sci(v: float) -> str:
    """Scientific notation with 9 significant digits, locale-independent."""
    return f"{v:.8e}"


def write_csv(wave: Waveform, path, probes: list[str] | None = None):
    """Waveform CSV: header row, first column time, LF line endings."""
    names = probes if probes is not None else list(wave.columns)
    cols = [wave.column(n) for n in names]
    with open(path, "w", newline="") as fh:
        fh.write(",".join([wave.time_label] + names) + "\n")
        for k in range(len(wave.times)):
            row = [format_sci(wave.times[k])] + [format_sci(col[k]) for col in cols]
            fh.write(",".join(row) + "\n")


def read_csv(path) -> Waveform:
    """Rebuild a waveform from a CSV written by :func:`write_csv`."""
    with open(path, "r", newline="") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if len(header) < 2 or not rows:
        raise ValueError(f"{path}: not a waveform CSV")
    arr = np.array([[float(v) for v in row] for row in rows])
    times = arr[:, 0]
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    columns = {name: arr[:, i + 1] for i, name in enumerate(header[1:])}
    return Waveform(times, columns, dt, "", "", {}, time_label=header[0])
