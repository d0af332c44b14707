"""Modified nodal analysis: unknown allocation and element stamps.

Unknowns are the non-ground node voltages followed by one branch current
per voltage source and one per conveyor (its X-terminal current).  All
terminal currents are measured INTO the device terminal; with that
convention a plus-polarity conveyor satisfies

    I_Y = 0,   V_X = V_Y + I_X * R_X,   I_Z = +I_X

and the single-conveyor amplifier (input at Y, R1 from X to ground, R2
from Z to ground) comes out non-inverting with gain R2 / (R1 + R_X).

Matrices are dense; the circuits this simulator targets stay well under a
couple hundred unknowns.  A system under assembly is exclusively owned by
one simulation run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .devices import mosfet_eval, source_value
from .netlist import (
    Capacitor,
    Conveyor,
    Element,
    FlatCircuit,
    ISource,
    Mosfet,
    Resistor,
    VSource,
)

GMIN_FLOOR = 1e-12  # permanent node-to-ground conductance; keeps floating nodes solvable


@dataclass
class UnknownMap:
    """Rows of the MNA system: node voltages then branch currents.

    Branch rows are assigned in sorted element-name order so the map (and
    therefore the assembled matrix) does not depend on element order.
    """

    n_nodes: int
    branch_rows: dict[str, int]
    names: list[str] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.n_nodes + len(self.branch_rows)

    def node_row(self, node_index: int) -> int:
        return node_index - 1  # ground has no row/column

    def branch_row(self, element_name: str) -> int:
        return self.branch_rows[element_name]


def index_unknowns(c: FlatCircuit) -> UnknownMap:
    """One voltage unknown per non-ground node, one branch current per
    voltage source and per conveyor."""
    branch_elems = sorted(
        (e.name for e in c.elements if isinstance(e, (VSource, Conveyor))),
    )
    n = c.n_nodes
    rows = {name: n + i for i, name in enumerate(branch_elems)}
    names = [f"v({c.node_names[i]})" for i in range(1, n + 1)]
    names += [f"i({name})" for name in branch_elems]
    return UnknownMap(n, rows, names)


@dataclass
class MnaSystem:
    a: np.ndarray
    b: np.ndarray
    x: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "MnaSystem":
        return cls(np.zeros((n, n)), np.zeros(n), np.zeros(n))


def _add(a: np.ndarray, i: int, j: int, v: float):
    if i >= 0 and j >= 0:
        a[i, j] += v


def _add_b(b: np.ndarray, i: int, v: float):
    if i >= 0:
        b[i] += v


def stamp_linear(e: Element, c: FlatCircuit, u: UnknownMap, sys: MnaSystem, t: float):
    """Stamp a resistor, source or conveyor.

    The conveyor contributes nothing to its Y row (zero input current),
    adds its branch current to the X and Z KCL rows (the Z entry scaled by
    the polarity), and adds the branch equation V_X - V_Y - R_X*I_X = 0.
    """
    if isinstance(e, Resistor):
        g = 1.0 / e.ohms
        i, j = u.node_row(c.nodes[e.a]), u.node_row(c.nodes[e.b])
        _add(sys.a, i, i, g)
        _add(sys.a, j, j, g)
        _add(sys.a, i, j, -g)
        _add(sys.a, j, i, -g)
    elif isinstance(e, VSource):
        p, n = u.node_row(c.nodes[e.p]), u.node_row(c.nodes[e.n])
        br = u.branch_row(e.name)
        _add(sys.a, p, br, 1.0)
        _add(sys.a, n, br, -1.0)
        _add(sys.a, br, p, 1.0)
        _add(sys.a, br, n, -1.0)
        sys.b[br] += source_value(e.spec, t)
    elif isinstance(e, ISource):
        # positive current flows from p through the source to n
        val = source_value(e.spec, t)
        _add_b(sys.b, u.node_row(c.nodes[e.p]), -val)
        _add_b(sys.b, u.node_row(c.nodes[e.n]), val)
    elif isinstance(e, Conveyor):
        y = u.node_row(c.nodes[e.y])
        x = u.node_row(c.nodes[e.x])
        z = u.node_row(c.nodes[e.z])
        br = u.branch_row(e.name)
        _add(sys.a, x, br, 1.0)
        _add(sys.a, z, br, float(e.params.polarity))
        _add(sys.a, br, x, 1.0)
        _add(sys.a, br, y, -1.0)
        _add(sys.a, br, br, -e.params.rx)
    else:
        raise TypeError(f"stamp_linear cannot handle {type(e).__name__}")


def stamp_nonlinear(e: Mosfet, x_est: np.ndarray, c: FlatCircuit, u: UnknownMap, sys: MnaSystem):
    """Stamp the Newton linearization of a MOSFET around ``x_est``.

    The linearized drain current id + gm*(vgs - vgs0) + gds*(vds - vds0)
    splits into matrix entries for gm and gds plus the constant residual
    ieq = id - gm*vgs0 - gds*vds0 moved to the right-hand side.
    """

    def volt(node: str) -> float:
        r = u.node_row(c.nodes[node])
        return 0.0 if r < 0 else x_est[r]

    vgs = volt(e.g) - volt(e.s)
    vds = volt(e.d) - volt(e.s)
    i_d, gm, gds = mosfet_eval(vgs, vds, e.params)
    ieq = i_d - gm * vgs - gds * vds
    d = u.node_row(c.nodes[e.d])
    g = u.node_row(c.nodes[e.g])
    s = u.node_row(c.nodes[e.s])
    _add(sys.a, d, g, gm)
    _add(sys.a, d, d, gds)
    _add(sys.a, d, s, -(gm + gds))
    _add(sys.a, s, g, -gm)
    _add(sys.a, s, d, -gds)
    _add(sys.a, s, s, gm + gds)
    _add_b(sys.b, d, -ieq)
    _add_b(sys.b, s, ieq)


def companion_values(farads: float, method: str, dt: float, v_prev: float, i_prev: float):
    """Discrete-time equivalent (geq, ieq) of a capacitor for one step."""
    if dt <= 0.0:
        raise ValueError("companion model requires dt > 0")
    if method == "be":
        geq = farads / dt
        return geq, geq * v_prev
    if method == "trap":
        geq = 2.0 * farads / dt
        return geq, geq * v_prev + i_prev
    raise ValueError(f"unknown integration method {method!r}")


def companion_stamp(
    e: Capacitor,
    method: str,
    dt: float,
    v_prev: float,
    i_prev: float,
    c: FlatCircuit,
    u: UnknownMap,
    sys: MnaSystem,
):
    """Stamp a capacitor's companion model: geq in parallel with a current
    source ieq injecting into the positive terminal."""
    geq, ieq = companion_values(e.farads, method, dt, v_prev, i_prev)
    i, j = u.node_row(c.nodes[e.a]), u.node_row(c.nodes[e.b])
    _add(sys.a, i, i, geq)
    _add(sys.a, j, j, geq)
    _add(sys.a, i, j, -geq)
    _add(sys.a, j, i, -geq)
    _add_b(sys.b, i, ieq)
    _add_b(sys.b, j, -ieq)


def assemble(
    c: FlatCircuit,
    u: UnknownMap,
    t: float,
    x_est: np.ndarray | None = None,
    cap_state: dict[str, tuple[str, float, float, float]] | None = None,
    gmin_extra: float = 0.0,
    gmin_floor: float = GMIN_FLOOR,
) -> MnaSystem:
    """Build the full system at time ``t`` and estimate ``x_est``.

    ``cap_state`` maps capacitor names to (method, dt, v_prev, i_prev);
    capacitors absent from the map are treated as open circuits (the DC
    operating-point convention).  ``gmin_extra`` adds a homotopy
    conductance on top of the permanent floor.
    """
    sys = MnaSystem.zeros(u.size)
    if x_est is None:
        x_est = sys.x
    for e in c.elements:
        if isinstance(e, Mosfet):
            stamp_nonlinear(e, x_est, c, u, sys)
        elif isinstance(e, Capacitor):
            if cap_state is not None and e.name in cap_state:
                method, dt, v_prev, i_prev = cap_state[e.name]
                companion_stamp(e, method, dt, v_prev, i_prev, c, u, sys)
        else:
            stamp_linear(e, c, u, sys, t)
    g = gmin_floor + gmin_extra
    if g:
        for k in range(u.n_nodes):
            sys.a[k, k] += g
    sys.x = x_est.copy()
    return sys
