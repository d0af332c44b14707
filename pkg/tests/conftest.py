"""Shared circuit builders and the conveyor port-equation checker."""

import numpy as np
import pytest

from ccsim import mna
from ccsim.devices import source_samples
from ccsim.library import AmplifierConfig, BehavioralConveyor, emit_example
from ccsim.netlist import (
    Capacitor,
    Conveyor,
    ISource,
    Resistor,
    VSource,
    parse_and_flatten,
)
from ccsim.transient import run_transient


def behavioral_amp_netlist(r1=1e3, r2=100e3, rx=0.0, amplitude=0.05, freq=1e3, **kw):
    cfg = AmplifierConfig(
        r1=r1,
        r2=r2,
        conveyor=BehavioralConveyor(rx=rx, **kw),
    )
    return emit_example("proposed_amp", cfg)


def behavioral_amp(r1=1e3, r2=100e3, rx=0.0, **kw):
    return parse_and_flatten(behavioral_amp_netlist(r1=r1, r2=r2, rx=rx, **kw))


def run_amp(r1=1e3, r2=100e3, rx=0.0, dt=1e-6, periods=5, freq=1e3, **kw):
    c = behavioral_amp(r1=r1, r2=r2, rx=rx, **kw)
    return c, run_transient(c, dt, periods / freq, "trap")


def conveyor_port_residuals(c, wave):
    """Worst-case conveyor port-equation residuals over a whole waveform.

    Reconstructs, from the recorded unknowns alone, the current every
    non-conveyor element pours into each node; what is left for a conveyor
    terminal to absorb is its measured port current.  Returns, per
    conveyor, (max |I_Y|, max |I_Z - polarity*I_X|, max |V_X - V_Y - rx*I_X|).
    """
    times = wave.times

    def vcol(node):
        return wave.column(f"v({node})")

    # inflow from everything except conveyors (gmin floor included)
    inflow = {
        node: -mna.GMIN_FLOOR * vcol(node) for node in c.nodes if node != "0"
    }

    def add(node, cur):
        if node != "0":
            inflow[node] = inflow[node] + cur

    conveyors = [e for e in c.elements if isinstance(e, Conveyor)]
    for e in c.elements:
        if isinstance(e, Resistor):
            i_ab = (vcol(e.a) - vcol(e.b)) / e.ohms
            add(e.a, -i_ab)
            add(e.b, i_ab)
        elif isinstance(e, Capacitor):
            raise AssertionError("port checker expects capacitor-free circuits")
        elif isinstance(e, VSource):
            i = wave.column(f"i({e.name})")
            add(e.p, -i)
            add(e.n, i)
        elif isinstance(e, ISource):
            val = source_samples(e.spec, times)
            add(e.p, -val)
            add(e.n, val)

    def conveyor_into(m, node):
        cur = np.zeros_like(times)
        ix = wave.column(f"i({m.name})")
        if m.x == node:
            cur = cur - ix
        if m.z == node:
            cur = cur - m.params.polarity * ix
        return cur

    out = {}
    for k in conveyors:
        others_y = inflow.get(k.y, np.zeros_like(times)).copy()
        others_z = inflow.get(k.z, np.zeros_like(times)).copy()
        for m in conveyors:
            if m is not k:
                others_y += conveyor_into(m, k.y)
                others_z += conveyor_into(m, k.z)
        ix = wave.column(f"i({k.name})")
        iy = others_y if k.y != "0" else np.zeros_like(times)
        iz = others_z if k.z != "0" else None
        assert iz is not None, "library conveyors never ground Z"
        vy = vcol(k.y) if k.y != "0" else np.zeros_like(times)
        branch = vcol(k.x) - vy - k.params.rx * ix
        out[k.name] = (
            float(np.max(np.abs(iy))),
            float(np.max(np.abs(iz - k.params.polarity * ix))),
            float(np.max(np.abs(branch))),
        )
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)
