import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccsim.measure import (
    MeasureError,
    average_power,
    gain,
    histogram,
    peak_power,
    peak_to_peak,
    rms,
)
from ccsim.netlist import parse_and_flatten
from ccsim.transient import run_transient

from conftest import run_amp


def test_rms_constant():
    assert rms([2.0] * 50, 1e-3) == pytest.approx(2.0, rel=1e-12)


def test_rms_sine_is_amplitude_over_sqrt2():
    t = np.arange(0, 4000) * 1e-6  # 4 whole 1 kHz periods, 1000 samples each
    s = 0.5 * np.sin(2 * np.pi * 1e3 * t)
    assert rms(s, 1e-6) == pytest.approx(0.35355, abs=1e-4)


def test_rms_ramp():
    s = np.linspace(0.0, 1.0, 20001)
    assert rms(s, 1.0 / 20000) == pytest.approx(math.sqrt(1.0 / 3.0), abs=1e-4)


def test_rms_needs_samples():
    with pytest.raises(MeasureError):
        rms([1.0], 1e-3)


def test_peak_to_peak_cases():
    t = np.arange(0, 2000) * 1e-6
    assert peak_to_peak(0.05 * np.sin(2 * np.pi * 1e3 * t)) == pytest.approx(0.1, rel=1e-9)
    assert peak_to_peak([3.0, 3.0, 3.0]) == 0.0
    assert peak_to_peak([-1.0, 3.0]) == 4.0
    with pytest.raises(MeasureError):
        peak_to_peak([])


@given(
    st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=50),
    st.floats(-1e3, 1e3),
)
def test_scaling_covariance(samples, c):
    s = np.array(samples)
    assert rms(c * s, 1e-6) == pytest.approx(abs(c) * rms(s, 1e-6), rel=1e-9, abs=1e-12)
    assert peak_to_peak(c * s) == pytest.approx(abs(c) * peak_to_peak(s), rel=1e-9, abs=1e-12)


def test_gain_end_to_end_ideal():
    _, w = run_amp(r1=1e3, r2=100e3, rx=0.0)
    assert gain(w, "v(in)", "v(out)") == pytest.approx(100.0, rel=1e-3)


def test_gain_loaded_matches_closed_form():
    _, w = run_amp(r1=1e3, r2=1e3, rx=1581.0)
    assert gain(w, "v(in)", "v(out)") == pytest.approx(0.3875, rel=5e-3)


def test_gain_identity_probe():
    _, w = run_amp()
    assert gain(w, "v(in)", "v(in)") == 1.0


def test_gain_zero_input_swing():
    c = parse_and_flatten("t\nvin in 0 DC 1\nr1 in 0 1k\n.end\n")
    w = run_transient(c, 1e-6, 1e-4)
    with pytest.raises(MeasureError):
        gain(w, "v(in)", "v(in)")


DC_LOAD = """dc supply into a resistor
v1 p 0 DC 1
r1 p 0 1k
.end
"""


def test_average_power_dc():
    c = parse_and_flatten(DC_LOAD)
    w = run_transient(c, 1e-5, 1e-3)
    assert average_power(w, ["v1"]) == pytest.approx(1e-3, rel=1e-6)
    assert peak_power(w, ["v1"]) == pytest.approx(average_power(w, ["v1"]), rel=1e-12)


def test_power_additivity():
    two = """two identical supply+resistor pairs
v1 p 0 DC 1
r1 p 0 1k
v2 q 0 DC 1
r2 q 0 1k
.end
"""
    c = parse_and_flatten(two)
    w = run_transient(c, 1e-5, 1e-3)
    assert average_power(w, ["v1", "v2"]) == pytest.approx(2 * average_power(w, ["v1"]), rel=1e-12)


def test_power_unknown_supply():
    c = parse_and_flatten(DC_LOAD)
    w = run_transient(c, 1e-5, 1e-3)
    with pytest.raises(MeasureError):
        average_power(w, ["nosuch"])


def test_peak_at_least_average_with_signal():
    _, w = run_amp(rx=1581.0)
    p_avg = average_power(w, ["vin"])
    p_pk = peak_power(w, ["vin"])
    assert p_pk >= p_avg


def test_histogram_uniform_ramp():
    h = histogram(np.linspace(0.0, 1.0, 2000), 20)
    assert h.counts == (100,) * 20
    assert h.lo == 0.0 and h.hi == 1.0


def test_histogram_constant_degenerate():
    h = histogram([4.2] * 17, 20)
    assert h.counts[0] == 17
    assert sum(h.counts) == 17


def test_histogram_max_lands_in_last_bin():
    # bins are [0, 0.5) and [0.5, 1.0]: the boundary sample goes up, the
    # maximum stays inside the last bin instead of falling off the edge
    h = histogram([0.0, 0.5, 1.0], 2)
    assert h.counts == (1, 2)


def test_histogram_sine_is_arcsine_shaped():
    t = np.arange(0, 2000) * 1e-6  # two whole periods
    s = np.sin(2 * np.pi * 1e3 * t)
    h = histogram(s, 20)
    # end bins dominate, symmetric within one count
    assert h.counts[0] > max(h.counts[5:15])
    assert h.counts[-1] > max(h.counts[5:15])
    assert abs(h.counts[0] - h.counts[-1]) <= 1
    # independent binning oracle (numpy also right-closes its last bin)
    ref, _ = np.histogram(s, bins=20, range=(s.min(), s.max()))
    assert h.counts == tuple(ref)


@given(
    st.lists(st.floats(-1e9, 1e9), min_size=1, max_size=300),
    st.integers(1, 40),
)
@settings(max_examples=300)
def test_histogram_counts_sum_property(samples, nbins):
    h = histogram(samples, nbins)
    assert sum(h.counts) == len(samples)
    assert all(cnt >= 0 for cnt in h.counts)


def test_histogram_argument_errors():
    with pytest.raises(MeasureError):
        histogram([], 20)
    with pytest.raises(MeasureError):
        histogram([1.0], 0)
