import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracle
from gst1q.channels import (ChannelSpec, amplitude_damping, dephasing, depol_gate_error,
                            depol_p_for_gate_error, depolarizing, make_channel, make_kraus, null,
                            overrotation_angle_for_gate_error, overrotation_gate_error, rotation)
from gst1q.gateset import avg_fidelity
from gst1q.pauli import is_cptp, kraus_to_ptm


def test_depolarizing_ptm():
    assert np.allclose(make_channel(depolarizing(0.3)), np.diag([1, 0.7, 0.7, 0.7]))


def test_rotation_z_ptm():
    t = 0.9
    c, s = np.cos(t), np.sin(t)
    assert np.allclose(make_channel(rotation("z", t)), [[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]],
                       atol=1e-15)


def test_null_is_exact_identity():
    assert np.array_equal(make_channel(null()), np.eye(4))


@pytest.mark.parametrize("spec,kraus", [
    (depolarizing(0.37), oracle.depolarizing_kraus(0.37)),
    (dephasing(0.21), oracle.dephasing_kraus(0.21)),
    (amplitude_damping(0.6), oracle.amplitude_damping_kraus(0.6)),
    (rotation("y", 1.3), oracle.rotation_kraus("y", 1.3)),
])
def test_constructors_match_oracle(spec, kraus):
    assert np.allclose(make_channel(spec), oracle.ptm(kraus), atol=1e-12)
    assert np.allclose(kraus_to_ptm(make_kraus(spec)), oracle.ptm(kraus), atol=1e-12)


def test_arbitrary_axis():
    n = np.array([1.0, 2.0, 2.0]) / 3
    u = np.cos(0.4) * np.eye(2) - 1j * np.sin(0.4) * (n[0] * oracle.X + n[1] * oracle.Y + n[2] * oracle.Z)
    assert np.allclose(make_channel(rotation(n, 0.8)), oracle.ptm([u]), atol=1e-14)


def test_gate_depolarizing_maps_to_lambda_4p():
    p = 0.03
    assert np.allclose(make_channel(depolarizing(4 * p)), oracle.ptm(oracle.gate_depolarizing_kraus(p)), atol=1e-12)


@pytest.mark.parametrize("bad", [
    lambda: depolarizing(-0.1), lambda: depolarizing(1.5), lambda: dephasing(1.1),
    lambda: amplitude_damping(-0.01), lambda: rotation([1.0, 1.0, 0.0], 0.3),
    lambda: ChannelSpec("leakage"),
])
def test_out_of_range_rejected(bad):
    with pytest.raises(ValueError):
        bad()


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["depolarizing", "dephasing", "amplitude_damping", "rotation"]),
       st.floats(0, 1), st.floats(-np.pi, np.pi))
def test_all_channels_cptp(kind, p, angle):
    spec = {"depolarizing": depolarizing(4 * p / 3), "dephasing": dephasing(p),
            "amplitude_damping": amplitude_damping(p), "rotation": rotation("x", angle)}[kind]
    assert is_cptp(make_channel(spec), 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_depolarizing_composition(a, b):
    r = make_channel(depolarizing(a)) @ make_channel(depolarizing(b))
    assert np.allclose(r, make_channel(depolarizing(1 - (1 - a) * (1 - b))), atol=1e-14)


def test_depol_gate_error():
    assert depol_gate_error(0.0) == 0.0
    assert np.isclose(depol_gate_error(4.25e-4), 8.5e-4, rtol=1e-12)
    p = 0.005
    assert depol_gate_error(p) == 0.01
    ideal = make_channel(rotation("x", np.pi / 2))
    assert np.isclose(1 - avg_fidelity(ideal, make_channel(depolarizing(4 * p)) @ ideal), 0.01, atol=1e-12)
    assert depol_p_for_gate_error(depol_gate_error(0.01)) == 0.01
    with pytest.raises(ValueError):
        depol_gate_error(0.3)


def test_overrotation_gate_error():
    assert overrotation_gate_error(0.0) == 0.0
    e4 = overrotation_gate_error(np.deg2rad(4))
    assert np.isclose(e4, 8.12e-4, rtol=1e-3)
    assert 7.6e-4 <= e4 <= 9.4e-4
    eps = 0.2
    ideal = make_channel(rotation("y", np.pi / 2))
    actual = make_channel(rotation("y", np.pi / 2 + eps))
    assert np.isclose(overrotation_gate_error(eps), 1 - avg_fidelity(ideal, actual), atol=1e-12)
    assert np.isclose(overrotation_angle_for_gate_error(overrotation_gate_error(0.3)), 0.3, atol=1e-12)
    with pytest.raises(ValueError):
        overrotation_gate_error(4.0)


def test_spec_json_round_trip():
    for spec in (depolarizing(0.1), rotation([0.0, 0.6, 0.8], 0.5), null(), amplitude_damping(0.2)):
        back = ChannelSpec.from_json(spec.to_json())
        assert np.allclose(make_channel(back), make_channel(spec))
    with pytest.raises(ValueError):
        ChannelSpec.from_json({"params": {}})
