import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from momentfield import ConfigError, NetworkConfig, builtin_config, load_config, model1
from momentfield.activation import Activation


@pytest.mark.parametrize(
    "act",
    [Activation.logistic(), Activation.shifted_tanh(0.5), Activation.shifted_sigmoid(0.5, 0.3)],
    ids=["logistic", "tanh", "sigmoid"],
)
def test_derivatives_match_finite_differences(act):
    x = np.linspace(-3, 3, 13)
    d = act.derivs(x, 4)
    h = 1e-4
    for k in range(1, 5):
        fd = (act.derivs(x + h, k - 1)[k - 1] - act.derivs(x - h, k - 1)[k - 1]) / (2 * h)
        np.testing.assert_allclose(d[k], fd, rtol=1e-6, atol=1e-7)


def test_table_activation_tracks_logistic():
    x = np.linspace(-8, 8, 161)
    tab = Activation.table(x, 1 / (1 + np.exp(-x)))
    d = tab.derivs(np.array([-1.0, 0.0, 2.0]), 2)
    ref = Activation.logistic().derivs(np.array([-1.0, 0.0, 2.0]), 2)
    np.testing.assert_allclose(d, ref, atol=1e-3)


def test_shifted_tanh_vanishes_at_offset():
    a = Activation.shifted_tanh(0.5)
    assert abs(a(0.5)) < 1e-15
    assert a.infimum == pytest.approx(-1 - np.tanh(0.5))


def test_sigmoid_homotopy_endpoint_is_nonnegative():
    a = Activation.shifted_sigmoid(0.5, 1.0)
    assert a.infimum == pytest.approx(0.0, abs=1e-15)
    assert np.all(a(np.linspace(-20, 20, 101)) >= 0)


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        Activation("relu")


def test_builtin_models():
    m1 = builtin_config("model1")
    assert m1.M == 2 and m1.n == 0.0
    np.testing.assert_array_equal(model1(-2.0, 0.01).inputs[0], -2.0)
    assert model1(-2.0, 0.01).n == 0.01


def test_config_roundtrip(tmp_path):
    net = model1(-1.0, 0.02).with_param("w12", -7.0)
    p = tmp_path / "net.json"
    p.write_text(json.dumps(net.to_dict()))
    back = load_config(p)
    np.testing.assert_array_equal(back.w, net.w)
    np.testing.assert_array_equal(back.inputs, net.inputs)
    assert back.n == net.n


def test_parse_error_reports_line_and_column(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "alpha": [1,\n}')
    with pytest.raises(ConfigError, match=r"bad.json:3:1"):
        load_config(p)


def test_missing_field_is_config_error():
    with pytest.raises(ConfigError):
        NetworkConfig.from_dict({"alpha": [1.0]})


@given(st.floats(1e-4, 0.5), st.floats(-10, 10))
def test_param_get_set(n, I1):
    net = model1().with_param("n", n).with_param("I1", I1)
    assert net.get_param("n") == pytest.approx(n)
    assert net.get_param("I1") == I1
    assert net.with_param("N", 1 / n).get_param("n") == pytest.approx(n)


def test_unknown_param():
    with pytest.raises(ConfigError):
        model1().with_param("zz", 1.0)


def test_int_sizes_require_integers():
    with pytest.raises(ConfigError):
        model1(-0.5, 0.3).int_sizes()
    np.testing.assert_array_equal(model1(-0.5, 0.02).int_sizes(), [50, 50])
