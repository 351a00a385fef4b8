import numpy as np
import pytest

from momentfield import IntegrationError, MomentState, model1, one_population
from momentfield.errors import CycleNotFound, OrbitNotClosedError
from momentfield.integrate import (
    classify_multipliers,
    crossing_times,
    cycle_from_transient,
    find_cycle,
    floquet,
    integrate,
    poincare_map,
    resolvent,
    state_labels,
)
from momentfield.kronecker import match_multisets

WC_PERIOD = 4.182238321725228  # frozen from shooting at I1 = -0.5


@pytest.fixture(scope="module")
def wc_cycle():
    return cycle_from_transient("wc", [0.1, 0.1], model1(-0.5))


def test_labels():
    assert state_labels("wc", 2) == ["nu_1", "nu_2"]
    assert state_labels("bcc", 2) == ["nu_1", "nu_2", "corr_11", "corr_12", "corr_22"]


def test_trajectory_csv_header_and_roundtrip(tmp_path):
    tr = integrate("bressloff", [0.1, 0.2], model1(-0.5, 0.02), 1.0, n_out=11)
    p = tmp_path / "t.csv"
    tr.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,nu_1,nu_2,corr_11,corr_12,corr_22"
    assert len(lines) == 12
    back = np.loadtxt(p, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, 1:], tr.y)


def test_linear_decay_exact():
    net = one_population(w=0.0, alpha=2.0, I=-50.0)
    tr = integrate("wc", [0.5], net, 1.0, n_out=5)
    f = 1 / (1 + np.exp(50.0))
    exact = f / 2 + (0.5 - f / 2) * np.exp(-2 * tr.t)
    np.testing.assert_allclose(tr.nu[:, 0], exact, rtol=1e-7)


def test_corr_padding_for_mean_only_state():
    tr = integrate("infinite", [0.3, 0.3], model1(-5), 5.0)
    np.testing.assert_array_equal(tr.corr, 0.0)


def test_integration_failure_keeps_last_state():
    # unstable correlation mode at the inflection point grows without bound
    with pytest.raises(IntegrationError) as exc:
        integrate("infinite", [0.5, 1.0], one_population(I=-5.0), 1e3)
    assert 0 < exc.value.last_t < 1e3
    assert np.all(np.isfinite(exc.value.last_state))


def test_wc_cycle_stable(wc_cycle):
    assert wc_cycle.period == pytest.approx(WC_PERIOD, rel=1e-6)
    assert wc_cycle.trivial_error < 1e-4
    assert wc_cycle.stability == "stable"
    assert np.sort(np.abs(wc_cycle.multipliers))[0] < 0.5


def test_infinite_embedding_multipliers(wc_cycle):
    net = model1(-0.5)
    y0 = np.concatenate([wc_cycle.anchor, np.zeros(3)])
    emb = floquet("infinite", y0, net, wc_cycle.period)
    mu = wc_cycle.multipliers
    expected = np.concatenate([mu, [mu[0] * mu[0], mu[0] * mu[1], mu[1] * mu[1]]])
    ok, worst = match_multisets(emb.multipliers, expected, 1e-6)
    assert ok, worst
    assert emb.stability == "neutral"


def test_resolvent_refuses_open_orbit(wc_cycle):
    with pytest.raises(OrbitNotClosedError):
        resolvent("wc", wc_cycle.anchor, model1(-0.5), 0.7 * wc_cycle.period)


def test_find_cycle_rejects_equilibrium():
    with pytest.raises(CycleNotFound):
        cycle_from_transient("wc", [0.1, 0.1], model1(-5))


def test_find_cycle_from_rough_guess(wc_cycle):
    c = find_cycle("wc", wc_cycle.anchor + 0.01, WC_PERIOD * 1.05, model1(-0.5))
    assert c.period == pytest.approx(WC_PERIOD, rel=1e-6)


def test_classify_multipliers():
    assert classify_multipliers(np.array([1.0, 0.3])) == "stable"
    assert classify_multipliers(np.array([1.0, 1.2])) == "unstable"
    assert classify_multipliers(np.array([1.0, 0.3, 1.0005])) == "neutral"


def test_poincare_section_of_cycle_is_a_point(wc_cycle):
    net = model1(-0.5)
    tr = integrate("wc", wc_cycle.anchor, net, 10 * wc_cycle.period, dense=True)
    level = float(np.mean(tr.nu[:, 0]))
    pts = poincare_map(tr, 0, level, +1)
    assert len(pts) >= 9
    assert np.ptp(pts[:, 1]) < 1e-6
    # crossing times use linear interpolation between output samples
    dt = np.diff(crossing_times(tr, 0, level, +1))
    np.testing.assert_allclose(dt, wc_cycle.period, rtol=1e-4)


@pytest.mark.slow
def test_correlation_induced_cycle_is_faster():
    """At I1 = -2 a correlation perturbation sends the infinite-size system to a faster cycle."""
    net = model1(-2.0)
    wc = cycle_from_transient("wc", [0.1, 0.1], net)
    inf = cycle_from_transient("infinite", MomentState(np.array([0.1, 0.1]), np.full(3, 1e-3)), net)
    assert inf.period / wc.period < 0.75
    assert np.abs(inf.trajectory(net).corr).max() > 1e-2
