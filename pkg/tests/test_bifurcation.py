import json

import numpy as np
import pytest

from momentfield import CycleNotFound, model1, one_population
from momentfield.bifurcation import (
    BifurcationAtlas,
    continuation,
    continue_fold,
    cycle_at,
    hysteresis_sweep,
    sweep_cycles,
    sweep_equilibria,
)
from momentfield.integrate import cycle_from_transient, find_cycle

# frozen from the WC Model I sweep over I1 in [-5, 1]
WC_HOPF = -3.2474
WC_FOLDS = (0.5406, 0.8672)
# frozen one-population WC folds (w = 10, alpha = 1) in I
ONEPOP_FOLDS = (-6.8095, -3.1905)


# ------------------------------------------------------------------ toys
def test_circle_closes():
    r = continuation(lambda u: np.array([u[0] ** 2 + u[1] ** 2 - 1.0]), np.array([1.0, 0.0]), h_max=0.1)
    assert r.stop_reason == "closed"
    np.testing.assert_allclose(np.hypot(r.points[:, 0], r.points[:, 1]), 1.0, atol=1e-9)


def test_fold_toy_turns_in_parameter():
    r = continuation(lambda u: np.array([u[0] ** 2 - u[1]]), np.array([1.0, 1.0]), direction=-1.0, bounds=(-1, 2))
    p = r.points[:, 1]
    assert r.stop_reason == "bounds"
    assert p.min() > -1e-9
    assert r.points[-1, 0] < 0
    assert np.sum(np.diff(np.sign(r.tangents[:, 1])) != 0) == 1


def test_linear_branch_is_straight():
    r = continuation(lambda u: np.array([u[0] - 2 * u[1]]), np.array([0.0, 0.0]), bounds=(-1, 1))
    np.testing.assert_allclose(r.points[:, 0], 2 * r.points[:, 1], atol=1e-12)
    assert r.points[-1, 1] == pytest.approx(1.0)
    assert np.all(np.sign(r.tangents[:, 1]) == 1)


def test_linear_system_has_no_detections():
    sw = sweep_equilibria("wc", one_population(w=0.0, alpha=1.0, I=0.0), "I", -2, 2)
    assert len(sw.branches) == 1
    assert sw.points == []


# ------------------------------------------------------------------ equilibria
@pytest.fixture(scope="module")
def wc_sweep():
    return sweep_equilibria("wc", model1(), "I1", -5, 1)


def test_wc_model1_detections(wc_sweep):
    hopf = wc_sweep.of_kind("hopf")
    folds = sorted(p.params["I1"] for p in wc_sweep.of_kind("saddle-node"))
    assert len(hopf) == 1
    assert hopf[0].params["I1"] == pytest.approx(WC_HOPF, abs=1e-4)
    assert hopf[0].info["certified"]
    np.testing.assert_allclose(folds, WC_FOLDS, atol=1e-4)
    assert [p.label for p in sorted(wc_sweep.of_kind("saddle-node"), key=lambda p: p.params["I1"])] == ["LP1", "LP2"]


def test_sweep_branch_states_are_equilibria(wc_sweep):
    from momentfield.model import Variant, rhs_flat

    net = model1()
    for b in wc_sweep.branches:
        for v, s in zip(b.values[::10], b.states[::10]):
            assert np.max(np.abs(rhs_flat(Variant.WILSON_COWAN, s, net.with_param("I1", v)))) < 1e-8


def test_onepop_bcc_two_admissible_folds():
    sw = sweep_equilibria("bcc", one_population(n=0.02), "I", -8, -2)
    folds = [p for p in sw.of_kind("saddle-node") if p.info["admissible"]]
    assert len(folds) == 2


def test_small_n_folds_approach_wc():
    net = one_population(n=0.001)
    sw = sweep_equilibria("bcc", net, "I", -8, -2)
    folds = sorted(p.params["I"] for p in sw.of_kind("saddle-node") if p.info["admissible"])
    np.testing.assert_allclose(folds, [-6.679, -3.225], atol=2e-3)


def test_fold_curve_limits_to_wc():
    net = one_population(n=0.02)
    sw = sweep_equilibria("bcc", net, "I", -8, -2)
    limits = []
    for p in (q for q in sw.of_kind("saddle-node") if q.info["admissible"]):
        curve = continue_fold("bcc", net, p, p2_bounds=(1e-5, 0.05))
        n = curve.values[:, 1]
        assert n.min() == pytest.approx(1e-5)
        # the correlation equation loses its damping at a WC fold, so the shift grows like n^(2/3)
        near = n <= 1e-3
        A = np.column_stack([np.ones(near.sum()), n[near] ** (2 / 3), n[near]])
        limits.append(np.linalg.lstsq(A, curve.values[near, 0], rcond=None)[0][0])
    np.testing.assert_allclose(sorted(limits), ONEPOP_FOLDS, atol=1e-3)


# ------------------------------------------------------------------ hysteresis
def test_ode_hysteresis_matches_folds():
    vals = np.arange(-7.0, -2.99, 0.1)
    h = hysteresis_sweep(one_population(), "I", vals, runner="ode", dwell=30)
    lo, hi = h.window()
    assert abs(lo - ONEPOP_FOLDS[0]) <= 0.2 and abs(hi - ONEPOP_FOLDS[1]) <= 0.2
    assert not h.osc_up.any()
    head, rows = h.to_rows()
    assert head[0] == "I" and len(rows) == len(vals)


# ------------------------------------------------------------------ cycles
def test_short_cycle_branch():
    net = model1(-0.5)
    seed = cycle_from_transient("wc", [0.1, 0.1], net)
    b = sweep_cycles("wc", net, "I1", seed, -0.6, -0.4, both_directions=True)
    assert b.values.min() == pytest.approx(-0.6) and b.values.max() == pytest.approx(-0.4)
    assert all(s == "stable" for s in b.stability)
    assert b.points == []
    k = int(np.argmax(b.values))
    c = find_cycle("wc", b.anchors[k], b.periods[k], model1(-0.4))
    assert c.period == pytest.approx(b.periods[k], rel=1e-6)


def test_cycle_at_equilibrium_raises():
    with pytest.raises(CycleNotFound):
        cycle_at("wc", model1(-5.0), [0.1, 0.1])


# ------------------------------------------------------------------ atlas
def test_atlas_exports(wc_sweep, tmp_path):
    atlas = BifurcationAtlas.from_sweep(wc_sweep, -5, 1)
    atlas.to_json(tmp_path / "atlas.json")
    data = json.loads((tmp_path / "atlas.json").read_text())
    assert data["ranges"] == {"I1": [-5.0, 1.0]}
    assert {p["label"] for p in data["points"]} == {"H1", "LP1", "LP2"}
    files = atlas.write_tables(tmp_path)
    names = {f.name for f in files}
    assert {"branch_1.csv", "branch_1.dat", "points.csv"} <= names
    head = (tmp_path / "branch_1.csv").read_text().splitlines()[0]
    assert head == "I1,x1,x2,stable,admissible"
    dat = (tmp_path / "branch_1.dat").read_text()
    assert dat.startswith("# I1 ")
    assert "\n\n\n" in dat  # stability changes split the branch into blocks
