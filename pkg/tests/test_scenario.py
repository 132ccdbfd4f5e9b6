import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from d2dmimo.scenario import (SystemConfig, Topology, generate_topology,
                              compute_large_scale, pair_distances, substream,
                              dbm_to_mw, mw_to_dbm, save_scenario, load_scenario,
                              SHADOWING)


def small_config(**kw):
    base = dict(n_cu=3, n_d2d=6, bs_antennas=16, d2drx_antennas=4,
                pilot_len=6, coherence_len=40, pzf_bs=(1, 2), pzf_d2d=(1, 1),
                rng_seed=7)
    base.update(kw)
    return SystemConfig(**base)


def test_same_seed_identical_topology_and_gains():
    cfg = small_config()
    t1, t2 = generate_topology(cfg), generate_topology(cfg)
    for f in ("bs_pos", "cu_pos", "d2d_tx_pos", "d2d_rx_pos"):
        assert np.array_equal(getattr(t1, f), getattr(t2, f))
    l1 = compute_large_scale(t1, cfg)
    l2 = compute_large_scale(t2, cfg)
    for f in ("u_c", "u_d", "v_c", "v_d"):
        assert np.array_equal(getattr(l1, f), getattr(l2, f))


def test_pair_distance_window_and_cell_bounds():
    cfg = SystemConfig(rng_seed=3)
    topo = generate_topology(cfg)
    d = pair_distances(topo)
    assert np.all(d >= cfg.min_dist) and np.all(d <= cfg.d2d_max_dist)
    for pos in (topo.cu_pos, topo.d2d_tx_pos, topo.d2d_rx_pos):
        assert pos.min() >= 0.0 and pos.max() <= cfg.cell_side
    assert cfg.cell_side == 1000.0


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_rx_always_inside_cell(seed):
    cfg = small_config(rng_seed=seed, d2d_max_dist=400.0, cell_side=500.0)
    topo = generate_topology(cfg)
    assert topo.d2d_rx_pos.min() >= 0.0
    assert topo.d2d_rx_pos.max() <= cfg.cell_side
    d = pair_distances(topo)
    assert np.all(d <= cfg.d2d_max_dist + 1e-9)


def test_pure_power_law_without_shadowing():
    cfg = small_config(shadow_sigma_db=1e-30)
    # two CUs at distances d and 2d from the BS, one at the reference distance
    topo = Topology(
        bs_pos=np.array([0.0, 0.0]),
        cu_pos=np.array([[10.0, 0.0], [20.0, 0.0], [1.0, 0.0]]),
        d2d_tx_pos=np.tile([5.0, 5.0], (cfg.n_d2d, 1)),
        d2d_rx_pos=np.tile([5.0, 6.0], (cfg.n_d2d, 1)),
    )
    ls = compute_large_scale(topo, cfg)
    assert ls.u_c[1] / ls.u_c[0] == pytest.approx(2.0 ** (-cfg.pathloss_exp), rel=1e-9)
    assert ls.u_c[2] == pytest.approx(1.0, rel=1e-9)


def test_shadowing_zero_mean_in_db():
    # frozen statistical check: 1e5 links, sample mean of the shadowing term
    n = 100_000
    cfg = small_config(n_cu=n, n_d2d=1, pilot_len=n + 1, coherence_len=n + 2,
                       pzf_bs=(0, 0), pzf_d2d=(0, 0), rng_seed=11)
    topo = Topology(
        bs_pos=np.array([0.0, 0.0]),
        cu_pos=np.column_stack([np.full(n, 37.0), np.zeros(n)]),
        d2d_tx_pos=np.tile([5.0, 5.0], (cfg.n_d2d, 1)),
        d2d_rx_pos=np.tile([5.0, 6.0], (cfg.n_d2d, 1)),
    )
    ls = compute_large_scale(topo, cfg)
    shadow_db = 10.0 * np.log10(ls.u_c * 37.0 ** cfg.pathloss_exp)
    assert abs(shadow_db.mean()) < 0.1
    assert shadow_db.std() == pytest.approx(cfg.shadow_sigma_db, rel=0.02)


def test_min_dist_clamp():
    cfg = small_config(shadow_sigma_db=1e-30, min_dist=2.0)
    topo = Topology(
        bs_pos=np.array([0.0, 0.0]),
        cu_pos=np.array([[0.5, 0.0], [2.0, 0.0], [3.0, 0.0]]),
        d2d_tx_pos=np.tile([5.0, 5.0], (cfg.n_d2d, 1)),
        d2d_rx_pos=np.tile([5.0, 6.0], (cfg.n_d2d, 1)),
    )
    ls = compute_large_scale(topo, cfg)
    assert ls.u_c[0] == pytest.approx(ls.u_c[1], rel=1e-12)
    assert ls.u_c[2] < ls.u_c[1]


def test_all_gains_positive_and_finite():
    cfg = SystemConfig(rng_seed=5)
    ls = compute_large_scale(generate_topology(cfg), cfg)
    for f in ("u_c", "u_d", "v_c", "v_d"):
        a = getattr(ls, f)
        assert np.all(a > 0) and np.all(np.isfinite(a))


@pytest.mark.parametrize("field,value,fragment", [
    ("pilot_len", 3, "pilot_len"),
    ("pilot_len", 10, "pilot_len"),           # > N + K
    ("coherence_len", 4, "coherence_len"),
    ("pzf_bs", (3, 2), "b_c"),
    ("pzf_bs", (1, 4), "b_d"),
    ("pzf_d2d", (1, 3), "m_d"),
    ("pzf_d2d", (4, 0), "m_c"),
    ("pzf_d2d", (2, 2), "m_c+m_d"),
    ("noise_power", 0.0, "noise_power"),
    ("sinr_target", -1.0, "sinr_target"),
])
def test_config_invariants_rejected(field, value, fragment):
    with pytest.raises(ValueError, match=fragment.replace("+", r"\+")):
        small_config(**{field: value})


@given(n=st.integers(1, 6), k=st.integers(1, 8), extra=st.integers(1, 8))
@settings(max_examples=30, deadline=None)
def test_pilot_window_accepts_valid_range(n, k, extra):
    tau = n + min(extra, k)
    cfg = SystemConfig(n_cu=n, n_d2d=k, bs_antennas=8, d2drx_antennas=4,
                       pilot_len=tau, coherence_len=tau + 5,
                       pzf_bs=(0, 0), pzf_d2d=(0, 0), rng_seed=1)
    assert cfg.pilot_len == tau


def test_substreams_are_independent_of_each_other():
    a = substream(99, SHADOWING).standard_normal(4)
    b = substream(99, SHADOWING).standard_normal(4)
    c = substream(99, SHADOWING + 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_dbm_conversion_roundtrip():
    assert dbm_to_mw(17.0) == pytest.approx(50.11872336, rel=1e-8)
    assert mw_to_dbm(dbm_to_mw(-100.0)) == pytest.approx(-100.0)


def test_scenario_json_roundtrip(tmp_path):
    cfg = small_config()
    topo = generate_topology(cfg)
    ls = compute_large_scale(topo, cfg)
    path = tmp_path / "scenario.json"
    save_scenario(path, cfg, topo, ls)
    cfg2, topo2, ls2 = load_scenario(path)
    assert cfg2 == cfg
    assert np.allclose(topo2.cu_pos, topo.cu_pos)
    assert np.allclose(ls2.v_d, ls.v_d)
    doc = json.loads(path.read_text())
    assert set(doc) == {"config", "topology", "large_scale"}


def test_unknown_config_field_rejected():
    with pytest.raises(ValueError, match="unknown config fields"):
        SystemConfig.from_dict({"n_cu": 2, "bogus": 1})
