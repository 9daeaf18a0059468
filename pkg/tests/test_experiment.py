import io
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rfnav import agent as ag
from rfnav import experiment as ex
from rfnav.sim import EpisodeConfig, run_episode

SVG = "{http://www.w3.org/2000/svg}"


def small_grid(**kw):
    base = dict(epochs_s=(0.5,), velocities_mps=(10.0,), episodes_per_cell=3, base_seed=11)
    base.update(kw)
    return ex.SweepGrid(**base)


# --- statistics --------------------------------------------------------------

def test_summarize_examples():
    s = ex.summarize([10.0, 20.0, 30.0], 0)
    assert s["mean_s"] == 20.0 and s["median_s"] == 20.0
    assert s["n"] == 3 and s["n_converged"] == 3 and s["timeout_rate"] == 0.0
    assert s["ci95_lo_s"] <= 20.0 <= s["ci95_hi_s"]
    assert s["p5_s"] == pytest.approx(11.0) and s["p95_s"] == pytest.approx(29.0)


def test_summarize_all_timed_out():
    s = ex.summarize([], 5)
    assert s["n"] == 5 and s["n_converged"] == 0 and s["timeout_rate"] == 1.0
    assert s["mean_s"] is None and s["ci95_lo_s"] is None


def test_summarize_partial_timeouts():
    s = ex.summarize([4.0, 6.0], 2)
    assert s["timeout_rate"] == 0.5 and s["mean_s"] == 5.0


def test_summarize_constant_sample():
    s = ex.summarize([7.5] * 10, 0)
    assert s["ci95_lo_s"] == s["ci95_hi_s"] == s["mean_s"] == 7.5


def test_bootstrap_ci_matches_normal_theory():
    # n = 400 draws, sigma = 10: the 95% CI half-width should be close to 1.96 * 10 / 20
    x = np.random.default_rng(0).normal(100.0, 10.0, 400)
    s = ex.summarize(x, 0, seed=3)
    half = (s["ci95_hi_s"] - s["ci95_lo_s"]) / 2
    expected = 1.96 * x.std(ddof=1) / math.sqrt(x.size)
    assert half == pytest.approx(expected, rel=0.12)
    assert s["ci95_lo_s"] < 100.0 < s["ci95_hi_s"]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.5, 1e4), min_size=1, max_size=40), st.integers(0, 10), st.integers(0, 2 ** 32))
def test_summary_invariants(times, timeouts, seed):
    s = ex.summarize(times, timeouts, seed=seed)
    assert s["ci95_lo_s"] <= s["mean_s"] <= s["ci95_hi_s"]
    assert min(times) - 1e-9 <= s["p5_s"] <= s["median_s"] <= s["p95_s"] <= max(times) + 1e-9
    assert s["timeout_rate"] == pytest.approx(timeouts / (len(times) + timeouts))


# --- grid and seeds ----------------------------------------------------------

def test_default_grid_shape():
    g = ex.default_grid()
    cells = g.cells()
    assert len(cells) == 5 * 3 * 3
    assert {(str(s), str(m)) for _, _, s, _, m in cells} == {
        ("varying:0.2:0.9", "tenstate"), ("fixed:1", "tenstate"), ("varying:0.2:0.9", "singlestate")}
    assert cells == sorted(cells, key=ex._cell_key)


def test_grid_product_without_variants():
    g = small_grid(schedules=(ag.Varying(), ag.Fixed(0.5)), modes=("tenstate", "singlestate"))
    assert len(g.cells()) == 4


@pytest.mark.parametrize("kw", [
    dict(epochs_s=()), dict(velocities_mps=(0.0,)), dict(epochs_s=(float("nan"),)), dict(epsilons=(1.5,)),
    dict(episodes_per_cell=0), dict(episodes_per_cell=2.5), dict(base_seed=-1), dict(variants=()),
    dict(schedules=(0.5,)),
])
def test_grid_validation(kw):
    with pytest.raises(ValueError):
        small_grid(**kw)


def test_seeds_are_distinct_and_stable():
    g = ex.default_grid()
    seeds = {ex.derive_seed(0, cell, i) for cell in g.cells() for i in range(200)}
    assert len(seeds) == 45 * 200
    cell = g.cells()[0]
    assert ex.derive_seed(0, cell, 0) == ex.derive_seed(0, cell, 0)
    assert ex.derive_seed(0, cell, 0) != ex.derive_seed(1, cell, 0)
    assert ex.derive_seed(0, cell, "bootstrap") not in seeds


# --- running -----------------------------------------------------------------

def test_single_cell_single_episode_matches_run_episode(default_map):
    g = small_grid(episodes_per_cell=1)
    res = ex.run_sweep(g, default_map)
    (c,) = res.cells
    cell = g.cells()[0]
    log = run_episode(EpisodeConfig(map=default_map, velocity_mps=10.0, epoch_s=0.5,
                                    seed=ex.derive_seed(11, cell, 0)))
    assert c.n == 1
    if log.converged:
        assert c.mean_s == c.median_s == log.outcome.time_s and c.timeout_rate == 0.0
    else:
        assert c.mean_s is None and c.timeout_rate == 1.0


def test_sweep_is_deterministic_and_worker_independent(default_map):
    g = small_grid(epochs_s=(0.5, 1.0), variants=((ag.Varying(), "tenstate"), (ag.Fixed(1.0), "tenstate")))
    a = ex.to_csv_text(ex.run_sweep(g, default_map))
    b = ex.to_csv_text(ex.run_sweep(g, default_map))
    c = ex.to_csv_text(ex.run_sweep(g, default_map, workers=2))
    assert a == b == c
    assert len(a.splitlines()) == 1 + 4


def test_sweep_timeouts_counted(default_map):
    res = ex.run_sweep(small_grid(episodes_per_cell=2), default_map, timeout_s=1.0)
    (c,) = res.cells
    assert c.n == 2 and c.n_converged == 0 and c.timeout_rate == 1.0
    line = ex.to_csv_text(res).splitlines()[1]
    assert line.count("NA") == 6


def test_bad_cell_is_named(default_map):
    g = small_grid(epochs_s=(0.0005,))
    with pytest.raises(ValueError, match="T_S=0.0005"):
        ex.run_sweep(g, default_map)


def test_result_lookup(default_map):
    res = ex.run_sweep(small_grid(episodes_per_cell=1, velocities_mps=(5.0, 10.0)), default_map)
    assert res.cell(0.5, 5.0).velocity_mps == 5.0
    with pytest.raises(KeyError):
        res.cell(0.5, 7.0)


# --- CSV ---------------------------------------------------------------------

def _fake_result(epochs=(0.5, 1.0, 2.0, 4.0, 8.0), velocities=(2.0, 5.0, 10.0), variants=None):
    variants = variants or [(ag.Varying(0.2, 0.9), ag.Mode.TEN_STATE), (ag.Fixed(1.0), ag.Mode.TEN_STATE),
                            (ag.Varying(0.2, 0.9), ag.Mode.SINGLE_STATE)]
    res = ex.SweepResult(grid={})
    rng = np.random.default_rng(1)
    for t in epochs:
        for v in velocities:
            for s, m in variants:
                mean = float(rng.uniform(50, 900))
                res.cells.append(ex.CellStats(t, v, s, 0.1, m, 200, 199, mean, mean * 0.9, mean * 0.3, mean * 2,
                                              mean * 0.95, mean * 1.05, 0.005))
    return res


def test_csv_layout():
    res = _fake_result(epochs=(1.0,), velocities=(2.0,), variants=[(ag.Varying(), ag.Mode.TEN_STATE)])
    res.cells[0] = ex.CellStats(1.0, 2.0, ag.Varying(), 0.1, ag.Mode.TEN_STATE, 4, 0,
                                None, None, None, None, None, None, 1.0)
    lines = ex.to_csv_text(res).splitlines()
    assert lines == [",".join(ex.CSV_HEADER), "1,2,varying:0.2:0.9,0.1,tenstate,4,0,NA,NA,NA,NA,NA,NA,1"]


def test_csv_roundtrip():
    text = ex.to_csv_text(_fake_result())
    assert ex.to_csv_text(ex.read_csv(io.StringIO(text))) == text


@pytest.mark.parametrize("text", ["", "a,b\n", ",".join(ex.CSV_HEADER) + "\n1,2,3\n",
                                  ",".join(ex.CSV_HEADER) + "\n1,2,bogus,0.1,tenstate,1,1,1,1,1,1,1,1,0\n"])
def test_csv_rejects_garbage(text):
    with pytest.raises(ValueError):
        ex.read_csv(io.StringIO(text))


# --- SVG ---------------------------------------------------------------------

def _svg(res):
    buf = io.StringIO()
    ex.emit_plot(res, buf)
    return buf.getvalue()


def test_plot_structure():
    text = _svg(_fake_result())
    root = ET.fromstring(text)
    panels = root.findall(f"{SVG}g")
    assert len(panels) == 3
    for g in panels:
        assert len(g.findall(f"{SVG}polyline")) == 3
    assert len(root.findall(f".//{SVG}polyline")) == 9
    titles = [g.find(f"{SVG}text").text for g in panels]
    assert titles[2] == "varying:0.2:0.9 / singlestate"


def test_plot_two_epochs_ok_one_epoch_rejected():
    assert _svg(_fake_result(epochs=(1.0, 2.0))).startswith("<svg")
    with pytest.raises(ValueError):
        _svg(_fake_result(epochs=(1.0,)))


def test_plot_from_csv_matches_direct():
    res = _fake_result()
    again = ex.read_csv(io.StringIO(ex.to_csv_text(res)))
    assert _svg(res) == _svg(again)


def test_plot_skips_empty_cells():
    res = _fake_result(velocities=(2.0,))
    res.cells = [c if c.T_S_s != 8.0 else ex.CellStats(*c.coords, 200, 0, None, None, None, None, None, None, 1.0)
                 for c in res.cells]
    root = ET.fromstring(_svg(res))
    for line in root.findall(f".//{SVG}polyline"):
        assert len(line.get("points").split()) == 4


# --- config ------------------------------------------------------------------

def test_parse_config():
    g = ex.parse_config("""
        # quick look
        epochs_s = 0.5, 2
        velocities_mps = 10
        variants = varying:0.2:0.9/tenstate, fixed:0.5/singlestate
        episodes_per_cell = 7
        base_seed = 0x10
    """)
    assert g.epochs_s == (0.5, 2.0) and g.velocities_mps == (10.0,)
    assert g.variants == ((ag.Varying(0.2, 0.9), ag.Mode.TEN_STATE), (ag.Fixed(0.5), ag.Mode.SINGLE_STATE))
    assert g.episodes_per_cell == 7 and g.base_seed == 16
    assert len(g.cells()) == 4


def test_config_defaults_and_product():
    assert ex.parse_config("") == ex.default_grid()
    g = ex.parse_config("schedules = fixed:1\nmodes = tenstate")
    assert g.variants is None and len(g.cells()) == 15


@pytest.mark.parametrize("text, match", [
    ("epochs_s 0.5", "line 1"),
    ("epochs_s = 1\nepochs_s = 2", "duplicate"),
    ("speed = 3", "unknown"),
    ("epochs_s = ", "at least one"),
    ("variants = fixed:1", "schedule/mode"),
    ("velocities_mps = fast", "line 1"),
])
def test_config_errors(text, match):
    with pytest.raises(ValueError, match=match):
        ex.parse_config(text)


def test_grid_echo_roundtrip():
    g = ex.default_grid(episodes_per_cell=5, base_seed=3)
    e = g.echo()
    text = "\n".join(f"{k} = {', '.join(map(str, v)) if isinstance(v, list) else v}" for k, v in e.items())
    assert ex.parse_config(text) == g
