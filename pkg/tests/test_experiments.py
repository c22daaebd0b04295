import math
import time

import pytest

from nearcrit.errors import ConfigError, NearcritError
from nearcrit.experiments import ExperimentConfig, ExperimentError, describe, run, summarize

BASE = """
[experiment]
n_grid = {grid}
replicates = {reps}
seed = 7
mode = {mode}
observables = {obs}

[family]
type = two-atom
eps = 0.05
"""


def config(grid="100", reps=1, mode="multigraph", obs="components", **kw):
    return ExperimentConfig.from_text(BASE.format(grid=grid, reps=reps, mode=mode, obs=obs), **kw)


def test_smoke_single_row_is_fast():
    start = time.perf_counter()
    res = run(config())
    assert time.perf_counter() - start < 1
    assert len(res.rows) == 1
    r = res.rows[0]
    assert r["k1"] == r["e1"] - r["v1"] + 1


def test_row_count_and_euler_identity():
    res = run(config(grid="200, 400", reps=3))
    assert len(res.rows) == 6
    assert [r["n"] for r in res.rows] == [200] * 3 + [400] * 3
    for r in res.rows:
        assert r["k1"] == r["e1"] - r["v1"] + 1


def test_same_seed_same_bytes(tmp_path):
    a = run(config(grid="300, 600", reps=4)).to_csv()
    b = run(config(grid="300, 600", reps=4), threads=3).to_csv()
    assert a == b
    assert a.startswith("# config_sha256=")
    assert "# seed=7" in a


def test_write_outputs(tmp_path):
    res = run(config(grid="100", reps=2))
    out = tmp_path / "r.csv"
    res.write(out)
    assert out.read_text() == res.to_csv()
    assert (tmp_path / "r.summary.csv").exists()
    assert (tmp_path / "r.predictions.csv").exists()


def test_simple_conditioned_and_exploration_consistency():
    res = run(config(grid="500", reps=3, mode="simple-conditioned", obs="components, exploration"))
    assert all(r["simple"] for r in res.rows)
    assert all(r["attempts"] >= 1 for r in res.rows)
    names = {s["observable"] for s in res.summary}
    assert "attempts" in names


@pytest.mark.parametrize("family", [
    "type = power-law\ngamma = 2.5",
    "type = e3\neps_exponent = -0.25\np_exponent = -1.5",
    "type = two-atom\np3 = 0.25",
])
def test_other_families_run(family):
    text = BASE.format(grid="200", reps=1, mode="multigraph", obs="components").replace(
        "type = two-atom\neps = 0.05", family)
    res = run(ExperimentConfig.from_text(text))
    assert len(res.rows) == 1


def test_custom_pmf_family(tmp_path):
    (tmp_path / "law.csv").write_text("k,p\n1,0.7\n3,0.3\n")
    text = BASE.format(grid="100", reps=1, mode="multigraph", obs="components").replace(
        "type = two-atom\neps = 0.05", "type = custom\npmf_file = law.csv")
    cfg_path = tmp_path / "c.ini"
    cfg_path.write_text(text)
    res = run(ExperimentConfig.load(cfg_path))
    assert res.predictions[100].eps == pytest.approx(0.125)


@pytest.mark.parametrize("bad", [
    BASE.format(grid="", reps=1, mode="multigraph", obs="components"),
    BASE.format(grid="200, 100", reps=1, mode="multigraph", obs="components"),
    BASE.format(grid="100", reps=0, mode="multigraph", obs="components"),
    BASE.format(grid="100", reps=1, mode="other", obs="components"),
    BASE.format(grid="100", reps=1, mode="multigraph", obs="pictures"),
    "[experiment]\nn_grid = 10\n",
    "not an ini file",
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text(bad)


def test_module_error_names_the_replicate(tmp_path):
    # an 8-regular graph on 100 vertices is almost never simple
    (tmp_path / "regular.csv").write_text("k,p\n8,1\n")
    text = BASE.format(grid="100", reps=2, mode="simple-conditioned", obs="components")
    text = text.replace("mode = simple-conditioned", "mode = simple-conditioned\nmax_attempts = 1")
    text = text.replace("type = two-atom\neps = 0.05", "type = custom\npmf_file = regular.csv")
    cfg = ExperimentConfig.from_text(text, base_dir=tmp_path)
    with pytest.raises(ExperimentError) as err:
        run(cfg)
    assert err.value.n == 100 and err.value.replicate == 0
    assert isinstance(err.value, NearcritError)


def test_describe_arithmetic():
    s = describe([5, 5, 5])
    assert s.cv == 0 and not s.cv_undefined
    s = describe([1, 3])
    assert s.mean == 2
    assert s.cv == pytest.approx(math.sqrt(2) / 2)
    s = describe([-1, 1])
    assert s.cv_undefined
    assert describe([4.0], prediction=2.0).ratio == 2.0
    with pytest.raises(ValueError):
        describe([])


def test_summarize_ratio_uses_predictions():
    res = run(config(grid="1000", reps=3))
    v1 = next(s for s in summarize(res.rows, res.predictions) if s["observable"] == "v1")
    assert v1["ratio"] == pytest.approx(v1["mean"] / res.predictions[1000].v1)
