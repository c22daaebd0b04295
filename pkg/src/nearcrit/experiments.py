"""Batch harness: replicated graph experiments across a grid of sizes.

An experiment is described by an INI-style file::

    [experiment]
    n_grid = 1000, 10000
    replicates = 20
    seed = 1
    mode = multigraph
    observables = components
    output = results.csv

    [family]
    type = two-atom
    eps = 0.05

Family types and their keys:

* ``two-atom``: ``eps`` or ``p3`` (``p1 = 1 - p3``)
* ``power-law``: ``gamma``
* ``e3``: ``eps_coef``, ``eps_exponent``, ``p_coef``, ``p_exponent``; the
  forward-degree law at size ``n`` has atoms ``{0, 2, n}`` with
  ``eps = eps_coef * n**eps_exponent`` and ``p = p_coef * n**p_exponent``
* ``custom``: ``pmf_file`` (``k,p`` CSV, relative paths resolved against the
  config file)
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config_model import components, is_simple, pair_half_edges, sample_simple, simple_prob_prediction
from .degree_model import (
    e3_offspring,
    inverse_size_biased,
    load_pmf,
    power_law_sequence,
    sequence_from_pmf,
    size_biased,
    stats,
    two_atom_sequence,
)
from .errors import ConfigError, NearcritError, RejectionFailure
from .exploration import component_sizes_from_trace, explore
from .gw_survival import solve_rho
from .theory import chi, predict_giant, regime_report

FAMILIES = ("two-atom", "power-law", "e3", "custom")
MODES = ("multigraph", "simple-conditioned")
OBSERVABLES = ("components", "exploration")
ROW_FIELDS = ("n", "stream", "eps", "rho", "v1", "e1", "v2", "k1", "simple", "attempts")
SUMMARY_FIELDS = ("n", "observable", "count", "mean", "median", "stderr", "cv", "cv_undefined", "prediction", "ratio")


class ExperimentError(NearcritError):
    """A module error raised while running one replicate."""

    def __init__(self, n, replicate, cause):
        super().__init__(f"n={n} replicate={replicate}: {type(cause).__name__}: {cause}")
        self.n = n
        self.replicate = replicate
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    params: dict
    n_grid: tuple
    replicates: int
    seed: int
    mode: str = "multigraph"
    observables: tuple = ("components",)
    output: str | None = None
    record_timing: bool = False
    max_attempts: int = 200
    source_text: str = ""
    base_dir: str = "."

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        bad = [o for o in self.observables if o not in OBSERVABLES]
        if bad or not self.observables:
            raise ConfigError(f"bad observables {bad or '(none)'}; expected a subset of {OBSERVABLES}")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        grid = list(self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ConfigError("n_grid must be a nonempty strictly ascending list of positive integers")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()

    @classmethod
    def from_text(cls, text: str, base_dir=".") -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"unparseable config: {e}") from e
        for sec in ("experiment", "family"):
            if not cp.has_section(sec):
                raise ConfigError(f"missing [{sec}] section")
        ex, fam = cp["experiment"], dict(cp["family"])
        try:
            family = fam.pop("type")
            n_grid = tuple(int(float(x)) for x in _split(ex["n_grid"]))
            kwargs = dict(
                family=family,
                params=fam,
                n_grid=n_grid,
                replicates=ex.getint("replicates", 1),
                seed=ex.getint("seed", 0),
                mode=ex.get("mode", "multigraph"),
                observables=tuple(_split(ex.get("observables", "components"))),
                output=ex.get("output"),
                record_timing=ex.getboolean("record_timing", False),
                max_attempts=ex.getint("max_attempts", 200),
                source_text=text,
                base_dir=str(base_dir),
            )
        except KeyError as e:
            raise ConfigError(f"missing key {e}") from e
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from e
        return cls.from_text(text, base_dir=path.parent)


def _split(value: str):
    return [x.strip() for x in value.split(",") if x.strip()]


def _param(params, key, default=None):
    if key not in params:
        if default is None:
            raise ConfigError(f"family parameter {key!r} is required")
        return default
    try:
        return float(params[key])
    except ValueError as e:
        raise ConfigError(f"family parameter {key!r} is not a number") from e


def build_sequence(config: ExperimentConfig, n: int):
    """Degree sequence of the configured family at size ``n``."""
    p = config.params
    if config.family == "two-atom":
        if "eps" in p:
            return two_atom_sequence(n, eps=_param(p, "eps"))
        return two_atom_sequence(n, p3=_param(p, "p3"))
    if config.family == "power-law":
        return power_law_sequence(_param(p, "gamma"), n)
    if config.family == "e3":
        eps = _param(p, "eps_coef", 1.0) * n ** _param(p, "eps_exponent")
        prob = _param(p, "p_coef", 1.0) * n ** _param(p, "p_exponent")
        return sequence_from_pmf(inverse_size_biased(e3_offspring(n, eps, prob)), n)
    path = Path(p.get("pmf_file", ""))
    if not p.get("pmf_file"):
        raise ConfigError("family parameter 'pmf_file' is required")
    if not path.is_absolute():
        path = Path(config.base_dir) / path
    try:
        law = load_pmf(path)
    except OSError as e:
        raise ConfigError(f"cannot read pmf file: {e}") from e
    return sequence_from_pmf(law, n)


@dataclass(frozen=True)
class Predictions:
    n: int
    mu: float
    eps: float
    rho: float
    v1: float
    v2_order: float
    k1: float
    critical_scale: float
    regime: str
    simple_prob: float

    def for_observable(self, name):
        return {
            "v1": self.v1,
            "e1": self.v1,
            "v2": self.v2_order,
            "k1": self.k1,
            "simple": self.simple_prob,
            "attempts": 1 / self.simple_prob,
        }.get(name)


def predict(seq) -> Predictions:
    """Theory predictions for one sequence; ``v1`` falls back to the critical scale when ``rho = 0``."""
    st = stats(seq)
    sol = solve_rho(size_biased(seq))
    rho = sol.rho
    rep = regime_report(st)
    if rho > 0:
        g = predict_giant(seq, rho)
        v1, v2 = g.v1, g.v2_order
    else:
        v1, v2 = rep.critical_scale, float("nan")
    k1 = st.n * chi(seq, rho) if rho > 0 else float("nan")
    return Predictions(st.n, st.mu, st.eps, rho, v1, v2, k1, rep.critical_scale, rep.regime, simple_prob_prediction(st))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    predictions: dict
    summary: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        _provenance(buf, self.config)
        fields = ROW_FIELDS + (("wall_time",) if self.config.record_timing else ())
        w = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _fmt(r[k]) for k in fields})
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        _provenance(buf, self.config)
        w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        for s in self.summary:
            w.writerow({k: _fmt(s[k]) for k in SUMMARY_FIELDS})
        return buf.getvalue()

    def predictions_csv(self) -> str:
        buf = io.StringIO()
        _provenance(buf, self.config)
        names = list(Predictions.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for n in self.config.n_grid:
            p = self.predictions[n]
            w.writerow([_fmt(getattr(p, k)) for k in names])
        return buf.getvalue()

    def write(self, path):
        """Write the rows to ``path`` plus ``.summary.csv`` and ``.predictions.csv`` siblings."""
        path = Path(path)
        path.write_text(self.to_csv())
        stem = path.with_suffix("")
        Path(f"{stem}.summary.csv").write_text(self.summary_csv())
        Path(f"{stem}.predictions.csv").write_text(self.predictions_csv())


def _provenance(buf, config):
    buf.write(f"# config_sha256={config.config_hash}\n")
    buf.write(f"# version={__version__}\n")
    buf.write(f"# seed={config.seed}\n")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, float):
        return repr(x)
    return x


def _replicate(config, seq, n, n_index, rep, eps, rho):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed, spawn_key=(n_index, rep))))
    start = time.perf_counter()
    attempts = 1
    if "exploration" in config.observables:
        if config.mode == "simple-conditioned":
            while True:
                trace, g = explore(seq, rng)
                if is_simple(g):
                    break
                attempts += 1
                if attempts > config.max_attempts:
                    raise RejectionFailure(config.max_attempts)
        else:
            trace, g = explore(seq, rng)
        comps = components(g)
        if component_sizes_from_trace(trace) != comps.triples():
            raise NearcritError("exploration and component oracle disagree")
    elif config.mode == "simple-conditioned":
        g, attempts = sample_simple(seq, rng, config.max_attempts)
        comps = components(g)
    else:
        g = pair_half_edges(seq, rng)
        comps = components(g)
    simple = is_simple(g)
    row = dict(
        n=n,
        stream=f"{config.seed}:{n_index}:{rep}",
        eps=eps,
        rho=rho,
        v1=comps.v1,
        e1=comps.e1,
        v2=comps.v2,
        k1=comps.k1,
        simple=simple,
        attempts=attempts,
    )
    row["wall_time"] = time.perf_counter() - start
    return row


def run(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Run every replicate at every ``n``; rows come back in (n, replicate) order."""
    rows, preds = [], {}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for i, n in enumerate(config.n_grid):
            try:
                seq = build_sequence(config, n)
                preds[n] = predict(seq)
            except NearcritError as e:
                if isinstance(e, ConfigError):
                    raise
                raise ExperimentError(n, None, e) from e
            p = preds[n]

            def task(rep, seq=seq, n=n, i=i, p=p):
                try:
                    return _replicate(config, seq, n, i, rep, p.eps, p.rho)
                except NearcritError as e:
                    raise ExperimentError(n, rep, e) from e

            rows.extend(pool.map(task, range(config.replicates)))
    result = ExperimentResult(config, rows, preds)
    names = ("v1", "e1", "v2", "k1")
    names += ("attempts",) if config.mode == "simple-conditioned" else ("simple",)
    result.summary = summarize(rows, preds, names)
    return result


@dataclass(frozen=True)
class Summary:
    count: int
    mean: float
    median: float
    stderr: float
    cv: float
    cv_undefined: bool
    prediction: float | None = None
    ratio: float | None = None


def describe(values, prediction=None) -> Summary:
    """Mean, median, standard error and CV (sample sd over mean) of ``values``."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("at least one value is required")
    mean = float(x.mean())
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    undefined = mean == 0 and sd > 0
    if mean == 0:
        cv = 0.0 if sd == 0 else float("nan")
    else:
        cv = sd / abs(mean)
    ratio = None
    if prediction is not None and math.isfinite(prediction) and prediction != 0:
        ratio = mean / prediction
    return Summary(int(x.size), mean, float(np.median(x)), sd / math.sqrt(x.size), cv, undefined, prediction, ratio)


def summarize(rows, predictions=None, observables=("v1", "e1", "v2", "k1", "simple", "attempts")) -> list:
    """One summary record per (n, observable), with the ratio of the mean to its prediction."""
    if not rows:
        raise ValueError("at least one row is required")
    predictions = predictions or {}
    out = []
    for n in sorted({r["n"] for r in rows}):
        sub = [r for r in rows if r["n"] == n]
        pred = predictions.get(n)
        for name in observables:
            target = pred.for_observable(name) if pred is not None else None
            s = describe([float(r[name]) for r in sub], target)
            out.append(dict(n=n, observable=name, **s.__dict__))
    return out
