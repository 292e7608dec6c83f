"""Fitting conditional-quantile mechanisms from tabular data.

Three per-node estimation routes, all built on cell estimators over the
(binned) parent grid: additive location shift with empirical residuals,
heteroskedastic gaussian noise, and a full per-cell quantile grid. The
first two cross-fit their residuals with a 2-fold split by default;
quantile grids are order statistics rather than residuals of a fitted
regression, so they are estimated in-sample.

Parent handling: categorical parents and numeric parents with at most
cfg.bins distinct values form exact cells; other numeric parents are
equal-frequency binned into cfg.bins bins, and unseen values at sampling
time fall into the nearest outer bin.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import FitError, ModelError, ParseError
from .rng import aux_generator
from .scm import (
    AdditiveNoise,
    CellKeyer,
    Dag,
    HeteroGaussian,
    ParentFn,
    QuantileTable,
    RootCategorical,
    RootEmpirical,
    ScmModel,
)

DEFAULT_LEVELS = tuple(round(0.01 + 0.02 * i, 2) for i in range(50))  # 0.01 .. 0.99

VARIANCE_FLOOR = 1e-12


@dataclass
class FitConfig:
    method: str = "quantile_grid"
    levels: tuple = DEFAULT_LEVELS
    min_cell: int = 20
    folds: int = 2
    bins: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("additive_empirical", "hetero_gaussian", "quantile_grid"):
            raise FitError(f"unknown fit method {self.method!r}")
        lv = np.asarray(self.levels, dtype=float)
        if lv.ndim != 1 or len(lv) == 0:
            raise FitError("levels must be a nonempty list")
        if np.any(lv <= 0) or np.any(lv >= 1) or np.any(np.diff(lv) <= 0):
            raise FitError("levels must be strictly increasing inside (0, 1)")
        self.levels = tuple(float(x) for x in lv)
        if self.folds not in (1, 2):
            raise FitError("folds must be 1 or 2")
        if self.min_cell < 2:
            raise FitError("min_cell must be >= 2")
        if self.bins < 2:
            raise FitError("bins must be >= 2")


@dataclass
class Dataset:
    """Rectangular, fully-observed columns: float arrays or string arrays."""

    columns: dict
    n: int
    categorical: frozenset = frozenset()

    def __post_init__(self):
        if self.n < 1:
            raise FitError("dataset is empty after filtering")
        for name, col in self.columns.items():
            if len(col) != self.n:
                raise FitError(f"column {name!r} has {len(col)} rows, expected {self.n}")

    def column(self, name):
        if name not in self.columns:
            raise FitError(f"dataset has no column {name!r}")
        return self.columns[name]

    def numeric(self, name):
        """Numeric view: categorical columns map to their sorted-label codes."""
        col = self.column(name)
        if name in self.categorical:
            labels = sorted(set(col.tolist()))
            code = {lab: float(i) for i, lab in enumerate(labels)}
            return np.array([code[v] for v in col.tolist()])
        return col


def read_csv(path, categorical=(), used=None):
    """Ingest a CSV with a header row.

    Only the columns named in `used` (default: all) are checked; a row is
    dropped when any used numeric cell fails to parse as a real number or
    any used cell is empty. Returns (Dataset, warnings).
    """
    categorical = frozenset(categorical)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FitError("CSV file is empty") from None
        rows = list(reader)
    header = [h.strip() for h in header]
    if len(header) != len(set(header)):
        raise FitError("CSV header has duplicate column names")
    use = list(header) if used is None else [str(c) for c in used]
    missing = [c for c in use if c not in header]
    if missing:
        raise FitError(f"CSV is missing columns: {', '.join(sorted(missing))}")
    pos = {c: header.index(c) for c in use}

    kept = {c: [] for c in use}
    dropped = 0
    for row in rows:
        if len(row) != len(header):
            dropped += 1
            continue
        vals = {}
        ok = True
        for c in use:
            cell = row[pos[c]].strip()
            if cell == "":
                ok = False
                break
            if c in categorical:
                vals[c] = cell
            else:
                try:
                    vals[c] = float(cell)
                except ValueError:
                    ok = False
                    break
        if not ok:
            dropped += 1
            continue
        for c in use:
            kept[c].append(vals[c])

    warnings = []
    if dropped:
        warnings.append(f"dropped {dropped} of {len(rows)} rows with missing or unparseable cells")
    n = len(next(iter(kept.values()))) if use else 0
    columns = {
        c: (np.array(kept[c], dtype=object) if c in categorical else np.array(kept[c], dtype=float))
        for c in use
    }
    return Dataset(columns, n, categorical & frozenset(use)), warnings


# ---------------------------------------------------------------------------
# Cell plumbing


def parent_binning(data: Dataset, parents, cfg: FitConfig):
    """Interior cut points per parent; None only for categorical parents.

    Numeric parents always get bin keys so that lookup stays total at
    sampling time (fitted parents can emit values between the observed
    ones). With at most cfg.bins distinct values each value gets its own
    bin, cut at midpoints, which reproduces exact discrete cells; denser
    columns are equal-frequency binned.
    """
    binning = []
    for p in parents:
        if p in data.categorical:
            binning.append(None)
            continue
        col = data.numeric(p)
        distinct = np.unique(col)
        if len(distinct) <= cfg.bins:
            binning.append((distinct[:-1] + distinct[1:]) / 2.0)
        else:
            qs = np.quantile(col, [i / cfg.bins for i in range(1, cfg.bins)])
            binning.append(np.unique(qs))
    return tuple(binning)


def _cell_groups(data: Dataset, node, parents, cfg: FitConfig):
    """Shared setup: y, keyer, unique cell code rows, per-row inverse."""
    if node in data.categorical:
        raise FitError(f"node {node!r} is categorical; only roots may be categorical")
    y = data.numeric(node)
    pm = (
        np.column_stack([data.numeric(p) for p in parents])
        if parents
        else np.zeros((data.n, 0))
    )
    keyer = CellKeyer(len(parents), parent_binning(data, parents, cfg))
    uniq, inv = keyer.group(pm)
    for i, row in enumerate(uniq):
        cnt = int(np.sum(inv == i))
        if cnt < cfg.min_cell:
            raise FitError(
                f"node {node!r}: cell {keyer.render(row)!r} has {cnt} rows "
                f"(min_cell is {cfg.min_cell})"
            )
    return y, keyer, uniq, inv


def _fold_split(inv, n_cells, n, seed):
    """Per-cell alternating 2-fold split on a seeded permutation.

    Stratifying within cells keeps both folds nonempty in every cell (any
    cell with >= 2 rows), so out-of-fold predictions always exist.
    """
    rank = np.empty(n, dtype=np.intp)
    rank[aux_generator(seed, "folds").permutation(n)] = np.arange(n)
    fold = np.zeros(n, dtype=np.intp)
    for c in range(n_cells):
        rows = np.flatnonzero(inv == c)
        rows = rows[np.argsort(rank[rows], kind="stable")]
        fold[rows[1::2]] = 1
    return fold


def _oof_residuals(y, inv, n_cells, fold):
    """Residuals against the mean of the opposite fold, per cell."""
    resid = np.empty_like(y)
    for c in range(n_cells):
        rows = np.flatnonzero(inv == c)
        in0 = rows[fold[rows] == 0]
        in1 = rows[fold[rows] == 1]
        resid[in0] = y[in0] - y[in1].mean()
        resid[in1] = y[in1] - y[in0].mean()
    return resid


def empirical_levels(values, levels):
    """Left-continuous empirical quantiles at the given levels."""
    v = np.sort(np.asarray(values, dtype=float))
    idx = np.clip(np.ceil(np.asarray(levels) * len(v)).astype(np.intp) - 1, 0, len(v) - 1)
    return v[idx]


def isotonic_rearrange(values):
    """Nondecreasing L2 projection by pool-adjacent-violators."""
    v = np.asarray(values, dtype=float)
    level_val = []
    level_w = []
    for x in v:
        val, w = float(x), 1.0
        while level_val and level_val[-1] > val:
            pv, pw = level_val.pop(), level_w.pop()
            val = (val * w + pv * pw) / (w + pw)
            w += pw
        level_val.append(val)
        level_w.append(w)
    out = np.empty_like(v)
    i = 0
    for val, w in zip(level_val, level_w):
        out[i : i + int(w)] = val
        i += int(w)
    return out


# ---------------------------------------------------------------------------
# Per-node fits


def fit_root(column, node="root", categorical=False):
    """Root mechanism from one column: label frequencies or the empirical
    quantile of the sorted sample."""
    if len(column) == 0:
        raise FitError(f"node {node!r}: empty column")
    if categorical:
        labels = sorted(set(np.asarray(column, dtype=object).tolist()))
        counts = {lab: 0 for lab in labels}
        for v in np.asarray(column, dtype=object).tolist():
            counts[v] += 1
        n = len(column)
        return RootCategorical(
            node,
            values=[float(i) for i in range(len(labels))],
            probs=[counts[lab] / n for lab in labels],
            labels=labels,
        )
    return RootEmpirical(node, np.asarray(column, dtype=float))


def _mean_cells(y, keyer, uniq, inv):
    return {keyer.render(row): float(y[inv == i].mean()) for i, row in enumerate(uniq)}


def fit_additive(data: Dataset, node, parents, cfg: FitConfig):
    """Location-shift mechanism: cell means plus one shared residual pool."""
    parents = tuple(parents)
    y, keyer, uniq, inv = _cell_groups(data, node, parents, cfg)
    cells = _mean_cells(y, keyer, uniq, inv)
    if cfg.folds == 2:
        fold = _fold_split(inv, len(uniq), data.n, cfg.seed)
        resid = _oof_residuals(y, inv, len(uniq), fold)
    else:
        resid = y - np.array([cells[keyer.render(row)] for row in uniq])[inv]
    mech = AdditiveNoise(
        node, parents, ParentFn(node, parents, cells=cells, binning=keyer.binning), resid
    )
    mech.cross_fitted = cfg.folds == 2
    return mech


def fit_hetero_gaussian(data: Dataset, node, parents, cfg: FitConfig):
    """Gaussian-noise mechanism with per-cell mean and standard deviation."""
    parents = tuple(parents)
    y, keyer, uniq, inv = _cell_groups(data, node, parents, cfg)
    cells = _mean_cells(y, keyer, uniq, inv)
    if cfg.folds == 2:
        fold = _fold_split(inv, len(uniq), data.n, cfg.seed)
        resid = _oof_residuals(y, inv, len(uniq), fold)
    else:
        resid = y - np.array([cells[keyer.render(row)] for row in uniq])[inv]
    sq = resid**2
    std_cells = {
        keyer.render(row): float(np.sqrt(max(sq[inv == i].mean(), VARIANCE_FLOOR)))
        for i, row in enumerate(uniq)
    }
    mech = HeteroGaussian(
        node,
        parents,
        ParentFn(node, parents, cells=cells, binning=keyer.binning),
        ParentFn(node, parents, cells=std_cells, binning=keyer.binning),
    )
    mech.cross_fitted = cfg.folds == 2
    return mech


def fit_quantile_grid(data: Dataset, node, parents, cfg: FitConfig):
    """Per-cell empirical quantile grids at cfg.levels, made monotone."""
    parents = tuple(parents)
    y, keyer, uniq, inv = _cell_groups(data, node, parents, cfg)
    cells = {}
    for i, row in enumerate(uniq):
        grid = isotonic_rearrange(empirical_levels(y[inv == i], cfg.levels))
        cells[keyer.render(row)] = grid
    mech = QuantileTable(node, parents, cfg.levels, cells, binning=keyer.binning)
    mech.cross_fitted = False
    return mech


_METHODS = {
    "additive_empirical": fit_additive,
    "hetero_gaussian": fit_hetero_gaussian,
    "quantile_grid": fit_quantile_grid,
}


def fit_model(data: Dataset, dag: Dag, cfg: FitConfig, outcome: str) -> ScmModel:
    """Fit every node of the DAG: roots from their marginals, non-roots
    via cfg.method."""
    if outcome not in dag.names:
        raise FitError(f"outcome {outcome!r} is not a DAG node")
    if outcome in data.categorical:
        raise FitError("outcome must be numeric")
    for n in dag.names:
        data.column(n)  # raises on missing columns
    mechs = []
    for n, ps in zip(dag.names, dag.parents):
        if not ps:
            mechs.append(fit_root(data.column(n), node=n, categorical=n in data.categorical))
        else:
            mechs.append(_METHODS[cfg.method](data, n, ps, cfg))
    flags = ("fitted:" + cfg.method,)
    if cfg.method != "quantile_grid":
        flags += ("cross-fitted",) if cfg.folds == 2 else ("in-sample",)
    return ScmModel(dag, tuple(mechs), outcome=outcome, fitted=flags)


# ---------------------------------------------------------------------------
# DAG files


def dag_from_json(obj):
    """Parse a DAG config: nodes, parents, outcome, categorical columns."""
    if not isinstance(obj, dict):
        raise ModelError("DAG file must hold a JSON object")
    for key in ("outcome", "nodes"):
        if key not in obj:
            raise ModelError(f"DAG file is missing {key!r}")
    names, parents = [], []
    for nd in obj["nodes"]:
        if not isinstance(nd, dict) or "name" not in nd:
            raise ModelError("each DAG node needs a 'name'")
        names.append(str(nd["name"]))
        parents.append(tuple(str(p) for p in nd.get("parents", [])))
    if "variables" in obj and [str(v) for v in obj["variables"]] != names:
        raise ModelError("'variables' must list the node names in declaration order")
    dag = Dag(tuple(names), tuple(parents))
    outcome = str(obj["outcome"])
    if outcome not in dag.names:
        raise ModelError(f"outcome {outcome!r} is not a node")
    categorical = frozenset(str(c) for c in obj.get("categorical", ()))
    unknown = categorical - set(names)
    if unknown:
        raise ModelError(f"categorical lists unknown columns: {', '.join(sorted(unknown))}")
    if outcome in categorical:
        raise ModelError("outcome cannot be categorical")
    return dag, outcome, categorical


def read_dag(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid DAG file: {e.msg}", e.pos) from None
    return dag_from_json(obj)
