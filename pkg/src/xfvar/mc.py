"""Pick-freeze Monte Carlo engine shared by `sensitivity` and `scm`.

The engine consumes an outcome function of uniform noise, yfn(U) with U
of shape (m, n_vars), and produces batch-summed statistics under the
counter-based stream contract of `rng`. Replicate blocks are independent
work items; per-block partial sums are combined in block order, so
results are bit-identical for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DomainError, ZeroVarianceError


@dataclass
class EstimatorConfig:
    """Settings for pick-freeze estimation.

    samples is the number M of (E, E') pairs; batches is the number of
    nonoverlapping batches used for standard errors; max_vars caps the
    variable count for full-measure estimation (2**K hybrid evaluations
    per pair). threads: worker count for block processing, 0 = auto.
    """

    samples: int
    seed: int = 0
    batches: int = 20
    max_vars: int = 12
    threads: int = 1

    def __post_init__(self):
        if self.batches < 2:
            raise DomainError("need at least 2 stderr batches")
        if self.samples < self.batches:
            raise DomainError(f"samples ({self.samples}) must be >= batches ({self.batches})")
        if self.threads < 0:
            raise DomainError("threads must be >= 0 (0 = auto)")


@dataclass
class Estimate:
    """Monte Carlo point value with batch-means standard error."""

    value: float
    stderr: float
    samples: int


def _n_workers(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, threads)


def _batch_starts(m: int, nb: int) -> np.ndarray:
    return np.array([(b * m) // nb for b in range(nb)] + [m], dtype=np.int64)


def per_batch_sums(n_noise, cfg: EstimatorConfig, fill_block, n_stats):
    """Accumulate per-replicate statistics into per-batch sums.

    fill_block(E, Ep, add_row) must compute statistic rows for one block
    of replicates and hand each to add_row(row_index, values) with values
    of shape (block length,). Returns an (n_stats, batches) array of sums.
    """
    m = cfg.samples
    starts = _batch_starts(m, cfg.batches)
    acc = np.zeros((n_stats, cfg.batches))

    def work(block_index):
        g0 = block_index * rng.BLOCK_LEN
        g1 = min(g0 + rng.BLOCK_LEN, m)
        u = rng.uniform_block(cfg.seed, block_index, n_noise)[: g1 - g0]
        b0 = int(np.searchsorted(starts, g0, "right") - 1)
        b1 = int(np.searchsorted(starts, g1 - 1, "right") - 1)
        bounds = np.maximum(starts[b0 : b1 + 1] - g0, 0)
        part = np.zeros((n_stats, b1 - b0 + 1))

        def add_row(r, vals):
            part[r] += np.add.reduceat(vals, bounds)

        fill_block(u[:, :, 0], u[:, :, 1], add_row)
        return b0, part

    blocks = range(rng.n_blocks(m))
    workers = _n_workers(cfg.threads)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for b0, part in pool.map(work, blocks):
                acc[:, b0 : b0 + part.shape[1]] += part
    else:
        for bi in blocks:
            b0, part = work(bi)
            acc[:, b0 : b0 + part.shape[1]] += part
    return acc


def _batch_sizes(cfg: EstimatorConfig) -> np.ndarray:
    return np.diff(_batch_starts(cfg.samples, cfg.batches)).astype(float)


def _pooled_variance(sum_a, sum_a2, sum_b, sum_b2, counts):
    """Population variance of the pooled 2m baseline outputs per batch."""
    tot = 2.0 * counts
    mean = (sum_a + sum_b) / tot
    return (sum_a2 + sum_b2) / tot - mean**2


def _ratio_stderr(num, den, label="denominator"):
    """Batch-means stderr of a ratio of per-batch statistics."""
    if np.any(den <= 0):
        raise ZeroVarianceError(
            f"a standard-error batch has non-positive {label}; "
            "increase samples or reduce batches"
        )
    ratios = num / den
    return float(np.std(ratios, ddof=1) / np.sqrt(len(ratios)))


def hybrid(e, ep, cols):
    """Replace the given noise columns of e with the resampled copy."""
    h = e.copy()
    h[:, cols] = ep[:, cols]
    return h


def pickfreeze_totals(yfn, n_noise, query_cols, cfg: EstimatorConfig):
    """Totals for every nonempty query subset from common random pairs.

    query_cols[s] lists the noise columns resampled for query bitmask s
    (s = 1 .. 2**K - 1). The denominator is the all-coordinates
    pick-freeze numerator sum((y(E) - y(E'))^2) / (2M), an unbiased
    variance estimate built from the same pooled outputs, so the total of
    the full query set is exactly 1 whenever it resamples every noise
    coordinate. Returns (totals, stderrs, var_hat) with bitmask-indexed
    arrays of length 2**K.

    yfn is called exactly 2**K + 1 times per block: the two baselines
    plus one hybrid per nonempty subset, enumerated by increasing bitmask.
    """
    n_masks = len(query_cols)

    def fill_block(e, ep, add_row):
        y0 = yfn(e)
        y1 = yfn(ep)
        add_row(0, (y0 - y1) ** 2)
        for s in range(1, n_masks):
            ys = yfn(hybrid(e, ep, query_cols[s]))
            add_row(s, (y0 - ys) ** 2)

    acc = per_batch_sums(n_noise, cfg, fill_block, n_masks)
    base = acc[0]
    denom = float(base.sum())
    if denom <= 0.0:
        raise ZeroVarianceError("outcome shows no variation across resampled noise")
    if np.any(base <= 0.0):
        raise ZeroVarianceError(
            "a standard-error batch saw zero outcome variation; "
            "increase samples or reduce batches"
        )
    totals = np.zeros(n_masks)
    stderrs = np.zeros(n_masks)
    nb = cfg.batches
    for s in range(1, n_masks):
        totals[s] = float(acc[s].sum()) / denom
        ratios = acc[s] / base
        stderrs[s] = float(np.std(ratios, ddof=1) / np.sqrt(nb))
    var_hat = denom / (2.0 * cfg.samples)
    return totals, stderrs, var_hat


def upper_estimate(yfn, n_noise, cols, cfg: EstimatorConfig) -> Estimate:
    """Total (upper) index of one subset: half mean squared pick-freeze
    difference over the pooled empirical variance of the 2M baselines."""

    def fill_block(e, ep, add_row):
        y0 = yfn(e)
        y1 = yfn(ep)
        ys = yfn(hybrid(e, ep, cols))
        add_row(0, (y0 - ys) ** 2)
        add_row(1, y0)
        add_row(2, y0**2)
        add_row(3, y1)
        add_row(4, y1**2)

    acc = per_batch_sums(n_noise, cfg, fill_block, 5)
    counts = _batch_sizes(cfg)
    m = float(cfg.samples)
    vpool = _pooled_variance(acc[1].sum(), acc[2].sum(), acc[3].sum(), acc[4].sum(), np.array(m))
    if vpool <= 0.0:
        raise ZeroVarianceError("outcome variance estimate is zero")
    value = acc[0].sum() / (2.0 * m) / vpool
    vpool_b = _pooled_variance(acc[1], acc[2], acc[3], acc[4], counts)
    stderr = _ratio_stderr(acc[0] / (2.0 * counts), vpool_b, "variance")
    return Estimate(float(value), stderr, cfg.samples)


def lower_estimate(yfn, n_noise, keep_complement_cols, cfg: EstimatorConfig) -> Estimate:
    """Lower index of one subset: covariance of f(W) with the hybrid that
    keeps the subset and resamples everything else, over the pooled variance.

    keep_complement_cols lists the resampled (complement) noise columns.
    """

    def fill_block(e, ep, add_row):
        y0 = yfn(e)
        y1 = yfn(ep)
        g = yfn(hybrid(e, ep, keep_complement_cols))
        add_row(0, y0 * g)
        add_row(1, g)
        add_row(2, y0)
        add_row(3, y0**2)
        add_row(4, y1)
        add_row(5, y1**2)

    acc = per_batch_sums(n_noise, cfg, fill_block, 6)
    counts = _batch_sizes(cfg)
    m = float(cfg.samples)
    vpool = _pooled_variance(acc[2].sum(), acc[3].sum(), acc[4].sum(), acc[5].sum(), np.array(m))
    if vpool <= 0.0:
        raise ZeroVarianceError("outcome variance estimate is zero")
    cov = acc[0].sum() / m - (acc[2].sum() / m) * (acc[1].sum() / m)
    cov_b = acc[0] / counts - (acc[2] / counts) * (acc[1] / counts)
    vpool_b = _pooled_variance(acc[2], acc[3], acc[4], acc[5], counts)
    stderr = _ratio_stderr(cov_b, vpool_b, "variance")
    return Estimate(float(cov / vpool), stderr, cfg.samples)


def superset_estimate(yfn, n_noise, submask_cols, cfg: EstimatorConfig) -> Estimate:
    """Superset importance of one subset from its interaction contrast.

    submask_cols maps each submask of the subset (including 0 and the
    subset itself) to the noise columns it resamples; the contrast is the
    signed sum of hybrids, and the estimate is Var(contrast) over
    2**|S| times the pooled variance.
    """
    size = len(submask_cols).bit_length() - 1  # len is 2**|S|

    def fill_block(e, ep, add_row):
        y0 = yfn(e)
        y1 = yfn(ep)
        contrast = None
        for sub, (sign, cols) in submask_cols.items():
            ys = y0 if sub == 0 else yfn(hybrid(e, ep, cols))
            term = sign * ys
            contrast = term if contrast is None else contrast + term
        add_row(0, contrast)
        add_row(1, contrast**2)
        add_row(2, y0)
        add_row(3, y0**2)
        add_row(4, y1)
        add_row(5, y1**2)

    acc = per_batch_sums(n_noise, cfg, fill_block, 6)
    counts = _batch_sizes(cfg)
    m = float(cfg.samples)
    vpool = _pooled_variance(acc[2].sum(), acc[3].sum(), acc[4].sum(), acc[5].sum(), np.array(m))
    if vpool <= 0.0:
        raise ZeroVarianceError("outcome variance estimate is zero")
    var_i = acc[1].sum() / m - (acc[0].sum() / m) ** 2
    var_i_b = acc[1] / counts - (acc[0] / counts) ** 2
    vpool_b = _pooled_variance(acc[2], acc[3], acc[4], acc[5], counts)
    scale = 2.0**size
    stderr = _ratio_stderr(var_i_b / scale, vpool_b, "variance")
    return Estimate(float(var_i / (scale * vpool)), stderr, cfg.samples)
