"""Grand-coupling coalescence times for large monotone models.

Two chains start from the all-ones and all-zeros configurations and
evolve under shared randomness: each site update draws one uniform and
sets the site to 1 in each chain iff the uniform falls below that
chain's conditional probability of 1. For ferromagnetic Boolean models
the top chain dominates the bottom one at every step, so their meeting
time dominates the coupling time of every start pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .model import BipartiteModel, ModelError

SAMPLER_RANDOM_UPDATE = "random_update"
SAMPLER_ALTERNATING_SCAN = "alternating_scan"

_RNG_BLOCK = 4096


class MonotonicityError(ModelError):
    pass


class CouplingInvariantError(RuntimeError):
    """The sandwich or coalescence-permanence invariant failed."""


@dataclass(frozen=True)
class CouplingReport:
    sampler: str
    samples: tuple
    replicates: int
    truncated_count: int
    mean: float
    median: float
    q90: float


def monotonicity_precondition(model: BipartiteModel) -> None:
    """Require a Boolean, unconstrained, ferromagnetic RBM-style model."""
    if model.domain_size != 2:
        raise MonotonicityError("monotone coupling requires Boolean variables")
    if model.hard_constraint is not None:
        raise MonotonicityError(
            f"hard constraint {model.hard_constraint!r} is not attractive"
        )
    bad = []
    for (u, v, table) in model.edges:
        table = np.asarray(table)
        if table[0, 0] != 0.0 or table[0, 1] != 0.0 or table[1, 0] != 0.0:
            raise MonotonicityError(
                f"edge ({u}, {v}) is not an RBM-style [0,0,0,W] factor"
            )
        if table[1, 1] < 0.0:
            bad.append((u, v, float(table[1, 1])))
    if bad:
        raise MonotonicityError(f"negative-weight edges break monotonicity: {bad}")


def _couplings_of(model: BipartiteModel):
    """Bias vector, per-site neighbor lists, and the cross-weight matrix."""
    n, n1, n2 = model.n, model.n1, model.n2
    bias = (model.unaries[:, 1] - model.unaries[:, 0]).astype(float)
    neighbors = [[] for _ in range(n)]
    rows, cols, vals = [], [], []
    for (u, v, table) in model.edges:
        w = float(np.asarray(table)[1, 1])
        neighbors[u].append((v, w))
        neighbors[v].append((u, w))
        rows.append(u)
        cols.append(v - n1)
        vals.append(w)
    nbr_idx = [np.array([i for i, _ in lst], dtype=np.int64) for lst in neighbors]
    nbr_w = [np.array([w for _, w in lst]) for lst in neighbors]
    cross = sp.csr_array((vals, (rows, cols)), shape=(n1, n2))
    return bias, nbr_idx, nbr_w, cross


def grand_coupling_time(
    model: BipartiteModel,
    sampler: str,
    seed: int,
    replicates: int,
    max_updates: int,
    lazy: bool = False,
    start_top=None,
    start_bottom=None,
) -> CouplingReport:
    """Coalescence-time distribution over independent replicates.

    Times are reported in variable updates; the alternating scan checks
    coalescence only at epoch boundaries, so its times are multiples of
    the variable count. Each replicate owns a counter-based stream keyed
    by (seed, replicate).
    """
    monotonicity_precondition(model)
    if sampler not in (SAMPLER_RANDOM_UPDATE, SAMPLER_ALTERNATING_SCAN):
        raise ModelError(f"unknown sampler {sampler!r}")
    if replicates < 1:
        raise ModelError("need at least one replicate")
    n = model.n
    bias, nbr_idx, nbr_w, cross = _couplings_of(model)
    top0 = np.ones(n, dtype=np.int8) if start_top is None else np.asarray(start_top, dtype=np.int8)
    bot0 = np.zeros(n, dtype=np.int8) if start_bottom is None else np.asarray(start_bottom, dtype=np.int8)
    if np.any(top0 < bot0):
        raise ModelError("top start must dominate bottom start coordinatewise")

    samples = []
    truncated = 0
    for rep in range(replicates):
        rng = np.random.Generator(np.random.Philox(key=[np.uint64(seed), np.uint64(rep)]))
        if sampler == SAMPLER_RANDOM_UPDATE:
            time = _run_random_update(
                model, bias, nbr_idx, nbr_w, rng, max_updates, lazy, top0, bot0
            )
        else:
            time = _run_alternating_scan(
                model, bias, cross, rng, max_updates, lazy, top0, bot0
            )
        if time is None:
            truncated += 1
        else:
            samples.append(time)

    samples.sort()
    arr = np.array(samples, dtype=float)
    if arr.size:
        mean = float(arr.mean())
        median = float(np.median(arr))
        q90 = float(np.quantile(arr, 0.9))
    else:
        mean = median = q90 = float("nan")
    return CouplingReport(
        sampler=sampler,
        samples=tuple(samples),
        replicates=replicates,
        truncated_count=truncated,
        mean=mean,
        median=median,
        q90=q90,
    )


def _prob_of_one(bias, nbr_idx, nbr_w, state, x) -> float:
    field = bias[x]
    idx = nbr_idx[x]
    if idx.size:
        field += float(nbr_w[x] @ state[idx])
    return float(expit(field))


def _run_random_update(
    model, bias, nbr_idx, nbr_w, rng, max_updates, lazy, top0, bot0
):
    n = model.n
    top = top0.copy()
    bottom = bot0.copy()
    disagreements = int(np.sum(top != bottom))
    if disagreements == 0:
        _check_suffix_random(model, bias, nbr_idx, nbr_w, rng, top, bottom, lazy)
        return 0
    updates = 0
    while updates < max_updates:
        block = min(_RNG_BLOCK, max_updates - updates)
        sites = rng.integers(0, n, size=block)
        uniforms = rng.random(block)
        holds = rng.random(block) < 0.5 if lazy else None
        for i in range(block):
            updates += 1
            if lazy and holds[i]:
                continue
            x = int(sites[i])
            u = uniforms[i]
            new_top = u < _prob_of_one(bias, nbr_idx, nbr_w, top, x)
            new_bot = u < _prob_of_one(bias, nbr_idx, nbr_w, bottom, x)
            if new_bot and not new_top:
                raise CouplingInvariantError("sandwich violated at a site update")
            was_diff = top[x] != bottom[x]
            top[x] = new_top
            bottom[x] = new_bot
            now_diff = top[x] != bottom[x]
            disagreements += int(now_diff) - int(was_diff)
            if disagreements == 0:
                _check_suffix_random(
                    model, bias, nbr_idx, nbr_w, rng, top, bottom, lazy
                )
                return updates
    return None


def _check_suffix_random(model, bias, nbr_idx, nbr_w, rng, top, bottom, lazy):
    """Coalesced chains must stay identical; spot-check one epoch length."""
    n = model.n
    sites = rng.integers(0, n, size=n)
    uniforms = rng.random(n)
    holds = rng.random(n) < 0.5 if lazy else np.zeros(n, dtype=bool)
    for x, u, hold in zip(sites, uniforms, holds):
        if hold:
            continue
        x = int(x)
        new_top = u < _prob_of_one(bias, nbr_idx, nbr_w, top, x)
        new_bot = u < _prob_of_one(bias, nbr_idx, nbr_w, bottom, x)
        top[x] = new_top
        bottom[x] = new_bot
    if np.any(top != bottom):
        raise CouplingInvariantError("coalesced chains separated")


def _run_alternating_scan(model, bias, cross, rng, max_updates, lazy, top0, bot0):
    # Partition one updates are mutually independent given partition two
    # (and vice versa), so each half scan vectorizes; the per-site shared
    # uniforms are drawn in scan order.
    n, n1 = model.n, model.n1
    b1, b2 = bias[:n1], bias[n1:]
    top1, top2 = top0[:n1].astype(float), top0[n1:].astype(float)
    bot1, bot2 = bot0[:n1].astype(float), bot0[n1:].astype(float)

    def coalesced():
        return np.array_equal(top1, bot1) and np.array_equal(top2, bot2)

    def half_scan(state_opposite_top, state_opposite_bot, bias_vec, mat):
        u = rng.random(bias_vec.shape[0])
        if lazy:
            hold = rng.random(bias_vec.shape[0]) < 0.5
        p_top = expit(bias_vec + mat @ state_opposite_top)
        p_bot = expit(bias_vec + mat @ state_opposite_bot)
        new_top = (u < p_top).astype(float)
        new_bot = (u < p_bot).astype(float)
        if np.any(new_bot > new_top):
            raise CouplingInvariantError("sandwich violated during a scan")
        return new_top, new_bot, (hold if lazy else None)

    def epoch():
        nonlocal top1, top2, bot1, bot2
        new_top1, new_bot1, hold1 = half_scan(top2, bot2, b1, cross)
        if lazy:
            new_top1 = np.where(hold1, top1, new_top1)
            new_bot1 = np.where(hold1, bot1, new_bot1)
        top1, bot1 = new_top1, new_bot1
        new_top2, new_bot2, hold2 = half_scan(top1, bot1, b2, cross.T)
        if lazy:
            new_top2 = np.where(hold2, top2, new_top2)
            new_bot2 = np.where(hold2, bot2, new_bot2)
        top2, bot2 = new_top2, new_bot2

    if coalesced():
        epoch()
        if not coalesced():
            raise CouplingInvariantError("coalesced chains separated")
        return 0
    updates = 0
    while updates < max_updates:
        epoch()
        updates += n
        if coalesced():
            epoch()
            if not coalesced():
                raise CouplingInvariantError("coalesced chains separated")
            return updates
    return None
