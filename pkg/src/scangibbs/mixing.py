"""Exact total-variation mixing times and mixing-bound verification.

Worst-start TV distance to pi is non-increasing in t (TV contracts under
any stochastic map), which the doubling search exploits; the sequential
powering path follows the definition step by step and is the reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import chain
from .chain import Kernel, StateSpace, is_ergodic
from .model import BipartiteModel
from .spectral import NonErgodicError, deviation_norm, relaxation_time

DEFAULT_THRESHOLD = 1.0 / (2.0 * math.e)
DEFAULT_T_MAX = 10 ** 6


class MixingError(ValueError):
    pass


@dataclass(frozen=True)
class MixingReport:
    mixing_time: int | None
    threshold: float
    tv_curve: tuple
    truncated: bool
    unit: str


def tv_distance(mu, nu) -> float:
    """Half the L1 distance between two distributions."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise MixingError(f"length mismatch: {mu.shape} vs {nu.shape}")
    for name, v in (("mu", mu), ("nu", nu)):
        if abs(v.sum() - 1.0) > 1e-9:
            raise MixingError(f"{name} is not normalized: sum {v.sum()}")
    return 0.5 * float(np.abs(mu - nu).sum())


def _worst_tv(power: np.ndarray, pi: np.ndarray) -> float:
    return 0.5 * float(np.max(np.abs(power - pi[None, :]).sum(axis=1)))


def _renormalize(matrix: np.ndarray) -> np.ndarray:
    matrix = np.maximum(matrix, 0.0)
    return matrix / matrix.sum(axis=1)[:, None]


def exact_mixing_time(
    kernel: Kernel,
    space: StateSpace,
    threshold: float = DEFAULT_THRESHOLD,
    t_max: int = DEFAULT_T_MAX,
    method: str = "iterate",
) -> MixingReport:
    """Least t with worst-start TV distance to pi at most the threshold.

    method="iterate" multiplies the kernel step by step; "doubling"
    brackets the mixing time with repeated squaring and then bisects,
    which is exact because worst-start TV is non-increasing in t.
    """
    if t_max < 1:
        raise MixingError("t_max must be at least 1")
    if not is_ergodic(kernel):
        raise NonErgodicError(f"kernel {kernel.label} is not ergodic")
    if method == "iterate":
        return _mixing_time_iterate(kernel, space, threshold, t_max)
    if method == "doubling":
        return _mixing_time_doubling(kernel, space, threshold, t_max)
    raise MixingError(f"unknown method {method!r}")


def _mixing_time_iterate(kernel, space, threshold, t_max) -> MixingReport:
    pi = space.pi
    curve = [(0, 1.0 - float(pi.min()))]
    if curve[0][1] <= threshold:
        return MixingReport(0, threshold, tuple(curve), False, kernel.unit)
    power = kernel.matrix.copy()
    for t in range(1, t_max + 1):
        worst = _worst_tv(power, pi)
        curve.append((t, worst))
        if worst <= threshold:
            return MixingReport(t, threshold, tuple(curve), False, kernel.unit)
        power = _renormalize(power @ kernel.matrix)
    return MixingReport(None, threshold, tuple(curve), True, kernel.unit)


def matrix_power(kernel: Kernel, t: int) -> np.ndarray:
    """Kernel power by binary exponentiation with row renormalization."""
    if t < 0:
        raise MixingError("negative power")
    result = np.eye(kernel.size)
    base = kernel.matrix.copy()
    while t:
        if t & 1:
            result = _renormalize(result @ base)
        t >>= 1
        if t:
            base = _renormalize(base @ base)
    return result


def _mixing_time_doubling(kernel, space, threshold, t_max) -> MixingReport:
    pi = space.pi
    curve = {0: 1.0 - float(pi.min())}
    if curve[0] <= threshold:
        return MixingReport(0, threshold, ((0, curve[0]),), False, kernel.unit)

    def report(mixing_time, truncated):
        tv_curve = tuple(sorted(curve.items()))
        return MixingReport(mixing_time, threshold, tv_curve, truncated, kernel.unit)

    # Bracket with squared powers; squares[k] = P^(2^k).
    squares = [kernel.matrix.copy()]
    t = 1
    curve[1] = _worst_tv(squares[0], pi)
    while curve[t] > threshold:
        if t >= t_max:
            return report(None, True)
        squares.append(_renormalize(squares[-1] @ squares[-1]))
        t *= 2
        curve[t] = _worst_tv(squares[-1], pi)
    if t == 1:
        return report(1, False)

    def power_of(steps):
        result = None
        k = 0
        while steps:
            if steps & 1:
                block = squares[k]
                result = block if result is None else _renormalize(result @ block)
            steps >>= 1
            k += 1
        return result

    lo, hi = t // 2, t  # worst TV above threshold at lo, at or below at hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        curve[mid] = _worst_tv(power_of(mid), pi)
        if curve[mid] <= threshold:
            hi = mid
        else:
            lo = mid
    if hi > t_max:
        return report(None, True)
    return report(hi, False)


def rational_ru_kernel(
    model: BipartiteModel, space: StateSpace, lazy: bool = True
) -> list[list[Fraction]]:
    """Exact random-update kernel for models with all-zero soft factors.

    With a uniform stationary distribution every conditional probability
    is a ratio of support counts, so the kernel is rational.
    """
    for (u, v, table) in model.edges:
        if np.any(np.asarray(table) != 0.0):
            raise MixingError("rational kernel requires all-zero factor tables")
    if np.any(model.unaries != 0.0):
        raise MixingError("rational kernel requires all-zero unary tables")
    N, n = space.size, space.n_variables
    S = space.domain_size
    matrix = [[Fraction(0) for _ in range(N)] for _ in range(N)]
    for i in range(N):
        config = space.configs[i].copy()
        for x in range(n):
            targets = []
            for s in range(S):
                flipped = config.copy()
                flipped[x] = s
                try:
                    targets.append(space.index_of(flipped))
                except chain.ChainError:
                    pass
            share = Fraction(1, n * len(targets))
            for j in targets:
                matrix[i][j] += share
    if lazy:
        for i in range(N):
            for j in range(N):
                matrix[i][j] = matrix[i][j] / 2
            matrix[i][i] += Fraction(1, 2)
    return matrix


def rational_mixing_time(
    matrix: list[list[Fraction]],
    pi: list[Fraction],
    threshold: float = DEFAULT_THRESHOLD,
    t_max: int = 10 ** 4,
) -> int:
    """Mixing time by exact rational powering; intended for tiny chains."""
    N = len(matrix)

    def worst_tv(power):
        worst = Fraction(0)
        for row in power:
            tv = sum(abs(p - q) for p, q in zip(row, pi)) / 2
            worst = max(worst, tv)
        return worst

    identity = [
        [Fraction(1) if i == j else Fraction(0) for j in range(N)] for i in range(N)
    ]
    if worst_tv(identity) <= threshold:
        return 0
    power = [row[:] for row in matrix]
    for t in range(1, t_max + 1):
        if worst_tv(power) <= threshold:
            return t
        power = [
            [
                sum(power[i][k] * matrix[k][j] for k in range(N))
                for j in range(N)
            ]
            for i in range(N)
        ]
    raise MixingError(f"rational powering did not mix within {t_max} steps")


def verify_mixing_bounds(
    model: BipartiteModel,
    cap: int = 1024,
    threshold: float = DEFAULT_THRESHOLD,
    t_max: int = DEFAULT_T_MAX,
    lazy: bool = True,
) -> dict:
    """Check the relaxation/mixing sandwich and the scan mixing bounds.

    (a) T_rel(RU) - 1 <= T_mix(RU) <= T_rel(RU) log(2e / pi_min)
    (b) T_mix(AS) <= log(4e^2 / pi_min) T_rel(AS)
    (c) T_mix(AS) <= log(4e^2 / pi_min) (T_mix(RU) + 1)
    """
    space = chain.enumerate_state_space(model, cap=cap)
    p_ru = chain.random_update_kernel(model, space, lazy=lazy)
    p_as = chain.scan_kernels(model, space)["P_AS"]
    pi_min = float(space.pi.min())

    t_rel_ru = relaxation_time(p_ru, space).relaxation_time
    t_rel_as = relaxation_time(p_as, space).relaxation_time
    mix_ru = exact_mixing_time(p_ru, space, threshold, t_max, method="doubling")
    mix_as = exact_mixing_time(p_as, space, threshold, t_max, method="doubling")
    if mix_ru.truncated or mix_as.truncated:
        raise MixingError("mixing-time computation truncated; raise t_max")
    t_mix_ru, t_mix_as = mix_ru.mixing_time, mix_as.mixing_time

    log_2e = math.log(2.0 * math.e / pi_min)
    log_4e2 = math.log(4.0 * math.e ** 2 / pi_min)
    sandwich = (t_rel_ru - 1.0 <= t_mix_ru) and (t_mix_ru <= t_rel_ru * log_2e)
    scan_bound = t_mix_as <= log_4e2 * t_rel_as
    cross_bound = t_mix_as <= log_4e2 * (t_mix_ru + 1)
    return {
        "pi_min": pi_min,
        "t_rel_ru": t_rel_ru,
        "t_rel_as": t_rel_as,
        "t_mix_ru": t_mix_ru,
        "t_mix_as": t_mix_as,
        "sandwich_holds": bool(sandwich),
        "scan_bound_holds": bool(scan_bound),
        "cross_bound_holds": bool(cross_bound),
        "all_hold": bool(sandwich and scan_bound and cross_bound),
    }


def verify_fill_inequality(
    kernel: Kernel,
    space: StateSpace,
    t_samples=(1, 2, 4, 8, 16, 32),
    slack: float = 1e-10,
) -> dict:
    """Check TV(P^t(s,.), pi)^2 <= (1 - gap(R(P)))^t / pi(s) at sampled t."""
    if not is_ergodic(kernel):
        raise NonErgodicError(f"kernel {kernel.label} is not ergodic")
    rev = chain.reversibilization(kernel, space)
    contraction = deviation_norm(rev, space)  # equals 1 - gap(R(P))
    pi = space.pi
    results = {}
    holds = True
    for t in t_samples:
        power = matrix_power(kernel, int(t))
        tv = 0.5 * np.abs(power - pi[None, :]).sum(axis=1)
        margin = contraction ** t / pi + slack - tv ** 2
        worst = float(margin.min())
        results[int(t)] = worst
        holds = holds and worst >= 0.0
    return {"holds": bool(holds), "worst_margin_by_t": results, "contraction": contraction}
