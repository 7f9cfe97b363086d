import math
from fractions import Fraction

import numpy as np
import pytest

import scangibbs as sg
from scangibbs import chain, lumped, mixing, spectral
from scangibbs.lumped import (
    LumpingError,
    lumped_as_kernel,
    lumped_index,
    lumped_ru_kernel,
    lumped_state_space,
    quotient_kernel,
)


def test_lumped_index_layout():
    assert lumped_index(3, "L", 0) == 0
    assert lumped_index(3, "L", 3) == 3
    assert lumped_index(3, "R", 1) == 4
    assert lumped_index(3, "R", 0) == 0  # shared empty set
    with pytest.raises(LumpingError):
        lumped_index(3, "L", 4)
    with pytest.raises(LumpingError):
        lumped_index(3, "X", 1)


def test_lumped_state_space_pi():
    space = lumped_state_space(3)
    assert space.size == 7
    total = 2 * 2 ** 3 - 1
    expected = [math.comb(3, k) / total for k in range(4)]
    expected += [math.comb(3, k) / total for k in range(1, 4)]
    assert space.pi == pytest.approx(expected)
    assert space.pi.sum() == pytest.approx(1.0, abs=1e-15)


def test_lumped_kernels_are_stochastic_and_stationary():
    for n in (1, 2, 5, 10):
        space = lumped_state_space(n)
        for kernel in (
            lumped_ru_kernel(n, lazy=True),
            lumped_ru_kernel(n, lazy=False),
            lumped_as_kernel(n),
        ):
            assert kernel.matrix.sum(axis=1) == pytest.approx(
                np.ones(kernel.size), abs=1e-12
            )
            assert chain.stationarity_defect(kernel, space) <= 1e-12


def test_lumped_ru_reversible():
    space = lumped_state_space(4)
    for lazy in (True, False):
        kernel = lumped_ru_kernel(4, lazy=lazy)
        assert chain.detailed_balance_violation(kernel, space) <= 1e-12


def test_lump_map_counts_occupancy(hardcore_k22):
    space = sg.enumerate_state_space(hardcore_k22)
    lm = sg.hardcore_lump_map(space, 2)
    assert sorted(lm.tolist()) == [0, 1, 1, 2, 3, 3, 4]


def test_lump_map_rejects_wrong_width(hardcore_k33):
    space = sg.enumerate_state_space(hardcore_k33)
    with pytest.raises(LumpingError):
        sg.hardcore_lump_map(space, 2)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_quotients_match_closed_forms(n):
    model = sg.build_hardcore_complete_bipartite(n)
    space = sg.enumerate_state_space(model)
    lm = sg.hardcore_lump_map(space, n)

    p_ru = sg.random_update_kernel(model, space, lazy=True)
    assert sg.lumpability_check(p_ru, lm)
    q_ru = quotient_kernel(p_ru, lm, chain.UNIT_VARIABLE, "q_ru")
    assert np.max(np.abs(q_ru.matrix - lumped_ru_kernel(n, lazy=True).matrix)) <= 1e-12

    p_ru_nl = sg.random_update_kernel(model, space, lazy=False)
    q_nl = quotient_kernel(p_ru_nl, lm, chain.UNIT_VARIABLE, "q_nl")
    assert np.max(np.abs(q_nl.matrix - lumped_ru_kernel(n, lazy=False).matrix)) <= 1e-12

    p_as = sg.scan_kernels(model, space)["P_AS"]
    assert sg.lumpability_check(p_as, lm)
    q_as = quotient_kernel(p_as, lm, chain.UNIT_EPOCH, "q_as")
    assert np.max(np.abs(q_as.matrix - lumped_as_kernel(n).matrix)) <= 1e-12


def test_lumpability_check_rejects_bad_map(hardcore_k22):
    space = sg.enumerate_state_space(hardcore_k22)
    p_ru = sg.random_update_kernel(hardcore_k22, space)
    bad_map = np.zeros(space.size, dtype=np.int64)
    bad_map[0] = 1  # splits the empty set away from one occupied state
    bad_map[1] = 1
    assert not sg.lumpability_check(p_ru, bad_map)
    with pytest.raises(LumpingError, match="not lumpable"):
        quotient_kernel(p_ru, bad_map, chain.UNIT_VARIABLE, "bad")


@pytest.mark.parametrize(
    "n,mix_ru,mix_as",
    [(2, 32, 3), (3, 81, 5), (4, 171, 9), (6, 666, 33), (8, 2497, 129)],
)
def test_lumped_mixing_frozen_values(n, mix_ru, mix_as):
    space = lumped_state_space(n)
    ru = mixing.exact_mixing_time(
        lumped_ru_kernel(n, lazy=True), space, method="doubling"
    )
    as_ = mixing.exact_mixing_time(lumped_as_kernel(n), space, method="doubling")
    assert ru.mixing_time == mix_ru
    assert as_.mixing_time == mix_as


@pytest.mark.parametrize("n", [2, 3, 4])
def test_lumped_matches_full_chain(n):
    model = sg.build_hardcore_complete_bipartite(n)
    space = sg.enumerate_state_space(model)
    lspace = lumped_state_space(n)
    p_ru = sg.random_update_kernel(model, space, lazy=True)
    full = mixing.exact_mixing_time(p_ru, space, method="doubling").mixing_time
    small = mixing.exact_mixing_time(
        lumped_ru_kernel(n, lazy=True), lspace, method="doubling"
    ).mixing_time
    assert full == small
    t_full = spectral.relaxation_time(p_ru, space).relaxation_time
    t_small = spectral.relaxation_time(lumped_ru_kernel(n, lazy=True), lspace)
    assert t_small.relaxation_time == pytest.approx(t_full, rel=1e-9)


def test_lumped_scan_relaxation_closed_form():
    # observed: T_rel of the lumped one-epoch scan equals 2^n exactly
    for n in (2, 3, 4, 6):
        space = lumped_state_space(n)
        report = spectral.relaxation_time(lumped_as_kernel(n), space)
        assert report.relaxation_time == pytest.approx(2.0 ** n, rel=1e-9)


def test_lumped_large_n_runs_fast():
    n = 30
    space = lumped_state_space(n)
    report = mixing.exact_mixing_time(
        lumped_as_kernel(n), space, method="doubling", t_max=10 ** 10
    )
    assert report.mixing_time == 2 ** (n - 1) + 1
