import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import scangibbs as sg
from scangibbs.model import (
    BipartiteModel,
    BipartiteStructureError,
    HamiltonianRangeError,
    ModelError,
)


def ising_edge(weight):
    return np.array([[weight, 0.0], [0.0, weight]])


def test_hamiltonian_zero_factors(zero_rbm_22):
    for config in ([0, 0, 0, 0], [1, 1, 1, 1], [1, 0, 1, 0]):
        assert sg.hamiltonian(zero_rbm_22, config) == 0.0


def test_hamiltonian_single_rbm_factor():
    model = sg.build_rbm(np.array([[1.5]]), np.zeros(1), np.zeros(1))
    assert sg.hamiltonian(model, [1, 1]) == pytest.approx(1.5)
    assert sg.hamiltonian(model, [1, 0]) == 0.0


def test_hamiltonian_ising_factor():
    model = BipartiteModel(1, 1, 2, ((0, 1, ising_edge(2.0)),), np.zeros((2, 2)))
    assert sg.hamiltonian(model, [0, 0]) == pytest.approx(2.0)
    assert sg.hamiltonian(model, [1, 1]) == pytest.approx(2.0)
    assert sg.hamiltonian(model, [0, 1]) == 0.0


def test_hamiltonian_edge_order_invariant():
    rng = np.random.default_rng(5)
    weights = rng.uniform(-1, 1, (3, 3))
    model = sg.build_rbm(weights, rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3))
    shuffled = BipartiteModel(
        model.n1, model.n2, 2, tuple(reversed(model.edges)), model.unaries
    )
    for _ in range(10):
        config = rng.integers(0, 2, 6)
        assert sg.hamiltonian(model, config) == pytest.approx(
            sg.hamiltonian(shuffled, config)
        )


def test_unnormalized_weight_hardcore(hardcore_k22):
    assert sg.unnormalized_weight(hardcore_k22, [1, 0, 1, 0]) == 0.0
    assert sg.unnormalized_weight(hardcore_k22, [0, 0, 0, 0]) == 1.0
    assert sg.unnormalized_weight(hardcore_k22, [1, 1, 0, 0]) == 1.0


def test_unnormalized_weight_zero_rbm(zero_rbm_22):
    assert sg.unnormalized_weight(zero_rbm_22, [1, 0, 0, 1]) == 1.0


def test_unnormalized_weight_range_guard():
    model = sg.build_rbm(np.array([[800.0]]), np.zeros(1), np.zeros(1))
    with pytest.raises(HamiltonianRangeError):
        sg.unnormalized_weight(model, [1, 1])


def test_conditional_uniform_for_zero_weights(zero_rbm_22):
    for x in range(4):
        dist = sg.conditional_distribution(zero_rbm_22, [0, 1, 1, 0], x)
        assert dist == pytest.approx([0.5, 0.5])


def test_conditional_hardcore_forced(hardcore_k22):
    # right vertex occupied forces the left ones unoccupied
    dist = sg.conditional_distribution(hardcore_k22, [0, 0, 1, 0], 0)
    assert dist == pytest.approx([1.0, 0.0])


def test_conditional_single_edge_logistic():
    w = 0.8
    model = sg.build_rbm(np.array([[w]]), np.zeros(1), np.zeros(1))
    dist = sg.conditional_distribution(model, [0, 1], 0)
    assert dist == pytest.approx([1 / (1 + math.exp(w)), math.exp(w) / (1 + math.exp(w))])


def test_conditional_all_weights_zero_error(hardcore_k22):
    # the configuration already violates the constraint away from the
    # updated variable
    with pytest.raises(ModelError, match="all conditional weights zero"):
        sg.conditional_distribution(hardcore_k22, [1, 0, 1, 0], 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.data())
def test_conditional_depends_only_on_opposite_partition(seed, data):
    model = sg.random_bipartite_model(3, 3, 6, -1.5, 1.5, seed=seed)
    rng = np.random.default_rng(seed)
    x = data.draw(st.integers(0, model.n - 1))
    config_a = rng.integers(0, 2, model.n)
    config_b = config_a.copy()
    if x < model.n1:
        config_b[:model.n1] = rng.integers(0, 2, model.n1)
    else:
        config_b[model.n1:] = rng.integers(0, 2, model.n2)
    assert sg.conditional_distribution(model, config_a, x) == pytest.approx(
        sg.conditional_distribution(model, config_b, x)
    )


def test_build_rbm_uniform_pi():
    model = sg.build_rbm(np.zeros((1, 1)), np.zeros(1), np.zeros(1))
    space = sg.enumerate_state_space(model)
    assert space.size == 4
    assert space.pi == pytest.approx([0.25] * 4)


def test_build_rbm_hand_sum():
    bias1, bias2 = np.array([0.1, 0.2]), np.array([-0.3, 0.4])
    model = sg.build_rbm(np.ones((2, 2)), bias1, bias2)
    assert sg.hamiltonian(model, [1, 1, 1, 1]) == pytest.approx(
        4.0 + bias1.sum() + bias2.sum()
    )
    sg.validate_bipartite(model)


def test_build_rbm_dimension_mismatch():
    with pytest.raises(ModelError):
        sg.build_rbm(np.ones((2, 2)), np.zeros(3), np.zeros(2))


def test_build_dbm_two_layers_matches_rbm():
    rng = np.random.default_rng(0)
    w = rng.uniform(-1, 1, (2, 3))
    b1, b2 = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 3)
    rbm = sg.build_rbm(w, b1, b2)
    dbm = sg.build_dbm([2, 3], [w], [b1, b2])
    assert dbm.n1 == rbm.n1 and dbm.n2 == rbm.n2
    for _ in range(10):
        config = rng.integers(0, 2, 5)
        assert sg.hamiltonian(dbm, config) == pytest.approx(sg.hamiltonian(rbm, config))


def test_build_dbm_four_layers():
    sizes = [3, 3, 3, 3]
    weights = [np.ones((3, 3)) for _ in range(3)]
    biases = [np.zeros(3) for _ in range(4)]
    dbm = sg.build_dbm(sizes, weights, biases)
    assert dbm.n1 == 6 and dbm.n2 == 6
    assert len(dbm.edges) == 27
    sg.validate_bipartite(dbm)


def test_build_hardcore_counts():
    assert sg.enumerate_state_space(sg.build_hardcore_complete_bipartite(2)).size == 7
    space = sg.enumerate_state_space(sg.build_hardcore_complete_bipartite(3))
    assert space.size == 15  # 2 * 2^3 - 1
    assert space.pi == pytest.approx([1 / 15] * 15)


def test_random_model_zero_edges():
    model = sg.random_bipartite_model(3, 3, 0, 0.0, 1.0, seed=1)
    assert model.edges == ()


def test_random_model_deterministic():
    a = sg.random_bipartite_model(4, 5, 7, -1.0, 1.0, seed=99)
    b = sg.random_bipartite_model(4, 5, 7, -1.0, 1.0, seed=99)
    assert [(u, v) for u, v, _ in a.edges] == [(u, v) for u, v, _ in b.edges]
    for (_, _, ta), (_, _, tb) in zip(a.edges, b.edges):
        assert np.array_equal(ta, tb)


def test_random_model_large_distinct():
    model = sg.random_bipartite_model(100, 100, 500, 0.1, 0.7, seed=1)
    pairs = {(u, v) for u, v, _ in model.edges}
    assert len(pairs) == 500
    for (u, v, table) in model.edges:
        assert 0 <= u < 100 and 100 <= v < 200
        assert 0.1 <= table[1, 1] <= 0.7


def test_random_model_too_many_edges():
    with pytest.raises(ModelError):
        sg.random_bipartite_model(2, 2, 5, 0.0, 1.0, seed=0)


def test_validate_bipartite_rejects_intra_partition_edge():
    edges = ((0, 1, np.zeros((2, 2))),)  # both endpoints in partition one
    model = BipartiteModel(2, 1, 2, edges, np.zeros((3, 2)))
    with pytest.raises(BipartiteStructureError, match=r"\(0, 1\)"):
        sg.validate_bipartite(model)


def test_model_from_json_kinds():
    rbm = sg.model_from_json(json.dumps(
        {"kind": "rbm", "weights": [[0.5]], "bias1": [0.0], "bias2": [0.1]}
    ))
    assert rbm.n == 2
    hc = sg.model_from_json(json.dumps({"kind": "hardcore_knn", "n": 2}))
    assert hc.hard_constraint == "hardcore"
    rnd = sg.model_from_json(json.dumps(
        {"kind": "random_rbm", "n1": 2, "n2": 2, "m": 3,
         "weight_low": 0.0, "weight_high": 1.0, "seed": 5}
    ))
    assert len(rnd.edges) == 3


def test_model_from_json_mrf_partition_remap():
    obj = {
        "kind": "mrf",
        "partition": [1, 0, 1],
        "unary": [[0.0, 0.2], [0.0, -0.1], [0.0, 0.3]],
        "edges": [
            {"u": 1, "v": 0, "table": [0.0, 0.0, 0.0, 0.5]},
            {"u": 1, "v": 2, "table": [0.0, 0.0, 0.0, -0.4]},
        ],
    }
    model = sg.model_from_json(json.dumps(obj))
    assert model.n1 == 1 and model.n2 == 2
    sg.validate_bipartite(model)
    # original variable 1 is the lone partition-zero variable, now index 0
    assert sg.hamiltonian(model, [1, 1, 1]) == pytest.approx(0.5 - 0.4 + 0.4)


def test_model_from_json_malformed():
    with pytest.raises(ModelError, match="byte offset"):
        sg.model_from_json("{not json")
