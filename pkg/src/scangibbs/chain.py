"""State-space enumeration and exact dense transition kernels.

Kernels are dense row-stochastic float64 matrices tagged with the time
unit one application of the matrix represents: a single variable update,
a half scan of one partition, a full epoch, or a composite operator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .model import (
    BipartiteModel,
    HAMILTONIAN_RANGE,
    HamiltonianRangeError,
    validate_bipartite,
    violates_constraints,
)

UNIT_VARIABLE = "variable_update"
UNIT_HALF_EPOCH = "half_epoch"
UNIT_EPOCH = "epoch"
UNIT_COMPOSITE = "composite"

DEFAULT_CAP = 4096
# Hard limit on the full configuration grid we are willing to sweep while
# enumerating the support; larger instances belong to the lumped module.
_ENUMERATION_LIMIT = 1 << 22

_ROW_SUM_TOL = 1e-12
_NEGATIVE_TOL = 1e-15
_STATIONARITY_TOL = 1e-10


class ChainError(ValueError):
    pass


class StateSpaceCapError(ChainError):
    pass


class StationarityError(ChainError):
    pass


class NumericalError(ChainError):
    pass


@dataclass(frozen=True)
class StateSpace:
    """All positive-weight configurations, lexicographically ordered."""

    configs: np.ndarray  # (N, n) integer assignments
    pi: np.ndarray       # (N,) stationary probabilities
    domain_size: int

    @property
    def size(self) -> int:
        return self.configs.shape[0]

    @property
    def n_variables(self) -> int:
        return self.configs.shape[1]

    @cached_property
    def radix(self) -> np.ndarray:
        n = self.n_variables
        S = self.domain_size
        return np.array([S ** (n - 1 - j) for j in range(n)], dtype=np.int64)

    @cached_property
    def keys(self) -> np.ndarray:
        """Encoded configurations; ascending because configs are lexicographic."""
        return self.configs.astype(np.int64) @ self.radix

    def lookup(self, keys) -> tuple[np.ndarray, np.ndarray]:
        """Map encoded configurations to row indices; second output flags hits."""
        pos = np.searchsorted(self.keys, keys)
        pos_clipped = np.minimum(pos, self.size - 1)
        found = self.keys[pos_clipped] == keys
        return pos_clipped, found

    def index_of(self, config) -> int:
        key = np.asarray(config, dtype=np.int64) @ self.radix
        pos, found = self.lookup(np.array([key]))
        if not found[0]:
            raise ChainError("configuration not in the state space")
        return int(pos[0])


@dataclass(frozen=True)
class Kernel:
    matrix: np.ndarray
    unit: str
    label: str

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _finalize(matrix: np.ndarray) -> np.ndarray:
    """Clamp tiny negatives and renormalize rows; large drift is an error."""
    low = matrix.min()
    if low < -_NEGATIVE_TOL:
        raise NumericalError(f"kernel entry {low} below the negative tolerance")
    matrix = np.maximum(matrix, 0.0)
    sums = matrix.sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > _ROW_SUM_TOL:
        raise NumericalError(
            f"row sums deviate from 1 by {np.max(np.abs(sums - 1.0))}"
        )
    return matrix / sums[:, None]


def make_kernel(matrix: np.ndarray, unit: str, label: str) -> Kernel:
    return Kernel(_finalize(np.asarray(matrix, dtype=float)), unit, label)


def enumerate_state_space(model: BipartiteModel, cap: int = DEFAULT_CAP) -> StateSpace:
    """All configurations with positive weight, with normalized pi."""
    n, S = model.n, model.domain_size
    total = S ** n
    if total > _ENUMERATION_LIMIT:
        raise StateSpaceCapError(
            f"full configuration grid of size {total} is too large to sweep; "
            "use the lumped module for large symmetric instances"
        )
    configs = np.array(
        list(itertools.product(range(S), repeat=n)), dtype=np.int8
    ).reshape(total, n)
    h = np.zeros(total)
    for (u, v, table) in model.edges:
        h += np.asarray(table, dtype=float)[configs[:, u], configs[:, v]]
    for j in range(n):
        h += model.unaries[j][configs[:, j]]
    valid = np.ones(total, dtype=bool)
    if model.hard_constraint == "hardcore":
        for (u, v, _) in model.edges:
            valid &= ~((configs[:, u] == 1) & (configs[:, v] == 1))
    count = int(valid.sum())
    if count > cap:
        raise StateSpaceCapError(f"state space exceeds cap: {count} > {cap}")
    if count == 0:
        raise ChainError("no configuration has positive weight")
    h_valid = h[valid]
    if np.max(np.abs(h_valid)) > HAMILTONIAN_RANGE:
        raise HamiltonianRangeError("hamiltonian out of numeric range")
    weights = np.exp(h_valid - h_valid.max())
    pi = weights / weights.sum()
    return StateSpace(configs=configs[valid], pi=pi, domain_size=S)


def _single_site_probs(space: StateSpace, x: int):
    """Row targets and probabilities of resampling variable x.

    Returns (targets, probs), each of shape (N, S): column s holds the
    row index of the configuration with x set to s and its conditional
    probability (0 when that configuration is off the support).
    """
    S = space.domain_size
    N = space.size
    keys = space.keys
    base = keys - space.configs[:, x].astype(np.int64) * space.radix[x]
    targets = np.empty((N, S), dtype=np.int64)
    weights = np.zeros((N, S))
    for s in range(S):
        pos, found = space.lookup(base + s * space.radix[x])
        targets[:, s] = pos
        weights[found, s] = space.pi[pos[found]]
    totals = weights.sum(axis=1)
    probs = weights / totals[:, None]
    return targets, probs


def _single_site_sparse(space: StateSpace, x: int) -> sp.csr_array:
    targets, probs = _single_site_probs(space, x)
    N, S = probs.shape
    rows = np.repeat(np.arange(N), S)
    mat = sp.csr_array(
        (probs.ravel(), (rows, targets.ravel())), shape=(N, N)
    )
    mat.sum_duplicates()
    return mat


def single_site_kernel(model: BipartiteModel, space: StateSpace, x: int) -> Kernel:
    """Transition matrix of resampling the single variable x."""
    if not (0 <= x < model.n):
        raise ChainError(f"variable {x} out of range")
    dense = _single_site_sparse(space, x).toarray()
    return make_kernel(dense, UNIT_VARIABLE, f"T[{x}]")


def random_update_kernel(
    model: BipartiteModel, space: StateSpace, lazy: bool = True
) -> Kernel:
    """Uniform-site Gibbs kernel; lazy form holds with probability 1/2."""
    n = model.n
    N = space.size
    acc = sp.csr_array((N, N))
    for x in range(n):
        acc = acc + _single_site_sparse(space, x)
    matrix = acc.toarray() / n
    label = "P_RU"
    if lazy:
        matrix = 0.5 * np.eye(N) + 0.5 * matrix
        label = "P_RU_lazy"
    return make_kernel(matrix, UNIT_VARIABLE, label)


def _right_multiply(dense: np.ndarray, sparse_t: sp.csr_array) -> np.ndarray:
    # dense @ sparse via the transposed product to stay on the fast CSR path
    return (sparse_t.T @ dense.T).T


def scan_kernels(model: BipartiteModel, space: StateSpace) -> dict[str, Kernel]:
    """Alternating-scan kernels and half-scan factors.

    Returns P_AS (one epoch: all of partition one in ascending index
    order, then all of partition two), the scan factors P_AS1/P_AS2, and
    the per-partition lazy random-update kernels P_GS1/P_GS2.
    """
    validate_bipartite(model)
    n1, n = model.n1, model.n
    N = space.size
    sparse_ts = [_single_site_sparse(space, x) for x in range(n)]

    def scan_product(indices):
        prod = sparse_ts[indices[0]].toarray()
        for x in indices[1:]:
            prod = _right_multiply(prod, sparse_ts[x])
        return prod

    p_as1 = scan_product(range(n1))
    p_as2 = scan_product(range(n1, n))
    p_as = p_as1 @ p_as2

    def half_gibbs(indices):
        acc = sp.csr_array((N, N))
        for x in indices:
            acc = acc + sparse_ts[x]
        return 0.5 * np.eye(N) + acc.toarray() / (2 * len(indices))

    return {
        "P_AS": make_kernel(p_as, UNIT_EPOCH, "P_AS"),
        "P_AS1": make_kernel(p_as1, UNIT_HALF_EPOCH, "P_AS1"),
        "P_AS2": make_kernel(p_as2, UNIT_HALF_EPOCH, "P_AS2"),
        "P_GS1": make_kernel(half_gibbs(range(n1)), UNIT_HALF_EPOCH, "P_GS1"),
        "P_GS2": make_kernel(half_gibbs(range(n1, n)), UNIT_HALF_EPOCH, "P_GS2"),
    }


def stationary_projector(space: StateSpace) -> Kernel:
    """Rank-one kernel whose every row is pi."""
    return Kernel(np.tile(space.pi, (space.size, 1)), UNIT_COMPOSITE, "S_pi")


def stationarity_defect(kernel: Kernel, space: StateSpace) -> float:
    return float(np.max(np.abs(space.pi @ kernel.matrix - space.pi)))


def _require_stationary(kernel: Kernel, space: StateSpace) -> None:
    defect = stationarity_defect(kernel, space)
    if defect > _STATIONARITY_TOL:
        raise StationarityError(
            f"pi is not stationary for {kernel.label}: defect {defect}"
        )


def adjoint(kernel: Kernel, space: StateSpace) -> Kernel:
    """Time reversal with respect to pi."""
    _require_stationary(kernel, space)
    pi = space.pi
    matrix = (kernel.matrix.T * pi[None, :]) / pi[:, None]
    return make_kernel(matrix, kernel.unit, f"adj({kernel.label})")


def reversibilization(kernel: Kernel, space: StateSpace) -> Kernel:
    """Multiplicative reversibilization P P*."""
    rev = adjoint(kernel, space)
    matrix = kernel.matrix @ rev.matrix
    return make_kernel(matrix, UNIT_COMPOSITE, f"R({kernel.label})")


def detailed_balance_violation(kernel: Kernel, space: StateSpace) -> float:
    flux = space.pi[:, None] * kernel.matrix
    return float(np.max(np.abs(flux - flux.T)))


def is_reversible(kernel: Kernel, space: StateSpace, tol: float = _STATIONARITY_TOL) -> bool:
    return detailed_balance_violation(kernel, space) <= tol


def ergodicity_check(kernel: Kernel) -> dict[str, bool]:
    """Irreducibility via strong connectivity; aperiodicity via self-loops.

    A positive diagonal entry suffices for aperiodicity of an
    irreducible chain, which covers every kernel built here.
    """
    support = sp.csr_array(kernel.matrix > 0.0)
    n_comp, _ = connected_components(support, directed=True, connection="strong")
    return {
        "irreducible": bool(n_comp == 1),
        "aperiodic": bool(np.any(np.diag(kernel.matrix) > 0.0)),
    }


def is_ergodic(kernel: Kernel) -> bool:
    res = ergodicity_check(kernel)
    return res["irreducible"] and res["aperiodic"]


def kernel_to_csv(kernel: Kernel, path) -> None:
    """Dump (row, col, value) triples for entries above 1e-15."""
    rows, cols = np.nonzero(kernel.matrix > 1e-15)
    with open(path, "w") as fh:
        fh.write("row,col,value\n")
        for r, c in zip(rows, cols):
            fh.write(f"{r},{c},{kernel.matrix[r, c]!r}\n")
