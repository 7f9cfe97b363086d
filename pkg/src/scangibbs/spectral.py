"""Operator norms in L2(pi), spectral gaps, and relaxation times.

Every quantity is computed through the similarity transform
D^{1/2} M D^{-1/2} with D = diag(pi), under which reversible kernels and
multiplicative reversibilizations become exactly symmetric matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import (
    Kernel,
    NumericalError,
    StateSpace,
    is_ergodic,
    is_reversible,
    random_update_kernel,
    reversibilization,
    scan_kernels,
    stationary_projector,
)
from .model import BipartiteModel
from . import chain

_SYMMETRY_TOL = 1e-9
_REVERSIBILITY_TOL = 1e-10


class SpectralError(ValueError):
    pass


class NonErgodicError(SpectralError):
    pass


@dataclass(frozen=True)
class SpectralReport:
    gap: float
    second_largest_modulus: float
    relaxation_time: float
    reversible: bool
    method: str


def _conjugate(matrix: np.ndarray, pi: np.ndarray) -> np.ndarray:
    sqrt_pi = np.sqrt(pi)
    return (sqrt_pi[:, None] * matrix) / sqrt_pi[None, :]


def deviation_norm(kernel: Kernel, space: StateSpace) -> float:
    """L2(pi) norm of P - S_pi for a pi-symmetric kernel.

    Equals the second largest eigenvalue modulus of an ergodic
    reversible P. Raises if the conjugated matrix is not symmetric.
    """
    s_pi = stationary_projector(space)
    m = _conjugate(kernel.matrix - s_pi.matrix, space.pi)
    asym = float(np.max(np.abs(m - m.T)))
    if asym > _SYMMETRY_TOL:
        raise NumericalError(
            f"kernel not symmetric after conjugation: asymmetry {asym}"
        )
    eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
    return float(np.max(np.abs(eigs)))


def general_operator_norm(operator, space: StateSpace) -> float:
    """L2(pi) operator norm (largest singular value); no symmetry needed."""
    matrix = operator.matrix if isinstance(operator, Kernel) else np.asarray(operator)
    m = _conjugate(matrix, space.pi)
    gram = m.T @ m
    eigs = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    return float(np.sqrt(max(eigs.max(), 0.0)))


def relaxation_time(kernel: Kernel, space: StateSpace) -> SpectralReport:
    """Relaxation time, through the reversibilization when needed.

    For a reversible kernel the report carries its own gap and the
    inverse-gap relaxation time. For a non-reversible kernel the gap
    field is the gap of R(P) = P P* and the relaxation time is
    1 / (1 - sqrt(1 - gap(R))).
    """
    if not is_ergodic(kernel):
        raise NonErgodicError(f"kernel {kernel.label} is not ergodic")
    if is_reversible(kernel, space, tol=_REVERSIBILITY_TOL):
        slm = deviation_norm(kernel, space)
        gap = 1.0 - slm
        if gap <= 0.0:
            raise NonErgodicError(
                f"kernel {kernel.label} has zero spectral gap"
            )
        return SpectralReport(
            gap=gap,
            second_largest_modulus=slm,
            relaxation_time=1.0 / gap,
            reversible=True,
            method="reversible_inverse_gap",
        )
    rev = reversibilization(kernel, space)
    slm = deviation_norm(rev, space)
    gap_r = 1.0 - slm
    if gap_r <= 0.0:
        raise NonErgodicError(
            f"reversibilization of {kernel.label} has zero spectral gap"
        )
    t_rel = 1.0 / (1.0 - np.sqrt(max(slm, 0.0)))
    return SpectralReport(
        gap=gap_r,
        second_largest_modulus=slm,
        relaxation_time=float(t_rel),
        reversible=False,
        method="multiplicative_reversibilization",
    )


def verify_theorem1(
    model: BipartiteModel, cap: int = chain.DEFAULT_CAP, lazy: bool = True
) -> dict:
    """Compare scan and random-update relaxation times on one instance.

    Also reports the intermediate contraction bound
    ||R(P_AS) - S_pi|| <= ||P_RU - S_pi||^2.
    """
    space = chain.enumerate_state_space(model, cap=cap)
    p_ru = random_update_kernel(model, space, lazy=lazy)
    p_as = scan_kernels(model, space)["P_AS"]
    if not is_ergodic(p_ru):
        raise NonErgodicError("random-update kernel is not ergodic")
    ru_report = relaxation_time(p_ru, space)
    as_report = relaxation_time(p_as, space)

    ru_norm = deviation_norm(p_ru, space)
    rev_as = reversibilization(p_as, space)
    rev_norm = deviation_norm(rev_as, space)

    return {
        "t_rel_as": as_report.relaxation_time,
        "t_rel_ru": ru_report.relaxation_time,
        "holds": bool(as_report.relaxation_time <= ru_report.relaxation_time + 1e-9),
        "contraction_lhs": rev_norm,
        "contraction_rhs": ru_norm ** 2,
        "contraction_holds": bool(rev_norm <= ru_norm ** 2 + 1e-10),
    }
