"""Alternating row/column proportional fitting toward prescribed marginals.

Each sweep rescales every row to its target sum and then every column to
its target sum.  The internal state is the pair of accumulated scaling
vectors; the working matrix is always rebuilt as ``r_i * a_ij * c_j``, so a
converged result is bitwise-reproducible from its reported factors.  Row
and column sums are strictly positive by construction, so the updates
divide safely without an epsilon guard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    MatrixBalanceError,
    ScaledResult,
    ScalingPair,
    ShapeMismatch,
    ValidatedInstance,
)

CONVERGENCE_METRICS = ("successive_frobenius", "max_marginal_residual")
GAUGE_KINDS = ("unit_row_factor", "unit_col_factor")


class NotConverged(MatrixBalanceError):
    """Iteration budget exhausted before meeting the convergence contract.

    The partial :class:`~matbalance.core.ScaledResult` is attached as ``result``.
    """

    def __init__(self, message: str, result: ScaledResult):
        super().__init__(message)
        self.result = result


class FactorsUnavailable(MatrixBalanceError):
    """The result was produced without factor tracking."""


class NonPositiveLambda(MatrixBalanceError, ValueError):
    """Gauge parameter must be strictly positive and finite."""


@dataclass(frozen=True)
class IterationConfig:
    """Stopping rule for the fixed-point iteration.

    ``successive_frobenius`` stops on the Frobenius norm of the difference
    between successive iterates; ``max_marginal_residual`` stops on the
    largest absolute row/column sum defect.  Either way the converged flag
    additionally requires every residual to be within tolerance relative to
    its target, which is the contract callers actually care about.
    """

    tolerance: float = 1e-9
    max_iterations: int = 1000
    convergence_metric: str = "successive_frobenius"
    track_factors: bool = True

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_metric not in CONVERGENCE_METRICS:
            raise ValueError(f"convergence_metric must be one of {CONVERGENCE_METRICS}")


@dataclass(frozen=True)
class GaugeFix:
    """Pin one scaling factor to 1: row factor ``index`` or column factor ``index``."""

    kind: str
    index: int

    def __post_init__(self):
        if self.kind not in GAUGE_KINDS:
            raise ValueError(f"gauge kind must be one of {GAUGE_KINDS}")
        if self.index < 0:
            raise ValueError("gauge index must be >= 0")


def _rebuild(entries: np.ndarray, r: np.ndarray, c: np.ndarray) -> np.ndarray:
    # Same evaluation order as apply_scaling: (r_i * a_ij) * c_j.
    return (r[:, None] * entries) * c[None, :]


def sinkhorn_iterate(instance: ValidatedInstance, config: IterationConfig | None = None) -> ScaledResult:
    """Run row-then-column scaling sweeps until the marginals are met.

    Returns a converged :class:`~matbalance.core.ScaledResult`; the factors
    field (when tracked) reproduces the result matrix through
    :func:`~matbalance.core.apply_scaling` exactly.

    Raises:
        NotConverged: the iteration budget ran out first; the partial result
            rides on the exception.
    """
    if config is None:
        config = IterationConfig()
    entries = instance.matrix.entries
    row_targets = instance.marginals.row_targets
    col_targets = instance.marginals.col_targets
    row_gate = config.tolerance * np.maximum(1.0, row_targets)
    col_gate = config.tolerance * np.maximum(1.0, col_targets)

    r = np.ones(instance.rows)
    c = np.ones(instance.cols)
    current = _rebuild(entries, r, c)
    iterations = 0
    converged = False
    metric = np.inf

    while iterations < config.max_iterations:
        iterations += 1
        previous = current
        r = r * (row_targets / current.sum(axis=1))
        mid = _rebuild(entries, r, c)
        c = c * (col_targets / mid.sum(axis=0))
        current = _rebuild(entries, r, c)

        row_res = current.sum(axis=1) - row_targets
        col_res = current.sum(axis=0) - col_targets
        if config.convergence_metric == "successive_frobenius":
            metric = float(np.linalg.norm(current - previous))
        else:
            metric = max(float(np.max(np.abs(row_res))), float(np.max(np.abs(col_res))))
        residuals_ok = bool(
            np.all(np.abs(row_res) <= row_gate) and np.all(np.abs(col_res) <= col_gate)
        )
        if metric < config.tolerance and residuals_ok:
            converged = True
            break

    max_residual = max(
        float(np.max(np.abs(current.sum(axis=1) - row_targets))),
        float(np.max(np.abs(current.sum(axis=0) - col_targets))),
    )
    result = ScaledResult(
        matrix=current,
        factors=ScalingPair(r, c) if config.track_factors else None,
        iterations=iterations,
        max_marginal_residual=max_residual,
        converged=converged,
        method="iterative",
    )
    if not converged:
        raise NotConverged(
            f"no convergence after {iterations} iterations "
            f"(metric {metric!r}, max marginal residual {max_residual!r})",
            result=result,
        )
    return result


def extract_factors(instance: ValidatedInstance, result: ScaledResult, gauge: GaugeFix) -> ScalingPair:
    """Gauge-normalize the tracked factors so the pinned factor equals 1.

    The pinned factor is made exactly 1.0 by dividing its own vector through
    by the pivot, so ``apply_scaling`` with the returned pair stays within a
    few ulps of the result matrix.
    """
    if result.factors is None:
        raise FactorsUnavailable("result was produced with track_factors disabled")
    r = result.factors.row_factors
    c = result.factors.col_factors
    if gauge.kind == "unit_row_factor":
        if gauge.index >= instance.rows:
            raise ShapeMismatch(f"row gauge index {gauge.index} for {instance.rows} rows")
        pivot = r[gauge.index]
        return ScalingPair(r / pivot, c * pivot)
    if gauge.index >= instance.cols:
        raise ShapeMismatch(f"col gauge index {gauge.index} for {instance.cols} cols")
    pivot = c[gauge.index]
    return ScalingPair(r * pivot, c / pivot)


def gauge_transform(factors: ScalingPair, lam: float) -> ScalingPair:
    """Map ``(r, c)`` to ``(lam * r, c / lam)``; the scaled matrix is unchanged."""
    if not (np.isfinite(lam) and lam > 0):
        raise NonPositiveLambda(f"lambda must be a positive finite real, got {lam!r}")
    return ScalingPair(lam * factors.row_factors, factors.col_factors / lam)
