"""Linear fixed-point solver ``x = A x + b`` shared by every control formulation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse import linalg as spla

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_ITERATIONS = 1_000_000
DEFAULT_DENSE_LIMIT = 2000
REFINEMENT_STEPS = 2

AUTO = "auto"
DIRECT = "direct"
ITERATIVE = "iterative"


class SolverError(RuntimeError):
    """Base class for linear-solve failures."""


class NonConvergenceError(SolverError):
    """Raised when the fixed-point iteration exhausts its iteration budget."""


class DenseLimitError(SolverError):
    """Raised when a dense validation computation exceeds the size limit."""


class SingularSystemError(SolverError):
    """Raised when ``I - A`` cannot be factorised."""


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    dense_limit: int = DEFAULT_DENSE_LIMIT
    method: str = AUTO

    def __post_init__(self) -> None:
        if self.method not in (AUTO, DIRECT, ITERATIVE):
            raise ValueError(f"unknown solver method '{self.method}'")


@dataclass(frozen=True)
class SolverStats:
    method: str
    iterations: int
    residual: float
    elapsed: float
    solves: int = 1

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "iterations": self.iterations,
            "residual": self.residual,
            "solves": self.solves,
        }


def combine_stats(method: str, parts: Iterable[SolverStats], elapsed: float) -> SolverStats:
    """Aggregate several solves: iterations and solves add, residual is the max."""
    iterations = 0
    residual = 0.0
    solves = 0
    for part in parts:
        iterations += part.iterations
        residual = max(residual, part.residual)
        solves += part.solves
    return SolverStats(method, iterations, residual, elapsed, solves)


def residual_norm(A: sp.spmatrix, x: np.ndarray, b: np.ndarray) -> float:
    """``||x - (A x + b)||_inf``."""
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - (A @ x + b))))


def _scale(b: np.ndarray) -> float:
    return float(np.max(np.abs(b))) if b.size else 0.0


def _solve_direct(
    A: sp.csr_matrix, b: np.ndarray, target: float
) -> Tuple[np.ndarray, int]:
    """LU solve followed by up to ``REFINEMENT_STEPS`` iterative refinements."""
    n = A.shape[0]
    system = (sp.identity(n, format="csc") - sp.csc_matrix(A)).tocsc()
    try:
        factor = spla.splu(system)
    except RuntimeError as exc:
        raise SingularSystemError(f"I - A is singular: {exc}") from exc
    x = factor.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("I - A is numerically singular")
    steps = 0
    while steps < REFINEMENT_STEPS and residual_norm(A, x, b) > target:
        # b - (I - A) x == (A x + b) - x
        x = x + factor.solve((A @ x + b) - x)
        steps += 1
    if steps:
        logger.debug("direct solve refined in %d step(s)", steps)
    return x, steps


def _solve_jacobi(
    A: sp.csr_matrix, b: np.ndarray, options: SolverOptions
) -> Tuple[np.ndarray, int, float]:
    diagonal = A.diagonal()
    off_diagonal = A - sp.diags(diagonal)
    denominator = 1.0 - diagonal
    if np.any(denominator <= 0):
        raise SingularSystemError("a node fully controls itself (A_ii >= 1)")
    target = options.tolerance * _scale(b)
    x = b / denominator
    for iteration in range(1, options.max_iterations + 1):
        updated = (off_diagonal @ x + b) / denominator
        # residual of the current iterate, x - (A x + b)
        residual = float(np.max(np.abs(denominator * (x - updated))))
        if residual <= target:
            return x, iteration, residual
        if not np.isfinite(residual):
            break
        x = updated
    raise NonConvergenceError(
        f"fixed-point iteration did not converge in {options.max_iterations} iterations"
        " (spectral radius of the control matrix may be >= 1)"
    )


def solve_fixed_point(
    A: sp.spmatrix,
    b: np.ndarray,
    options: Optional[SolverOptions] = None,
) -> Tuple[np.ndarray, SolverStats]:
    """Solve ``x = A x + b`` for non-negative sparse ``A``.

    ``auto`` factorises ``I - A`` directly up to ``dense_limit`` unknowns and
    uses Jacobi iteration above it. The residual is checked against
    ``tolerance * ||b||_inf`` in both cases.
    """
    options = options or SolverOptions()
    started = time.perf_counter()
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=np.float64)
    n = A.shape[0]
    if n == 0 or A.nnz == 0:
        x = b.copy()
        return x, SolverStats(DIRECT, 0, 0.0, time.perf_counter() - started)

    use_direct = options.method == DIRECT or (
        options.method == AUTO and n <= options.dense_limit
    )
    target = options.tolerance * _scale(b)
    if use_direct:
        x, iterations = _solve_direct(A, b, target)
        method = DIRECT
    else:
        x, iterations, _ = _solve_jacobi(A, b, options)
        method = ITERATIVE
    residual = residual_norm(A, x, b)
    if residual > target:
        raise NonConvergenceError(
            f"{method} solve residual {residual:.3g} exceeds tolerance {target:.3g}"
        )
    return x, SolverStats(method, iterations, residual, time.perf_counter() - started)


def dense_inverse(A: sp.spmatrix, dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    """Return ``(I - A)^-1`` as a dense array (validation mode only)."""
    n = A.shape[0]
    if n > dense_limit:
        raise DenseLimitError(f"{n} nodes exceed the dense limit of {dense_limit}")
    system = np.identity(n) - (A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float))
    try:
        return np.linalg.inv(system)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"I - A is singular: {exc}") from exc
