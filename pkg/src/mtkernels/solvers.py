"""Regularization-network solvers over the block Gram matrix.

Two models for coefficients c of a kernel expansion on the training points:

    l1 model:     minimize ||K[x] c - y||_2^2 + lambda ||c||_1
    ridge model:  minimize ||K[x] c - y||_2^2 + lambda c^T K[x] c

The l1 model is solved by ADMM on the split c = z; its z iterate is
returned because the soft-threshold step makes its zeros exact, so sparsity
counts are integers rather than artifacts of a cutoff. The ridge model has
the closed form (K[x] + lambda I)^{-1} y. Objectives are kept unscaled
(no 1/2 on the data term) so reported values can be compared directly
across both models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve

from .interpolation import CoefficientVector, RepresenterFunction
from .kernels import (
    GramMatrix,
    MultiTaskKernel,
    SampleSet,
    SingularGramError,
    assemble_gram,
)

OBJECTIVE_RECORD_EVERY = 100


def soft_threshold(v: np.ndarray, kappa: float) -> np.ndarray:
    """Entrywise sign(v) * max(|v| - kappa, 0); sub-threshold entries are exact zeros."""
    if kappa < 0:
        raise ValueError(f"threshold must be nonnegative, got {kappa}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


@dataclass(frozen=True)
class AdmmParams:
    """ADMM controls: penalty rho, iteration cap, and stopping tolerances.

    With adaptive_rho the penalty is rebalanced (doubled or halved) whenever
    one residual dominates the other tenfold; the default keeps rho fixed
    for reproducibility.
    """

    rho: float = 1.0
    max_iters: int = 10_000
    eps_abs: float = 1e-6
    eps_rel: float = 1e-4
    adaptive_rho: bool = False

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if not (self.eps_abs > 0 and self.eps_rel > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class FitResult:
    """A fitted kernel expansion with solver bookkeeping.

    sparsity counts nonzero coefficient entries. objective_trace records
    the objective at the sparse iterate every OBJECTIVE_RECORD_EVERY
    iterations (l1 model only).
    """

    model: RepresenterFunction
    objective: float
    iterations: int
    converged: bool
    sparsity: int
    lam: float
    objective_trace: tuple[float, ...] = field(default=(), repr=False)


def _l1_objective(a: np.ndarray, y: np.ndarray, z: np.ndarray, lam: float) -> float:
    r = a @ z - y
    return float(r @ r + lam * np.abs(z).sum())


def fit_l1(
    kernel: MultiTaskKernel,
    x: SampleSet,
    y: np.ndarray,
    lam: float,
    params: AdmmParams | None = None,
    gram: GramMatrix | None = None,
    z0: np.ndarray | None = None,
    u0: np.ndarray | None = None,
) -> FitResult:
    """ADMM for the l1-penalized least squares model.

    Splitting c = z, the c-update solves (2 A^T A + rho I) c = 2 A^T y +
    rho (z - u) through a Cholesky factorization cached for the whole run,
    the z-update soft-thresholds c + u at lambda / rho, and u accumulates
    the running constraint violation. Stopping follows the standard primal
    and dual residual tests. Non-convergence within max_iters is reported
    through converged=False, not raised. z0/u0 allow warm starts across a
    lambda path.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if params is None:
        params = AdmmParams()
    if gram is None:
        gram = assemble_gram(kernel, x)
    y = np.asarray(y, dtype=float).ravel()
    md = gram.md
    if y.size != md:
        raise ValueError(f"y has length {y.size}, expected {md}")

    a = gram.dense
    ata2 = 2.0 * (a.T @ a)
    aty2 = 2.0 * (a.T @ y)
    rho = params.rho
    factor = cho_factor(ata2 + rho * np.eye(md))

    z = np.zeros(md) if z0 is None else np.asarray(z0, dtype=float).copy()
    u = np.zeros(md) if u0 is None else np.asarray(u0, dtype=float).copy()
    sqrt_md = np.sqrt(md)
    converged = False
    iterations = 0
    trace: list[float] = []

    for it in range(1, params.max_iters + 1):
        c = cho_solve(factor, aty2 + rho * (z - u))
        z_prev = z
        z = soft_threshold(c + u, lam / rho)
        u = u + c - z

        iterations = it
        if it % OBJECTIVE_RECORD_EVERY == 0:
            trace.append(_l1_objective(a, y, z, lam))

        r_norm = float(np.linalg.norm(c - z))
        s_norm = rho * float(np.linalg.norm(z - z_prev))
        eps_pri = sqrt_md * params.eps_abs + params.eps_rel * max(
            float(np.linalg.norm(c)), float(np.linalg.norm(z))
        )
        eps_dual = sqrt_md * params.eps_abs + params.eps_rel * rho * float(
            np.linalg.norm(u)
        )
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break

        if params.adaptive_rho:
            if r_norm > 10.0 * s_norm:
                rho *= 2.0
                u /= 2.0
                factor = cho_factor(ata2 + rho * np.eye(md))
            elif s_norm > 10.0 * r_norm:
                rho /= 2.0
                u *= 2.0
                factor = cho_factor(ata2 + rho * np.eye(md))

    objective = _l1_objective(a, y, z, lam)
    trace.append(objective)
    coeffs = CoefficientVector(z, gram.d)
    model = RepresenterFunction(kernel=kernel, samples=x, coefficients=coeffs)
    return FitResult(
        model=model,
        objective=objective,
        iterations=iterations,
        converged=converged,
        sparsity=coeffs.nnz(),
        lam=lam,
        objective_trace=tuple(trace),
    )


def fit_ridge(
    kernel: MultiTaskKernel,
    x: SampleSet,
    y: np.ndarray,
    lam: float,
    gram: GramMatrix | None = None,
) -> FitResult:
    """Closed-form kernel ridge coefficients h = (K[x] + lambda I)^{-1} y."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if gram is None:
        gram = assemble_gram(kernel, x)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != gram.md:
        raise ValueError(f"y has length {y.size}, expected {gram.md}")

    shifted = gram.dense + lam * np.eye(gram.md)
    try:
        h = lu_solve(lu_factor(shifted), y)
    except np.linalg.LinAlgError:
        raise SingularGramError("shifted Gram matrix K[x] + lambda I is singular")
    if not np.all(np.isfinite(h)):
        raise SingularGramError("shifted Gram matrix K[x] + lambda I is singular")

    residual = gram.dense @ h - y
    objective = float(residual @ residual + lam * (h @ (gram.dense @ h)))
    coeffs = CoefficientVector(h, gram.d)
    model = RepresenterFunction(kernel=kernel, samples=x, coefficients=coeffs)
    return FitResult(
        model=model,
        objective=objective,
        iterations=1,
        converged=True,
        sparsity=coeffs.nnz(),
        lam=lam,
    )


@dataclass(frozen=True)
class MetricRecord:
    """Evaluation metrics of a fitted model on a labeled dataset.

    For classification, misclassified lists (index, true label, predicted
    label) triples, with labels as one-hot argmax positions.
    """

    mse: float
    sparsity: int
    accuracy: float | None = None
    misclassified: tuple[tuple[int, int, int], ...] | None = None

    def to_dict(self) -> dict:
        out: dict = {"mse": self.mse, "sparsity": self.sparsity}
        if self.accuracy is not None:
            out["accuracy"] = self.accuracy
            out["misclassified"] = [list(item) for item in self.misclassified]
        return out


def metrics(
    model: RepresenterFunction,
    test_x: SampleSet,
    test_y: np.ndarray,
    task: str = "regression",
) -> MetricRecord:
    """MSE (regression) or argmax accuracy (classification) plus model sparsity."""
    if task not in ("regression", "classification"):
        raise ValueError(f"unknown task {task!r}")
    test_y = np.asarray(test_y, dtype=float).ravel()
    d = model.kernel.d
    if test_y.size != test_x.m * d:
        raise ValueError(
            f"targets have length {test_y.size}, expected {test_x.m * d}"
        )
    targets = test_y.reshape(test_x.m, d)
    preds = model.predict(test_x.points)
    mse = float(np.sum((preds - targets) ** 2) / targets.size)
    sparsity = model.coefficients.nnz()
    if task == "regression":
        return MetricRecord(mse=mse, sparsity=sparsity)

    # np.argmax breaks ties at the lowest index, matching the contract.
    pred_labels = np.argmax(preds, axis=1)
    true_labels = np.argmax(targets, axis=1)
    wrong = np.flatnonzero(pred_labels != true_labels)
    accuracy = 1.0 - wrong.size / targets.shape[0]
    listing = tuple(
        (int(i), int(true_labels[i]), int(pred_labels[i])) for i in wrong
    )
    return MetricRecord(
        mse=mse, sparsity=sparsity, accuracy=accuracy, misclassified=listing
    )
