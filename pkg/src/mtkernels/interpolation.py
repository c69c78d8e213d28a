"""Minimal-norm interpolation in the span of kernel sections.

For pairwise-distinct samples x and data y, the span of the kernel sections
at x contains exactly one interpolant; its coefficient vector is
c = K[x]^{-1} y and its blockwise l1 norm sum_j ||c_j||_1 is the natural
sparsity-inducing norm on that span. Adding one more center x_new extends
the Gram system by a single block row/column, which is solved incrementally
through the Schur complement of K[x].

``representer_equivalence_oracle`` certifies, by brute force over the value
assigned at the new center, whether extending the span can lower the minimal
coefficient norm. The answer is tied to the Lebesgue function at x_new: no
improvement is possible exactly when its value stays at or below 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import (
    DISTINCTNESS_TOL,
    GramMatrix,
    MultiTaskKernel,
    SampleSet,
    SingularGramError,
    as_points,
    assemble_gram,
    eval_multitask,
    kernel_column,
)


@dataclass(frozen=True)
class CoefficientVector:
    """Blocked coefficient vector in R^{md}: m blocks of size d."""

    values: np.ndarray
    d: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", vals)
        if self.d < 1 or vals.size % self.d != 0:
            raise ValueError(
                f"coefficient length {vals.size} is not a multiple of d={self.d}"
            )

    @property
    def m(self) -> int:
        return self.values.size // self.d

    @property
    def blocks(self) -> np.ndarray:
        return self.values.reshape(self.m, self.d)

    @property
    def bk_norm(self) -> float:
        """Sum of blockwise l1 norms, i.e. the entrywise l1 norm."""
        return float(np.abs(self.values).sum())

    def nnz(self) -> int:
        return int(np.count_nonzero(self.values))


@dataclass(frozen=True)
class RepresenterFunction:
    """f(t) = sum_j K(x_j, t) c_j, a member of the span of kernel sections."""

    kernel: MultiTaskKernel
    samples: SampleSet
    coefficients: CoefficientVector

    def __post_init__(self):
        if self.coefficients.d != self.kernel.d:
            raise ValueError("coefficient block size must equal the kernel's d")
        if self.coefficients.m != self.samples.m:
            raise ValueError("coefficient block count must equal the sample count")

    def __call__(self, t) -> np.ndarray:
        return self.predict(as_points(t, dim=self.samples.n))[0]

    def predict(self, points) -> np.ndarray:
        """Evaluate at many points; returns an (nt, d) array."""
        pts = as_points(points, dim=self.samples.n)
        self.kernel.scalar.check_domain(pts)
        s = self.kernel.scalar.pairwise(pts, self.samples.points)  # (nt, m)
        # f(t)^T = (sum_j s_tj c_j^T) A with symmetric A.
        return s @ self.coefficients.blocks @ self.kernel.coupling.entries


def min_norm_interpolant(
    kernel: MultiTaskKernel,
    x: SampleSet,
    y: np.ndarray,
    gram: GramMatrix | None = None,
) -> RepresenterFunction:
    """The unique interpolant of (x, y) in the span of sections at x."""
    y = np.asarray(y, dtype=float).ravel()
    if gram is None:
        gram = assemble_gram(kernel, x)
    if y.size != gram.md:
        raise ValueError(f"y has length {y.size}, expected {gram.md}")
    coeffs = CoefficientVector(gram.solve(y), kernel.d)
    return RepresenterFunction(kernel=kernel, samples=x, coefficients=coeffs)


def evaluate(f: RepresenterFunction, t) -> np.ndarray:
    """Evaluate a representer function at a single point."""
    return f(t)


@dataclass(frozen=True)
class BlockUpdate:
    """One-point extension of an interpolation system.

    p is the d x d Schur complement of K[x] in the extended Gram matrix,
    q = K^x(x_new) K[x]^{-1} y - b, and extended_solution solves the full
    (m+1)d system for the data (y, b).
    """

    p: np.ndarray
    q: np.ndarray
    extended_solution: CoefficientVector


def extend_interpolant(
    gram: GramMatrix,
    y: np.ndarray,
    x_new,
    b: np.ndarray,
) -> BlockUpdate:
    """Extend the interpolant of (x, y) by the condition f(x_new) = b.

    Uses the blockwise inverse of the 2 x 2 block extended Gram matrix:
    with w = K[x]^{-1} K_x(x_new) and s = p^{-1} q, the extended solution
    is (K[x]^{-1} y + w s, -s).
    """
    kernel, x = gram.kernel, gram.samples
    y = np.asarray(y, dtype=float).ravel()
    if y.size != gram.md:
        raise ValueError(f"y has length {y.size}, expected {gram.md}")
    pt = as_points(x_new, dim=x.n)
    dists = np.abs(x.points - pt).sum(axis=1)
    if dists.min() <= DISTINCTNESS_TOL:
        raise ValueError("x_new coincides with an existing sample point")
    b = np.asarray(b, dtype=float).ravel()
    if b.size != gram.d:
        raise ValueError(f"b has length {b.size}, expected {gram.d}")

    col = kernel_column(kernel, x, pt[0]).dense  # (md, d)
    w = gram.solve(col)
    c0 = gram.solve(y)
    p = eval_multitask(kernel, pt[0], pt[0]) - col.T @ w
    q = col.T @ c0 - b
    try:
        s = np.linalg.solve(p, q)
    except np.linalg.LinAlgError:
        raise SingularGramError("Schur complement of the extension is singular")
    extended = np.concatenate([c0 + w @ s, -s])
    return BlockUpdate(p=p, q=q, extended_solution=CoefficientVector(extended, gram.d))


@dataclass(frozen=True)
class BruteForceScan:
    """Uniform per-coordinate grid over the value b assigned at the new point.

    The grid spans [-radius_scale, radius_scale] * max|K[x]^{-1} y| in each
    coordinate. The extended norm is piecewise linear in b, so a fine grid
    certifies the minimum to grid resolution.
    """

    radius_scale: float = 3.0
    step: float = 1e-3

    def axis(self, scale: float) -> np.ndarray:
        radius = self.radius_scale * scale
        if radius == 0.0:
            return np.zeros(1)
        count = int(np.floor(radius / self.step))
        return np.arange(-count, count + 1) * self.step


def representer_equivalence_oracle(
    kernel: MultiTaskKernel,
    x: SampleSet,
    y: np.ndarray,
    x_new,
    scan: BruteForceScan | None = None,
    gram: GramMatrix | None = None,
) -> tuple[float, float]:
    """Brute-force check of one-point span extension.

    Returns (min_extended, min_restricted): the minimal coefficient norm of
    interpolants of (x, y) within the extended span, minimized over a scan
    of values b at x_new, against the norm of the unique interpolant in the
    original span. The two agree, up to scan resolution, exactly when the
    Lebesgue function at x_new does not exceed 1.
    """
    if scan is None:
        scan = BruteForceScan()
    if gram is None:
        gram = assemble_gram(kernel, x)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != gram.md:
        raise ValueError(f"y has length {y.size}, expected {gram.md}")
    d = gram.d

    pt = as_points(x_new, dim=x.n)
    col = kernel_column(kernel, x, pt[0]).dense
    w = gram.solve(col)  # (md, d)
    c0 = gram.solve(y)
    min_restricted = float(np.abs(c0).sum())

    p = eval_multitask(kernel, pt[0], pt[0]) - col.T @ w
    f_at_new = col.T @ c0  # value of the restricted interpolant at x_new

    axis = scan.axis(float(np.abs(c0).max(initial=0.0)))
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    b_grid = np.stack([m.ravel() for m in mesh], axis=0)  # (d, nb)

    min_extended = np.inf
    chunk = max(1, 2_000_000 // max(1, y.size))
    for start in range(0, b_grid.shape[1], chunk):
        bs = b_grid[:, start : start + chunk]
        ss = np.linalg.solve(p, f_at_new[:, None] - bs)  # (d, nb)
        norms = np.abs(c0[:, None] + w @ ss).sum(axis=0) + np.abs(ss).sum(axis=0)
        min_extended = min(min_extended, float(norms.min()))
    return min_extended, min_restricted
