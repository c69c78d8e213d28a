"""Scalar kernels, separable multi-task kernels, and block Gram assembly.

A multi-task kernel couples a symmetric scalar kernel k with a d x d
symmetric positive definite matrix A through K(x, x') = k(x, x') * A, so
K evaluates to d x d blocks and the Gram matrix on m sample points is the
md x md block matrix with block (j, k) = K(x_k, x_j).

Four scalar kernels are provided:

    exponential      exp(-||x - x'||_1 / r)     on R^n
    gaussian         exp(-||x - x'||_2^2 / g)   on R^n
    brownian_motion  min(x, x')                 on (0, 1)
    brownian_bridge  min(x, x') - x * x'        on (0, 1)

All kernels are symmetric, so the block column K_x(t) stacked from blocks
k(t, x_j) * A is the transpose of the block row K^x(t).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lapack, lu_factor, lu_solve
from scipy.spatial.distance import cdist

# Minimum pairwise distance below which sample points are treated as
# duplicates; guards non-singularity of the Gram matrix at working precision.
DISTINCTNESS_TOL = 1e-12

# Gram matrices with a 1-norm condition estimate above this are rejected
# as singular to working precision.
DEFAULT_COND_THRESHOLD = 1e12


class DomainError(ValueError):
    """A point lies outside the kernel's domain."""


class SingularGramError(ValueError):
    """The block Gram matrix is singular to working precision."""


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Coerce scalars, vectors, or arrays to an (m, n) float array of points."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        # A bare 1-D array is a single n-dimensional point.
        pts = pts.reshape(1, -1)
    elif pts.ndim != 2:
        raise ValueError(f"points must be at most 2-D, got shape {pts.shape}")
    if dim is not None and pts.shape[1] != dim:
        raise ValueError(f"expected points in R^{dim}, got R^{pts.shape[1]}")
    return pts


class ScalarKernel:
    """Base class for symmetric scalar kernels k(x, x')."""

    name: str = "scalar"

    def check_domain(self, pts: np.ndarray) -> None:
        """Raise DomainError if any point is outside the kernel domain."""

    def pairwise(self, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
        """Evaluate k on all pairs; returns an (ma, mb) matrix."""
        raise NotImplementedError

    def __call__(self, x, xp) -> float:
        a, b = as_points(x), as_points(xp)
        if a.shape[1] != b.shape[1]:
            raise ValueError(
                f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}"
            )
        self.check_domain(a)
        self.check_domain(b)
        return float(self.pairwise(a, b)[0, 0])

    def descriptor(self) -> str:
        return self.name


@dataclass(frozen=True)
class ExponentialKernel(ScalarKernel):
    """exp(-||x - x'||_1 / r) with width r > 0."""

    r: float = 1.0
    name: str = field(default="exponential", init=False, repr=False)

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"width r must be positive, got {self.r}")

    def pairwise(self, xa, xb):
        return np.exp(-cdist(xa, xb, "cityblock") / self.r)

    def descriptor(self) -> str:
        return f"exponential:r={self.r}"


@dataclass(frozen=True)
class GaussianKernel(ScalarKernel):
    """exp(-||x - x'||_2^2 / gamma) with width gamma > 0."""

    gamma: float = 1.0
    name: str = field(default="gaussian", init=False, repr=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"width gamma must be positive, got {self.gamma}")

    def pairwise(self, xa, xb):
        return np.exp(-cdist(xa, xb, "sqeuclidean") / self.gamma)

    def descriptor(self) -> str:
        return f"gaussian:gamma={self.gamma}"


class _UnitIntervalKernel(ScalarKernel):
    """Common domain handling for kernels defined on the open interval (0, 1)."""

    def check_domain(self, pts: np.ndarray) -> None:
        if pts.shape[1] != 1:
            raise DomainError(
                f"{self.name} kernel is defined on (0, 1) in one dimension, "
                f"got points in R^{pts.shape[1]}"
            )
        # Boundary values are rejected: the domain is the open interval.
        if np.any(pts <= 0.0) or np.any(pts >= 1.0):
            raise DomainError(
                f"{self.name} kernel requires points strictly inside (0, 1)"
            )


@dataclass(frozen=True)
class BrownianMotionKernel(_UnitIntervalKernel):
    """min(x, x') on (0, 1)."""

    name: str = field(default="brownian_motion", init=False, repr=False)

    def pairwise(self, xa, xb):
        return np.minimum(xa[:, 0][:, None], xb[:, 0][None, :])


@dataclass(frozen=True)
class BrownianBridgeKernel(_UnitIntervalKernel):
    """min(x, x') - x * x' on (0, 1)."""

    name: str = field(default="brownian_bridge", init=False, repr=False)

    def pairwise(self, xa, xb):
        a, b = xa[:, 0], xb[:, 0]
        return np.minimum(a[:, None], b[None, :]) - np.outer(a, b)


def parse_kernel(spec: str) -> ScalarKernel:
    """Build a scalar kernel from a plain-text descriptor.

    Accepted forms: ``exponential:r=1.0``, ``gaussian:gamma=1.0``,
    ``brownian_motion``, ``brownian_bridge``. Width parameters default to 1.
    """
    name, _, paramstr = spec.strip().partition(":")
    params = {}
    if paramstr:
        for item in paramstr.split(","):
            key, _, value = item.partition("=")
            if not value:
                raise ValueError(f"malformed kernel parameter {item!r} in {spec!r}")
            params[key.strip()] = float(value)
    if name == "exponential":
        return ExponentialKernel(**params)
    if name == "gaussian":
        return GaussianKernel(**params)
    if name == "brownian_motion":
        if params:
            raise ValueError("brownian_motion takes no parameters")
        return BrownianMotionKernel()
    if name == "brownian_bridge":
        if params:
            raise ValueError("brownian_bridge takes no parameters")
        return BrownianBridgeKernel()
    raise ValueError(f"unknown kernel {name!r}")


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric strictly positive definite d x d task-coupling matrix."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"coupling matrix must be square, got {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("coupling matrix must be symmetric")
        try:
            np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            raise ValueError("coupling matrix must be strictly positive definite")

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def norm1(self) -> float:
        """l1-induced norm: maximum absolute column sum."""
        return float(np.abs(self.entries).sum(axis=0).max())

    @classmethod
    def identity(cls, d: int) -> "CouplingMatrix":
        return cls(np.eye(d))

    @classmethod
    def from_csv(cls, path) -> "CouplingMatrix":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))


@dataclass(frozen=True)
class MultiTaskKernel:
    """Separable matrix-valued kernel K(x, x') = k(x, x') * A."""

    scalar: ScalarKernel
    coupling: CouplingMatrix

    @property
    def d(self) -> int:
        return self.coupling.d

    def __call__(self, x, xp) -> np.ndarray:
        return eval_multitask(self, x, xp)


@dataclass(frozen=True)
class SampleSet:
    """Ordered sample points, one row per point.

    Construction is lenient about duplicates so that admissibility
    diagnostics can probe degenerate configurations; operations that
    require pairwise-distinct points enforce DISTINCTNESS_TOL themselves.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        if pts.shape[0] == 0:
            raise ValueError("sample set must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("sample points must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def min_pairwise_distance(self) -> float:
        if self.m < 2:
            return math.inf
        return float(np.min(cdist(self.points, self.points)[~np.eye(self.m, dtype=bool)]))


def eval_scalar(kernel: ScalarKernel, x, xp) -> float:
    """Evaluate k(x, x'); symmetric in its arguments."""
    return kernel(x, xp)


def eval_multitask(kernel: MultiTaskKernel, x, xp) -> np.ndarray:
    """Evaluate the d x d block K(x, x') = k(x, x') * A."""
    return kernel.scalar(x, xp) * kernel.coupling.entries


@dataclass(frozen=True)
class GramMatrix:
    """Dense md x md block kernel matrix with an attached LU solve handle."""

    dense: np.ndarray
    kernel: MultiTaskKernel
    samples: SampleSet
    condition_estimate: float
    _lu: tuple = field(repr=False)

    @property
    def m(self) -> int:
        return self.samples.m

    @property
    def d(self) -> int:
        return self.kernel.d

    @property
    def md(self) -> int:
        return self.dense.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve K[x] c = rhs via the stored LU factorization."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.md:
            raise ValueError(
                f"right-hand side has {rhs.shape[0]} rows, expected {self.md}"
            )
        return lu_solve(self._lu, rhs)


@dataclass(frozen=True)
class KernelColumn:
    """Stacked md x d block column K_x(t), block j = k(t, x_j) * A."""

    dense: np.ndarray
    t: np.ndarray


def _block_expand(scalar_matrix: np.ndarray, coupling: np.ndarray) -> np.ndarray:
    """Expand an (ma, mb) scalar matrix into (ma*d, mb*d) blocks s_jk * A."""
    ma, mb = scalar_matrix.shape
    d = coupling.shape[0]
    blocks = scalar_matrix[:, :, None, None] * coupling[None, None, :, :]
    return blocks.transpose(0, 2, 1, 3).reshape(ma * d, mb * d)


def assemble_gram(
    kernel: MultiTaskKernel,
    x: SampleSet,
    cond_threshold: float = DEFAULT_COND_THRESHOLD,
) -> GramMatrix:
    """Assemble and factorize the md x md block Gram matrix K[x].

    Raises SingularGramError when the points are not pairwise distinct or
    the 1-norm condition estimate of the factorized matrix exceeds
    ``cond_threshold``; either way the configuration fails the
    non-singularity requirement at working precision.
    """
    if x.min_pairwise_distance() <= DISTINCTNESS_TOL:
        raise SingularGramError(
            f"sample points are not pairwise distinct "
            f"(minimum distance {x.min_pairwise_distance():.3e})"
        )
    kernel.scalar.check_domain(x.points)
    scalar_gram = kernel.scalar.pairwise(x.points, x.points)
    dense = _block_expand(scalar_gram, kernel.coupling.entries)

    anorm = float(np.abs(dense).sum(axis=0).max())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(dense)
    if not np.all(np.isfinite(lu)):
        raise SingularGramError("Gram matrix factorization produced non-finite pivots")
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0:
        raise SingularGramError(f"condition estimation failed (info={info})")
    cond = math.inf if rcond == 0.0 else 1.0 / float(rcond)
    if cond > cond_threshold:
        raise SingularGramError(
            f"Gram matrix is singular to working precision "
            f"(condition estimate {cond:.3e} > {cond_threshold:.1e})"
        )
    return GramMatrix(
        dense=dense,
        kernel=kernel,
        samples=x,
        condition_estimate=cond,
        _lu=(lu, piv),
    )


def kernel_column(kernel: MultiTaskKernel, x: SampleSet, t) -> KernelColumn:
    """Stack the blocks k(t, x_j) * A into the md x d column K_x(t)."""
    pt = as_points(t, dim=x.n)
    kernel.scalar.check_domain(pt)
    s = kernel.scalar.pairwise(x.points, pt)[:, 0]
    dense = (s[:, None, None] * kernel.coupling.entries).reshape(
        x.m * kernel.d, kernel.d
    )
    return KernelColumn(dense=dense, t=pt[0])


def kernel_columns(kernel: MultiTaskKernel, x: SampleSet, ts: np.ndarray) -> np.ndarray:
    """Batched kernel columns for many evaluation points.

    Returns an (md, nt, d) array whose slice [:, i, :] is K_x(ts[i]).
    """
    pts = as_points(ts, dim=x.n)
    kernel.scalar.check_domain(pts)
    s = kernel.scalar.pairwise(x.points, pts)  # (m, nt)
    a = kernel.coupling.entries
    cols = s[:, None, :, None] * a[None, :, None, :]  # (m, d, nt, d)
    return cols.reshape(x.m * kernel.d, pts.shape[0], kernel.d)


def block_kernel_matrix(kernel: MultiTaskKernel, xa, xb) -> np.ndarray:
    """Dense (ma*d) x (mb*d) matrix of blocks K(a_i, b_j)."""
    pa, pb = as_points(xa), as_points(xb)
    if pa.shape[1] != pb.shape[1]:
        raise ValueError(f"dimension mismatch: {pa.shape[1]} vs {pb.shape[1]}")
    kernel.scalar.check_domain(pa)
    kernel.scalar.check_domain(pb)
    return _block_expand(kernel.scalar.pairwise(pa, pb), kernel.coupling.entries)


def suggest_exponential_width(
    features: np.ndarray, sample_size: int = 60, seed: int = 0
) -> float:
    """Mean pairwise l1 distance over a random subsample of the features.

    A practical width choice for the exponential kernel on raw feature
    vectors: distances then live on a unit scale inside the exponent.
    """
    features = np.asarray(features, dtype=float)
    rng = np.random.default_rng(seed)
    if features.shape[0] > sample_size:
        idx = rng.choice(features.shape[0], size=sample_size, replace=False)
        features = features[idx]
    dists = cdist(features, features, "cityblock")
    off_diag = dists[~np.eye(features.shape[0], dtype=bool)]
    return float(off_diag.mean())
