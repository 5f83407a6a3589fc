"""Block unitary-manifold machinery: metric, tangent projection, QR
retraction, and the symmetric / unitary / unitary-symmetric projections.

Each scattering block lives on the manifold of square unitary matrices;
directions are stacks of ambient block matrices. The metric is the
canonical embedded one, Re Tr(A^H B) summed over blocks, matching the
tangent projector below.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .model import ScatteringMatrix, SystemDims
from .util import crandn, make_rng

__all__ = [
    "TangentDirection",
    "RetractionError",
    "ProjectionError",
    "DegenerateProjectionWarning",
    "riemannian_inner",
    "tangent_project",
    "retract",
    "project_symmetric",
    "project_unitary",
    "project_unitary_symmetric",
    "random_unitary_symmetric",
]


class RetractionError(RuntimeError):
    """The step produced a rank-deficient block; the caller should shrink it."""


class ProjectionError(RuntimeError):
    """A projection lost unitarity beyond tolerance on a well-posed input."""


class DegenerateProjectionWarning(UserWarning):
    """The symmetrized input was numerically singular; the result may not be
    symmetric to full accuracy."""


@dataclass(frozen=True, eq=False)
class TangentDirection:
    """Stack of per-block ambient matrices representing a search direction.

    After :func:`tangent_project` at a unitary base point T, each block X
    satisfies the tangency condition T^H X skew-Hermitian.
    """

    blocks: np.ndarray

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=np.complex128)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise ValueError("blocks must be a (groups, size, size) stack")
        object.__setattr__(self, "blocks", blocks)

    def __add__(self, other):
        return TangentDirection(self.blocks + other.blocks)

    def __sub__(self, other):
        return TangentDirection(self.blocks - other.blocks)

    def __mul__(self, scalar):
        return TangentDirection(self.blocks * scalar)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.blocks))


def riemannian_inner(a: TangentDirection, b: TangentDirection) -> float:
    """Sum over blocks of Re Tr(A_g^H B_g)."""
    if a.blocks.shape != b.blocks.shape:
        raise ValueError(
            f"block structure mismatch: {a.blocks.shape} vs {b.blocks.shape}"
        )
    return float(np.real(np.vdot(a.blocks, b.blocks)))


def _as_block_stack(direction) -> np.ndarray:
    if isinstance(direction, TangentDirection):
        return direction.blocks
    return np.asarray(direction, dtype=np.complex128)


def tangent_project(theta: ScatteringMatrix, direction) -> TangentDirection:
    """Project an ambient direction onto the tangent space at ``theta``.

    Per block: X - T (T^H X + X^H T) / 2. The projector is linear and
    idempotent, and leaves already-tangent directions unchanged.
    """
    x = _as_block_stack(direction)
    if x.shape != theta.blocks.shape:
        raise ValueError(f"direction shape {x.shape} != blocks {theta.blocks.shape}")
    t_h_x = theta.blocks.conj().transpose(0, 2, 1) @ x
    herm = 0.5 * (t_h_x + t_h_x.conj().transpose(0, 2, 1))
    return TangentDirection(x - theta.blocks @ herm)


def retract(theta: ScatteringMatrix, xi: TangentDirection, alpha: float) -> ScatteringMatrix:
    """Map theta + alpha * xi back to the manifold via per-block QR.

    The Q factor is normalized so the R factor has a positive-real
    diagonal, which makes the retraction unique and an exact identity at
    alpha = 0. Raises :class:`RetractionError` when a stepped block is
    numerically rank-deficient.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    stepped = theta.blocks + alpha * xi.blocks
    if np.array_equal(stepped, theta.blocks):
        return theta  # no-op step: exact, skips QR roundoff
    q, r = np.linalg.qr(stepped)
    idx = np.arange(theta.block_size)
    diag = r[:, idx, idx]
    mags = np.abs(diag)
    if (mags < 1e-12 * max(float(mags.max(initial=0.0)), 1.0)).any():
        raise RetractionError(f"rank-deficient block at step alpha={alpha}")
    q = q * (diag / mags)[:, None, :]
    return ScatteringMatrix(q, theta.feasibility_tol)


def project_symmetric(m: np.ndarray) -> np.ndarray:
    """Nearest symmetric matrix in Frobenius norm: (M + M^T) / 2."""
    m = np.asarray(m, dtype=np.complex128)
    return 0.5 * (m + m.T)


def _polar_unitary(m: np.ndarray):
    """Unitary polar factor of a square matrix and its singular values.

    The 1x1 case is computed directly as z / |z| so that scalar phases are
    exact; the zero scalar maps to 1 by the SVD convention.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if m.shape == (1, 1):
        z = m[0, 0]
        mag = np.abs(z)  # builtin abs() can differ from np.abs by one ulp
        if mag == 0.0:
            return np.ones((1, 1), dtype=np.complex128), np.zeros(1)
        return np.array([[z / mag]]), np.array([mag])
    u, s, vh = np.linalg.svd(m)
    return u @ vh, s


def project_unitary(m: np.ndarray) -> np.ndarray:
    """Closest unitary matrix: the product of the SVD's singular-vector
    factors (equivalently the polar factor)."""
    q, _ = _polar_unitary(m)
    return q


def project_unitary_symmetric(m: np.ndarray) -> np.ndarray:
    """Map a square matrix onto the symmetric-unitary feasible set.

    Symmetrize, then take the unitary polar factor. For a nonsingular
    symmetrized input the polar factor is itself symmetric, so the final
    explicit symmetrization below is a no-op up to roundoff and unitarity
    is preserved; a numerically singular symmetrized input triggers
    :class:`DegenerateProjectionWarning` and the result is returned as-is.
    """
    b = project_symmetric(m)
    q, s = _polar_unitary(b)
    degenerate = s[0] == 0.0 or s[-1] < 1e-12 * s[0]
    if degenerate:
        warnings.warn(
            "symmetrized input is numerically singular; projection may lose symmetry",
            DegenerateProjectionWarning,
            stacklevel=2,
        )
    q = project_symmetric(q)
    size = q.shape[0]
    residual = np.linalg.norm(q @ q.conj().T - np.eye(size))
    if residual > 1e-10 and not degenerate:
        raise ProjectionError(f"unitarity lost after symmetrization: residual {residual}")
    return q


def random_unitary_symmetric(dims: SystemDims, seed: int) -> ScatteringMatrix:
    """Random feasible scattering matrix: per block, a complex Gaussian draw
    projected onto the symmetric-unitary set. Deterministic in the seed."""
    rng = make_rng(seed)
    size = dims.group_size
    blocks = np.stack(
        [project_unitary_symmetric(crandn(rng, size, size)) for _ in range(dims.groups)]
    )
    return ScatteringMatrix(blocks)
