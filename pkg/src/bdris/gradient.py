"""Closed-form complex gradients of the penalized sum-rate objective, the
rank-one building blocks behind them, and a finite-difference oracle.

Gradient convention: for a real-valued f of a complex matrix X, the
gradient is dF/dRe(X) + j dF/dIm(X) = 2 dF/dX*, so that moving along the
gradient is steepest ascent of f. The two trace identities used by the
penalty and SINR terms are exposed as :func:`lemma1_gradient` and
:func:`lemma2_gradient` for direct numerical verification.
"""

import enum

import numpy as np

from .model import Beamformer, ChannelSet, ScatteringMatrix

__all__ = [
    "GradientMode",
    "penalty_gradient",
    "lemma1_gradient",
    "lemma2_gradient",
    "euclidean_gradient",
    "euclidean_gradient_diag_power",
    "fd_gradient",
]

_LN2 = np.log(2.0)


class GradientMode(enum.Enum):
    """Which objective the per-group SINR gradient differentiates.

    GROUPWISE_DECOUPLED: each group's SINR is evaluated with all other groups
    zeroed (the decoupled surrogate; see model.groupwise_objective).
    EXACT_COUPLED: the same rank-one structure, but every scalar
    coefficient uses the full equivalent channel, giving the gradient of
    the true penalized objective. The two coincide when there is a single
    group.

    The surrogate is invariant to the phase of a 1x1 block, so its
    Riemannian gradient vanishes identically on single-element groups;
    EXACT_COUPLED is therefore the solver default.
    """

    GROUPWISE_DECOUPLED = "groupwise_decoupled"
    EXACT_COUPLED = "exact_coupled"


def penalty_gradient(theta_g: np.ndarray, nu: float) -> np.ndarray:
    """Gradient contribution of -nu * |T - T^T|_F^2: always antisymmetric."""
    if nu < 0:
        raise ValueError("nu must be >= 0")
    theta_g = np.asarray(theta_g, dtype=np.complex128)
    return -4.0 * nu * (theta_g - theta_g.T)


def lemma1_gradient(a: np.ndarray) -> np.ndarray:
    """Gradient of the real function Tr{conj(A) A}: equals 2 A^T."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("input must be square")
    return 2.0 * a.T


def lemma2_gradient(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Gradient of |a^T B c|^2 with respect to B: 2 d conj(a) c^H, d = a^T B c."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    c = np.asarray(c, dtype=np.complex128)
    d = a @ b @ c
    return 2.0 * d * np.outer(a.conj(), c.conj())


def _coefficients(products: np.ndarray, noise_power: float) -> np.ndarray:
    """Mixing matrix C so that a group's SINR-gradient is
    2 conj(H_g)^T C conj(U_g)^T.

    ``products`` holds the scalars t_{k,l} = e_k v_l (optionally stacked
    along leading axes). Row k carries the quotient-rule weights of user
    k's rate: the diagonal entry weights the desired-signal rank-one term,
    off-diagonal entries the interference ones.
    """
    power = np.abs(products) ** 2
    signal = np.diagonal(power, axis1=-2, axis2=-1).copy()
    interference = power.sum(axis=-1) - signal + noise_power
    gamma = signal / interference
    weight = 1.0 / (_LN2 * (1.0 + gamma) * interference**2)
    coeff = -(weight * signal)[..., None] * products
    idx = np.arange(products.shape[-1])
    diag = weight * interference * np.diagonal(products, axis1=-2, axis2=-1)
    coeff[..., idx, idx] = diag
    return coeff


def euclidean_gradient(
    channels: ChannelSet,
    theta: ScatteringMatrix,
    bf: Beamformer,
    nu: float,
    mode: GradientMode = GradientMode.GROUPWISE_DECOUPLED,
) -> np.ndarray:
    """Per-block gradient of the penalized objective, stacked (groups, size, size).

    Every SINR term contributes a rank-one factor h_k^(g) (W^(g) v_l)^T;
    the per-group result is assembled as 2 conj(H_g)^T C conj(W_g V)^T with
    the quotient-rule coefficients in C, plus the penalty gradient.
    """
    if nu < 0:
        raise ValueError("nu must be >= 0")
    if theta.elements != channels.elements:
        raise ValueError("scattering matrix and channels disagree on element count")
    groups, size = theta.groups, theta.block_size
    users = channels.users
    v = bf.matrix
    # (groups, users, size) and (groups, size, antennas) channel stacks
    h_g = np.ascontiguousarray(
        channels.ris_to_users.reshape(users, groups, size).transpose(1, 0, 2)
    )
    w_g = channels.bs_to_ris.reshape(groups, size, -1)
    u_g = w_g @ v  # (groups, size, users)
    if mode is GradientMode.EXACT_COUPLED:
        coeff = _coefficients((h_g @ theta.blocks @ w_g).sum(axis=0) @ v,
                              channels.noise_power)[None]
    else:
        coeff = _coefficients(h_g @ theta.blocks @ w_g @ v, channels.noise_power)
    out = 2.0 * (h_g.conj().transpose(0, 2, 1) @ coeff @ u_g.conj().transpose(0, 2, 1))
    out -= 4.0 * nu * (theta.blocks - theta.blocks.transpose(0, 2, 1))
    return out


def euclidean_gradient_diag_power(
    channels: ChannelSet,
    theta: ScatteringMatrix,
    power_allocation: np.ndarray,
    nu: float,
) -> np.ndarray:
    """Scalar-entry form of the gradient for diagonal power-allocation
    beamforming on a fully-loaded system (users == antennas).

    Works directly with the entries e_{k,i}^(g) of the per-group equivalent
    channel, each interference term carrying its own user's power; equals
    :func:`euclidean_gradient` with V = diag(sqrt(power_allocation)).
    """
    if nu < 0:
        raise ValueError("nu must be >= 0")
    powers = np.asarray(power_allocation, dtype=np.float64)
    if (powers < 0).any():
        raise ValueError("power allocation entries must be >= 0")
    users = channels.users
    if users != channels.antennas:
        raise ValueError("diagonal power allocation requires users == antennas")
    if powers.shape != (users,):
        raise ValueError(f"power allocation must have length {users}")
    size = theta.block_size
    n0 = channels.noise_power
    amplitudes = np.sqrt(powers)
    out = np.empty_like(theta.blocks)
    for g in range(theta.groups):
        rows = slice(g * size, (g + 1) * size)
        h_g = channels.ris_to_users[:, rows]
        w_g = channels.bs_to_ris[rows, :]
        e_g = h_g @ theta.blocks[g] @ w_g  # entries e_{k,i}^(g)
        scaled = e_g * amplitudes[None, :]  # sqrt(v_i) e_{k,i}
        power = np.abs(scaled) ** 2
        block = np.zeros((size, size), dtype=np.complex128)
        for k in range(users):
            signal = power[k, k]
            interference = power[k].sum() - signal + n0
            gamma = signal / interference
            desired = (
                2.0
                * interference
                * np.conj(np.conj(scaled[k, k]) * np.outer(h_g[k], amplitudes[k] * w_g[:, k]))
            )
            cross = np.zeros((size, size), dtype=np.complex128)
            for i in range(users):
                if i == k:
                    continue
                cross += np.conj(
                    np.conj(scaled[k, i]) * np.outer(h_g[k], amplitudes[i] * w_g[:, i])
                )
            block += (desired - 2.0 * signal * cross) / (
                _LN2 * (1.0 + gamma) * interference**2
            )
        out[g] = block + penalty_gradient(theta.blocks[g], nu)
    return out


def fd_gradient(objective, theta: ScatteringMatrix, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of a real objective of theta.

    Entry (i, j) of block g is probed along the real and imaginary axes:
    [f(T + h E_ij) - f(T - h E_ij)] / 2h + j [f(T + jh E_ij) - f(T - jh E_ij)] / 2h,
    matching the 2 dF/dX* convention of the closed forms. Independent of
    every closed-form path; this is the validation oracle.
    """
    if not h > 0:
        raise ValueError("step h must be > 0")
    base = theta.blocks
    out = np.zeros_like(base)

    def probe(g, i, j, delta):
        plus = base.copy()
        plus[g, i, j] += delta
        minus = base.copy()
        minus[g, i, j] -= delta
        return (
            objective(ScatteringMatrix(plus, theta.feasibility_tol))
            - objective(ScatteringMatrix(minus, theta.feasibility_tol))
        ) / (2.0 * h)

    for g in range(theta.groups):
        for i in range(theta.block_size):
            for j in range(theta.block_size):
                out[g, i, j] = probe(g, i, j, h) + 1j * probe(g, i, j, 1j * h)
    return out
