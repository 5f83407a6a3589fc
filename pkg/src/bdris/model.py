"""Downlink system model: dimensions, channels, beamformers, block-diagonal
scattering matrices, and the SINR / sum-rate objectives built on them.

A base station with ``antennas`` transmit antennas serves ``users``
single-antenna receivers through a reflective surface of ``elements``
elements partitioned into ``groups`` groups. The surface response is a
block-diagonal matrix with one square block per group; the direct
BS-to-user path is assumed blocked, so everything flows through the
cascade ``ris_to_users @ blkdiag(blocks) @ bs_to_ris``.

All quantities are stored in linear units (watts, amplitude gains); dB
conversions belong at the CLI boundary. Values are treated as immutable
after construction and are never mutated by library code.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SystemDims",
    "ChannelSet",
    "ScatteringMatrix",
    "Beamformer",
    "GroupView",
    "identity_scattering",
    "group_view",
    "equivalent_channel",
    "sinr",
    "group_sinr",
    "sum_rate",
    "symmetry_penalty",
    "penalized_objective",
    "groupwise_objective",
    "uniform_power_beamformer",
    "mmse_beamformer",
]


@dataclass(frozen=True)
class SystemDims:
    """Problem dimensions.

    ``groups == 1`` is the fully-connected architecture, ``groups ==
    elements`` the single-connected (diagonal) one, anything in between
    group-connected. The group block size is derived, never stored.
    """

    users: int
    antennas: int
    elements: int
    groups: int

    def __post_init__(self):
        for name in ("users", "antennas", "elements", "groups"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.elements % self.groups != 0:
            raise ValueError(
                f"groups ({self.groups}) must divide elements ({self.elements})"
            )

    @property
    def group_size(self) -> int:
        return self.elements // self.groups


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """One random channel instance.

    bs_to_ris:    (elements, antennas) complex, large-scale fading applied.
    ris_to_users: (users, elements) complex, row k is user k's channel.
    noise_power:  receiver noise power in watts, > 0.
    """

    bs_to_ris: np.ndarray
    ris_to_users: np.ndarray
    noise_power: float

    def __post_init__(self):
        tx = np.asarray(self.bs_to_ris, dtype=np.complex128)
        rx = np.asarray(self.ris_to_users, dtype=np.complex128)
        if tx.ndim != 2 or rx.ndim != 2:
            raise ValueError("channel matrices must be 2-D")
        if tx.shape[0] != rx.shape[1]:
            raise ValueError(
                f"element count mismatch: bs_to_ris has {tx.shape[0]} rows, "
                f"ris_to_users has {rx.shape[1]} columns"
            )
        if not self.noise_power > 0:
            raise ValueError("noise_power must be > 0")
        object.__setattr__(self, "bs_to_ris", tx)
        object.__setattr__(self, "ris_to_users", rx)

    @property
    def users(self) -> int:
        return self.ris_to_users.shape[0]

    @property
    def antennas(self) -> int:
        return self.bs_to_ris.shape[1]

    @property
    def elements(self) -> int:
        return self.bs_to_ris.shape[0]


@dataclass(frozen=True, eq=False)
class ScatteringMatrix:
    """Block-diagonal surface response: ``groups`` square complex blocks.

    Only the blocks are stored, stacked as a (groups, block, block) array;
    off-block entries of the assembled matrix are identically zero and are
    never materialized. A matrix is feasible when every block is unitary
    and symmetric (plain transpose) within ``feasibility_tol``.
    """

    blocks: np.ndarray
    feasibility_tol: float = 1e-8

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=np.complex128)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise ValueError(
                "blocks must be a (groups, size, size) stack of square matrices"
            )
        object.__setattr__(self, "blocks", blocks)

    @property
    def groups(self) -> int:
        return self.blocks.shape[0]

    @property
    def block_size(self) -> int:
        return self.blocks.shape[1]

    @property
    def elements(self) -> int:
        return self.groups * self.block_size

    def unitarity_residuals(self) -> np.ndarray:
        """Per-block Frobenius distance of B @ B^H from the identity."""
        eye = np.eye(self.block_size)
        gram = self.blocks @ self.blocks.conj().transpose(0, 2, 1)
        return np.linalg.norm(gram - eye, axis=(1, 2))

    def symmetry_residuals(self) -> np.ndarray:
        """Per-block Frobenius distance of each block from its transpose."""
        return np.linalg.norm(self.blocks - self.blocks.transpose(0, 2, 1), axis=(1, 2))

    def is_feasible(self) -> bool:
        return bool(
            self.unitarity_residuals().max() <= self.feasibility_tol
            and self.symmetry_residuals().max() <= self.feasibility_tol
        )


@dataclass(frozen=True, eq=False)
class Beamformer:
    """Transmit precoder: column k of ``matrix`` (antennas, users) serves
    user k. Total power may not exceed ``max_power`` watts."""

    matrix: np.ndarray
    max_power: float

    def __post_init__(self):
        v = np.asarray(self.matrix, dtype=np.complex128)
        if v.ndim != 2:
            raise ValueError("beamforming matrix must be 2-D")
        if not self.max_power > 0:
            raise ValueError("max_power must be > 0")
        used = float(np.linalg.norm(v) ** 2)
        if used > self.max_power * (1.0 + 1e-12):
            raise ValueError(
                f"power constraint violated: |V|_F^2 = {used} > {self.max_power}"
            )
        object.__setattr__(self, "matrix", v)


@dataclass(frozen=True, eq=False)
class GroupView:
    """Channel slices seen by one (user, group) pair.

    user_channel: (group_size,) slice of the user's surface-to-user channel.
    bs_channel:   (group_size, antennas) row block of the BS-to-surface channel.
    """

    user_channel: np.ndarray
    bs_channel: np.ndarray


def identity_scattering(dims: SystemDims) -> ScatteringMatrix:
    """Identity blocks; the surface acts as a plain per-group mirror."""
    size = dims.group_size
    blocks = np.broadcast_to(np.eye(size, dtype=np.complex128), (dims.groups, size, size))
    return ScatteringMatrix(np.array(blocks))


def group_view(channels: ChannelSet, groups: int, k: int, g: int) -> GroupView:
    """Extract the channel slices of group ``g`` for user ``k`` (0-based)."""
    size = channels.elements // groups
    if channels.elements % groups != 0:
        raise ValueError("groups must divide the element count")
    if not 0 <= k < channels.users:
        raise ValueError(f"user index {k} out of range")
    if not 0 <= g < groups:
        raise ValueError(f"group index {g} out of range")
    rows = slice(g * size, (g + 1) * size)
    return GroupView(
        user_channel=channels.ris_to_users[k, rows],
        bs_channel=channels.bs_to_ris[rows, :],
    )


def _check_dims(channels: ChannelSet, theta: ScatteringMatrix):
    if theta.elements != channels.elements:
        raise ValueError(
            f"scattering matrix spans {theta.elements} elements, "
            f"channels have {channels.elements}"
        )


def _grouped_channels(channels: ChannelSet, groups: int, size: int):
    """Reshape the two channel matrices into per-group stacks."""
    k, r = channels.ris_to_users.shape
    rx = np.ascontiguousarray(
        channels.ris_to_users.reshape(k, groups, size).transpose(1, 0, 2)
    )  # (groups, users, size)
    tx = channels.bs_to_ris.reshape(groups, size, -1)  # (groups, size, antennas)
    return rx, tx


def _per_group_channels(channels: ChannelSet, theta: ScatteringMatrix) -> np.ndarray:
    """(groups, users, antennas) stack of single-group equivalent channels."""
    rx, tx = _grouped_channels(channels, theta.groups, theta.block_size)
    return rx @ theta.blocks @ tx


def equivalent_channel(channels: ChannelSet, theta: ScatteringMatrix) -> np.ndarray:
    """End-to-end (users, antennas) channel through the surface.

    Computed block-by-block; the full elements x elements matrix is never
    assembled. With a single group this is that group's equivalent channel
    unchanged, so single-group and full evaluations share one compute path.
    """
    _check_dims(channels, theta)
    return _per_group_channels(channels, theta).sum(axis=0)


def _rates_terms(products: np.ndarray, noise_power: float):
    """Per-user signal power, interference-plus-noise, and SINR from the
    (users, users) matrix of inner products e_k v_i."""
    power = np.abs(products) ** 2
    signal = np.diagonal(power).copy()
    interference = power.sum(axis=1) - signal + noise_power
    return signal, interference, signal / interference


def sinr(channels: ChannelSet, theta: ScatteringMatrix, bf: Beamformer, k: int) -> float:
    """SINR of user ``k`` (0-based): desired power over interference plus noise."""
    if not 0 <= k < channels.users:
        raise ValueError(f"user index {k} out of range")
    e_k = equivalent_channel(channels, theta)[k]
    products = e_k @ bf.matrix
    power = np.abs(products) ** 2
    interference = power.sum() - power[k] + channels.noise_power
    return float(power[k] / interference)


def group_sinr(
    channels: ChannelSet, theta: ScatteringMatrix, bf: Beamformer, k: int, g: int
) -> float:
    """SINR of user ``k`` through group ``g`` alone, every other group zeroed."""
    _check_dims(channels, theta)
    if not 0 <= k < channels.users:
        raise ValueError(f"user index {k} out of range")
    if not 0 <= g < theta.groups:
        raise ValueError(f"group index {g} out of range")
    e_kg = _per_group_channels(channels, theta)[g, k]
    products = e_kg @ bf.matrix
    power = np.abs(products) ** 2
    interference = power.sum() - power[k] + channels.noise_power
    return float(power[k] / interference)


def sum_rate(channels: ChannelSet, theta: ScatteringMatrix, bf: Beamformer) -> float:
    """Achievable sum-rate sum_k log2(1 + SINR_k) in bits/s/Hz."""
    e = equivalent_channel(channels, theta)
    _, _, gammas = _rates_terms(e @ bf.matrix, channels.noise_power)
    return float(np.log2(1.0 + gammas).sum())


def symmetry_penalty(theta: ScatteringMatrix) -> float:
    """Squared Frobenius distance of the surface matrix from its transpose.

    Off-block entries are zero, so the full-matrix distance reduces to the
    sum over blocks.
    """
    return float((theta.symmetry_residuals() ** 2).sum())


def penalized_objective(
    channels: ChannelSet, theta: ScatteringMatrix, bf: Beamformer, nu: float
) -> float:
    """Sum-rate minus ``nu`` times the symmetry penalty."""
    if nu < 0:
        raise ValueError("nu must be >= 0")
    return sum_rate(channels, theta, bf) - nu * symmetry_penalty(theta)


def groupwise_objective(
    channels: ChannelSet, theta: ScatteringMatrix, bf: Beamformer, nu: float
) -> float:
    """Decoupled surrogate of the penalized objective.

    Each group's rates are evaluated with the other groups' contributions
    zeroed, then summed; the symmetry penalty is unchanged. For a single
    group this equals :func:`penalized_objective` exactly. The per-group
    closed-form gradient differentiates this surrogate, so it is the
    objective the finite-difference oracle must probe in that mode.
    """
    if nu < 0:
        raise ValueError("nu must be >= 0")
    _check_dims(channels, theta)
    products = _per_group_channels(channels, theta) @ bf.matrix  # (groups, users, users)
    power = np.abs(products) ** 2
    signal = np.diagonal(power, axis1=1, axis2=2)
    interference = power.sum(axis=2) - signal + channels.noise_power
    total = float(np.log2(1.0 + signal / interference).sum())
    return total - nu * symmetry_penalty(theta)


def uniform_power_beamformer(dims: SystemDims, max_power: float) -> Beamformer:
    """Equal-power single-antenna assignment.

    For a fully-loaded system (users == antennas) this is
    sqrt(max_power / users) times the identity; otherwise column k excites
    antenna k mod antennas with power max_power / users. The budget is met
    with equality either way.
    """
    if not max_power > 0:
        raise ValueError("max_power must be > 0")
    amplitude = np.sqrt(max_power / dims.users)
    v = np.zeros((dims.antennas, dims.users), dtype=np.complex128)
    for k in range(dims.users):
        v[k % dims.antennas, k] = amplitude
    return Beamformer(v, max_power)


def mmse_beamformer(
    channels: ChannelSet, theta: ScatteringMatrix, max_power: float
) -> Beamformer:
    """Regularized channel inversion scaled to the full power budget.

    V = c * E^H (E E^H + (users * noise / max_power) I)^{-1} with c chosen
    so |V|_F^2 = max_power. The regularizer keeps the Gram matrix
    invertible for any positive noise power.
    """
    if not max_power > 0:
        raise ValueError("max_power must be > 0")
    e = equivalent_channel(channels, theta)
    k = channels.users
    gram = e @ e.conj().T + (k * channels.noise_power / max_power) * np.eye(k)
    # E^H gram^{-1} == (gram^{-1} E)^H because gram is Hermitian.
    v = np.linalg.solve(gram, e).conj().T
    scale = float(np.linalg.norm(v))
    if scale == 0.0:
        return Beamformer(v, max_power)
    return Beamformer(v * (np.sqrt(max_power) / scale), max_power)
