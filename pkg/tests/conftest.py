"""Shared helpers: independent random-instance factories built directly on
numpy so test oracles do not lean on the library's own RNG plumbing."""

import numpy as np
import pytest
import scipy.linalg

from bdris import Beamformer, ChannelSet, ScatteringMatrix, SystemDims


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_channels(rng, users, antennas, elements, noise_power=0.5):
    return ChannelSet(
        bs_to_ris=crandn(rng, elements, antennas),
        ris_to_users=crandn(rng, users, elements),
        noise_power=noise_power,
    )


def random_blocks(rng, groups, size):
    return crandn(rng, groups, size, size)


def random_unitary_blocks(rng, groups, size):
    """Feasibility via an independent route: symmetrize, then polar factor
    computed from a matrix square root instead of the library's SVD path."""
    blocks = np.empty((groups, size, size), dtype=complex)
    for g in range(groups):
        b = crandn(rng, size, size)
        b = 0.5 * (b + b.T)
        blocks[g] = b @ np.linalg.inv(scipy.linalg.sqrtm(b.conj().T @ b))
    return blocks


def random_scattering(rng, groups, size, feasible=True):
    if feasible:
        return ScatteringMatrix(random_unitary_blocks(rng, groups, size))
    return ScatteringMatrix(random_blocks(rng, groups, size))


def random_beamformer(rng, antennas, users, max_power=2.0):
    v = crandn(rng, antennas, users)
    v *= np.sqrt(max_power) / np.linalg.norm(v)
    return Beamformer(v, max_power)


def dense_theta(theta):
    """Assemble the full block-diagonal matrix; the test-side oracle."""
    return scipy.linalg.block_diag(*theta.blocks)


def rel_err(candidate, reference):
    return np.linalg.norm(candidate - reference) / max(np.linalg.norm(reference), 1e-12)


def fd_matrix(fn, mat, h=1e-6):
    """Entrywise central differences of a real function of one matrix."""
    out = np.zeros_like(mat)
    for i in range(mat.shape[0]):
        for j in range(mat.shape[1]):
            for delta, axis in ((h, 1.0), (1j * h, 1j)):
                plus = mat.copy()
                plus[i, j] += delta
                minus = mat.copy()
                minus[i, j] -= delta
                out[i, j] += axis * (fn(plus) - fn(minus)) / (2.0 * h)
    return out


def random_instance(seed, users=3, antennas=3, elements=4, groups=2, noise_power=0.5,
                    feasible=True):
    rng = np.random.default_rng(seed)
    dims = SystemDims(users, antennas, elements, groups)
    channels = random_channels(rng, users, antennas, elements, noise_power)
    theta = random_scattering(rng, groups, dims.group_size, feasible=feasible)
    bf = random_beamformer(rng, antennas, users)
    return dims, channels, theta, bf


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
