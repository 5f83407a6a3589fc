"""Synthetic channel generation and the on-disk matrix container.

Channels follow i.i.d. Rayleigh fading with a distance-based large-scale
gain C0 * (d / d0)^(-rho) applied to the BS-to-surface link; the
surface-to-user link carries unit large-scale gain (a per-user distance
model would slot in here). Identical recipes regenerate bit-identical
matrices.

Container format (shared by channel sets and scattering matrices):
  * line 1: one UTF-8 JSON object terminated by a newline, with keys
    ``format`` ("bdris.matrices"), ``version`` (1), ``metadata`` (free-form
    dict) and ``arrays`` (list of {"name", "rows", "cols"} in file order);
  * then, for each listed array, rows*cols little-endian complex128 values
    (interleaved IEEE-754 double re,im pairs) in row-major order.
"""

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .model import ChannelSet, ScatteringMatrix, SystemDims
from .util import crandn, dbm_to_watts, db_to_linear, make_rng

__all__ = [
    "PathlossParams",
    "ChannelRecipe",
    "pathloss",
    "generate",
    "save_matrices",
    "load_matrices",
    "save_channel_set",
    "load_channel_set",
    "save_scattering",
    "load_scattering",
]

FORMAT_NAME = "bdris.matrices"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<c16")  # little-endian complex128: interleaved re,im doubles


@dataclass(frozen=True)
class PathlossParams:
    """Distance-based large-scale fading C0 * (d / d0)^(-rho).

    c0_db: reference gain at distance d0_m, in dB.
    rho:   pathloss exponent.
    d_m:   BS-to-surface distance in meters.
    """

    c0_db: float = -30.0
    d0_m: float = 1.0
    rho: float = 2.2
    d_m: float = 50.0

    def __post_init__(self):
        if not self.d_m > 0 or not self.d0_m > 0:
            raise ValueError("distances must be > 0")


@dataclass(frozen=True)
class ChannelRecipe:
    """Everything needed to regenerate one channel instance bit-for-bit.

    ``user_distance_m`` controls the surface-to-user large-scale gain:
    ``None`` (or a non-positive value) keeps that link at unit gain, a
    positive distance applies the same pathloss law at that distance. The
    2.4 GHz carrier is metadata only; the large-scale gains already fix the
    link budget.
    """

    dims: SystemDims
    pathloss: PathlossParams = field(default_factory=PathlossParams)
    n0_dbm: float = -80.0
    seed: int = 0
    user_distance_m: float | None = None
    carrier_ghz: float = 2.4

    def user_gain(self) -> float:
        """Linear large-scale power gain of the surface-to-user link."""
        if self.user_distance_m is None or self.user_distance_m <= 0:
            return 1.0
        return pathloss(replace(self.pathloss, d_m=self.user_distance_m))


def pathloss(p: PathlossParams) -> float:
    """Linear large-scale power gain for the given parameters."""
    return db_to_linear(p.c0_db) * (p.d_m / p.d0_m) ** (-p.rho)


def generate(recipe: ChannelRecipe) -> ChannelSet:
    """Draw the channel instance described by ``recipe``.

    BS-to-surface entries are i.i.d. CN(0, gain) with gain from
    :func:`pathloss`; surface-to-user entries are i.i.d.
    CN(0, recipe.user_gain()). The BS-to-surface matrix is drawn first, so
    the stream layout is part of the reproducibility contract.
    """
    dims = recipe.dims
    rng = make_rng(recipe.seed)
    gain = pathloss(recipe.pathloss)
    bs_to_ris = crandn(rng, dims.elements, dims.antennas) * np.sqrt(gain)
    ris_to_users = crandn(rng, dims.users, dims.elements) * np.sqrt(recipe.user_gain())
    return ChannelSet(bs_to_ris, ris_to_users, dbm_to_watts(recipe.n0_dbm))


# ---------------------------------------------------------------------------
# container I/O


def save_matrices(path, arrays: dict, metadata: dict | None = None):
    """Write named complex matrices plus metadata to ``path``."""
    entries = []
    blobs = []
    for name, arr in arrays.items():
        mat = np.ascontiguousarray(np.asarray(arr, dtype=np.complex128))
        if mat.ndim != 2:
            raise ValueError(f"array {name!r} must be 2-D")
        entries.append({"name": name, "rows": mat.shape[0], "cols": mat.shape[1]})
        blobs.append(mat.astype(_DTYPE, copy=False).tobytes(order="C"))
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "metadata": metadata or {},
        "arrays": entries,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for blob in blobs:
            fh.write(blob)


def load_matrices(path):
    """Read a container written by :func:`save_matrices`.

    Returns (arrays, metadata); array byte counts are validated against
    the header.
    """
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: not a matrix container") from exc
        if header.get("format") != FORMAT_NAME:
            raise ValueError(f"{path}: unexpected format {header.get('format')!r}")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {header.get('version')!r}")
        arrays = {}
        for entry in header["arrays"]:
            rows, cols = int(entry["rows"]), int(entry["cols"])
            blob = fh.read(rows * cols * _DTYPE.itemsize)
            if len(blob) != rows * cols * _DTYPE.itemsize:
                raise ValueError(f"{path}: truncated array {entry['name']!r}")
            arrays[entry["name"]] = (
                np.frombuffer(blob, dtype=_DTYPE).astype(np.complex128).reshape(rows, cols)
            )
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after last array")
    return arrays, header["metadata"]


def _recipe_metadata(recipe: ChannelRecipe) -> dict:
    return {"kind": "channel_set", "recipe": asdict(recipe)}


def save_channel_set(path, channels: ChannelSet, recipe: ChannelRecipe | None = None):
    """Persist a channel instance (and, when known, its recipe)."""
    metadata = _recipe_metadata(recipe) if recipe is not None else {"kind": "channel_set"}
    metadata["noise_power"] = channels.noise_power
    save_matrices(
        path,
        {"bs_to_ris": channels.bs_to_ris, "ris_to_users": channels.ris_to_users},
        metadata,
    )


def load_channel_set(path):
    """Load a channel instance; returns (ChannelSet, metadata).

    Dimensions are cross-checked between the two stored matrices and, when
    a recipe is present, against its recorded dimensions.
    """
    arrays, metadata = load_matrices(path)
    if metadata.get("kind") != "channel_set":
        raise ValueError(f"{path}: container does not hold a channel set")
    channels = ChannelSet(
        arrays["bs_to_ris"], arrays["ris_to_users"], float(metadata["noise_power"])
    )
    recipe = metadata.get("recipe")
    if recipe is not None:
        dims = recipe["dims"]
        if (dims["users"], dims["antennas"], dims["elements"]) != (
            channels.users,
            channels.antennas,
            channels.elements,
        ):
            raise ValueError(f"{path}: stored matrices disagree with recipe dimensions")
    return channels, metadata


def save_scattering(path, theta: ScatteringMatrix, metadata: dict | None = None):
    """Persist a scattering matrix block-by-block."""
    meta = {
        "kind": "scattering_matrix",
        "groups": theta.groups,
        "block_size": theta.block_size,
        "feasibility_tol": theta.feasibility_tol,
    }
    if metadata:
        meta.update(metadata)
    arrays = {f"block_{g}": theta.blocks[g] for g in range(theta.groups)}
    save_matrices(path, arrays, meta)


def load_scattering(path) -> ScatteringMatrix:
    arrays, metadata = load_matrices(path)
    if metadata.get("kind") != "scattering_matrix":
        raise ValueError(f"{path}: container does not hold a scattering matrix")
    groups = int(metadata["groups"])
    blocks = np.stack([arrays[f"block_{g}"] for g in range(groups)])
    if blocks.shape[1] != int(metadata["block_size"]):
        raise ValueError(f"{path}: stored blocks disagree with recorded block size")
    return ScatteringMatrix(blocks, float(metadata.get("feasibility_tol", 1e-8)))
