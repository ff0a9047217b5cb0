"""Versioned binary checkpoint container (``.gfc``).

Layout (all integers little-endian):

    offset 0   4 bytes   magic b"GFCK"
    offset 4   uint32    format version (currently 1)
    offset 8   uint64    header length H in bytes
    offset 16  H bytes   UTF-8 JSON header (CheckpointHeader)
    offset 16+H          payload: raw little-endian float64 tensors

The header's ``tensors`` list gives each tensor's name, shape, byte offset
(relative to the payload start) and byte length. Tensor order is generator
parameters, generator Adam first moments, generator Adam second moments, then
the same three groups for the discriminator, each in NetworkParams order.
"""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from ganaug.core.optim import AdamState
from ganaug.errors import CheckpointFormatError, DimensionError, IncompatibleCheckpointError
from ganaug.models.params import NetworkParams
from ganaug.models.schemas import CheckpointHeader, TensorEntry
from ganaug.models.specs import DiscriminatorSpec, GeneratorSpec

logger = logging.getLogger(__name__)

MAGIC = b"GFCK"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<4sIQ")
_F8 = np.dtype("<f8")


@dataclass
class Checkpoint:
    epoch: int
    generator: NetworkParams
    discriminator: NetworkParams
    generator_adam: AdamState
    discriminator_adam: AdamState
    rng_state: dict
    config_fingerprint: str
    # Non-architecture settings the run was trained with; compared on resume.
    training: dict[str, str] = field(default_factory=dict)


def checkpoint_path(output_dir: str | Path, epoch: int) -> Path:
    return Path(output_dir) / f"ckpt_{epoch}.gfc"


def encode_rng_state(rng: np.random.Generator) -> dict:
    """Bit-generator state as JSON-safe values (128-bit integers become strings)."""
    state = rng.bit_generator.state
    return {
        "bit_generator": state["bit_generator"],
        "state": {k: str(v) for k, v in state["state"].items()},
        "has_uint32": int(state["has_uint32"]),
        "uinteger": int(state["uinteger"]),
    }


def restore_rng(encoded: dict) -> np.random.Generator:
    """Inverse of encode_rng_state."""
    if encoded.get("bit_generator") != "PCG64":
        raise CheckpointFormatError(f"unsupported bit generator {encoded.get('bit_generator')}")
    try:
        rng = np.random.default_rng()
        rng.bit_generator.state = {
            "bit_generator": "PCG64",
            "state": {k: int(v) for k, v in encoded["state"].items()},
            "has_uint32": int(encoded["has_uint32"]),
            "uinteger": int(encoded["uinteger"]),
        }
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointFormatError(f"unreadable RNG state: {e}") from e
    return rng


def _groups(ckpt: Checkpoint):
    for prefix, params, adam in (
        ("generator", ckpt.generator, ckpt.generator_adam),
        ("discriminator", ckpt.discriminator, ckpt.discriminator_adam),
    ):
        yield prefix, params.tensors
        yield f"{prefix}_adam_m", {n: adam.m[n] for n in params.names}
        yield f"{prefix}_adam_v", {n: adam.v[n] for n in params.names}


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> str:
    entries: list[TensorEntry] = []
    blobs: list[bytes] = []
    offset = 0
    for prefix, tensors in _groups(ckpt):
        for name, tensor in tensors.items():
            blob = np.ascontiguousarray(tensor, dtype=_F8).tobytes()
            entries.append(TensorEntry(
                name=f"{prefix}/{name}", shape=list(tensor.shape), offset=offset, nbytes=len(blob),
            ))
            blobs.append(blob)
            offset += len(blob)

    header = CheckpointHeader(
        format_version=FORMAT_VERSION,
        config_fingerprint=ckpt.config_fingerprint,
        epoch=ckpt.epoch,
        generator_spec=ckpt.generator.spec.model_dump(),
        discriminator_spec=ckpt.discriminator.spec.model_dump(),
        generator_adam_t=ckpt.generator_adam.t,
        discriminator_adam_t=ckpt.discriminator_adam.t,
        rng_state=ckpt.rng_state,
        training=ckpt.training,
        tensors=entries,
    )
    header_bytes = header.model_dump_json().encode("utf-8")

    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("wb") as f:
        f.write(_PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)
    logger.info("Checkpoint written: %s (epoch %d)", out, ckpt.epoch)
    return str(out)


def _read_header(raw: bytes, path: Path) -> tuple[CheckpointHeader, memoryview]:
    if len(raw) < _PREAMBLE.size:
        raise CheckpointFormatError(f"{path}: truncated checkpoint (no preamble)")
    magic, version, header_len = _PREAMBLE.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointFormatError(f"{path}: not a checkpoint file (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(
            f"{path}: unsupported checkpoint format version {version} (expected {FORMAT_VERSION})"
        )
    end = _PREAMBLE.size + header_len
    if len(raw) < end:
        raise CheckpointFormatError(f"{path}: truncated checkpoint header")
    try:
        header = CheckpointHeader.model_validate_json(raw[_PREAMBLE.size:end])
    except ValidationError as e:
        raise CheckpointFormatError(f"{path}: unreadable checkpoint header: {e}") from e
    return header, memoryview(raw)[end:]


def load_checkpoint(path: str | Path, expected_fingerprint: str | None = None) -> Checkpoint:
    """Read a checkpoint; with ``expected_fingerprint``, refuse a different architecture.

    Raises:
        CheckpointFormatError: Bad magic, unsupported version, or truncated/corrupt data.
        IncompatibleCheckpointError: Fingerprint differs from ``expected_fingerprint``.
    """
    p = Path(path)
    if not p.is_file():
        raise CheckpointFormatError(f"Checkpoint not found: {p}")
    header, payload = _read_header(p.read_bytes(), p)

    if expected_fingerprint is not None and header.config_fingerprint != expected_fingerprint:
        raise IncompatibleCheckpointError(
            f"{p} was written for a different architecture "
            f"(fingerprint {header.config_fingerprint}, current config {expected_fingerprint}; "
            f"checkpoint img_size={header.generator_spec.get('img_size')})"
        )

    tensors: dict[str, np.ndarray] = {}
    for entry in header.tensors:
        count = int(np.prod(entry.shape, dtype=np.int64))
        if entry.nbytes != count * _F8.itemsize or entry.offset + entry.nbytes > len(payload):
            raise CheckpointFormatError(f"{p}: truncated or corrupt tensor {entry.name}")
        data = np.frombuffer(payload, dtype=_F8, count=count, offset=entry.offset)
        tensors[entry.name] = data.reshape(entry.shape).astype(np.float64)

    try:
        g_spec = GeneratorSpec(**header.generator_spec)
        d_spec = DiscriminatorSpec(**header.discriminator_spec)
    except ValidationError as e:
        raise CheckpointFormatError(f"{p}: invalid network spec in header: {e}") from e

    def _group(prefix: str, spec) -> tuple[NetworkParams, dict, dict]:
        names = [e.name.split("/", 1)[1] for e in header.tensors if e.name.startswith(f"{prefix}/")]
        try:
            params = NetworkParams(spec, {n: tensors[f"{prefix}/{n}"] for n in names})
            m = {n: tensors[f"{prefix}_adam_m/{n}"] for n in names}
            v = {n: tensors[f"{prefix}_adam_v/{n}"] for n in names}
        except KeyError as e:
            raise CheckpointFormatError(f"{p}: missing tensor {e}") from e
        except DimensionError as e:
            raise CheckpointFormatError(f"{p}: tensors do not match the stored spec: {e}") from e
        return params, m, v

    g_params, g_m, g_v = _group("generator", g_spec)
    d_params, d_m, d_v = _group("discriminator", d_spec)

    logger.info("Checkpoint loaded: %s (epoch %d)", p, header.epoch)
    return Checkpoint(
        epoch=header.epoch,
        generator=g_params,
        discriminator=d_params,
        generator_adam=AdamState(m=g_m, v=g_v, t=header.generator_adam_t),
        discriminator_adam=AdamState(m=d_m, v=d_v, t=header.discriminator_adam_t),
        rng_state=header.rng_state,
        config_fingerprint=header.config_fingerprint,
        training=header.training,
    )
