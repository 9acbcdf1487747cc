"""Model file: one JSON manifest line, then one ``name<TAB>base64`` line per parameter.

Payload values are little-endian float64 in row-major order, written in spec
order. The manifest carries a SHA-256 of the payload so truncation is caught.
"""
from __future__ import annotations

import base64
import binascii
import hashlib
import json
from pathlib import Path

import numpy as np

from ..errors import CorruptModelError, ModelShapeError, ModelVersionError
from .model import Model, ModelSpec

FORMAT_VERSION = 1
_LE_F64 = np.dtype("<f8")


def _payload_lines(model: Model):
    for name, value in model.params.items():
        raw = np.ascontiguousarray(value, dtype=_LE_F64).tobytes()
        yield f"{name}\t{base64.b64encode(raw).decode('ascii')}\n"


def dumps_model(model: Model) -> bytes:
    payload = "".join(_payload_lines(model))
    manifest = {
        "format_version": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "rng_seed": model.seed,
        "overrides": model.overrides,
        "metadata": model.metadata,
        "parameters": [{"name": k, "shape": list(v.shape)} for k, v in model.params.items()],
        "payload_sha256": hashlib.sha256(payload.encode("ascii")).hexdigest(),
    }
    head = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return (head + "\n" + payload).encode("utf-8")


def save_model(model: Model, path) -> Path:
    path = Path(path)
    path.write_bytes(dumps_model(model))
    return path


def loads_model(data: bytes) -> Model:
    try:
        text = data.decode("utf-8")
        head, _, payload = text.partition("\n")
        manifest = json.loads(head)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModelError(f"model manifest is unreadable: {exc}") from exc
    if not isinstance(manifest, dict) or "format_version" not in manifest:
        raise CorruptModelError("model manifest lacks format_version")
    if manifest["format_version"] != FORMAT_VERSION:
        raise ModelVersionError(
            f"unsupported model format_version {manifest['format_version']!r}; "
            f"this build reads version {FORMAT_VERSION}")
    if hashlib.sha256(payload.encode("ascii", "replace")).hexdigest() != manifest.get("payload_sha256"):
        raise CorruptModelError("parameter payload is truncated or altered (checksum mismatch)")

    spec = ModelSpec.from_dict(manifest["spec"])
    expected = spec.parameter_shapes()
    declared = {p["name"]: tuple(p["shape"]) for p in manifest["parameters"]}
    if declared != expected:
        raise ModelShapeError("declared parameter shapes disagree with the model spec")

    params = {}
    for line in payload.splitlines():
        name, _, b64 = line.partition("\t")
        try:
            raw = base64.b64decode(b64, validate=True)
        except binascii.Error as exc:
            raise CorruptModelError(f"parameter {name!r} payload is not valid base64") from exc
        values = np.frombuffer(raw, dtype=_LE_F64)
        if name not in expected:
            raise ModelShapeError(f"unexpected parameter {name!r}")
        if values.size != int(np.prod(expected[name])):
            raise ModelShapeError(
                f"parameter {name!r} holds {values.size} values, shape {expected[name]} needs "
                f"{int(np.prod(expected[name]))}")
        params[name] = values.astype(np.float64).reshape(expected[name])
    if list(params) != list(expected):
        raise CorruptModelError("parameter payload is incomplete or out of order")
    return Model(spec, params, seed=manifest["rng_seed"],
                 overrides=manifest.get("overrides", {}), metadata=manifest.get("metadata", {}))


def load_model(path) -> Model:
    return loads_model(Path(path).read_bytes())
