"""Flat binary container for path bundles and value fields.

Layout: magic ``JBSD``, uint16 format version, uint32 header length, a UTF-8
JSON header (metadata plus an array directory), then the array bodies in
column-major order at the offsets the directory lists.
"""
import json
import struct
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from src.operators.value_field import ValueField
from src.sde_sim.grid import TimeGrid
from src.sde_sim.simulator import PathBundle
from src.utils.errors import ArtifactFormatError

MAGIC = b"JBSD"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<4sHI")


def write_container(path: Path, kind: str, meta: Dict[str, Any], arrays: Dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    directory, bodies, offset = [], [], 0
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        body = arr.tobytes(order="F")
        directory.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape),
                          "offset": offset, "nbytes": len(body)})
        bodies.append(body)
        offset += len(body)
    header = json.dumps({"kind": kind, "meta": meta, "arrays": directory}, sort_keys=True,
                        default=str).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header)))
        f.write(header)
        for body in bodies:
            f.write(body)
    return path


def read_container(path: Path) -> Tuple[str, Dict[str, Any], Dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _PREAMBLE.size:
        raise ArtifactFormatError(f"{path} is too short for a container", path=str(path))
    magic, version, header_len = _PREAMBLE.unpack_from(raw)
    if magic != MAGIC:
        raise ArtifactFormatError(f"{path} does not start with {MAGIC!r}", path=str(path))
    if version != FORMAT_VERSION:
        raise ArtifactFormatError(f"{path} has format version {version}, expected {FORMAT_VERSION}",
                                  path=str(path), version=version)
    start = _PREAMBLE.size
    header = json.loads(raw[start:start + header_len].decode("utf-8"))
    body_start = start + header_len
    arrays = {}
    for entry in header["arrays"]:
        lo = body_start + entry["offset"]
        flat = np.frombuffer(raw[lo:lo + entry["nbytes"]], dtype=np.dtype(entry["dtype"]))
        arrays[entry["name"]] = flat.reshape(entry["shape"], order="F").copy()
    return header["kind"], header["meta"], arrays


_BUNDLE_ARRAYS = ("x0", "states", "left_limits", "brownian_increments", "jump_path", "jump_step", "jump_time",
                  "jump_mark", "jump_pre", "jump_post")


def save_bundle(path: Path, bundle: PathBundle) -> Path:
    arrays = {name: getattr(bundle, name) for name in _BUNDLE_ARRAYS}
    return write_container(path, "path_bundle", bundle.header(), arrays)


def load_bundle(path: Path) -> PathBundle:
    kind, meta, arrays = read_container(path)
    if kind != "path_bundle":
        raise ArtifactFormatError(f"{path} holds a {kind}, not a path bundle", path=str(path))
    return PathBundle(
        grid=TimeGrid(**meta["grid"]),
        n_paths=int(meta["n_paths"]),
        truncation_k=int(meta["truncation_k"]),
        seed=int(meta["seed"]),
        noise_level=int(meta["noise_level"]),
        **arrays,
    )


def save_field(path: Path, field: ValueField, meta: Dict[str, Any] = None) -> Path:
    return write_container(path, "value_field", meta or {}, field.to_arrays())


def load_field(path: Path) -> ValueField:
    kind, _, arrays = read_container(path)
    if kind != "value_field":
        raise ArtifactFormatError(f"{path} holds a {kind}, not a value field", path=str(path))
    return ValueField.from_arrays(arrays)
