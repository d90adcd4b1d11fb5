"""Zip checkpoints: ``meta.json`` plus one array blob per named tensor."""
from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np

from ..dsp.io import array_from_bytes, array_to_bytes

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, meta: dict, groups: dict[str, dict[str, np.ndarray]]) -> Path:
    """Write ``groups`` (e.g. ``{"generator": state_dict, ...}``) and ``meta`` atomically."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    meta = dict(meta, format_version=FORMAT_VERSION, groups=sorted(groups))
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_STORED) as zf:
        # fixed timestamps keep identical states byte-identical on disk
        def put(name, data):
            zf.writestr(zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0)), data)

        put("meta.json", json.dumps(meta, sort_keys=True, indent=1))
        for group, arrays in sorted(groups.items()):
            for key, arr in sorted(arrays.items()):
                put(f"{group}/{key}.bin", array_to_bytes(np.asarray(arr)))
    tmp.replace(path)
    return path


def load_checkpoint(path) -> tuple[dict, dict[str, dict[str, np.ndarray]]]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            if meta.get("format_version") != FORMAT_VERSION:
                raise CheckpointError(
                    f"{path}: format version {meta.get('format_version')} (expected {FORMAT_VERSION})")
            groups: dict[str, dict[str, np.ndarray]] = {g: {} for g in meta.get("groups", [])}
            for name in zf.namelist():
                if not name.endswith(".bin"):
                    continue
                group, key = name[:-4].split("/", 1)
                groups.setdefault(group, {})[key] = array_from_bytes(zf.read(name))
    except (zipfile.BadZipFile, KeyError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from None
    return meta, groups
