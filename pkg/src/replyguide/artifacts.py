"""Byte-stable bundle format: a zip holding meta.json plus .npy arrays."""
from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

_EPOCH = (1980, 1, 1, 0, 0, 0)


class ArtifactError(OSError):
    """Missing or unreadable model artifact."""


def save_bundle(path: str | Path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    # fixed timestamps and member order so identical models give identical bytes
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo("meta.json", date_time=_EPOCH)
        zf.writestr(info, json.dumps(meta, sort_keys=True, indent=1), zipfile.ZIP_DEFLATED)
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_EPOCH)
            zf.writestr(info, buf.getvalue(), zipfile.ZIP_DEFLATED)


def load_bundle(path: str | Path, expect_format: str) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing artifact {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            if meta.get("format") != expect_format:
                raise ArtifactError(f"{path}: expected format {expect_format}, got {meta.get('format')}")
            arrays = {}
            for name in zf.namelist():
                if name.endswith(".npy"):
                    arrays[name[:-4]] = np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)
    except (zipfile.BadZipFile, KeyError, ValueError) as exc:
        raise ArtifactError(f"{path}: unreadable artifact ({exc})") from exc
    return meta, arrays
