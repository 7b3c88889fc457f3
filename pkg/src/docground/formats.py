"""Binary file formats: EMB1 embedding files and DXV0 regressor checkpoints.

EMB1 layout (all integers little-endian):
    magic "EMB1" | u8 version=1 | u32 Dv | u32 Dt | u32 record count
    per record: u16 qa_id byte length | qa_id UTF-8 | Dv float32 visual |
                Dt float32 text | u8 has_target | 4 float32 (x1,y1,x2,y2)
                present only when has_target=1

DXV0 layout:
    magic "DXV0" | u8 format version=1 | u32 JSON header length | JSON header
    (config, epoch, metrics, matrix shapes in declared order) | matrix data,
    row-major float32 little-endian, in the header's declared order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ValidationError
from .geometry import NormBox

EMB_MAGIC = b"EMB1"
CKPT_MAGIC = b"DXV0"
EMB_VERSION = 1
CKPT_VERSION = 1


@dataclass(frozen=True)
class EmbeddingRecord:
    qa_id: str
    visual: np.ndarray  # float32, shape (Dv,)
    text: np.ndarray  # float32, shape (Dt,)
    target: NormBox | None = None


@dataclass(frozen=True)
class EmbeddingFile:
    dv: int
    dt: int
    records: tuple[EmbeddingRecord, ...]

    def by_qa_id(self) -> dict[str, EmbeddingRecord]:
        return {r.qa_id: r for r in self.records}


def write_embeddings(path: str | Path, records: Sequence[EmbeddingRecord], dv: int, dt: int) -> None:
    if dv <= 0 or dt <= 0:
        raise ValidationError(f"embedding dims must be positive, got Dv={dv} Dt={dt}")
    with Path(path).open("wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<B", EMB_VERSION))
        fh.write(struct.pack("<III", dv, dt, len(records)))
        for rec in records:
            visual = np.asarray(rec.visual, dtype="<f4")
            text = np.asarray(rec.text, dtype="<f4")
            if visual.shape != (dv,) or text.shape != (dt,):
                raise ValidationError(
                    f"record {rec.qa_id!r}: vector shapes {visual.shape}/{text.shape} "
                    f"do not match header Dv={dv}/Dt={dt}"
                )
            qa_bytes = rec.qa_id.encode("utf-8")
            if len(qa_bytes) > 0xFFFF:
                raise ValidationError(f"qa_id too long: {rec.qa_id[:32]!r}...")
            fh.write(struct.pack("<H", len(qa_bytes)))
            fh.write(qa_bytes)
            fh.write(visual.tobytes())
            fh.write(text.tobytes())
            if rec.target is None:
                fh.write(struct.pack("<B", 0))
            else:
                fh.write(struct.pack("<B", 1))
                fh.write(np.asarray(rec.target.as_list(), dtype="<f4").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ValidationError(f"truncated embedding file while reading {what}")
    return data


def read_embeddings(path: str | Path) -> EmbeddingFile:
    """Parse and validate an EMB1 file; every vector component must be finite."""
    try:
        fh = Path(path).open("rb")
    except OSError as exc:
        raise DataError(f"cannot read embeddings file {path}: {exc}") from exc
    with fh:
        if _read_exact(fh, 4, "magic") != EMB_MAGIC:
            raise ValidationError(f"{path}: not an EMB1 file")
        (version,) = struct.unpack("<B", _read_exact(fh, 1, "version"))
        if version != EMB_VERSION:
            raise ValidationError(f"{path}: unsupported EMB1 version {version}")
        dv, dt, count = struct.unpack("<III", _read_exact(fh, 12, "header"))
        if dv <= 0 or dt <= 0:
            raise ValidationError(f"{path}: non-positive dims Dv={dv} Dt={dt}")
        records = []
        for i in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, f"record {i} id length"))
            qa_id = _read_exact(fh, id_len, f"record {i} id").decode("utf-8")
            visual = np.frombuffer(_read_exact(fh, 4 * dv, f"record {qa_id!r} visual"), dtype="<f4")
            text = np.frombuffer(_read_exact(fh, 4 * dt, f"record {qa_id!r} text"), dtype="<f4")
            if not (np.isfinite(visual).all() and np.isfinite(text).all()):
                raise ValidationError(f"record {qa_id!r}: non-finite embedding component")
            (has_target,) = struct.unpack("<B", _read_exact(fh, 1, f"record {qa_id!r} flag"))
            target = None
            if has_target == 1:
                coords = np.frombuffer(
                    _read_exact(fh, 16, f"record {qa_id!r} target"), dtype="<f4"
                ).astype(float)
                try:
                    target = NormBox(*coords)
                except ValueError as exc:
                    raise ValidationError(f"record {qa_id!r}: {exc}") from exc
            elif has_target != 0:
                raise ValidationError(f"record {qa_id!r}: bad has_target byte {has_target}")
            records.append(EmbeddingRecord(qa_id=qa_id, visual=visual, text=text, target=target))
        if fh.read(1):
            raise ValidationError(f"{path}: trailing bytes after {count} records")
    return EmbeddingFile(dv=dv, dt=dt, records=tuple(records))


def write_checkpoint_blob(
    path: str | Path,
    header: dict,
    matrices: Iterable[tuple[str, np.ndarray]],
) -> None:
    """Low-level DXV0 writer; header['matrices'] is filled from the arrays."""
    named = [(name, np.asarray(arr, dtype="<f4")) for name, arr in matrices]
    header = dict(header)
    header["matrices"] = [{"name": n, "shape": list(a.shape)} for n, a in named]
    header_bytes = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<B", CKPT_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in named:
            fh.write(np.ascontiguousarray(arr).tobytes())


def read_checkpoint_blob(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        fh = Path(path).open("rb")
    except OSError as exc:
        raise DataError(f"cannot read checkpoint file {path}: {exc}") from exc
    with fh:
        if _read_exact(fh, 4, "magic") != CKPT_MAGIC:
            raise ValidationError(f"{path}: not a DXV0 checkpoint")
        (version,) = struct.unpack("<B", _read_exact(fh, 1, "version"))
        if version != CKPT_VERSION:
            raise ValidationError(f"{path}: unsupported DXV0 version {version}")
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4, "header length"))
        header = json.loads(_read_exact(fh, header_len, "header").decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for spec in header["matrices"]:
            shape = tuple(spec["shape"])
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(
                _read_exact(fh, 4 * n, f"matrix {spec['name']}"), dtype="<f4"
            ).reshape(shape)
            if not np.isfinite(data).all():
                raise ValidationError(f"matrix {spec['name']}: non-finite entries")
            arrays[spec["name"]] = data.astype(np.float64)
        if fh.read(1):
            raise ValidationError(f"{path}: trailing bytes after matrices")
    return header, arrays
