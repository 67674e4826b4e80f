"""File formats: NTS1 series container, annotation/score TSVs, the model
checkpoint container, and JSON manifests with SHA-256 checksums.

NTS1 layout (little-endian): magic ``NTS1``, u32 version, u32 C, u64 T,
f64 sample_rate, then C*T float32 row-major (channel-major).  The same
container carries embedding matrices with ``sample_rate == 0`` as a
sentinel (C := D, T := word count).
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ChecksumError, DataFormatError

NTS_MAGIC = b"NTS1"
NTS_HEADER = struct.Struct("<4sIIQd")

CKPT_MAGIC = b"CWER"
_DTYPE_CODES = {0: np.float32, 1: np.float64}
_DTYPE_TO_CODE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def write_nts(path, data, sample_rate):
    """Write a C x T float32 matrix; `sample_rate` 0 marks a non-temporal
    embedding matrix."""
    data = np.ascontiguousarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise DataFormatError(f"NTS1 payload must be 2-D, got shape {data.shape}")
    with open(path, "wb") as f:
        f.write(NTS_HEADER.pack(NTS_MAGIC, 1, data.shape[0], data.shape[1],
                                float(sample_rate)))
        f.write(data.tobytes())


def read_nts(path):
    """Return (data C x T float32, sample_rate)."""
    raw = Path(path).read_bytes()
    if len(raw) < NTS_HEADER.size:
        raise DataFormatError(f"{path}: truncated NTS1 header")
    magic, version, c, t, rate = NTS_HEADER.unpack_from(raw)
    if magic != NTS_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}, expected NTS1")
    if version != 1:
        raise DataFormatError(f"{path}: unsupported NTS1 version {version}")
    expected = NTS_HEADER.size + 4 * c * t
    if len(raw) != expected:
        raise DataFormatError(
            f"{path}: payload is {len(raw)} bytes, expected {expected}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=NTS_HEADER.size).reshape(c, t)
    return data.copy(), rate


def write_annotations(path, annotations):
    """TSV rows: token <tab> t_on <tab> t_off (seconds)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for ann in annotations:
            f.write(f"{ann.token}\t{ann.t_on:.3f}\t{ann.t_off:.3f}\n")


def read_annotations(path):
    from .textcorpus import WordAnnotation

    out = []
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError(f"{path}:{ln}: expected 3 columns")
            try:
                ann = WordAnnotation(parts[0], float(parts[1]), float(parts[2]))
            except ValueError as e:
                raise DataFormatError(f"{path}:{ln}: {e}") from None
            out.append(ann)
    return out


def write_decoded(path, tokens, annotations, step_scores):
    """TSV rows: token <tab> t_on <tab> t_off <tab> step_correlation."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for tok, ann, s in zip(tokens, annotations, step_scores):
            f.write(f"{tok}\t{ann.t_on:.3f}\t{ann.t_off:.3f}\t{s:.6f}\n")


def read_decoded(path):
    tokens, scores = [], []
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise DataFormatError(f"{path}:{ln}: expected 4 columns")
            tokens.append(parts[0])
            scores.append(float(parts[3]))
    return tokens, scores


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, obj):
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: invalid JSON ({e})") from None


# ---------------------------------------------------------------------------
# checkpoint container: magic, config block, named blobs, trailing checksum


def save_checkpoint(path, config, blobs):
    """config: JSON-able dict including a 'kind' tag; blobs: name -> ndarray."""
    buf = bytearray()
    buf += CKPT_MAGIC
    buf += struct.pack("<I", 1)
    cfg = json.dumps(config, sort_keys=True).encode("utf-8")
    buf += struct.pack("<I", len(cfg))
    buf += cfg
    buf += struct.pack("<I", len(blobs))
    for name in sorted(blobs):
        arr = np.ascontiguousarray(blobs[name])
        code = _DTYPE_TO_CODE.get(arr.dtype)
        if code is None:
            raise DataFormatError(f"blob {name!r}: unsupported dtype {arr.dtype}")
        nb = name.encode("utf-8")
        buf += struct.pack("<H", len(nb))
        buf += nb
        buf += struct.pack("<BB", code, arr.ndim)
        for d in arr.shape:
            buf += struct.pack("<Q", d)
        buf += arr.tobytes()
    buf += hashlib.sha256(bytes(buf)).digest()
    Path(path).write_bytes(bytes(buf))


def load_checkpoint(path):
    """Return (config dict, blobs dict).  Verifies the trailing checksum."""
    raw = Path(path).read_bytes()
    if len(raw) < 44 or raw[:4] != CKPT_MAGIC:
        raise DataFormatError(f"{path}: not a checkpoint container")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch, file is corrupted")
    off = 4
    (version,) = struct.unpack_from("<I", body, off)
    off += 4
    if version != 1:
        raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
    (clen,) = struct.unpack_from("<I", body, off)
    off += 4
    config = json.loads(body[off : off + clen].decode("utf-8"))
    off += clen
    (nblobs,) = struct.unpack_from("<I", body, off)
    off += 4
    blobs = {}
    for _ in range(nblobs):
        (nlen,) = struct.unpack_from("<H", body, off)
        off += 2
        name = body[off : off + nlen].decode("utf-8")
        off += nlen
        code, ndim = struct.unpack_from("<BB", body, off)
        off += 2
        shape = struct.unpack_from(f"<{ndim}Q", body, off)
        off += 8 * ndim
        dtype = np.dtype(_DTYPE_CODES[code]).newbyteorder("<")
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        arr = np.frombuffer(body, dtype=dtype, count=int(np.prod(shape, dtype=np.int64)),
                            offset=off).reshape(shape)
        off += size
        blobs[name] = arr.astype(arr.dtype.newbyteorder("="))
    if off != len(body):
        raise DataFormatError(f"{path}: trailing bytes after last blob")
    return config, blobs
