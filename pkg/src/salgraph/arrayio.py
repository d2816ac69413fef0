"""Readers and writers for the on-disk interchange formats.

Arrays travel as NPY v1.0 files restricted to little-endian float32/float64
and uint8, so files are byte-identical across platforms. Grayscale masks are
binary PGM (P5) and color images binary PPM (P6), both with maxval 255.
Datasets are described by a tab-separated manifest text file, one sample per
line:

    split<TAB>embedding_path<TAB>mask_path[<TAB>caption_vector_path]

where split is one of train/val/test and ``#`` starts a comment line. All
writers produce deterministic bytes for identical logical inputs.
"""

from __future__ import annotations

import ast
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

NPY_MAGIC = b"\x93NUMPY"

# dtype tag in the header -> numpy dtype. Everything else is rejected.
_SUPPORTED_DESCRS = {
    "<f4": np.dtype("<f4"),
    "<f8": np.dtype("<f8"),
    "|u1": np.dtype("|u1"),
}
_DESCR_FOR_KIND = {
    np.dtype(np.float32): "<f4",
    np.dtype(np.float64): "<f8",
    np.dtype(np.uint8): "|u1",
}


def _header_bytes(descr: str, shape: tuple[int, ...]) -> bytes:
    header = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (
        descr,
        str(shape),
    )
    # magic(6) + version(2) + header-length field(2) + header must be a
    # multiple of 64 bytes; pad with spaces before the closing newline.
    unpadded = len(NPY_MAGIC) + 4 + len(header) + 1
    header += " " * ((64 - unpadded % 64) % 64) + "\n"
    return header.encode("latin1")


def write_array(path: str | Path, a: np.ndarray, allow_nonfinite: bool = False) -> None:
    """Write ``a`` as an NPY v1.0 file (little-endian f32/f64/u8 only).

    Raises ValueError for unsupported dtypes, empty dimensions, or non-finite
    values when ``allow_nonfinite`` is not set.
    """
    a = np.asarray(a)
    if a.dtype not in _DESCR_FOR_KIND:
        raise ValueError(f"unsupported array dtype {a.dtype}; use float32, float64 or uint8")
    if a.ndim == 0 or any(d < 1 for d in a.shape):
        raise ValueError(f"array dimensions must all be positive, got shape {a.shape}")
    if not allow_nonfinite and a.dtype.kind == "f" and not np.isfinite(a).all():
        raise ValueError("array contains NaN/Inf; pass allow_nonfinite=True to write anyway")
    descr = _DESCR_FOR_KIND[a.dtype]
    header = _header_bytes(descr, a.shape)
    with open(path, "wb") as fh:
        fh.write(NPY_MAGIC)
        fh.write(bytes((1, 0)))
        fh.write(struct.pack("<H", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(a.astype(_SUPPORTED_DESCRS[descr], copy=False)).tobytes())


def _parse_npy_header(data: bytes, path: str | Path) -> tuple[np.dtype, tuple[int, ...], int]:
    """Validate magic/version/header; return (dtype, shape, payload offset)."""
    if len(data) < 10 or data[:6] != NPY_MAGIC:
        raise DataError(f"{path}: not an NPY array file (bad magic)")
    if data[6:8] != bytes((1, 0)):
        raise DataError(f"{path}: unsupported NPY version {data[6]}.{data[7]} (need 1.0)")
    (hlen,) = struct.unpack("<H", data[8:10])
    if len(data) < 10 + hlen:
        raise DataError(f"{path}: truncated NPY header")
    try:
        meta = ast.literal_eval(data[10 : 10 + hlen].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise DataError(f"{path}: malformed NPY header: {exc}") from exc
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise DataError(f"{path}: malformed NPY header dict")
    if meta["descr"] not in _SUPPORTED_DESCRS:
        raise DataError(f"{path}: unsupported dtype {meta['descr']!r} (need <f4, <f8 or |u1)")
    if meta["fortran_order"] is not False:
        raise DataError(f"{path}: fortran-order arrays are not supported")
    shape = meta["shape"]
    if (
        not isinstance(shape, tuple)
        or len(shape) == 0
        or not all(isinstance(d, int) and d >= 1 for d in shape)
    ):
        raise DataError(f"{path}: invalid shape {shape!r}")
    return _SUPPORTED_DESCRS[meta["descr"]], shape, 10 + hlen


def read_array(path: str | Path) -> np.ndarray:
    """Read an NPY v1.0 file written by :func:`write_array` (or compatible)."""
    data = Path(path).read_bytes()
    dtype, shape, offset = _parse_npy_header(data, path)
    expected = dtype.itemsize * int(np.prod(shape))
    payload = data[offset:]
    if len(payload) < expected:
        raise DataError(f"{path}: truncated payload ({len(payload)} bytes, expected {expected})")
    if len(payload) > expected:
        raise DataError(f"{path}: {len(payload) - expected} trailing bytes after payload")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def check_array_header(path: str | Path) -> tuple[np.dtype, tuple[int, ...]]:
    """Cheap validity probe: parse only the header, not the payload."""
    with open(path, "rb") as fh:
        head = fh.read(10)
        if len(head) == 10:
            head += fh.read(struct.unpack("<H", head[8:10])[0])
    dtype, shape, _ = _parse_npy_header(head, path)
    return dtype, shape


# ---------------------------------------------------------------------------
# PGM / PPM


def _pnm_header(data: bytes, path: str | Path) -> tuple[bytes, int, int, int, int]:
    """Parse magic, width, height, maxval; return them plus the payload offset.

    Whitespace runs and ``#`` comments are accepted between header tokens;
    exactly one whitespace byte separates maxval from the payload.
    """
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if i == start:
            raise DataError(f"{path}: truncated image header")
        tokens.append(data[start:i])
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise DataError(f"{path}: bad magic {magic!r} (need binary P5 or P6)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric image header token") from exc
    if width < 1 or height < 1:
        raise DataError(f"{path}: invalid image size {width}x{height}")
    if maxval != 255:
        raise DataError(f"{path}: unsupported maxval {maxval} (only 255)")
    return magic, width, height, maxval, i + 1


def read_image(path: str | Path) -> np.ndarray:
    """Read a binary PGM/PPM file.

    Returns uint8 arrays: (H, W) for grayscale P5, (H, W, 3) for color P6.
    """
    data = Path(path).read_bytes()
    magic, width, height, _, offset = _pnm_header(data, path)
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    payload = data[offset:]
    if len(payload) < expected:
        raise DataError(f"{path}: truncated payload ({len(payload)} bytes, expected {expected})")
    if len(payload) > expected:
        raise DataError(f"{path}: {len(payload) - expected} trailing bytes after payload")
    img = np.frombuffer(payload, dtype=np.uint8).copy()
    if channels == 1:
        return img.reshape(height, width)
    return img.reshape(height, width, 3)


def write_image(path: str | Path, img: np.ndarray) -> None:
    """Write a uint8 image as binary PGM (2-d input) or PPM ((H, W, 3) input)."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError(f"image data must be uint8, got {img.dtype}")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"image shape {img.shape} is neither (H, W) nor (H, W, 3)")
    h, w = img.shape[:2]
    if h < 1 or w < 1:
        raise ValueError("image dimensions must be positive")
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_mask(path: str | Path) -> np.ndarray:
    """Read a grayscale PGM mask as a float64 map scaled to [0, 1]."""
    data = Path(path).read_bytes()
    magic, *_ = _pnm_header(data, path)
    if magic != b"P5":
        raise DataError(f"{path}: expected a grayscale (P5) mask, found color data")
    return read_image(path).astype(np.float64) / 255.0


def write_mask(path: str | Path, saliency: np.ndarray) -> None:
    """Write a [0, 1] map as PGM, quantized by value*255 rounded half-up."""
    s = np.asarray(saliency, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError(f"saliency map must be 2-d, got shape {s.shape}")
    q = np.floor(np.clip(s, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    write_image(path, q)


def check_pnm_header(path: str | Path, expect: bytes | None = None) -> None:
    """Cheap validity probe: parse only the PNM header, not the payload."""
    with open(path, "rb") as fh:
        head = fh.read(4096)
    magic, *_ = _pnm_header(head, path)
    if expect is not None and magic != expect:
        raise DataError(f"{path}: expected {expect.decode()} image, found {magic.decode()}")


# ---------------------------------------------------------------------------
# Dataset manifest

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestEntry:
    split: str
    emb_path: Path
    mask_path: Path
    caption_path: Path | None = None


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """Load a manifest, resolving paths relative to the manifest directory.

    Every referenced file must exist and pass a format sniff (NPY header for
    embeddings/captions, P5 header for masks). Raises DataError on the first
    problem, returning no partial dataset.
    """
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) not in (3, 4):
            raise DataError(f"{path}:{lineno}: expected 3 or 4 tab-separated fields")
        split = fields[0]
        if split not in SPLITS:
            raise DataError(f"{path}:{lineno}: unknown split tag {split!r}")
        emb = base / fields[1]
        mask = base / fields[2]
        caption = base / fields[3] if len(fields) == 4 else None
        for p in (emb, mask) + ((caption,) if caption else ()):
            if not p.is_file():
                raise DataError(f"{path}:{lineno}: referenced file {p} does not exist")
        check_array_header(emb)
        check_pnm_header(mask, expect=b"P5")
        if caption is not None:
            check_array_header(caption)
        entries.append(ManifestEntry(split, emb, mask, caption))
    return entries


def write_manifest(path: str | Path, entries: list[ManifestEntry]) -> None:
    lines = []
    for e in entries:
        fields = [e.split, str(e.emb_path), str(e.mask_path)]
        if e.caption_path is not None:
            fields.append(str(e.caption_path))
        lines.append("\t".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
