"""Plane file formats, capture preprocessing and dataset manifests.

Supported plane formats are binary PGM (``P5``, 8 or 16 bit) and greyscale
PFM (``Pf``). PGM samples are normalized by the header maxval into [0, 1];
16-bit samples are big-endian as the Netpbm format defines. PFM is written
little-endian (negative scale) with rows stored bottom-up.
"""

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._atomic import atomic_write_bytes, atomic_write_text
from .pfa import ANGLES, DimensionError, PFAPattern

DEFAULT_MAX_BYTES = 512 * 2**20
CHANNEL_SUFFIX = {0: "000", 45: "045", 90: "090", 135: "135"}


class ImageFormatError(ValueError):
    pass


class UnsupportedFormatError(ImageFormatError):
    pass


class DimensionOverflowError(ImageFormatError):
    pass


class TruncatedPayloadError(ImageFormatError):
    pass


def _check_budget(h, w, max_bytes, path):
    if h <= 0 or w <= 0:
        raise ImageFormatError(f"{path}: invalid dimensions {w}x{h}")
    if h * w * 8 > max_bytes:
        raise DimensionOverflowError(
            f"{path}: {w}x{h} exceeds the {max_bytes} byte sample budget")


_PGM_HEADER = re.compile(rb"P5(?:\s+|#[^\n]*\n)*?(\d+)(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)\s")


def _read_pgm(data, path, max_bytes):
    mt = _PGM_HEADER.match(data)
    if not mt:
        raise ImageFormatError(f"{path}: malformed PGM header")
    w, h, maxval = (int(g) for g in mt.groups())
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"{path}: PGM maxval {maxval} out of range")
    _check_budget(h, w, max_bytes, path)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = h * w * dtype.itemsize
    payload = data[mt.end():mt.end() + need]
    if len(payload) < need:
        raise TruncatedPayloadError(f"{path}: PGM payload has {len(payload)} of {need} bytes")
    return np.frombuffer(payload, dtype=dtype).reshape(h, w).astype(np.float64) / maxval


def _read_pfm(data, path, max_bytes):
    parts = data.split(b"\n", 3)
    if len(parts) < 4:
        raise ImageFormatError(f"{path}: malformed PFM header")
    try:
        w, h = (int(v) for v in parts[1].split())
        scale = float(parts[2])
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed PFM header") from exc
    if scale == 0:
        raise ImageFormatError(f"{path}: PFM scale must be non-zero")
    _check_budget(h, w, max_bytes, path)
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    need = h * w * 4
    payload = parts[3][:need]
    if len(payload) < need:
        raise TruncatedPayloadError(f"{path}: PFM payload has {len(payload)} of {need} bytes")
    plane = np.frombuffer(payload, dtype=dtype).reshape(h, w)[::-1]
    return plane.astype(np.float64)


def read_plane(path, max_bytes=DEFAULT_MAX_BYTES):
    """Read a single-channel PGM or PFM file as a float64 array."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic == b"P5":
        return _read_pgm(data, path, max_bytes)
    if magic == b"Pf":
        return _read_pfm(data, path, max_bytes)
    if magic == b"PF":
        raise UnsupportedFormatError(f"{path}: colour PFM; extract the green channel first")
    raise UnsupportedFormatError(f"{path}: unrecognised magic {magic!r}")


def encode_pfm(plane):
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise DimensionError(f"PFM planes must be 2-D, got {plane.shape}")
    h, w = plane.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    return header + np.ascontiguousarray(plane[::-1], dtype="<f4").tobytes()


def encode_pgm(plane):
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise DimensionError(f"PGM planes must be 2-D, got {plane.shape}")
    h, w = plane.shape
    q = np.floor(np.clip(plane, 0.0, 1.0) * 65535.0 + 0.5).astype(">u2")
    return f"P5\n{w} {h}\n65535\n".encode("ascii") + q.tobytes()


def write_plane(plane, path):
    """Write a plane; the format follows the suffix (``.pfm`` or ``.pgm``)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        data = encode_pfm(plane)
    elif suffix == ".pgm":
        data = encode_pgm(plane)
    else:
        raise UnsupportedFormatError(f"{path}: unknown plane format {suffix!r}")
    atomic_write_bytes(path, data)


def green_channel(rgb):
    """Green plane of an ``(H, W, 3)`` colour capture."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[-1] != 3:
        raise DimensionError(f"expected (H, W, 3), got {rgb.shape}")
    return rgb[..., 1]


def frame_average(frames):
    """Per-pixel mean of repeated exposures, accumulated in float64."""
    frames = list(frames)
    if not frames:
        raise ValueError("frame_average needs at least one frame")
    shape = np.shape(frames[0])
    acc = np.zeros(shape, dtype=np.float64)
    for f in frames:
        if np.shape(f) != shape:
            raise DimensionError(f"frame shape {np.shape(f)} differs from {shape}")
        acc += f
    return acc / len(frames)


def bin2x2(plane):
    """Average each 2x2 block into one pixel."""
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    if h % 2 or w % 2:
        raise DimensionError(f"cannot bin a {h}x{w} plane 2x2")
    return plane.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


# --- polarization stacks on disk ---------------------------------------------

def find_stack_files(directory):
    """Locate the ``*_000``, ``*_045``, ``*_090``, ``*_135`` planes of a directory."""
    directory = Path(directory)
    files = {}
    for angle in ANGLES:
        hits = sorted(p for ext in ("pfm", "pgm")
                      for p in directory.glob(f"*_{CHANNEL_SUFFIX[angle]}.{ext}"))
        if len(hits) != 1:
            raise FileNotFoundError(
                f"{directory}: expected one *_{CHANNEL_SUFFIX[angle]}.pfm/.pgm file, found {len(hits)}")
        files[angle] = hits[0]
    return files


def read_stack(files, max_bytes=DEFAULT_MAX_BYTES):
    planes = [read_plane(files[a], max_bytes) for a in ANGLES]
    shapes = {p.shape for p in planes}
    if len(shapes) != 1:
        raise DimensionError(f"channel planes differ in size: {sorted(shapes)}")
    return np.stack(planes)


def read_stack_dir(directory, max_bytes=DEFAULT_MAX_BYTES):
    return read_stack(find_stack_files(directory), max_bytes)


def write_stack_dir(stack, directory, prefix="stack", ext="pfm"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for c, angle in enumerate(ANGLES):
        path = directory / f"{prefix}_{CHANNEL_SUFFIX[angle]}.{ext}"
        write_plane(stack[c], path)
        paths[angle] = path
    return paths


# --- manifests ----------------------------------------------------------------

class ManifestError(ValueError):
    def __init__(self, message, scene=None):
        super().__init__(f"scene {scene!r}: {message}" if scene is not None else message)
        self.scene = scene


@dataclass
class SceneEntry:
    id: str
    role: str
    files: dict
    pattern: str = str(PFAPattern())
    bit_depth: int = 16
    notes: str = ""


@dataclass
class DatasetManifest:
    """Scenes of a dataset; relative file paths resolve against ``root``."""

    scenes: list = field(default_factory=list)
    root: Path = Path(".")

    @property
    def is_empty(self):
        return not self.scenes

    def by_role(self, role):
        return [s for s in self.scenes if s.role == role]

    def paths(self, scene):
        return {a: (self.root / scene.files[a]) for a in ANGLES}

    def load_stack(self, scene, max_bytes=DEFAULT_MAX_BYTES):
        try:
            return read_stack(self.paths(scene), max_bytes)
        except (OSError, ValueError) as exc:
            raise ManifestError(str(exc), scene.id) from exc

    def to_dict(self):
        scenes = []
        for s in self.scenes:
            d = asdict(s)
            d["files"] = {str(a): str(p) for a, p in s.files.items()}
            scenes.append(d)
        return {"version": 1, "scenes": scenes}


def _parse_scene(raw):
    sid = raw.get("id") if isinstance(raw, dict) else None
    try:
        files = {int(a): str(p) for a, p in raw["files"].items()}
        if sorted(files) != list(ANGLES):
            raise ManifestError(f"files must cover angles {ANGLES}, got {sorted(files)}", sid)
        role = raw.get("role", "train")
        if role not in ("train", "test"):
            raise ManifestError(f"role must be 'train' or 'test', got {role!r}", sid)
        pattern = str(PFAPattern.parse(raw.get("pattern", str(PFAPattern()))))
        return SceneEntry(id=str(raw["id"]), role=role, files=files, pattern=pattern,
                          bit_depth=int(raw.get("bit_depth", 16)), notes=str(raw.get("notes", "")))
    except ManifestError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ManifestError(f"malformed entry: {exc}", sid) from exc


def validate_manifest(manifest, check_files=True):
    seen = set()
    for s in manifest.scenes:
        if s.id in seen:
            raise ManifestError("scene id listed more than once", s.id)
        seen.add(s.id)
        if not check_files:
            continue
        shapes = set()
        for angle, path in manifest.paths(s).items():
            if not path.is_file():
                raise ManifestError(f"missing file for {angle} deg: {path}", s.id)
            shapes.add(read_plane(path).shape)
        if len(shapes) != 1:
            raise ManifestError(f"channel planes differ in size: {sorted(shapes)}", s.id)
    return manifest


def load_manifest(path, check_files=True):
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("scenes", []), list):
        raise ManifestError(f"{path}: expected an object with a 'scenes' list")
    manifest = DatasetManifest([_parse_scene(s) for s in raw.get("scenes", [])], path.parent)
    return validate_manifest(manifest, check_files)


def save_manifest(manifest, path):
    atomic_write_text(path, json.dumps(manifest.to_dict(), indent=2) + "\n")
