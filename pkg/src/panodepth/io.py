"""File formats: PFM depth rasters, PNG images, the view manifest and the config."""
from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, MissingFileError
from .geometry import FOVX_RULES, PerspectiveView
from .grid import EquirectGrid
from .partitions import DEFAULT_AZIMUTH_CUTS, DEFAULT_ZENITH_CUTS, Partition

MANIFEST_SCHEMA = 1

_TOKEN = re.compile(rb"\S+")


# --------------------------------------------------------------------- PFM

def _next_token(data, pos, what):
    """Return ``(token, end)``; a header token must be followed by one whitespace byte."""
    m = _TOKEN.search(data, pos)
    if m is None or m.end() >= len(data):
        raise FormatError(f"missing {what}", offset=len(data) if m is None else m.start())
    if data[m.end():m.end() + 1] not in (b" ", b"\n", b"\r", b"\t"):
        raise FormatError(f"bad separator after {what}", offset=m.end())
    return m.group(), m.end() + 1


def decode_pfm(data):
    """Parse PFM bytes into a ``(H, W)`` float32 array, top row first."""
    if len(data) == 0:
        raise FormatError("empty file", offset=0)
    magic, pos = _next_token(data, 0, "magic")
    if magic == b"PF":
        raise FormatError("color PFM (PF) is not supported; expected grayscale Pf", offset=0)
    if magic != b"Pf":
        raise FormatError(f"bad magic {magic[:8]!r}, expected b'Pf'", offset=0)
    dims = []
    for what in ("width", "height"):
        start = _TOKEN.search(data, pos)
        tok, pos = _next_token(data, pos, what)
        if not tok.isdigit() or int(tok) <= 0:
            raise FormatError(f"bad {what} {tok[:16]!r}", offset=start.start())
        dims.append(int(tok))
    start = _TOKEN.search(data, pos)
    tok, pos = _next_token(data, pos, "scale")
    try:
        scale = float(tok)
    except ValueError:
        raise FormatError(f"bad scale {tok[:16]!r}", offset=start.start()) from None
    if scale == 0 or not np.isfinite(scale):
        raise FormatError(f"scale must be a nonzero finite number, got {tok[:16]!r}",
                          offset=start.start())
    w, h = dims
    expected = w * h * 4
    payload = data[pos:]
    if len(payload) != expected:
        kind = "truncated" if len(payload) < expected else "oversized"
        raise FormatError(f"{kind} payload: expected {expected} bytes, got {len(payload)}",
                          offset=pos)
    dtype = "<f4" if scale < 0 else ">f4"
    return np.frombuffer(payload, dtype=dtype).reshape(h, w)[::-1].astype(np.float32)


def encode_pfm(array):
    a = np.asarray(array, dtype=np.float32)
    if a.ndim != 2:
        raise ValueError("PFM rasters must be 2-D")
    h, w = a.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode()
    return header + np.ascontiguousarray(a[::-1]).astype("<f4").tobytes()


def read_pfm_array(path):
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"missing file {path}")
    return decode_pfm(path.read_bytes())


def write_pfm_array(array, path):
    Path(path).write_bytes(encode_pfm(array))


def read_pfm(path):
    """Full-panorama grid; NaN pixels are invalid."""
    return EquirectGrid.from_array(read_pfm_array(path).astype(np.float64))


def write_pfm(grid, path):
    write_pfm_array(grid.to_full(), path)


# --------------------------------------------------------------------- PNG

def read_png(path):
    from PIL import Image

    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"missing file {path}")
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def write_png(array, path):
    from PIL import Image

    a = np.asarray(array)
    if a.dtype != np.uint8:
        a = np.clip(np.nan_to_num(a), 0, 255).round().astype(np.uint8)
    Image.fromarray(a).save(path)


def write_depth_png(array, path, scale=1000.0):
    """16-bit grayscale PNG of ``depth * scale`` (0 marks invalid); returns the scale."""
    from PIL import Image

    a = np.asarray(array, float)
    q = np.where(np.isfinite(a), np.clip(np.round(a * scale), 0, 65535), 0).astype(np.uint16)
    Image.fromarray(q).save(path)
    return scale


# --------------------------------------------------------------------- manifest

@dataclass
class ManifestEntry:
    index: int
    row: int
    col: int
    partition: Partition
    view: PerspectiveView
    rgb: str
    depth: str

    def to_dict(self):
        return {"index": self.index, "row": self.row, "col": self.col,
                "partition": self.partition.to_dict(), "view": self.view.to_dict(),
                "rgb": self.rgb, "depth": self.depth}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["index"]), int(d["row"]), int(d["col"]), Partition.from_dict(d["partition"]),
                   PerspectiveView.from_dict(d["view"]), str(d["rgb"]), str(d["depth"]))


@dataclass
class ViewManifest:
    width: int
    height: int
    pad_x: int
    pad_y: int
    azimuth_cuts: list
    zenith_cuts: list
    entries: list = field(default_factory=list)

    def validate(self):
        names = [e.rgb for e in self.entries] + [e.depth for e in self.entries]
        if len(set(names)) != len(names):
            raise FormatError("manifest filenames are not unique")
        expected = len(self.azimuth_cuts) * (len(self.zenith_cuts) - 1)
        if len(self.entries) != expected or sorted(e.index for e in self.entries) != list(range(expected)):
            raise FormatError(f"manifest has {len(self.entries)} entries for {expected} partitions")

    def to_dict(self):
        return {"schema_version": MANIFEST_SCHEMA, "width": self.width, "height": self.height,
                "pad_x": self.pad_x, "pad_y": self.pad_y,
                "azimuth_cuts": list(self.azimuth_cuts), "zenith_cuts": list(self.zenith_cuts),
                "entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != MANIFEST_SCHEMA:
            raise FormatError(f"unsupported manifest schema {d.get('schema_version')!r}")
        try:
            m = cls(int(d["width"]), int(d["height"]), int(d["pad_x"]), int(d["pad_y"]),
                    [float(a) for a in d["azimuth_cuts"]], [float(z) for z in d["zenith_cuts"]],
                    [ManifestEntry.from_dict(e) for e in d["entries"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed manifest: {exc}") from None
        m.validate()
        return m


def write_manifest(manifest, path):
    manifest.validate()
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")


def read_manifest(path):
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"missing file {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc.msg}", offset=exc.pos) from None
    return ViewManifest.from_dict(data)


# --------------------------------------------------------------------- config

@dataclass
class PipelineConfig:
    azimuth_cuts: list = field(default_factory=lambda: list(DEFAULT_AZIMUTH_CUTS))
    zenith_cuts: list = field(default_factory=lambda: list(DEFAULT_ZENITH_CUTS))
    pad_x: int = 5
    pad_y: int = 2
    degree: int = 3
    sample_step: float = 1.0
    gamma: float = 1e-4
    omega: float = 0.5
    residual_stop: float = 1e-3
    handoff: str = "correction"
    schedule: object = "auto"
    z_to_range: bool = True
    view_width: int = 1024
    view_height: int = 989
    wrap_laplacian: bool = False
    fovx_rule: str = "tight"
    estimator_command: object = None

    def __post_init__(self):
        if self.degree not in (1, 2, 3):
            raise ConfigError(f"degree must be 1, 2 or 3, got {self.degree}")
        if self.pad_x < 0 or self.pad_y < 0:
            raise ConfigError("padding must be nonnegative")
        if not self.sample_step > 0:
            raise ConfigError("sample_step must be positive")
        if self.fovx_rule not in FOVX_RULES:
            raise ConfigError(f"fovx_rule must be one of {FOVX_RULES}")
        if self.view_width <= 0 or self.view_height <= 0:
            raise ConfigError("view size must be positive")
        if self.schedule != "auto":
            if not isinstance(self.schedule, dict) or set(self.schedule) != {"levels", "iterations"}:
                raise ConfigError('schedule must be "auto" or {"levels": [...], "iterations": [...]}')

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def blend_schedule(self, width, height):
        from .blending import BlendSchedule

        kw = {"gamma": self.gamma, "omega": self.omega, "residual_stop": self.residual_stop,
              "handoff": self.handoff}
        if self.schedule == "auto":
            return BlendSchedule.auto(width, height, **kw)
        return BlendSchedule(self.schedule["levels"], self.schedule["iterations"], **kw)


def load_config(path=None, **overrides):
    data = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise MissingFileError(f"missing file {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc.msg} at position {exc.pos}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig.from_dict(data)
