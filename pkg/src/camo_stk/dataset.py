"""Benchmark dataset tooling: manifests, clip windows, density maps,
attribute-sliced aggregation.

The manifest is a versioned JSON index ("yuv-manifest/1") because the
frame/mask directories themselves carry no machine-readable structure:

    {
      "version": "yuv-manifest/1",
      "clips": [
        {"clip_id": "frog_01",
         "frames": ["frames/frog_01/0001.png", ...],
         "gts":    ["gt/frog_01/0001.png", ...],
         "attributes": ["Ldm", "CM"],
         "split": "test"}
      ]
    }

Relative paths resolve against the manifest's directory. Attributes come
from the closed scenario set below.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Sequence

import numpy as np

from .metrics import MetricReport, mean_reports
from .tensor import resize_plane_to

log = logging.getLogger(__name__)

ATTRIBUTES = ("Ldm", "CM", "Occ", "M-Obj", "Hunt", "T-Obj")
MANIFEST_VERSION = "yuv-manifest/1"
WINDOW_LENGTH = 5
WINDOW_SCALES = (0.5, 1.0, 1.5)

Normalization = Literal["max_one", "sum_one"]


class ManifestError(ValueError):
    """The manifest violates its schema or references missing data."""


@dataclass(frozen=True)
class ClipManifest:
    clip_id: str
    frame_paths: tuple[str, ...]
    gt_paths: tuple[str, ...]
    attributes: frozenset[str]
    split: str

    def __post_init__(self) -> None:
        if len(self.frame_paths) != len(self.gt_paths):
            raise ManifestError(
                f"clip {self.clip_id!r}: {len(self.frame_paths)} frames vs "
                f"{len(self.gt_paths)} ground-truth masks")
        if len(self.frame_paths) < 1:
            raise ManifestError(f"clip {self.clip_id!r} lists no frames")
        unknown = set(self.attributes) - set(ATTRIBUTES)
        if unknown:
            raise ManifestError(
                f"clip {self.clip_id!r}: unknown attribute(s) {sorted(unknown)}; "
                f"allowed: {list(ATTRIBUTES)}")
        if self.split not in ("train", "test"):
            raise ManifestError(f"clip {self.clip_id!r}: split must be train or test")

    def __len__(self) -> int:
        return len(self.frame_paths)


@dataclass(frozen=True)
class WindowSample:
    clip_id: str
    start_index: int
    frames: tuple[str, ...]
    scales: tuple[float, ...] = WINDOW_SCALES

    def __post_init__(self) -> None:
        if len(self.frames) != WINDOW_LENGTH:
            raise ValueError(f"a window holds exactly {WINDOW_LENGTH} frames")


@dataclass
class DensityMap:
    grid: np.ndarray
    normalization: Normalization
    source_frames: int
    degenerate: bool = field(default=False)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ManifestError(msg)


def load_manifest(path: str | Path) -> list[ClipManifest]:
    """Parse and validate a manifest; every referenced file must exist."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    _require(isinstance(raw, dict), "manifest root must be a JSON object")
    _require(raw.get("version") == MANIFEST_VERSION,
             f"field 'version' must be {MANIFEST_VERSION!r}, got {raw.get('version')!r}")
    clips_raw = raw.get("clips")
    _require(isinstance(clips_raw, list) and clips_raw,
             "field 'clips' must be a non-empty list")

    base = path.parent
    clips: list[ClipManifest] = []
    seen: set[str] = set()
    for i, entry in enumerate(clips_raw):
        _require(isinstance(entry, dict), f"clips[{i}] must be an object")
        cid = entry.get("clip_id")
        _require(isinstance(cid, str) and cid, f"clips[{i}]: field 'clip_id' missing")
        _require(cid not in seen, f"duplicate clip_id {cid!r}")
        seen.add(cid)
        for key in ("frames", "gts"):
            _require(isinstance(entry.get(key), list),
                     f"clip {cid!r}: field '{key}' must be a list of paths")
        frames = tuple(str(base / p) for p in entry["frames"])
        gts = tuple(str(base / p) for p in entry["gts"])
        clip = ClipManifest(
            clip_id=cid,
            frame_paths=frames,
            gt_paths=gts,
            attributes=frozenset(entry.get("attributes", [])),
            split=entry.get("split", "test"),
        )
        for p in (*frames, *gts):
            _require(Path(p).is_file(), f"clip {cid!r}: missing file {p}")
        clips.append(clip)
    return clips


def make_windows(clip: ClipManifest, stride: int) -> list[WindowSample]:
    """Fully in-bounds 5-frame windows at starts 0, stride, 2*stride, ..."""
    if stride < 1:
        raise ValueError("stride must be positive")
    if len(clip) < WINDOW_LENGTH:
        raise ValueError(
            f"clip {clip.clip_id!r} has {len(clip)} frames; windows need "
            f"at least {WINDOW_LENGTH}")
    out = []
    for start in range(0, len(clip) - WINDOW_LENGTH + 1, stride):
        out.append(WindowSample(
            clip_id=clip.clip_id,
            start_index=start,
            frames=clip.frame_paths[start:start + WINDOW_LENGTH],
        ))
    return out


def density_map(gts: Sequence[np.ndarray], out_size: tuple[int, int],
                normalization: Normalization = "max_one") -> DensityMap:
    """Accumulated foreground occupancy over resized, re-binarized masks."""
    if not len(gts):
        raise ValueError("density map needs at least one mask")
    h0, w0 = out_size
    grid = np.zeros((h0, w0), dtype=np.float64)
    for gt in gts:
        resized = resize_plane_to(np.asarray(gt, dtype=np.float64), h0, w0)
        grid += (resized >= 0.5).astype(np.float64)
    total = grid.sum()
    if total == 0.0:
        log.warning("density accumulation is empty; returning a zero map")
        return DensityMap(grid=grid, normalization=normalization,
                          source_frames=len(gts), degenerate=True)
    if normalization == "max_one":
        grid = grid / grid.max()
    elif normalization == "sum_one":
        grid = grid / total
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    return DensityMap(grid=grid, normalization=normalization,
                      source_frames=len(gts))


def attribute_report(manifests: Sequence[ClipManifest],
                     per_clip: Mapping[str, MetricReport]) -> dict[str, tuple[MetricReport, int]]:
    """Clip-level macro average of metric reports per scenario attribute.

    Attributes carried by no evaluated clip are omitted (with a notice).
    Returns attribute -> (aggregated report, clip count) in the canonical
    attribute order.
    """
    by_id = {m.clip_id: m for m in manifests}
    for cid in per_clip:
        if cid not in by_id:
            raise ManifestError(f"report references unknown clip_id {cid!r}")
    out: dict[str, tuple[MetricReport, int]] = {}
    for attr in ATTRIBUTES:
        reports = [per_clip[cid] for cid in sorted(per_clip)
                   if attr in by_id[cid].attributes]
        if not reports:
            log.info("attribute %s has no evaluated clips; row omitted", attr)
            continue
        out[attr] = (mean_reports(reports), len(reports))
    return out


def expected_window_count(length: int, stride: int) -> int:
    """Closed form the windowing must satisfy."""
    if length < WINDOW_LENGTH:
        raise ValueError("no windows below the minimum clip length")
    return math.floor((length - WINDOW_LENGTH) / stride) + 1


# Piecewise-linear heat colormap (black -> violet -> orange -> near-white).
_COLOR_ANCHORS = (
    (0.0, (0, 0, 4)),
    (0.35, (87, 16, 110)),
    (0.65, (227, 89, 51)),
    (0.9, (249, 206, 61)),
    (1.0, (252, 255, 164)),
)


def _colorize(grid: np.ndarray) -> np.ndarray:
    x = np.clip(grid, 0.0, 1.0)
    rgb = np.zeros((*x.shape, 3), dtype=np.float64)
    for (p0, c0), (p1, c1) in zip(_COLOR_ANCHORS, _COLOR_ANCHORS[1:]):
        seg = (x >= p0) & (x <= p1)
        f = np.where(p1 > p0, (x - p0) / (p1 - p0), 0.0)
        for ch in range(3):
            rgb[..., ch] = np.where(seg, c0[ch] + f * (c1[ch] - c0[ch]), rgb[..., ch])
    return np.clip(np.round(rgb), 0, 255).astype(np.uint8)


def write_density_png(dmap: DensityMap, path_16bit: str | Path,
                      path_color: str | Path) -> None:
    """Emit the raw grid as 16-bit grayscale plus a colorized 8-bit view.

    The grid is scaled by its maximum before quantization (a zero map
    stays zero).
    """
    from PIL import Image

    peak = float(dmap.grid.max())
    unit = dmap.grid / peak if peak > 0.0 else dmap.grid
    gray = np.round(unit * 65535.0).astype(np.uint16)
    Image.fromarray(gray).save(str(path_16bit))
    Image.fromarray(_colorize(unit), mode="RGB").save(str(path_color))
