"""Shared fixtures for CLI-level tests: synthetic datasets on disk."""

from __future__ import annotations

import json

import numpy as np
from PIL import Image


def write_mask(path, arr) -> None:
    Image.fromarray((np.asarray(arr) * 255).astype(np.uint8), mode="L").save(path)


def synth_dataset(root, n_clips=2, n_frames=10, perfect=True, side=16):
    """Ground truth plus predictions; returns (manifest path, pred root)."""
    entries = []
    pred_root = root / "preds"
    attrs = [["Ldm", "CM"], ["Occ"]]
    for ci in range(n_clips):
        cid = f"clip{ci}"
        for sub in ("frames", "gt"):
            (root / sub / cid).mkdir(parents=True)
        (pred_root / cid).mkdir(parents=True)
        frames, gts = [], []
        for fi in range(n_frames):
            m = np.zeros((side, side))
            y = 2 + (fi + ci) % (side - 8)
            m[y:y + 4, 3:9] = 1.0
            name = f"{fi:04d}.png"
            write_mask(root / "frames" / cid / name, m)
            write_mask(root / "gt" / cid / name, m)
            pred = m if perfect else np.clip(m + 0.2, 0, 1)
            write_mask(pred_root / cid / name, pred)
            frames.append(f"frames/{cid}/{name}")
            gts.append(f"gt/{cid}/{name}")
        entries.append({"clip_id": cid, "frames": frames, "gts": gts,
                        "attributes": attrs[ci % len(attrs)],
                        "split": "test" if ci % 2 == 0 else "train"})
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({"version": "yuv-manifest/1", "clips": entries}))
    return manifest, pred_root


def read_csv_rows(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]
