"""Bit-exact on-disk episode format.

Layout (stable, versioned):

    <root>/task_<task_id>/ep_<seed as 8 digits>/
        manifest.json     sorted-key JSON, schema_version 1
        frames.bin        little-endian float32, row-major, 49 per frame
        symbolic.json     per-frame symbolic records     (symbolic mode)
        images/<t 5 digits>_<camera>.png                 (pixels mode)

Writing the same episode twice yields identical bytes; a failed write
leaves no residue.
"""

from __future__ import annotations

import json
import os
import shutil
import tarfile
import io as _io
from pathlib import Path

import numpy as np

from ..perception.render import decode_png, encode_png
from .episode import FRAME_WIDTH, SCHEMA_VERSION, Episode, EpisodeError, validate_episode


def episode_dirname(seed: int) -> str:
    return f"ep_{int(seed):08d}"


def _manifest_dict(ep: Episode) -> dict:
    return {
        "schema_version": ep.schema_version,
        "task_id": ep.task_id,
        "instruction": ep.instruction,
        "variation_id": int(ep.variation_id),
        "seed": int(ep.seed),
        "view_mode": ep.view_mode,
        "obs_mode": ep.obs_mode,
        "frame_count": ep.frame_count,
        "fps": ep.fps,
        "success": bool(ep.success),
        "failure_reason": ep.failure_reason,
        "operating_arm": ep.operating_arm,
        "camera_arm": ep.camera_arm,
        "phases": ep.phases,
        "intrinsics": ep.intrinsics,
    }


def write_episode(ep: Episode, root) -> Path:
    """Validate and persist; returns the episode directory."""
    validate_episode(ep)
    root = Path(root)
    task_dir = root / f"task_{ep.task_id}"
    final = task_dir / episode_dirname(ep.seed)
    tmp = task_dir / (".tmp-" + episode_dirname(ep.seed))
    task_dir.mkdir(parents=True, exist_ok=True)
    if tmp.exists():
        shutil.rmtree(tmp)
    try:
        tmp.mkdir()
        (tmp / "manifest.json").write_bytes(
            json.dumps(_manifest_dict(ep), sort_keys=True, indent=2).encode() + b"\n"
        )
        (tmp / "frames.bin").write_bytes(
            ep.frame_matrix().astype("<f4").tobytes(order="C")
        )
        if ep.obs_mode == "symbolic":
            (tmp / "symbolic.json").write_bytes(
                json.dumps(ep.symbolic, sort_keys=True, separators=(",", ":")).encode() + b"\n"
            )
        else:
            img_dir = tmp / "images"
            img_dir.mkdir()
            for t, frame in enumerate(ep.images):
                for cam in sorted(frame):
                    (img_dir / f"{t:05d}_{cam}.png").write_bytes(encode_png(frame[cam]))
        if final.exists():
            shutil.rmtree(final)
        os.replace(tmp, final)
    except BaseException:
        if tmp.exists():
            shutil.rmtree(tmp, ignore_errors=True)
        raise
    return final


def read_episode(location) -> Episode:
    """Load and validate an episode directory."""
    loc = Path(location)
    mpath = loc / "manifest.json"
    if not mpath.exists():
        raise EpisodeError(f"no manifest at {loc}")
    manifest = json.loads(mpath.read_text())
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        raise EpisodeError(
            f"unsupported episode schema_version {version!r} (reader supports {SCHEMA_VERSION})"
        )
    t = int(manifest["frame_count"])
    raw = (loc / "frames.bin").read_bytes()
    expected = t * FRAME_WIDTH * 4
    if len(raw) != expected:
        raise EpisodeError(
            f"frames.bin is {len(raw)} bytes, expected {expected} "
            f"({t} frames x {FRAME_WIDTH} x 4)"
        )
    mat = np.frombuffer(raw, dtype="<f4").reshape(t, FRAME_WIDTH)
    steps = mat[:, 0].astype(np.int64)
    if not np.array_equal(steps, np.arange(t)):
        raise EpisodeError("frame indices are not 0..T-1")
    symbolic = None
    images = None
    if manifest["obs_mode"] == "symbolic":
        spath = loc / "symbolic.json"
        if not spath.exists():
            raise EpisodeError("symbolic.json missing")
        symbolic = json.loads(spath.read_text())
        if len(symbolic) != t:
            raise EpisodeError(
                f"symbolic payload has {len(symbolic)} frames, manifest says {t}"
            )
    else:
        images = []
        img_dir = loc / "images"
        for k in range(t):
            frame = {}
            for p in sorted(img_dir.glob(f"{k:05d}_*.png")):
                cam = p.stem.split("_", 1)[1]
                frame[cam] = decode_png(p.read_bytes())
            if not frame:
                raise EpisodeError(f"no images for frame {k}")
            images.append(frame)
    ep = Episode(
        task_id=manifest["task_id"],
        instruction=manifest["instruction"],
        variation_id=manifest["variation_id"],
        seed=manifest["seed"],
        view_mode=manifest["view_mode"],
        obs_mode=manifest["obs_mode"],
        success=manifest["success"],
        failure_reason=manifest["failure_reason"],
        operating_arm=manifest["operating_arm"],
        camera_arm=manifest["camera_arm"],
        states=mat[:, 1:17],
        actions=mat[:, 17:33],
        wrench_left=mat[:, 33:39],
        wrench_right=mat[:, 39:45],
        flags=mat[:, 45:49],
        symbolic=symbolic,
        images=images,
        phases=manifest["phases"],
        intrinsics=manifest["intrinsics"],
    )
    validate_episode(ep)
    return ep


def iter_episode_dirs(root):
    root = Path(root)
    for task_dir in sorted(root.glob("task_*")):
        for ep_dir in sorted(task_dir.glob("ep_*")):
            if (ep_dir / "manifest.json").exists():
                yield ep_dir


def pack(root, out_tar) -> Path:
    """Single-archive convenience; the directory layout stays canonical."""
    root = Path(root)
    out = Path(out_tar)
    with tarfile.open(out, "w") as tf:
        for ep_dir in iter_episode_dirs(root):
            for p in sorted(ep_dir.rglob("*")):
                if p.is_file():
                    info = tarfile.TarInfo(str(p.relative_to(root)))
                    data = p.read_bytes()
                    info.size = len(data)
                    info.mtime = 0
                    info.uid = info.gid = 0
                    info.uname = info.gname = ""
                    tf.addfile(info, _io.BytesIO(data))
    return out
