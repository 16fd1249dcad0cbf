"""
Synthetic hand-face interaction clips.

Each clip lives directly on the latent grid ``(f, h, w, c)``. A static
Gaussian face blob sits in the middle of the frame; a smaller hand blob
starts clear of the face, moves along a class-specific path to a contact
point and (for longer clips) retreats. Whenever the two supports overlap
the face is dented around the hand, which gives the temporal latents a
contact-deformation signal to pick up.

Labels follow the 18 sub-classes of the pinch / stroke / poke / swipe
taxonomy.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import container
from .errors import InvalidDimension, IoError, UnknownClass

CLASSES = (
    "LH-NP", "RH-NP",
    "LH-EB", "LH-FH", "LH-CH", "LH-ER", "RH-EB", "RH-FH", "RH-CH", "RH-ER",
    "LC-SF", "RC-SF", "LC-TF", "RC-TF", "LC-TH", "RC-TH",
    "LR-FS", "RL-FS",
)
FAMILIES = {"NP": "pinching", "EB": "stroking", "FH": "stroking", "CH": "stroking",
            "ER": "stroking", "SF": "poking", "TF": "poking", "TH": "poking", "FS": "swiping"}
TRAIN_FRACTION = 0.9
MANIFEST_VERSION = 1
DATASET_FILE = "dataset.ialt"
MANIFEST_FILE = "manifest.json"

# contact targets relative to the face centre, in units of the face radius (dy, dx)
# kept within 0.65 so a grid cell always falls inside both supports at contact
_TARGETS = {"NP": (0.1, 0.0), "EB": (-0.35, 0.35), "FH": (-0.5, 0.1),
            "CH": (0.5, 0.1), "ER": (0.0, 0.5)}
_FINGERS = {"SF": 0.8, "TF": 1.0, "TH": 1.2}
_HAND_COLOR = np.array([0.9, -0.6, 0.3, -0.2])
_ID_MIX_SEED = 20240917


@dataclass(frozen=True)
class ClipDims:
    f: int = 4
    h: int = 8
    w: int = 8
    c: int = 4
    d_face: int = 16

    def __post_init__(self):
        if self.f < 3:
            raise InvalidDimension("clips need at least 3 frames to show approach and contact")
        if min(self.h, self.w) < 8 or self.c < 1 or self.d_face < 1:
            raise InvalidDimension(f"clip dims too small: {self}")


@dataclass
class SynthClip:
    frames: np.ndarray      # (f, h, w, c) in [-1, 1]
    hand_mask: np.ndarray   # (f, h, w, 1) binary
    face_mask: np.ndarray   # (f, h, w, 1) binary
    identity: np.ndarray    # (d_face,) unit norm
    interaction_class: str
    seed: int

    @property
    def contact_frames(self) -> np.ndarray:
        overlap = (self.hand_mask * self.face_mask).reshape(len(self.frames), -1).sum(axis=1)
        return np.flatnonzero(overlap > 0)


@dataclass
class DatasetManifest:
    clips: list[dict]
    histogram: dict[str, int]
    dims: dict
    seed: int
    version: int = MANIFEST_VERSION
    extra: dict = field(default_factory=dict)

    @property
    def num_clips(self) -> int:
        return len(self.clips)

    def split(self, name: str) -> list[int]:
        return [i for i, c in enumerate(self.clips) if c["split"] == name]

    def to_json(self) -> dict:
        return {"version": self.version, "seed": self.seed, "dims": self.dims,
                "clips": self.clips, "histogram": self.histogram}


def clip_seed(dataset_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([dataset_seed, index]).generate_state(1)[0])


def _blob(h, w, center, radius):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    r2 = (yy - center[0]) ** 2 + (xx - center[1]) ** 2
    sigma = radius / 1.5
    return np.exp(-r2 / (2 * sigma ** 2)), (r2 <= radius ** 2).astype(np.float64)


def _contact_profile(f: int) -> np.ndarray:
    """Fraction of the way from start to contact point for each frame."""
    phase = np.arange(f) / (f - 1)
    if f < 4:
        return np.clip(2.0 * phase, 0.0, 1.0)
    return np.clip(np.minimum(3.0 * phase, 3.0 * (1.0 - phase)), 0.0, 1.0)


def _identity(rng, d_face):
    v = rng.standard_normal(d_face)
    return v / np.linalg.norm(v)


def _face_color(identity, c):
    mix = np.random.default_rng(_ID_MIX_SEED).standard_normal((c, identity.size))
    return 0.8 * np.tanh(mix @ identity)


def generate_clip(cls: str, seed: int, dims: ClipDims = ClipDims()) -> SynthClip:
    """Render one clip of class ``cls``; identical inputs give identical arrays."""
    if cls not in CLASSES:
        raise UnknownClass(cls)
    f, h, w, c = dims.f, dims.h, dims.w, dims.c
    rng = np.random.default_rng(seed)
    identity = _identity(rng, dims.d_face)
    face_color = _face_color(identity, c)
    hand_color = np.resize(_HAND_COLOR, c) * rng.uniform(0.85, 1.0)

    size = min(h, w)
    rf = 0.27 * size
    face_c = np.array([(h - 1) / 2, (w - 1) / 2]) + rng.uniform(-0.3, 0.3, 2)
    side, kind = cls.split("-")
    rh = 0.13 * size * _FINGERS.get(kind, 1.0)
    margin = 0.6

    if kind == "FS":
        sign = 1.0 if side == "LR" else -1.0
        row = face_c[0] + 0.2 * rf
        reach = rf + rh + margin
        start = np.array([row, face_c[1] - sign * reach])
        end = np.array([row, face_c[1] + sign * reach])
        phase = np.arange(f) / (f - 1)
        centers = start + (end - start) * phase[:, None]
        mid = np.argmin(np.abs(phase - 0.5))
        centers[mid, 1] = face_c[1] + rng.uniform(-0.2, 0.2) * rf
    else:
        lr = -1.0 if side in ("LH", "LC") else 1.0
        if kind in _FINGERS:
            rel = np.array([0.25, 0.45 * lr])
        else:
            dy, dx = _TARGETS[kind]
            rel = np.array([dy, dx * lr])
        target = face_c + (rel + rng.uniform(-0.08, 0.08, 2)) * rf
        away = np.array([0.6, lr])
        away /= np.linalg.norm(away)
        start = face_c + away * (rf + rh + margin)
        g = _contact_profile(f)
        centers = start + (target - start) * g[:, None]

    frames = np.empty((f, h, w, c))
    hand_mask = np.empty((f, h, w, 1))
    face_mask = np.empty((f, h, w, 1))
    face_g, face_m = _blob(h, w, face_c, rf)
    hand_area = np.pi * rh ** 2
    for k in range(f):
        hand_g, hand_m = _blob(h, w, centers[k], rh)
        overlap = float((hand_m * face_m).sum())
        fg = face_g
        if overlap > 0:
            dent, _ = _blob(h, w, centers[k], 0.7 * rh)
            fg = face_g * (1.0 - min(0.6, 0.5 * overlap / hand_area + 0.2) * dent)
        img = (fg * (1.0 - hand_g))[..., None] * face_color + hand_g[..., None] * hand_color
        frames[k] = np.clip(img, -1.0, 1.0)
        hand_mask[k, ..., 0] = hand_m
        face_mask[k, ..., 0] = face_m
    if (hand_mask[0] * face_mask[0]).any():
        raise AssertionError("hand and face overlap on the first frame")
    clip = SynthClip(frames, hand_mask, face_mask, identity, cls, int(seed))
    if clip.contact_frames.size == 0:
        raise AssertionError(f"{cls} clip with seed {seed} has no contact frame")
    return clip


def split_assignment(num_clips: int, seed: int) -> list[str]:
    n_train = int(round(TRAIN_FRACTION * num_clips))
    order = np.random.default_rng(seed).permutation(num_clips)
    labels = ["test"] * num_clips
    for i in order[:n_train]:
        labels[i] = "train"
    return labels


def make_clips(num_clips: int, seed: int, dims: ClipDims = ClipDims()):
    if num_clips < len(CLASSES):
        raise InvalidDimension(f"need at least {len(CLASSES)} clips (one per class), got {num_clips}")
    splits = split_assignment(num_clips, seed)
    clips, meta = [], []
    for i in range(num_clips):
        cls = CLASSES[i % len(CLASSES)]
        s = clip_seed(seed, i)
        clips.append(generate_clip(cls, s, dims))
        meta.append({"id": f"clip{i:05d}", "class": cls, "split": splits[i], "seed": s})
    hist = {c: sum(m["class"] == c for m in meta) for c in CLASSES}
    manifest = DatasetManifest(meta, hist, dims.__dict__.copy(), seed)
    return clips, manifest


def build_dataset(num_clips: int, seed: int, out_path, dims: ClipDims = ClipDims()) -> DatasetManifest:
    """Generate ``num_clips`` balanced clips and write them under directory ``out_path``."""
    clips, manifest = make_clips(num_clips, seed, dims)
    out = Path(out_path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    save_clips(out / DATASET_FILE, clips, manifest)
    try:
        (out / MANIFEST_FILE).write_text(json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write manifest: {exc}") from exc
    return manifest


def save_clips(path, clips, manifest: DatasetManifest) -> None:
    entries = {}
    for clip, meta in zip(clips, manifest.clips):
        key = meta["id"]
        entries[f"{key}/frames"] = clip.frames
        entries[f"{key}/hand_mask"] = clip.hand_mask
        entries[f"{key}/face_mask"] = clip.face_mask
        entries[f"{key}/identity"] = clip.identity
    container.write(path, entries)


def load_dataset(path) -> tuple[list[SynthClip], DatasetManifest]:
    """Read a dataset directory written by ``build_dataset``."""
    path = Path(path)
    try:
        raw = json.loads((path / MANIFEST_FILE).read_text())
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read manifest in {path}: {exc}") from exc
    manifest = DatasetManifest(raw["clips"], raw["histogram"], raw["dims"], raw["seed"], raw["version"])
    tensors = container.read(path / DATASET_FILE)
    clips = []
    for meta in manifest.clips:
        key = meta["id"]
        try:
            clips.append(SynthClip(tensors[f"{key}/frames"], tensors[f"{key}/hand_mask"],
                                   tensors[f"{key}/face_mask"], tensors[f"{key}/identity"],
                                   meta["class"], meta["seed"]))
        except KeyError as exc:
            raise IoError(f"dataset missing entry {exc}") from None
    return clips, manifest


def dataset_exists(path) -> bool:
    return os.path.isfile(Path(path) / DATASET_FILE) and os.path.isfile(Path(path) / MANIFEST_FILE)
