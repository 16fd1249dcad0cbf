import json

import numpy as np
import pytest

from interlat import synthdata as sd
from interlat.errors import InvalidDimension, UnknownClass


@pytest.mark.parametrize("cls", sd.CLASSES)
def test_every_class_starts_apart_and_touches(cls):
    for seed in range(5):
        clip = sd.generate_clip(cls, seed)
        assert not (clip.hand_mask[0] * clip.face_mask[0]).any()
        assert clip.contact_frames.size > 0
        assert clip.frames.min() >= -1.0 and clip.frames.max() <= 1.0
        for m in (clip.hand_mask, clip.face_mask):
            assert set(np.unique(m)) <= {0.0, 1.0}
        assert abs(np.linalg.norm(clip.identity) - 1.0) < 1e-12


@pytest.mark.parametrize("dims", [sd.ClipDims(f=3), sd.ClipDims(f=8, h=12, w=10, c=3, d_face=8)])
def test_other_dims(dims):
    for cls in sd.CLASSES:
        clip = sd.generate_clip(cls, 11, dims)
        assert clip.frames.shape == (dims.f, dims.h, dims.w, dims.c)
        assert clip.identity.shape == (dims.d_face,)
        assert clip.contact_frames.size > 0


def test_generation_is_deterministic():
    a, b = sd.generate_clip("LC-TF", 42), sd.generate_clip("LC-TF", 42)
    assert a.frames.tobytes() == b.frames.tobytes()
    assert a.hand_mask.tobytes() == b.hand_mask.tobytes()


def test_bad_inputs():
    with pytest.raises(UnknownClass):
        sd.generate_clip("XX-YY", 0)
    with pytest.raises(InvalidDimension):
        sd.ClipDims(f=2)
    with pytest.raises(InvalidDimension):
        sd.ClipDims(h=4)
    with pytest.raises(InvalidDimension):
        sd.make_clips(17, 0)


def test_split_and_balance():
    clips, manifest = sd.make_clips(36, 7)
    assert len(manifest.split("train")) == 32 and len(manifest.split("test")) == 4
    assert all(v == 2 for v in manifest.histogram.values())
    assert len({m["seed"] for m in manifest.clips}) == 36


def test_dataset_round_trip(tmp_path):
    manifest = sd.build_dataset(18, 5, tmp_path / "d")
    assert sd.dataset_exists(tmp_path / "d")
    raw = json.loads((tmp_path / "d" / sd.MANIFEST_FILE).read_text())
    assert raw["version"] == sd.MANIFEST_VERSION and raw["seed"] == 5
    clips, back = sd.load_dataset(tmp_path / "d")
    fresh, _ = sd.make_clips(18, 5)
    assert back.clips == manifest.clips
    for a, b in zip(clips, fresh):
        assert a.frames.tobytes() == b.frames.tobytes()
        assert a.identity.tobytes() == b.identity.tobytes()
        assert a.interaction_class == b.interaction_class


def test_same_seed_same_bytes(tmp_path):
    sd.build_dataset(18, 9, tmp_path / "a")
    sd.build_dataset(18, 9, tmp_path / "b")
    for name in (sd.DATASET_FILE, sd.MANIFEST_FILE):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
