from __future__ import annotations

import sys

from PIL import Image

from dialogcut.keyframes import (
    KeyframeRef,
    PerceptualHashSimilarity,
    dhash64,
    extract_keyframes,
    hash_similarity,
    keyframe_command,
    keyframe_refs,
)

from conftest import make_track


def gradient_image(path, seed: int, size=(32, 32)):
    img = Image.new("L", size)
    img.putdata([(x * (seed + 3) + y * 7) % 256 for y in range(size[1]) for x in range(size[0])])
    img.save(path)
    return str(path)


class TestHashing:
    def test_identical_images_hash_equal(self, tmp_path):
        a = gradient_image(tmp_path / "a.png", seed=1)
        b = gradient_image(tmp_path / "b.png", seed=1)
        assert dhash64(a) == dhash64(b)
        assert hash_similarity(dhash64(a), dhash64(b)) == 1.0

    def test_different_images_differ(self, tmp_path):
        a = gradient_image(tmp_path / "a.png", seed=1)
        b = gradient_image(tmp_path / "b.png", seed=40)
        assert hash_similarity(dhash64(a), dhash64(b)) < 1.0

    def test_resize_invariance(self, tmp_path):
        a = gradient_image(tmp_path / "a.png", seed=5, size=(64, 64))
        small = tmp_path / "small.png"
        with Image.open(a) as img:
            img.resize((24, 24)).save(small)
        assert hash_similarity(dhash64(a), dhash64(str(small))) > 0.85

    def test_similarity_backend_caches(self, tmp_path):
        a = gradient_image(tmp_path / "a.png", seed=1)
        sim = PerceptualHashSimilarity()
        ra = KeyframeRef(subtitle_index=0, timestamp_ms=0, image_ref=a)
        rb = KeyframeRef(subtitle_index=1, timestamp_ms=10, image_ref=a)
        assert sim(ra, rb) == 1.0
        assert sim(ra, rb) == 1.0  # cached path

    def test_imageless_frames(self):
        sim = PerceptualHashSimilarity()
        a = KeyframeRef(subtitle_index=0, timestamp_ms=0)
        b = KeyframeRef(subtitle_index=1, timestamp_ms=10)
        assert sim(a, a) == 1.0
        assert sim(a, b) == 0.0


class TestExtraction:
    def test_command_tokenization(self):
        argv = keyframe_command(
            'mytool -ss {timestamp} -i "{input}" {output}',
            "/media/My Movie.mkv", 90_500, "/tmp/out.png",
        )
        assert argv == ["mytool", "-ss", "90.500", "-i", "/media/My Movie.mkv", "/tmp/out.png"]

    def test_extract_runs_tool_per_midpoint(self, tmp_path):
        track = make_track(3)
        script = tmp_path / "grab.py"
        script.write_text(
            "import sys\n"
            "from PIL import Image\n"
            "ts = float(sys.argv[2])\n"
            "img = Image.new('L', (8, 8), int(ts) % 256)\n"
            "img.save(sys.argv[3])\n"
        )
        template = f'"{sys.executable}" "{script}" {{input}} {{timestamp}} {{output}}'
        refs = extract_keyframes(track, "media.bin", template, tmp_path / "frames")
        assert len(refs) == 3
        for ref, entry in zip(refs, track.entries):
            assert ref.timestamp_ms == entry.midpoint_ms
            assert (tmp_path / "frames" / f"{ref.subtitle_index:06d}.png").exists()

    def test_existing_images_reused(self, tmp_path):
        track = make_track(2)
        counter = tmp_path / "count"
        script = tmp_path / "grab.py"
        script.write_text(
            "import sys, pathlib\n"
            "from PIL import Image\n"
            f"c = pathlib.Path({str(counter)!r})\n"
            "c.write_text(str(int(c.read_text() or '0') + 1) if c.exists() else '1')\n"
            "Image.new('L', (8, 8)).save(sys.argv[3])\n"
        )
        template = f'"{sys.executable}" "{script}" {{input}} {{timestamp}} {{output}}'
        extract_keyframes(track, "x", template, tmp_path / "frames")
        assert counter.read_text() == "2"
        extract_keyframes(track, "x", template, tmp_path / "frames")
        assert counter.read_text() == "2"  # cache hit, tool not rerun

    def test_refs_without_extraction(self):
        track = make_track(4)
        refs = keyframe_refs(track)
        assert [r.subtitle_index for r in refs] == [0, 1, 2, 3]
        assert all(r.image_ref == "" for r in refs)
        for r, e in zip(refs, track.entries):
            assert e.start_ms <= r.timestamp_ms <= e.end_ms
