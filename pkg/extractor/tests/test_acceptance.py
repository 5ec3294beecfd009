"""Acceptance: archives produced on a 1 s test tone are valid for the
evaluation toolkit, with the expected geometry. Run with -v -s for the
PASS/FAIL line."""

from contextlib import contextmanager

import numpy as np
import pytest

from awe_extractor import extract_features
from awe_extractor.cli import main as cli_main
from awe_extractor.manifest import ExtractionManifest, ManifestRow
from awepool import read_feature_archive
from conftest import write_tone


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"\n[ACCEPTANCE] {name}: PASS")


def test_tone_extraction_five_layers(large_model_dir, tmp_path):
    with criterion("extractor: 1 s tone -> 5 valid archives, T in {49,50}, D=1024, 50 Hz"):
        tone = write_tone(tmp_path / "tone.wav")
        manifest_path = tmp_path / "m.tsv"
        manifest_path.write_text(f"tone\t{tone}\n")
        out_dir = tmp_path / "out"
        code = cli_main([
            "--model", large_model_dir,
            "--layers", "1,11,15,19,23",
            "--manifest", str(manifest_path),
            "--out-dir", str(out_dir),
        ])
        assert code == 0
        archives = sorted(out_dir.glob("*.awef"))
        assert len(archives) == 5
        expected = {f"layer{k}" for k in (1, 11, 15, 19, 23)}
        assert {p.stem.rsplit("_", 1)[-1] for p in archives} == expected
        for path in archives:
            back = read_feature_archive(path)  # enforces all archive invariants
            assert back.dim == 1024
            assert back.frame_rate_hz == 50.0
            assert back.entries["tone"].shape[0] in (49, 50)
            assert (tmp_path / "out" / f"{path.name}.meta.json").exists()


def test_layers_differ_and_runs_are_reproducible(large_model, tmp_path):
    tone = write_tone(tmp_path / "tone.wav")
    manifest = ExtractionManifest(
        rows=[ManifestRow("tone", str(tone))],
        model_id="local-test",
        layer_indices=[1, 23],
    )
    r1 = extract_features(manifest, tmp_path / "a", model=large_model)
    r2 = extract_features(manifest, tmp_path / "b", model=large_model)
    assert not r1.skipped and not r2.skipped
    l1 = read_feature_archive(r1.archive_paths[0]).entries["tone"]
    l23 = read_feature_archive(r1.archive_paths[1]).entries["tone"]
    assert not np.allclose(l1, l23)  # distinct layers, distinct states
    for p1, p2 in zip(r1.archive_paths, r2.archive_paths):
        a = read_feature_archive(p1).entries["tone"]
        b = read_feature_archive(p2).entries["tone"]
        assert a.shape == b.shape
        assert np.allclose(a, b, atol=1e-5)


def test_batching_matches_single(large_model, tmp_path):
    tones = [
        write_tone(tmp_path / "a.wav", freq=440.0),
        write_tone(tmp_path / "b.wav", freq=660.0, seconds=0.8),
    ]
    rows = [ManifestRow(f"t{i}", str(p)) for i, p in enumerate(tones)]
    manifest = ExtractionManifest(rows=rows, model_id="local-test", layer_indices=[11])
    single = extract_features(manifest, tmp_path / "s", model=large_model, batch_size=1)
    batched = extract_features(manifest, tmp_path / "g", model=large_model, batch_size=2)
    a = read_feature_archive(single.archive_paths[0])
    b = read_feature_archive(batched.archive_paths[0])
    assert list(a.entries) == list(b.entries)
    for uid in a.entries:
        assert a.entries[uid].shape == b.entries[uid].shape
        assert np.allclose(a.entries[uid], b.entries[uid], atol=1e-4)


def test_undecodable_row_is_skipped_with_partial_exit(large_model_dir, tmp_path):
    tone = write_tone(tmp_path / "tone.wav")
    broken = tmp_path / "broken.wav"
    broken.write_text("not audio")
    manifest_path = tmp_path / "m.tsv"
    manifest_path.write_text(f"ok\t{tone}\nbad\t{broken}\n")
    out_dir = tmp_path / "out"
    code = cli_main([
        "--model", large_model_dir,
        "--layers", "1",
        "--manifest", str(manifest_path),
        "--out-dir", str(out_dir),
    ])
    assert code == 3
    back = read_feature_archive(next(out_dir.glob("*.awef")))
    assert list(back.entries) == ["ok"]


def test_unknown_layer_is_fatal(large_model, tmp_path):
    tone = write_tone(tmp_path / "tone.wav")
    manifest = ExtractionManifest(
        rows=[ManifestRow("tone", str(tone))],
        model_id="local-test",
        layer_indices=[99],
    )
    with pytest.raises(ValueError, match="layer 99 out of range.*24"):
        extract_features(manifest, tmp_path / "o", model=large_model)


def test_unknown_layer_cli_exit(large_model_dir, tmp_path):
    tone = write_tone(tmp_path / "tone.wav")
    manifest_path = tmp_path / "m.tsv"
    manifest_path.write_text(f"tone\t{tone}\n")
    code = cli_main([
        "--model", large_model_dir,
        "--layers", "99",
        "--manifest", str(manifest_path),
        "--out-dir", str(tmp_path / "o"),
    ])
    assert code == 2
