import json
import warnings

import numpy as np
import pytest

from awepool import (
    EmbeddingSet,
    ExperimentConfig,
    PoolingMethod,
    evaluate,
    embed_segments,
    export_projection_2d,
    filter_words,
    generate_synthetic,
    run_experiment,
    select_best,
    sweep,
    write_alignments,
    write_feature_archive,
)
from awepool.cli import main as cli_main
from awepool.harness import expand_axes, write_sweep_outputs


@pytest.fixture(scope="module")
def small_corpus_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    archive, table = generate_synthetic(4, 4, 16, frames_range=(25, 30), separation=6.0, seed=42)
    archive_path = root / "layer7.awef"
    tsv_path = root / "words.tsv"
    write_feature_archive(archive, archive_path)
    write_alignments(table, tsv_path)
    return str(archive_path), str(tsv_path)


def base_config(files, **kw):
    archive_path, tsv_path = files
    defaults = dict(
        feature_archive_path=archive_path,
        alignment_path=tsv_path,
        layer_tag="layer7",
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestExperimentConfig:
    def test_dict_round_trip(self):
        cfg = ExperimentConfig(
            feature_archive_path="a.awef",
            alignment_path="a.tsv",
            pooling=PoolingMethod("subsample", 10),
            pca_dim=13,
        )
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="poling"):
            ExperimentConfig.from_dict({"poling": "mean"})

    def test_pca_dim_validated(self):
        with pytest.raises(ValueError):
            ExperimentConfig(pca_dim=0)


class TestRunExperiment:
    def test_mean_pooling_dim_bookkeeping(self, small_corpus_files):
        record = run_experiment(base_config(small_corpus_files))
        assert record.embedding_dim == 16
        assert record.n_tokens == 16
        assert record.n_types == 4
        assert record.result.average_precision > 0.9  # well-separated synthetic corpus

    def test_subsample_pca_dim_bookkeeping(self, small_corpus_files):
        record = run_experiment(
            base_config(
                small_corpus_files,
                pooling=PoolingMethod("subsample", 10),
                pca_dim=13,
            )
        )
        assert record.embedding_dim == 130

    def test_determinism_across_runs_and_workers(self, small_corpus_files):
        cfg = base_config(small_corpus_files, pooling=PoolingMethod("subsample", 10))
        records = [run_experiment(cfg, workers=w) for w in (1, 1, 4)]
        payloads = {r.to_json(include_timing=False) for r in records}
        assert len(payloads) == 1

    def test_missing_archive_wrapped_with_config_context(self, small_corpus_files):
        cfg = base_config(small_corpus_files, feature_archive_path="/nonexistent.awef")
        with pytest.raises(OSError):
            run_experiment(cfg)


class TestSweep:
    def test_two_by_two_product(self, small_corpus_files):
        entries = sweep(
            base_config(small_corpus_files),
            {"pooling": ["mean", "sub"], "normalize": [True, False]},
        )
        assert len(entries) == 4
        assert all(e.ok for e in entries)
        combos = [(str(e.config.pooling), e.config.normalize) for e in entries]
        assert combos == [
            ("mean", True),
            ("mean", False),
            ("subsample:10", True),
            ("subsample:10", False),
        ]

    def test_five_layer_axis(self, small_corpus_files, tmp_path):
        archive_path, _ = small_corpus_files
        layers = []
        for k in (1, 11, 15, 19, 23):
            dst = tmp_path / f"layer{k}.awef"
            dst.write_bytes(open(archive_path, "rb").read())
            layers.append({"tag": f"layer{k}", "path": str(dst)})
        entries = sweep(base_config(small_corpus_files), {"layer": layers})
        assert len(entries) == 5
        assert [e.config.layer_tag for e in entries] == [f"layer{k}" for k in (1, 11, 15, 19, 23)]

    def test_failures_are_isolated(self, small_corpus_files, tmp_path):
        entries = sweep(
            base_config(small_corpus_files),
            {"layer": [str(tmp_path / "missing.awef"), small_corpus_files[0]]},
        )
        assert len(entries) == 2
        assert not entries[0].ok and entries[0].error
        assert entries[1].ok

    def test_select_best_prefers_first_on_tie(self, small_corpus_files):
        entries = sweep(base_config(small_corpus_files), {"pooling": ["mean", "mean"]})
        best = select_best(entries)
        assert best is entries[0]

    def test_worker_count_keeps_order(self, small_corpus_files):
        axes = {"pooling": ["mean", "sum", "max"], "normalize": [True, False]}
        seq = sweep(base_config(small_corpus_files), axes, workers=1)
        par = sweep(base_config(small_corpus_files), axes, workers=4)
        assert [e.config for e in seq] == [e.config for e in par]
        assert [e.record.to_json(include_timing=False) for e in seq] == [
            e.record.to_json(include_timing=False) for e in par
        ]

    def test_unsweepable_axis_rejected(self, small_corpus_files):
        with pytest.raises(ValueError, match="unsweepable"):
            expand_axes(base_config(small_corpus_files), {"seed": [1, 2]})

    def test_outputs_written(self, small_corpus_files, tmp_path):
        entries = sweep(base_config(small_corpus_files), {"pooling": ["mean", "max"]})
        jsonl_path, csv_path = write_sweep_outputs(entries, tmp_path / "sweep")
        lines = jsonl_path.read_text().splitlines()
        assert len(lines) == 2
        assert all("average_precision" in json.loads(line)["result"] for line in lines)
        header = csv_path.read_text().splitlines()[0]
        assert header.startswith("layer_tag,pooling,normalize,pca_dim")


class TestGenerateSynthetic:
    def test_same_seed_bit_identical(self, tmp_path):
        a1, t1 = generate_synthetic(3, 3, 8, seed=5)
        a2, t2 = generate_synthetic(3, 3, 8, seed=5)
        assert a1 == a2
        assert t1.segments == t2.segments
        p1, p2 = tmp_path / "a1.awef", tmp_path / "a2.awef"
        write_feature_archive(a1, p1)
        write_feature_archive(a2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_different_seed_differs(self):
        a1, _ = generate_synthetic(3, 3, 8, seed=5)
        a2, _ = generate_synthetic(3, 3, 8, seed=6)
        assert a1 != a2

    def test_all_tokens_pass_default_filter(self):
        archive, table = generate_synthetic(5, 4, 8, seed=1)
        assert len(filter_words(table)) == len(table) == 20
        assert len(archive) == 20

    def test_high_separation_is_easy(self):
        archive, table = generate_synthetic(20, 10, 32, separation=10.0, seed=3)
        words = filter_words(table)
        es = embed_segments(archive, words, PoolingMethod("mean"))
        assert evaluate(es).average_precision >= 0.99

    def test_ap_increases_with_separation(self):
        # one-sided trend over seeds at separations {0, 2, 10}
        aps = {0.0: [], 2.0: [], 10.0: []}
        for seed in range(10):
            for sep in aps:
                archive, table = generate_synthetic(
                    6, 5, 16, frames_range=(25, 30), separation=sep, seed=seed
                )
                es = embed_segments(archive, filter_words(table), PoolingMethod("mean"))
                aps[sep].append(evaluate(es).average_precision)
        low, mid, high = (np.mean(aps[s]) for s in (0.0, 2.0, 10.0))
        assert low <= mid <= high
        diffs = np.array(aps[10.0]) - np.array(aps[0.0])
        se = diffs.std(ddof=1) / np.sqrt(len(diffs))
        assert diffs.mean() > 3 * se  # one-sided: AP rises significantly with separation

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            generate_synthetic(1, 3, 8)
        with pytest.raises(ValueError):
            generate_synthetic(3, 1, 8)
        with pytest.raises(ValueError):
            generate_synthetic(3, 3, 8, separation=-1.0)
        with pytest.raises(ValueError, match="0.5 s filter"):
            generate_synthetic(3, 3, 8, frames_range=(5, 10))


class TestProjection:
    def test_collinear_embeddings_flatten(self, tmp_path):
        t = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        es = EmbeddingSet(labels=["a", "b", "c"], vectors=t)
        out = tmp_path / "proj.csv"
        export_projection_2d(es, out)
        rows = out.read_text().splitlines()
        assert rows[0] == "label,x,y"
        ys = [abs(float(r.split(",")[2])) for r in rows[1:]]
        assert max(ys) <= 1e-9

    def test_row_count_matches_items(self, tmp_path):
        rng = np.random.default_rng(1)
        es = EmbeddingSet(labels=[f"w{i}" for i in range(17)], vectors=rng.standard_normal((17, 5)))
        out = tmp_path / "proj.csv"
        export_projection_2d(es, out)
        assert len(out.read_text().splitlines()) == 18

    def test_separated_types_stay_separated_in_2d(self, tmp_path):
        archive, table = generate_synthetic(4, 8, 16, separation=10.0, seed=9)
        words = filter_words(table)
        es = embed_segments(archive, words, PoolingMethod("mean"))
        out = tmp_path / "proj.csv"
        export_projection_2d(es, out)
        by_label = {}
        for line in out.read_text().splitlines()[1:]:
            label, x, y = line.split(",")
            by_label.setdefault(label, []).append((float(x), float(y)))
        centroids = {w: np.mean(pts, axis=0) for w, pts in by_label.items()}
        spreads = [
            np.mean([np.linalg.norm(np.array(p) - centroids[w]) for p in pts])
            for w, pts in by_label.items()
        ]
        inter = [
            np.linalg.norm(centroids[a] - centroids[b])
            for a in centroids
            for b in centroids
            if a < b
        ]
        assert np.mean(inter) > np.mean(spreads)

    def test_degenerate_embeddings_warn(self, tmp_path):
        es = EmbeddingSet(labels=["a", "b", "c"], vectors=np.ones((3, 4)))
        with pytest.warns(UserWarning, match="degenerate"):
            export_projection_2d(es, tmp_path / "p.csv")

    def test_too_few_items(self, tmp_path):
        es = EmbeddingSet(labels=["a", "b"], vectors=np.eye(2))
        with pytest.raises(ValueError):
            export_projection_2d(es, tmp_path / "p.csv")


class TestCli:
    def run_cli(self, *argv):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return cli_main([str(a) for a in argv])

    def test_synth_run_eval_project_report_flow(self, tmp_path, capsys):
        base = tmp_path / "corpus"
        assert self.run_cli(
            "synth", "--n-types", 5, "--tokens-per-type", 5, "--dim", 16,
            "--separation", 8.0, "--seed", 7, "--out", base,
        ) == 0
        assert (tmp_path / "corpus.awef").exists()
        assert (tmp_path / "corpus.tsv").exists()
        assert (tmp_path / "corpus.awef.manifest.jsonl").exists()

        config = {
            "feature_archive_path": str(tmp_path / "corpus.awef"),
            "alignment_path": str(tmp_path / "corpus.tsv"),
            "layer_tag": "synthetic",
            "pooling": "mean",
            "normalize": True,
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))

        record_path = tmp_path / "record.json"
        assert self.run_cli("run", "--config", cfg_path, "--out", record_path) == 0
        record = json.loads(record_path.read_text())
        assert record["embedding_dim"] == 16
        assert 0.0 <= record["result"]["average_precision"] <= 1.0

        emb_path = tmp_path / "emb.awee"
        assert self.run_cli("embed", "--config", cfg_path, "--out", emb_path) == 0

        result_path = tmp_path / "result.json"
        curves = tmp_path / "curves"
        assert self.run_cli(
            "eval", emb_path, "--out", result_path, "--curves", curves
        ) == 0
        result = json.loads(result_path.read_text())
        assert result["result"]["average_precision"] == record["result"]["average_precision"]
        assert (tmp_path / "curves.roc.csv").exists()
        assert (tmp_path / "curves.pr.csv").exists()

        proj_path = tmp_path / "proj.csv"
        assert self.run_cli("project", emb_path, "--out", proj_path) == 0
        assert len(proj_path.read_text().splitlines()) == 26

        report_dir = tmp_path / "report"
        assert self.run_cli(
            "report", "--projection", proj_path,
            "--roc", tmp_path / "curves.roc.csv", "--pr", tmp_path / "curves.pr.csv",
            "--out-dir", report_dir,
        ) == 0
        assert (report_dir / "projection.png").exists()
        assert (report_dir / "roc.png").exists()
        assert (report_dir / "pr.png").exists()
        capsys.readouterr()

    def test_sweep_cli_with_best_and_report(self, tmp_path, capsys):
        base = tmp_path / "c"
        self.run_cli("synth", "--n-types", 4, "--tokens-per-type", 4, "--dim", 8,
                     "--separation", 6.0, "--seed", 1, "--out", base)
        config = {
            "feature_archive_path": str(tmp_path / "c.awef"),
            "alignment_path": str(tmp_path / "c.tsv"),
            "axes": {"pooling": ["mean", "sub"], "normalize": [True, False]},
        }
        cfg_path = tmp_path / "sweep.json"
        cfg_path.write_text(json.dumps(config))
        out_prefix = tmp_path / "sweep_out"
        assert self.run_cli("sweep", "--config", cfg_path, "--out", out_prefix, "--select-best") == 0
        assert len((tmp_path / "sweep_out.jsonl").read_text().splitlines()) == 4
        assert (tmp_path / "sweep_out.summary.csv").exists()
        assert (tmp_path / "sweep_out.best.json").exists()

        report_dir = tmp_path / "figs"
        assert self.run_cli(
            "report", "--sweep", tmp_path / "sweep_out.jsonl", "--out-dir", report_dir
        ) == 0
        assert (report_dir / "sweep_ap.png").exists()
        capsys.readouterr()

    def test_partial_sweep_failure_exit_code(self, tmp_path, capsys):
        base = tmp_path / "c"
        self.run_cli("synth", "--n-types", 4, "--tokens-per-type", 4, "--dim", 8,
                     "--separation", 6.0, "--seed", 1, "--out", base)
        config = {
            "feature_archive_path": str(tmp_path / "c.awef"),
            "alignment_path": str(tmp_path / "c.tsv"),
            "axes": {"layer": [str(tmp_path / "c.awef"), str(tmp_path / "missing.awef")]},
        }
        cfg_path = tmp_path / "sweep.json"
        cfg_path.write_text(json.dumps(config))
        assert self.run_cli("sweep", "--config", cfg_path, "--out", tmp_path / "s") == 3
        capsys.readouterr()

    def test_usage_error_exit_code(self, capsys):
        assert self.run_cli("frobnicate") == 1
        assert self.run_cli("run") == 1
        capsys.readouterr()

    def test_data_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.awef"
        bad.write_bytes(b"not an archive")
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "feature_archive_path": str(bad),
            "alignment_path": str(tmp_path / "missing.tsv"),
        }))
        assert self.run_cli("run", "--config", cfg_path) == 2
        capsys.readouterr()

    def test_run_twice_identical_json_excluding_timing(self, tmp_path, capsys):
        base = tmp_path / "c"
        self.run_cli("synth", "--n-types", 3, "--tokens-per-type", 3, "--dim", 8,
                     "--separation", 5.0, "--seed", 2, "--out", base)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "feature_archive_path": str(tmp_path / "c.awef"),
            "alignment_path": str(tmp_path / "c.tsv"),
        }))
        outs = []
        for name in ("r1.json", "r2.json"):
            out = tmp_path / name
            assert self.run_cli("run", "--config", cfg_path, "--out", out) == 0
            d = json.loads(out.read_text())
            d["result"].pop("wall_time_s")
            outs.append(json.dumps(d, sort_keys=True))
        assert outs[0] == outs[1]
        capsys.readouterr()
