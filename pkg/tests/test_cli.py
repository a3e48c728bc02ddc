"""End-to-end tests for the command-line interface.

Each test drives ``ihasearch.cli.main`` in-process and checks the stable
contract: exit codes (0 ok / 2 input error / 3 runtime error), artifact
schemas, and byte-level determinism of repeated runs.
"""
from __future__ import annotations

import json
import re
import xml.dom.minidom
from pathlib import Path

import numpy as np
import pytest

from ihasearch.cli import main
from ihasearch.genome import (
    ArchGenome,
    GlobalConfig,
    LayerGene,
    count_attention_configs,
    from_json,
    genome_id,
    to_json,
)
from ihasearch.surrogate import EncoderSurrogate, make_synthetic_corpus, save_corpus

SMALL_SEARCH_CFG = {
    "population_size": 8,
    "offspring_size": 8,
    "generations": 4,
    "refine_every_generations": 0,
    "evaluator": "oracle",
    "backend": "analytic:gemmini",
    "seed": 3,
}


def smol_genome() -> ArchGenome:
    """A 32-layer, d_model=960 model in the shape of SmolLM2-360M."""
    gene = LayerGene(1, 1, 15, 5, 64, 64, 2560)
    return ArchGenome(
        GlobalConfig(d_model=960, block_size=1024, max_layers=32),
        tuple(gene for _ in range(32)),
    )


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    genomes, labels = make_synthetic_corpus(64, seed=7)
    save_corpus(str(path), genomes, labels)
    return path


@pytest.fixture(scope="module")
def candidates_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("cands") / "cands.jsonl"
    genomes, _ = make_synthetic_corpus(4, seed=9)
    path.write_text("".join(to_json(g) + "\n" for g in genomes))
    return path


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory, corpus_file) -> Path:
    out = tmp_path_factory.mktemp("ckpt")
    rc = main(["surrogate", "train", "--corpus", str(corpus_file),
               "--out", str(out), "--epochs", "5"])
    assert rc == 0
    return out / "encoder.npz"


@pytest.fixture(scope="module")
def genome_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("genome") / "smol.json"
    path.write_text(to_json(smol_genome()) + "\n")
    return path


def write_cfg(tmp_path: Path, **overrides) -> Path:
    cfg = dict(SMALL_SEARCH_CFG, **overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


# --------------------------------------------------------------------------
# count / check-iha
# --------------------------------------------------------------------------

class TestCount:
    def test_default_output_exact(self, capsys):
        assert main(["count"]) == 0
        assert capsys.readouterr().out == "GQA: 27, IHA: 11250, ratio ≈ 416.7×\n"

    def test_custom_d_model_matches_enumeration(self, capsys):
        assert main(["count", "--d-model", "512"]) == 0
        out = capsys.readouterr().out
        gqa = count_attention_configs("gqa", d_model=512)
        iha = count_attention_configs("iha", d_model=512)
        assert out == f"GQA: {gqa}, IHA: {iha}, ratio ≈ {iha / gqa:.1f}×\n"


class TestCheckIha:
    def test_suite_passes(self, capsys):
        assert main(["check-iha", "--trials", "10"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 6  # five properties + the summary line
        assert "FAIL" not in out

    def test_failing_suite_exits_3(self, capsys, monkeypatch):
        import ihasearch.cli as cli
        monkeypatch.setattr(cli, "run_kernel_property_suite",
                            lambda **kw: {"broken_property": 1.0})
        assert main(["check-iha"]) == 3
        assert "FAIL" in capsys.readouterr().out


# --------------------------------------------------------------------------
# search
# --------------------------------------------------------------------------

class TestSearch:
    def test_artifacts_schema(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path)
        out = tmp_path / "run"
        assert main(["search", "--config", str(cfg), "--out", str(out)]) == 0

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["subcommand"] == "search"
        assert manifest["version"]
        assert manifest["config"]["population_size"] == 8
        assert manifest["seed"] == 3

        gen_lines = (out / "generations.csv").read_text().splitlines()
        assert gen_lines[0] == "gen,best_val_loss,archive_size,hypervolume"
        assert len(gen_lines) == 1 + SMALL_SEARCH_CFG["generations"]
        hv = [float(l.split(",")[3]) for l in gen_lines[1:]]
        assert all(b >= a for a, b in zip(hv, hv[1:]))

        arch_lines = (out / "archive.csv").read_text().splitlines()
        assert arch_lines[0] == "genome_id,val_loss,e_tok_j,ttft_s,tpot_s,feasible"
        n_archive = len(arch_lines) - 1
        assert n_archive > 0
        assert all(line.endswith(",true") for line in arch_lines[1:])

        genome_docs = sorted((out / "genomes").glob("*.json"))
        assert len(genome_docs) == n_archive
        for doc in genome_docs:
            g = from_json(doc.read_text())
            assert genome_id(g) == doc.stem

        svg = (out / "front.svg").read_text()
        dom = xml.dom.minidom.parseString(svg)
        assert len(dom.getElementsByTagName("circle")) == n_archive
        assert (out / "events.jsonl").exists()

    def test_repeat_run_byte_identical(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["search", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["search", "--config", str(cfg), "--out", str(out2)]) == 0
        for name in ["archive.csv", "generations.csv", "front.svg",
                     "events.jsonl", "manifest.json"]:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_seed_override_changes_archive(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["search", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["search", "--config", str(cfg), "--out", str(out2),
                     "--seed", "4"]) == 0
        assert (out1 / "archive.csv").read_bytes() != (out2 / "archive.csv").read_bytes()
        assert json.loads((out2 / "manifest.json").read_text())["seed"] == 4

    def test_manifest_overwrite_guard(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path)
        out = tmp_path / "run"
        assert main(["search", "--config", str(cfg), "--out", str(out)]) == 0
        assert main(["search", "--config", str(cfg), "--out", str(out)]) == 2
        assert "--force" in capsys.readouterr().err
        assert main(["search", "--config", str(cfg), "--out", str(out),
                     "--force"]) == 0

    def test_malformed_config_names_field(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, population_size=-3)
        assert main(["search", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
        assert "population_size" in capsys.readouterr().err

    def test_unknown_config_field_rejected(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, populaton_size=8)
        assert main(["search", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
        assert "populaton_size" in capsys.readouterr().err

    def test_unparseable_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("not json")
        assert main(["search", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["search", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "x")]) == 2

    def test_surrogate_evaluator_requires_checkpoint(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, evaluator="surrogate")
        assert main(["search", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
        assert "--surrogate" in capsys.readouterr().err

    def test_refinement_requires_corpus(self, tmp_path, capsys, checkpoint):
        cfg = write_cfg(tmp_path, evaluator="surrogate", refine_every_generations=2,
                        mc_dropout_passes=3, refine_batch_size=4)
        assert main(["search", "--config", str(cfg), "--out", str(tmp_path / "x"),
                     "--surrogate", str(checkpoint)]) == 2
        assert "--corpus" in capsys.readouterr().err

    def test_bad_backend_override(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path)
        assert main(["search", "--config", str(cfg), "--out", str(tmp_path / "x"),
                     "--backend", "warp-drive"]) == 2

    def test_surrogate_run_with_refinement_events(self, tmp_path, capsys,
                                                  checkpoint, corpus_file):
        cfg = write_cfg(tmp_path, evaluator="surrogate", refine_every_generations=2,
                        mc_dropout_passes=3, refine_batch_size=4, seed=5)
        out = tmp_path / "run"
        assert main(["search", "--config", str(cfg), "--out", str(out),
                     "--surrogate", str(checkpoint),
                     "--corpus", str(corpus_file)]) == 0
        events = [json.loads(l) for l in (out / "events.jsonl").read_text().splitlines()]
        assert [e["t"] for e in events] == [2]
        assert all(np.isfinite(v) for e in events for v in e["labels"])

    def test_ring_backend_runs(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, population_size=6, offspring_size=6,
                        generations=2, backend="ring", val_loss_max=3.5,
                        prefill_tokens=512, decode_tokens=256, seed=11)
        out = tmp_path / "run"
        assert main(["search", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "archive.csv").read_text().count("\n") >= 1

    def test_runtime_failure_exits_3(self, tmp_path, capsys, monkeypatch):
        import ihasearch.cli as cli
        monkeypatch.setattr(cli, "run_search",
                            lambda *a, **k: (_ for _ in ()).throw(RuntimeError("boom")))
        cfg = write_cfg(tmp_path)
        assert main(["search", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 3
        assert "boom" in capsys.readouterr().err


# --------------------------------------------------------------------------
# pack
# --------------------------------------------------------------------------

class TestPack:
    def test_writes_plan_and_table(self, tmp_path, capsys, genome_file):
        out = tmp_path / "pack"
        assert main(["pack", "--genome", str(genome_file), "--out", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert re.search(r"grid: 45 chip configs, \d+ feasible", stdout)
        assert "n_chips" in stdout and "ttft_s" in stdout

        plan_lines = (out / "ring_plan.csv").read_text().splitlines()
        assert plan_lines[0].startswith("stage,layer_start,layer_end")
        assert len(plan_lines) >= 2
        assert (out / "manifest.json").exists()

    def test_top_k_table_mutually_nondominated(self, tmp_path, capsys, genome_file):
        out = tmp_path / "pack"
        assert main(["pack", "--genome", str(genome_file), "--out", str(out)]) == 0
        rows = []
        for line in capsys.readouterr().out.splitlines():
            cells = line.split()
            if len(cells) == 9 and cells[0].isdigit():
                # ttft_s, tpot_s, e_tok_j, area
                rows.append([float(cells[5]), float(cells[6]),
                             float(cells[7]), float(cells[8])])
        assert 1 <= len(rows) <= 3
        for i, a in enumerate(rows):
            for j, b in enumerate(rows):
                if i != j:
                    assert not (all(x <= y for x, y in zip(a, b))
                                and any(x < y for x, y in zip(a, b))), (i, j)

    def test_invalid_genome_exit2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        g = smol_genome()
        doc = json.loads(to_json(g))
        doc["layers"][0]["n_kv"] = 4  # 4 does not divide n_h=15
        bad.write_text(json.dumps(doc))
        assert main(["pack", "--genome", str(bad), "--out", str(tmp_path / "x")]) == 2
        assert "n_kv" in capsys.readouterr().err

    def test_unparseable_genome_exit2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        assert main(["pack", "--genome", str(bad), "--out", str(tmp_path / "x")]) == 2

    def test_oversized_genome_warns_exit0(self, tmp_path, capsys):
        huge = tmp_path / "huge.json"
        gene = LayerGene(1, 1, 16, 16, 512, 512, 4096)
        g = ArchGenome(GlobalConfig(d_model=768, block_size=8192, max_layers=40),
                       tuple(gene for _ in range(40)))
        huge.write_text(to_json(g))
        out = tmp_path / "pack"
        assert main(["pack", "--genome", str(huge), "--out", str(out),
                     "--prefill-tokens", "4096", "--decode-tokens", "4096"]) == 0
        stdout = capsys.readouterr().out
        assert "warning" in stdout and "0 feasible" in stdout
        assert not (out / "ring_plan.csv").exists()

    def test_custom_grid(self, tmp_path, capsys, genome_file):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps(
            {"n_mac": [64], "w_core_kb": [192], "n_chips_max": [32]}))
        out = tmp_path / "pack"
        assert main(["pack", "--genome", str(genome_file), "--out", str(out),
                     "--grid", str(grid)]) == 0
        stdout = capsys.readouterr().out
        assert "grid: 1 chip configs" in stdout

    def test_bad_grid_file_exit2(self, tmp_path, capsys, genome_file):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"n_mac": [64]}))
        assert main(["pack", "--genome", str(genome_file),
                     "--out", str(tmp_path / "x"), "--grid", str(grid)]) == 2


# --------------------------------------------------------------------------
# surrogate
# --------------------------------------------------------------------------

class TestSurrogateTrain:
    def test_artifacts_and_param_count(self, tmp_path, capsys, corpus_file):
        out = tmp_path / "train"
        assert main(["surrogate", "train", "--corpus", str(corpus_file),
                     "--out", str(out), "--epochs", "3"]) == 0
        assert "203,713 parameters" in capsys.readouterr().out
        assert (out / "encoder.npz").exists()
        curve = (out / "curve.csv").read_text().splitlines()
        assert curve[0] == "epoch,train_l1,test_l1"
        assert len(curve) == 1 + 3 + 1  # header + pre-training row + one per epoch
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["epochs"] == 3 and manifest["seed"] == 100

    def test_same_seed_identical_checkpoints(self, tmp_path, capsys, corpus_file):
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            assert main(["surrogate", "train", "--corpus", str(corpus_file),
                         "--out", str(out), "--epochs", "2"]) == 0
        assert (outs[0] / "encoder.npz").read_bytes() == \
               (outs[1] / "encoder.npz").read_bytes()

    def test_tiny_corpus_exit2(self, tmp_path, capsys):
        small = tmp_path / "small.jsonl"
        genomes, labels = make_synthetic_corpus(4, seed=1)
        save_corpus(str(small), genomes, labels)
        assert main(["surrogate", "train", "--corpus", str(small),
                     "--out", str(tmp_path / "x")]) == 2
        assert "held-out split" in capsys.readouterr().err

    def test_missing_corpus_exit2(self, tmp_path, capsys):
        assert main(["surrogate", "train", "--corpus", str(tmp_path / "no.jsonl"),
                     "--out", str(tmp_path / "x")]) == 2


class TestSurrogateEval:
    def test_metric_block(self, capsys, corpus_file, checkpoint):
        assert main(["surrogate", "eval", "--corpus", str(corpus_file),
                     "--checkpoint", str(checkpoint)]) == 0
        out = capsys.readouterr().out
        for key in ["tau", "rho", "mae", "k_at_1pct", "k_at_5pct", "mae_at_5pct"]:
            assert re.search(rf"^{key}: ", out, re.M), key
        assert "203,713" in out

    def test_perfect_predictions_tau_rho_one(self, tmp_path, capsys, checkpoint,
                                             corpus_file):
        # label every genome with the model's own prediction: the held-out
        # split is then predicted perfectly, so tau = rho = 1 and mae = 0
        from ihasearch.surrogate import load_corpus
        model = EncoderSurrogate.load(str(checkpoint))
        genomes, _ = load_corpus(str(corpus_file))
        self_labeled = tmp_path / "self.jsonl"
        save_corpus(str(self_labeled), genomes, model.predict_genomes(genomes))
        assert main(["surrogate", "eval", "--corpus", str(self_labeled),
                     "--checkpoint", str(checkpoint)]) == 0
        out = capsys.readouterr().out
        metrics = dict(
            line.split(": ") for line in out.splitlines() if ": " in line
        )
        assert float(metrics["tau"]) == pytest.approx(1.0)
        assert float(metrics["rho"]) == pytest.approx(1.0)
        assert float(metrics["mae"]) == pytest.approx(0.0, abs=1e-12)

    def test_bad_checkpoint_exit2(self, tmp_path, capsys, corpus_file):
        bad = tmp_path / "bad.npz"
        bad.write_text("nonsense")
        assert main(["surrogate", "eval", "--corpus", str(corpus_file),
                     "--checkpoint", str(bad)]) == 2


class TestSurrogateMc:
    def test_outputs_and_determinism(self, capsys, checkpoint, candidates_file):
        argv = ["surrogate", "mc", "--checkpoint", str(checkpoint),
                "--genomes", str(candidates_file), "--n-mc", "4"]
        assert main(argv) == 0
        first = capsys.readouterr().out
        lines = first.splitlines()
        assert lines[0] == "genome_id,mu,sigma"
        assert len(lines) == 1 + 4
        for line in lines[1:]:
            gid, mu, sigma = line.split(",")
            assert len(gid) == 12
            assert np.isfinite(float(mu))
            assert float(sigma) >= 0.0
        assert main(argv) == 0
        assert capsys.readouterr().out == first

    def test_empty_list_exit2(self, tmp_path, capsys, checkpoint):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        assert main(["surrogate", "mc", "--checkpoint", str(checkpoint),
                     "--genomes", str(empty)]) == 2

    def test_bad_genome_line_exit2(self, tmp_path, capsys, checkpoint):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"global": {}}\n')
        assert main(["surrogate", "mc", "--checkpoint", str(checkpoint),
                     "--genomes", str(bad)]) == 2
        assert "line 1" in capsys.readouterr().err
