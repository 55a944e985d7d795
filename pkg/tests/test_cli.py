import json

import pytest

from ltpo.cli import main, resolve_model


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


class TestResolveModel:
    def test_toy_spec(self):
        model = resolve_model("toy:seed=7,vocab=32,dim=16,layers=1")
        assert model.descriptor.vocab_size == 32
        assert model.descriptor.hidden_dim == 16

    def test_checkpoint_path(self, tmp_path, toy32):
        from ltpo.model import save_checkpoint
        path = tmp_path / "m.ltpo"
        save_checkpoint(toy32, path)
        model = resolve_model(str(path))
        assert model.descriptor.vocab_size == 32

    def test_unknown_spec_exits(self):
        with pytest.raises(SystemExit):
            resolve_model("/no/such/file.ltpo")


class TestRunVerb:
    def test_run_writes_records_traces_summary(self, tmp_path, data_dir):
        out = tmp_path / "out"
        rc = main([
            "run", "--dataset", str(data_dir / "sample3.jsonl"),
            "--mode", "ltpo", "--seed", "3", "--max-decode-tokens", "8",
            "--config", str(_write_config(tmp_path)),
            "--out", str(out),
        ])
        assert rc == 0
        records = read_jsonl(out / "records.jsonl")
        assert len(records) == 3
        assert all(r["decode_calls"] == 1 for r in records)
        traces = read_jsonl(out / "traces.jsonl")
        footers = [t for t in traces if t["type"] == "footer"]
        assert len(footers) == 3
        summary = json.loads((out / "summary.json").read_text())
        assert summary["records"] == 3

    def test_run_stdout_without_out(self, capsys, tmp_path, data_dir):
        rc = main([
            "run", "--dataset", str(data_dir / "sample3.jsonl"),
            "--mode", "cot", "--default-config", "--seed", "1",
            "--max-decode-tokens", "4",
        ])
        assert rc == 0
        lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        assert lines[-1]["type"] == "summary"
        assert len(lines) == 4  # 3 records + summary

    def test_repeat_and_parallelism_flags(self, tmp_path, data_dir):
        out1 = tmp_path / "serial"
        out4 = tmp_path / "threaded"
        base = [
            "run", "--dataset", str(data_dir / "sample3.jsonl"),
            "--mode", "ltpo", "--seed", "5", "--max-decode-tokens", "6",
            "--config", str(_write_config(tmp_path)), "--repeat", "2",
        ]
        assert main(base + ["--parallelism", "1", "--out", str(out1)]) == 0
        assert main(base + ["--parallelism", "4", "--out", str(out4)]) == 0
        r1 = read_jsonl(out1 / "records.jsonl")
        r4 = read_jsonl(out4 / "records.jsonl")
        assert len(r1) == 6  # 3 problems x 2 repeats
        strip = lambda r: {k: v for k, v in r.items() if not k.endswith("_seconds")}
        assert [strip(r) for r in r1] == [strip(r) for r in r4]
        summary = json.loads((out1 / "summary.json").read_text())
        assert len(summary["per_repeat_accuracy"]) == 2

    def test_bad_config_key_exits(self, tmp_path, data_dir):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"step count": 3}))
        with pytest.raises(SystemExit, match="unknown config keys"):
            main([
                "run", "--dataset", str(data_dir / "sample3.jsonl"),
                "--config", str(bad),
            ])


def _write_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "# thought tokens": 3,
        "# steps": 4,
        "top-k": 5,
        "sigma": 2.0,
        "sigma decay": 0.9,
        "lr": 1e-2,
    }))
    return path


class TestConfigFile:
    def test_table_style_keys_map_to_policy_config(self, tmp_path):
        from ltpo.cli import build_config
        import argparse
        args = argparse.Namespace(config=str(_write_config(tmp_path)),
                                  seed=9, no_track_best=False)
        config = build_config(args)
        assert config.num_thoughts == 3
        assert config.steps == 4
        assert config.top_k == 5
        assert config.sigma0 == 2.0
        assert config.sigma_decay == 0.9
        assert config.learning_rate == 1e-2
        assert config.rng_seed == 9


class TestGradcheckVerb:
    def test_smoke(self, capsys):
        rc = main([
            "gradcheck", "--samples", "200", "--fd-samples", "50",
            "--num-thoughts", "1", "--seed", "0",
        ])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert "cosine_similarity" in report
        assert report["num_samples"] == 200


class TestTraceDumpVerb:
    def test_dump_to_file(self, tmp_path, data_dir):
        out = tmp_path / "trace.jsonl"
        rc = main([
            "trace-dump", "--dataset", str(data_dir / "sample3.jsonl"),
            "--problem-id", "s2", "--config", str(_write_config(tmp_path)),
            "--seed", "5", "--out", str(out),
        ])
        assert rc == 0
        lines = read_jsonl(out)
        assert lines[-1]["type"] == "footer"
        assert len(lines) == 5  # 4 steps + footer
        assert all(l["problem_id"] == "s2" for l in lines)


class TestLandscapeVerbs:
    def test_trap(self, capsys, tmp_path):
        out = tmp_path / "trap.csv"
        rc = main(["landscape", "trap", "--trials", "2", "--out", str(out)])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert report["trapped"] == 2
        assert out.exists()
        header = out.read_text().splitlines()[0]
        assert header == "trial,step,x0,x1,conf,corr"

    def test_align(self, capsys):
        rc = main(["landscape", "align", "--trials", "40", "--seed", "2"])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert report["trials"] == 40
        assert report["agreement_rate"] is None or report["agreement_rate"] >= 0.99

    def test_flow(self, tmp_path, capsys):
        out = tmp_path / "flow.csv"
        rc = main([
            "landscape", "flow",
            "--bumps", "0,0,1.0,0.8",
            "--corr", "ball:0,0,1.0",
            "--start", "0.5,0.4",
            "--out", str(out),
        ])
        assert rc == 0
        rows = out.read_text().splitlines()
        assert rows[0] == "step,x0,x1,conf,corr"
        assert len(rows) > 2
