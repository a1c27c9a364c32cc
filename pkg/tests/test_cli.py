import json
import shutil
import subprocess

import pytest

from patchloop.cli import main
from patchloop.ledger import read_ledger
from patchloop.novelty import CorpusIndex
from patchloop.render import CYCLE_COLUMNS, render_report
from patchloop.stats import DEFAULT_TAU_GRID

from helpers import build_replay, write_config


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """One 2x6 replay run through the CLI, shared by the read-only tests."""
    root = tmp_path_factory.mktemp("cli_run")
    replay = build_replay(root / "replay.jsonl", cycles=2, per_cycle=6)
    out_dir = root / "out"
    config = write_config(root / "config.json", replay, out_dir, cycles=2, per_cycle=6)
    code = main(["run", "--config", str(config)])
    assert code == 0
    return out_dir


class TestRun:
    def test_writes_report_and_artifacts(self, small_run, capsys):
        assert (small_run / "report.json").exists()
        assert (small_run / "ledger.jsonl").exists()
        assert (small_run / "corpus.sig.jsonl").exists()

    def test_stdout_names_report_path(self, tmp_path, capsys):
        replay = build_replay(tmp_path / "replay.jsonl", cycles=1, per_cycle=3)
        config = write_config(
            tmp_path / "config.json", replay, tmp_path / "out", cycles=1, per_cycle=3
        )
        assert main(["run", "--config", str(config)]) == 0
        out = capsys.readouterr().out
        assert "Report written to" in out
        assert str(tmp_path / "out" / "report.json") in out

    def test_cycle_and_per_cycle_overrides(self, tmp_path, capsys):
        replay = build_replay(tmp_path / "replay.jsonl", cycles=2, per_cycle=6)
        config = write_config(
            tmp_path / "config.json", replay, tmp_path / "out", cycles=2, per_cycle=6
        )
        code = main(
            ["run", "--config", str(config), "--cycles", "1", "--per-cycle", "3"]
        )
        assert code == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert len(report["per_cycle"]) == 1
        assert report["per_cycle"][0]["generated"] == 3

    def test_missing_config_file_is_usage_error(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "absent.json")]) == 1
        assert "config error" in capsys.readouterr().err

    def test_config_without_generator_is_usage_error(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"out_dir": str(tmp_path / "out")}))
        assert main(["run", "--config", str(path)]) == 1

    def test_exhausted_replay_is_runtime_error(self, tmp_path, capsys):
        replay = build_replay(tmp_path / "replay.jsonl", cycles=1, per_cycle=3)
        config = write_config(
            tmp_path / "config.json", replay, tmp_path / "out", cycles=2, per_cycle=3
        )
        assert main(["run", "--config", str(config)]) == 2
        assert "GeneratorUnavailable" in capsys.readouterr().err

    def test_no_subcommand_exits_one(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main([])
        assert exc_info.value.code == 1


class TestReport:
    def test_table_header_verbatim(self, small_run, capsys):
        assert main(["report", str(small_run / "ledger.jsonl")]) == 0
        first_line = capsys.readouterr().out.splitlines()[0]
        assert tuple(first_line.split()) == CYCLE_COLUMNS

    def test_empty_ledger_reports_no_records(self, tmp_path, capsys):
        ledger = tmp_path / "ledger.jsonl"
        ledger.write_text("")
        assert main(["report", str(ledger)]) == 0
        assert capsys.readouterr().out == "no records\n"

    def test_json_dump_round_trips_to_same_text(self, small_run, tmp_path, capsys):
        json_out = tmp_path / "report.json"
        ledger = str(small_run / "ledger.jsonl")
        assert main(["report", ledger, "--json", str(json_out)]) == 0
        rendered = capsys.readouterr().out
        assert render_report(json.loads(json_out.read_text())) == rendered

    def test_fixed_policy_shows_one_threshold(self, small_run, capsys):
        assert main(["report", str(small_run / "ledger.jsonl"), "--tau", "0.40"]) == 0
        out = capsys.readouterr().out
        dataset_rows = [
            line for line in out.splitlines() if line.lstrip().startswith(
                ("cifar", "mnist", "svhn", "celeba", "imagenette")
            )
        ]
        assert dataset_rows
        assert all(row.split()[-1] == "40.0" for row in dataset_rows)

    def test_per_dataset_policy_varies_threshold_column(self, small_run, capsys):
        code = main(
            ["report", str(small_run / "ledger.jsonl"), "--policy", "per-dataset"]
        )
        assert code == 0
        out = capsys.readouterr().out
        thresholds = {
            row.split()[0]: row.split()[-1]
            for row in out.splitlines()
            if row.lstrip().startswith(
                ("cifar", "mnist", "svhn", "celeba", "imagenette")
            )
        }
        if "mnist" in thresholds:
            assert thresholds["mnist"] == "25.0"
        if "svhn" in thresholds:
            assert thresholds["svhn"] == "70.0"
        assert len(set(thresholds.values())) > 1


class TestSweep:
    def test_default_grid_has_eight_rows(self, small_run, capsys):
        assert main(["sweep", str(small_run / "ledger.jsonl")]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 1 + len(DEFAULT_TAU_GRID)
        assert lines[0].split() == ["τ", "Rate", "95%", "CI"]

    def test_custom_taus(self, small_run, capsys):
        code = main(["sweep", str(small_run / "ledger.jsonl"), "--taus", "0.25,0.50"])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 3
        assert lines[1].split()[0] == "25"
        assert lines[2].split()[0] == "50"

    def test_empty_ledger(self, tmp_path, capsys):
        ledger = tmp_path / "ledger.jsonl"
        ledger.write_text("")
        assert main(["sweep", str(ledger)]) == 0
        assert capsys.readouterr().out == "no records\n"


class TestCorrelate:
    def test_concordant_pairs(self, tmp_path, capsys):
        pairs = tmp_path / "pairs.txt"
        pairs.write_text("# x y\n1 2\n2 4\n3 9\n4 16\n")
        assert main(["correlate", str(pairs)]) == 0
        out = capsys.readouterr().out
        assert "spearman_rho 1.0000" in out
        assert "spearman_p 0.0000" in out
        assert "kendall_tau 1.0000" in out

    def test_comma_separated_pairs(self, tmp_path, capsys):
        pairs = tmp_path / "pairs.txt"
        pairs.write_text("1,3\n2,2\n3,1\n4,0\n")
        assert main(["correlate", str(pairs)]) == 0
        assert "spearman_rho -1.0000" in capsys.readouterr().out

    def test_bad_line_is_usage_error(self, tmp_path, capsys):
        pairs = tmp_path / "pairs.txt"
        pairs.write_text("1 2 3\n")
        assert main(["correlate", str(pairs)]) == 1

    def test_too_few_pairs_is_runtime_error(self, tmp_path, capsys):
        pairs = tmp_path / "pairs.txt"
        pairs.write_text("1 2\n")
        assert main(["correlate", str(pairs)]) == 2
        assert "TooFewPairs" in capsys.readouterr().err


class TestDiffTools:
    def test_apply_matches_golden(self, tmp_path, fixtures_dir, bundled_pool, capsys):
        baseline = next(
            b for b in bundled_pool if b.baseline_id == "lemur-cifar10-small"
        )
        source = tmp_path / "model.py"
        source.write_text(baseline.source)
        patch = fixtures_dir / "fig2_delta.patch"
        assert main(["diff-apply", str(source), str(patch)]) == 0
        out = capsys.readouterr().out
        assert out == (fixtures_dir / "fig2_patched.py").read_text()

    def test_apply_context_mismatch_exits_two(self, tmp_path, capsys):
        source = tmp_path / "model.py"
        source.write_text("alpha\nbeta\n")
        patch = tmp_path / "delta.patch"
        patch.write_text("@@ -1 +1 @@\n-gamma\n+delta\n")
        assert main(["diff-apply", str(source), str(patch)]) == 2
        assert "ContextMismatch" in capsys.readouterr().err

    def test_make_then_apply_round_trips(self, tmp_path, capsys):
        old = tmp_path / "old.py"
        new = tmp_path / "new.py"
        old.write_text("a = 1\nb = 2\nc = 3\n")
        new.write_text("a = 1\nb = 20\nc = 3\nd = 4\n")
        assert main(["diff-make", str(old), str(new)]) == 0
        patch_text = capsys.readouterr().out
        patch = tmp_path / "delta.patch"
        patch.write_text(patch_text)
        assert main(["diff-apply", str(old), str(patch)]) == 0
        assert capsys.readouterr().out == new.read_text()

    def test_missing_file_exits_two(self, tmp_path, capsys):
        assert main(["diff-make", str(tmp_path / "a"), str(tmp_path / "b")]) == 2


class TestDedupScore:
    def test_known_text_scores_zero(self, tmp_path, capsys):
        text = "def forward(self, x):\n    return self.head(x)\n" * 3
        index = CorpusIndex(permutation_seed=7)
        index.add_text("gen-0000-0000", text)
        corpus = tmp_path / "corpus.sig.jsonl"
        index.dump_jsonl(corpus)
        sample = tmp_path / "sample.py"
        sample.write_text(text)
        assert main(["dedup-score", str(sample), "--corpus", str(corpus)]) == 0
        assert capsys.readouterr().out == "0.0000\n"

    def test_unrelated_text_scores_high(self, tmp_path, capsys):
        index = CorpusIndex(permutation_seed=7)
        index.add_text("gen-0000-0000", "x" * 80)
        corpus = tmp_path / "corpus.sig.jsonl"
        index.dump_jsonl(corpus)
        sample = tmp_path / "sample.py"
        sample.write_text(
            "import collections\n\nQueue = collections.deque\nprint(Queue([1, 2]))\n"
        )
        assert main(["dedup-score", str(sample), "--corpus", str(corpus)]) == 0
        score = float(capsys.readouterr().out)
        assert score > 0.9

    def test_run_artifacts_feed_dedup(self, small_run, tmp_path, capsys):
        records = read_ledger(small_run / "ledger.jsonl")
        admitted = next(r for r in records if r.admitted)
        sample = tmp_path / "sample.py"
        sample.write_text(admitted.patched_source)
        corpus = small_run / "corpus.sig.jsonl"
        assert main(["dedup-score", str(sample), "--corpus", str(corpus)]) == 0
        assert capsys.readouterr().out == "0.0000\n"


class TestConsoleScript:
    def test_installed_entry_point(self, tmp_path):
        exe = shutil.which("patchloop")
        assert exe, "console script should be installed with the package"
        ledger = tmp_path / "ledger.jsonl"
        ledger.write_text("")
        proc = subprocess.run(
            [exe, "report", str(ledger)], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert proc.stdout == "no records\n"
