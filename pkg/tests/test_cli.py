import json
import subprocess



def run_cli(python_exe, cli_env, *args):
    return subprocess.run(
        [python_exe, "-m", "layoutkit", *args],
        env=cli_env,
        capture_output=True,
        text=True,
    )


class TestEvaluateCommand:
    def test_csv_matches_golden(self, python_exe, cli_env, fixtures_dir, tmp_path):
        out = tmp_path / "report.csv"
        proc = run_cli(
            python_exe, cli_env, "evaluate",
            "--gt", str(fixtures_dir / "eval_gt.jsonl"),
            "--pred", str(fixtures_dir / "eval_pred.jsonl"),
            "--out", str(out),
        )
        assert proc.returncode == 0, proc.stderr
        assert out.read_text() == (fixtures_dir / "golden_report.csv").read_text()

    def test_json_matches_golden(self, python_exe, cli_env, fixtures_dir, tmp_path):
        out = tmp_path / "report.json"
        proc = run_cli(
            python_exe, cli_env, "evaluate",
            "--gt", str(fixtures_dir / "eval_gt.jsonl"),
            "--pred", str(fixtures_dir / "eval_pred.jsonl"),
            "--out", str(out), "--format", "json",
        )
        assert proc.returncode == 0, proc.stderr
        assert out.read_text() == (fixtures_dir / "golden_report.json").read_text()
        json.loads(out.read_text())  # well-formed

    def test_jobs_byte_identical(self, python_exe, cli_env, fixtures_dir, tmp_path):
        outputs = []
        for jobs in ("1", "3"):
            out = tmp_path / f"report{jobs}.csv"
            proc = run_cli(
                python_exe, cli_env, "evaluate",
                "--gt", str(fixtures_dir / "eval_gt.jsonl"),
                "--pred", str(fixtures_dir / "eval_pred.jsonl"),
                "--out", str(out), "--jobs", jobs,
            )
            assert proc.returncode == 0, proc.stderr
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_missing_scores_exit_2(self, python_exe, cli_env, fixtures_dir, tmp_path):
        proc = run_cli(
            python_exe, cli_env, "evaluate",
            "--gt", str(fixtures_dir / "eval_gt.jsonl"),
            "--pred", str(fixtures_dir / "eval_gt.jsonl"),  # gt has no scores
            "--out", str(tmp_path / "r.csv"),
        )
        assert proc.returncode == 2
        assert "score" in proc.stderr

    def test_missing_file_exit_2(self, python_exe, cli_env, tmp_path):
        proc = run_cli(
            python_exe, cli_env, "evaluate",
            "--gt", str(tmp_path / "nope.jsonl"),
            "--pred", str(tmp_path / "nope.jsonl"),
            "--out", str(tmp_path / "r.csv"),
        )
        assert proc.returncode == 2

    def test_bad_threshold_range_exit_2(self, python_exe, cli_env, fixtures_dir, tmp_path):
        proc = run_cli(
            python_exe, cli_env, "evaluate",
            "--gt", str(fixtures_dir / "eval_gt.jsonl"),
            "--pred", str(fixtures_dir / "eval_pred.jsonl"),
            "--out", str(tmp_path / "r.csv"),
            "--iou-thresholds", "0.9:0.5:0.05",
        )
        assert proc.returncode == 2

    def test_empty_gt_exit_2(self, python_exe, cli_env, fixtures_dir, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        proc = run_cli(
            python_exe, cli_env, "evaluate",
            "--gt", str(empty),
            "--pred", str(fixtures_dir / "eval_pred.jsonl"),
            "--out", str(tmp_path / "r.csv"),
        )
        assert proc.returncode == 2

    def test_custom_threshold_range_flag(self, python_exe, cli_env, fixtures_dir, tmp_path):
        out = tmp_path / "report.json"
        proc = run_cli(
            python_exe, cli_env, "evaluate",
            "--gt", str(fixtures_dir / "eval_gt.jsonl"),
            "--pred", str(fixtures_dir / "eval_pred.jsonl"),
            "--out", str(out), "--format", "json",
            "--iou-thresholds", "0.5:0.5:0.05",
        )
        assert proc.returncode == 0, proc.stderr
        overall = json.loads(out.read_text())["overall"]
        assert overall["ap"] == overall["ap50"]

    def test_unknown_category_exit_2(self, python_exe, cli_env, fixtures_dir, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(
            '{"document_id": "doc_alpha", "collection": "PIH", "split": "test", '
            '"height": 40, "width": 60, "regions": [{"category_abbrev": "ZZ", '
            '"points": [[0, 0], [5, 0], [5, 5]], "score": 0.5}]}\n'
        )
        proc = run_cli(
            python_exe, cli_env, "evaluate",
            "--gt", str(fixtures_dir / "eval_gt.jsonl"),
            "--pred", str(bad),
            "--out", str(tmp_path / "r.csv"),
        )
        assert proc.returncode == 2
        assert "ZZ" in proc.stderr


class TestGradcheckCommand:
    def test_passes_and_is_deterministic(self, python_exe, cli_env):
        first = run_cli(python_exe, cli_env, "gradcheck", "--seed", "7", "--instances", "3")
        second = run_cli(python_exe, cli_env, "gradcheck", "--seed", "7", "--instances", "3")
        assert first.returncode == 0, first.stderr
        assert "all suites passed" in first.stdout
        assert first.stdout == second.stdout

    def test_zero_tolerance_fails(self, python_exe, cli_env):
        proc = run_cli(
            python_exe, cli_env, "gradcheck", "--seed", "7", "--instances", "2", "--tol", "0",
        )
        assert proc.returncode != 0
        assert "FAIL" in proc.stdout


class TestStatsCommand:
    def test_fixture_counts(self, python_exe, cli_env, fixtures_dir):
        proc = run_cli(
            python_exe, cli_env, "stats", "--manifest", str(fixtures_dir / "stats_manifest.jsonl")
        )
        assert proc.returncode == 0, proc.stderr
        assert "Bhoomi,408,72,96,576" in proc.stdout
        assert "Total,824,193,258,1275" in proc.stdout
        assert "Combined,12994,1975,101,784,1375,354,161,2872,1179" in proc.stdout

    def test_empty_manifest_zero_tables(self, python_exe, cli_env, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        proc = run_cli(python_exe, cli_env, "stats", "--manifest", str(empty))
        assert proc.returncode == 0
        assert "Total,0,0,0,0" in proc.stdout

    def test_parse_error_exit_2(self, python_exe, cli_env, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        proc = run_cli(python_exe, cli_env, "stats", "--manifest", str(bad))
        assert proc.returncode == 2


class TestDefgridDemoCommand:
    def test_counts_for_size_14(self, python_exe, cli_env):
        proc = run_cli(python_exe, cli_env, "defgrid-demo", "--size", "14", "--seed", "0")
        assert proc.returncode == 0, proc.stderr
        assert "vertices 196" in proc.stdout
        assert "triangles 338" in proc.stdout

    def test_zero_weight_mode_undeformed(self, python_exe, cli_env):
        proc = run_cli(
            python_exe, cli_env, "defgrid-demo", "--size", "6", "--seed", "1", "--zero-weights",
        )
        assert proc.returncode == 0
        losses = next(l for l in proc.stdout.splitlines() if l.startswith("losses"))
        assert "area=0.0" in losses
        assert "direction=0.0" in losses

    def test_same_seed_identical_dump(self, python_exe, cli_env):
        a = run_cli(python_exe, cli_env, "defgrid-demo", "--size", "7", "--seed", "5")
        b = run_cli(python_exe, cli_env, "defgrid-demo", "--size", "7", "--seed", "5")
        assert a.stdout == b.stdout and a.returncode == 0

    def test_invalid_size_exit_2(self, python_exe, cli_env):
        proc = run_cli(python_exe, cli_env, "defgrid-demo", "--size", "1")
        assert proc.returncode == 2


class TestSamplePlanCommand:
    def test_all_frequent_unit_factors(self, python_exe, cli_env, fixtures_dir):
        proc = run_cli(
            python_exe, cli_env, "sample-plan",
            "--manifest", str(fixtures_dir / "stats_manifest.jsonl"),
            "--threshold", "0.001",
        )
        assert proc.returncode == 0, proc.stderr
        lines = proc.stdout.strip().splitlines()
        factors = [l for l in lines if "," in l and not l.startswith(("document_id", "#"))]
        assert len(factors) == 824
        assert all(l.endswith(",1.000000") for l in factors)
        assert "epoch_ceil=824" in lines[-1]

    def test_rare_categories_raise_factors(self, python_exe, cli_env, fixtures_dir):
        proc = run_cli(
            python_exe, cli_env, "sample-plan",
            "--manifest", str(fixtures_dir / "stats_manifest.jsonl"),
            "--threshold", "0.5",
        )
        assert proc.returncode == 0
        values = [
            float(l.split(",")[1])
            for l in proc.stdout.splitlines()
            if "," in l and not l.startswith(("document_id", "#"))
        ]
        assert max(values) > 1.0
        assert min(values) >= 1.0

    def test_zero_threshold_rejected(self, python_exe, cli_env, fixtures_dir):
        proc = run_cli(
            python_exe, cli_env, "sample-plan",
            "--manifest", str(fixtures_dir / "stats_manifest.jsonl"),
            "--threshold", "0",
        )
        assert proc.returncode == 2
