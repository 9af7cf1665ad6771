import argparse
import cli
import json
import os
import pytest
from config import EXIT_IO_ERROR, EXIT_OK, EXIT_VALIDATION_FAILED, get_root_path
from packing_io import iter_progress_csv

SAMPLE = get_root_path("data/thpack/sample.txt")


def report(instance: str, vu: float, left: int, m3: float) -> cli.RunReport:
    return cli.RunReport(
        instance=instance,
        volume_utilization_pct=vu,
        left_boxes=left,
        leftover_cm3=int(m3 * 1_000_000),
        leftover_m3=m3,
        proved_optimal=False,
        wall_time_s=1.0,
        incumbents=1,
    )


@pytest.fixture(name="solved")
def fixture_solved(tmp_path, capsys):
    """Solves the second sample case and returns its output directory."""
    code = cli.cmd_run(
        SAMPLE,
        2,
        time_limit_ms=30_000,
        progress=str(tmp_path / "run.csv"),
        out=str(tmp_path / "run.json"),
        report=str(tmp_path / "run.report.json"),
    )
    assert code == EXIT_OK
    capsys.readouterr()
    return tmp_path


class TestParseTimeLimit:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("1500", 1500),
            ("1500ms", 1500),
            ("30s", 30_000),
            ("0.5s", 500),
            ("2m", 120_000),
            ("30m", 1_800_000),
        ],
    )
    def test_units(self, text: str, expected: int) -> None:
        assert cli.parse_time_limit(text) == expected

    @pytest.mark.parametrize("text", ["", "abc", "0", "-1s", "5h"])
    def test_rejects(self, text: str) -> None:
        with pytest.raises(argparse.ArgumentTypeError):
            cli.parse_time_limit(text)


class TestRun:
    def test_report_line(self, capsys) -> None:
        assert cli.cmd_run(SAMPLE, 2, time_limit_ms=30_000) == EXIT_OK

        out = capsys.readouterr().out
        assert "sample_002: VU=100.00% LB=1" in out
        assert "optimal=yes" in out

    def test_artifacts(self, solved) -> None:
        with open(solved / "run.csv", "r", encoding="utf-8") as f:
            records = list(iter_progress_csv(f.read()))
        assert [r.objective for r in records][-1] == 24
        assert all(
            a.objective > b.objective for a, b in zip(records, records[1:])
        )

        with open(solved / "run.report.json", "r", encoding="utf-8") as f:
            stored = cli.RunReport.from_json(f.read())
        assert stored.left_boxes == 1
        assert stored.proved_optimal

    def test_emit_all_prints_incumbents(self, capsys) -> None:
        assert cli.cmd_run(SAMPLE, 1, time_limit_ms=30_000, emit_all=True) == EXIT_OK

        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("[sample_001]: incumbent")
        assert "LB=7" in lines[0]
        assert lines[-1].startswith("sample_001: VU=61.25% LB=0")

    def test_stats(self, capsys) -> None:
        cli.cmd_run(SAMPLE, 2, time_limit_ms=30_000, show_stats=True)
        assert "nodes=" in capsys.readouterr().out

    def test_index_out_of_range(self, capsys) -> None:
        assert cli.cmd_run(SAMPLE, 3) == EXIT_IO_ERROR
        assert "out of range 1..2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path) -> None:
        assert cli.cmd_run(str(tmp_path / "absent.txt"), 1) == EXIT_IO_ERROR

    def test_malformed_suite(self, tmp_path, capsys) -> None:
        path = tmp_path / "bad.txt"
        path.write_text("1\n1\n10 10\n")

        assert cli.cmd_run(str(path), 1) == EXIT_IO_ERROR
        assert "line" in capsys.readouterr().err


class TestCheck:
    def test_accepts_solver_output(self, solved, capsys) -> None:
        assert cli.cmd_check(SAMPLE, 2, str(solved / "run.json")) == EXIT_OK
        assert "sample_002: OK objective=24" in capsys.readouterr().out

    def test_wrong_instance(self, solved) -> None:
        code = cli.cmd_check(SAMPLE, 1, str(solved / "run.json"))
        assert code == EXIT_VALIDATION_FAILED

    @pytest.mark.parametrize("corruption", ["overlap", "containment", "objective"])
    def test_rejects_corruption(self, solved, capsys, corruption: str) -> None:
        path = solved / "run.json"
        document = json.loads(path.read_text())
        placements = document["placements"]
        if corruption == "overlap":
            placements[1]["pos"] = placements[0]["pos"]
        elif corruption == "containment":
            placements[0]["pos"] = [100, 0, 0]
        else:
            document["objective"] += 1
        path.write_text(json.dumps(document))

        assert cli.cmd_check(SAMPLE, 2, str(path)) == EXIT_VALIDATION_FAILED
        assert f"violation: {corruption}" in capsys.readouterr().out

    def test_not_a_document(self, tmp_path) -> None:
        path = tmp_path / "garbage.json"
        path.write_text("[1, 2")
        assert cli.cmd_check(SAMPLE, 1, str(path)) == EXIT_IO_ERROR


class TestSummarize:
    def test_single_report(self) -> None:
        rows = cli.summarize([report("thpack1_001", 81.5, 3, 1.25)])

        assert [r.suite for r in rows] == ["thpack1", "TOTAL"]
        assert rows[0].vu_min == rows[0].vu_avg == rows[0].vu_max == 81.5

    def test_average(self) -> None:
        rows = cli.summarize(
            [report("thpack2_001", 60.0, 4, 2.0), report("thpack2_002", 80.0, 0, 0.0)]
        )

        assert rows[0].vu_avg == 70.0
        assert rows[0].lb_total == 4
        assert rows[0].m3_max == 2.0

    def test_suites_sorted_by_name(self) -> None:
        rows = cli.summarize(
            [
                report("thpack8_001", 62.5, 0, 0.0),
                report("thpack1_001", 80.0, 2, 1.0),
                report("thpack8_002", 70.0, 1, 0.5),
            ]
        )

        assert [(r.suite, r.runs) for r in rows] == [
            ("thpack1", 1),
            ("thpack8", 2),
            ("TOTAL", 3),
        ]

    def test_table(self) -> None:
        table = cli.format_summary(cli.summarize([report("thpack1_001", 60, 4, 2)]))

        header, row, total = table.splitlines()
        assert header.split()[:3] == ["suite", "runs", "VU"]
        assert row.split()[:3] == ["thpack1", "1", "60.00"]
        assert total.startswith("TOTAL")

    def test_from_files(self, tmp_path, capsys) -> None:
        paths = []
        for n, vu in enumerate([60.0, 80.0]):
            path = tmp_path / f"r{n}.json"
            path.write_text(report(f"thpack3_00{n + 1}", vu, 0, 0.0).to_json())
            paths.append(str(path))

        assert cli.cmd_summarize(paths) == EXIT_OK
        assert "70.00" in capsys.readouterr().out

    def test_unreadable_report(self, tmp_path) -> None:
        path = tmp_path / "r.json"
        path.write_text("{not json")
        assert cli.cmd_summarize([str(path)]) == EXIT_IO_ERROR


class TestBench:
    def write_manifest(self, tmp_path, body: str) -> str:
        path = tmp_path / "bench.yml"
        path.write_text(body)
        return str(path)

    def test_runs_and_resumes(self, tmp_path, capsys) -> None:
        manifest = self.write_manifest(
            tmp_path,
            f"time_limit: 30s\noutput_dir: out\nsuites:\n"
            f"  - path: {SAMPLE}\n    first: 1\n",
        )

        assert cli.cmd_bench(manifest) == EXIT_OK
        out = capsys.readouterr().out
        assert "|RUN| sample_001" in out
        assert "sample_002" not in out
        for suffix in ["report.json", "progress.csv", "solution.json"]:
            assert os.path.exists(tmp_path / "out" / f"sample_001.{suffix}")

        assert cli.cmd_bench(manifest) == EXIT_OK
        assert "|SKIP| sample_001" in capsys.readouterr().out

    @pytest.mark.parametrize("content", ["", '{"instance": "sample_001", "vu'])
    def test_reruns_truncated_report(self, tmp_path, capsys, content: str) -> None:
        manifest = self.write_manifest(
            tmp_path,
            f"time_limit: 30s\noutput_dir: out\nsuites:\n"
            f"  - path: {SAMPLE}\n    first: 1\n",
        )
        report_path = tmp_path / "out" / "sample_001.report.json"
        report_path.parent.mkdir()
        report_path.write_text(content)

        assert cli.cmd_bench(manifest) == EXIT_OK
        out = capsys.readouterr().out
        assert "|RERUN| sample_001" in out
        assert "|RUN| sample_001" in out
        assert json.loads(report_path.read_text())["instance"] == "sample_001"

        assert cli.cmd_bench(manifest) == EXIT_OK
        assert "|SKIP| sample_001" in capsys.readouterr().out

    def test_report_written_atomically(self, tmp_path) -> None:
        path = tmp_path / "nested" / "a.report.json"
        cli._write_text(str(path), "{}")
        cli._write_text(str(path), '{"instance": "b"}')

        assert json.loads(path.read_text()) == {"instance": "b"}
        assert os.listdir(tmp_path / "nested") == ["a.report.json"]

    def test_manifest_paths_relative_to_file(self, tmp_path) -> None:
        manifest = cli.load_manifest(
            self.write_manifest(tmp_path, "suites:\n  - suites/a.txt\n")
        )

        assert manifest.suites[0].path == str(tmp_path / "suites" / "a.txt")
        assert manifest.suites[0].first is None
        assert manifest.output_dir == str(tmp_path / "results")

    def test_shipped_manifest(self) -> None:
        manifest = cli.load_manifest(get_root_path("data/bench.yml"))

        assert manifest.time_limit_ms == 1_800_000
        assert len(manifest.suites) == 8
        assert [s.first for s in manifest.suites[:7]] == [10] * 7

    @pytest.mark.parametrize(
        "body", ["suites: thpack1.txt\n", "- a\n", "suites: [{first: 3}]\n"]
    )
    def test_rejects_malformed(self, tmp_path, body: str) -> None:
        with pytest.raises(cli.ManifestError):
            cli.load_manifest(self.write_manifest(tmp_path, body))

    def test_bad_manifest_exit_code(self, tmp_path) -> None:
        manifest = self.write_manifest(tmp_path, "time_limit: soon\nsuites: []\n")
        assert cli.cmd_bench(manifest) == EXIT_IO_ERROR


class TestMain:
    def test_run_and_check(self, tmp_path, capsys) -> None:
        out = str(tmp_path / "s.json")
        args = ["--suite", SAMPLE, "--index", "2"]

        assert cli.main(["run", *args, "-t", "30s", "--out", out]) == EXIT_OK
        assert cli.main(["check", *args, out]) == EXIT_OK
        assert "OK" in capsys.readouterr().out

    def test_bench_requires_manifest(self) -> None:
        with pytest.raises(SystemExit):
            cli.main(["bench"])
