import json
import sys

import pytest

from conftest import fixture_path, fixture_text
from fuel import cli
from fuel.service import handlers, models


def json_lines(out: str) -> list[dict]:
    return [json.loads(line) for line in out.splitlines()]


class TestExitCodes:
    def test_check_ok(self, run_cli):
        code, out, err = run_cli("check", fixture_path("fig1b"))
        assert (code, out, err) == (0, "", "")

    def test_check_type_error(self, run_cli):
        code, out, err = run_cli("check", fixture_path("fig1b_no_store"))
        assert code == 1
        assert "UseOfJunk" in err
        assert out == ""

    def test_check_parse_error(self, run_cli, tmp_path):
        bad = tmp_path / "bad.fuel"
        bad.write_text("func main( {\n")
        code, _, err = run_cli("check", str(bad))
        assert code == 2
        assert "error" in err

    def test_run_fault(self, run_cli):
        code, _, err = run_cli(
            "run", fixture_path("fig1b_no_store"), "--unchecked"
        )
        assert code == 3
        assert "fault[JunkRead]" in err
        assert ":5:" in err

    def test_run_leaks(self, run_cli):
        code, _, err = run_cli(
            "run", fixture_path("fig5_no_assuming"), "--unchecked"
        )
        assert code == 4
        assert err.count("leak:") == 2

    def test_checked_run_refuses_ill_typed(self, run_cli):
        code, _, err = run_cli("run", fixture_path("fig5_unguarded_free"))
        assert code == 1
        assert "UnguardedDynamicUse" in err

    def test_empty_file_checks_clean(self, run_cli, tmp_path):
        empty = tmp_path / "empty.fuel"
        empty.write_text("")
        assert run_cli("check", str(empty))[0] == 0

    def test_missing_file(self, run_cli, tmp_path):
        code, _, err = run_cli("check", str(tmp_path / "absent.fuel"))
        assert code == 66
        assert "cannot read" in err

    def test_directory_input(self, run_cli, tmp_path):
        assert run_cli("check", str(tmp_path))[0] == 66

    def test_undecodable_file(self, run_cli, tmp_path):
        garbled = tmp_path / "garbled.fuel"
        garbled.write_bytes(b"\xff\xfe func")
        assert run_cli("check", str(garbled))[0] == 66


class TestUsageErrors:
    def test_no_subcommand(self, run_cli):
        code, _, err = run_cli()
        assert code == 64
        assert "usage" in err

    def test_missing_file_argument(self, run_cli):
        assert run_cli("check")[0] == 64

    def test_unknown_flag(self, run_cli):
        assert run_cli("run", fixture_path("fig1b"), "--bogus")[0] == 64

    def test_unknown_subcommand(self, run_cli):
        assert run_cli("lint", "x.fuel")[0] == 64

    def test_bad_features(self, run_cli):
        code, _, err = run_cli("fuzz", "--seeds", "1", "--features", "heap,warp")
        assert code == 64
        assert "warp" in err

    def test_negative_seeds(self, run_cli):
        assert run_cli("fuzz", "--seeds", "-2")[0] == 64

    def test_help_exits_zero(self, run_cli):
        code, out, _ = run_cli("--help")
        assert code == 0
        assert "check" in out and "oracle" in out

    def test_version(self, run_cli):
        code, out, _ = run_cli("--version")
        assert code == 0
        assert out.startswith("fuel ")


class TestRunOutput:
    def test_result_line(self, run_cli, tmp_path):
        prog = tmp_path / "five.fuel"
        prog.write_text(
            "func main(): () -> I32 {\n  x = call add, 2, 3\n  return x\n}\n"
        )
        code, out, err = run_cli("run", str(prog))
        assert code == 0
        assert out == "result = 5\n"
        assert err == ""

    def test_void_run_prints_nothing(self, run_cli):
        code, out, err = run_cli("run", fixture_path("fig1b"))
        assert (code, out, err) == (0, "", "")

    def test_entry_flag(self, run_cli):
        code, _, err = run_cli("run", fixture_path("fig1b"), "--entry", "nope")
        assert code == 3
        assert "fault[MissingBody]" in err

    def test_trace(self, run_cli):
        code, out, err = run_cli("run", fixture_path("heap_roundtrip"), "--trace")
        assert code == 0
        assert err.splitlines()[0].startswith("step 1:")

    def test_step_limit(self, run_cli, tmp_path):
        prog = tmp_path / "loop.fuel"
        prog.write_text(
            "func loop(): () -> () {\n  _ = call loop\n}\n\n"
            "func main(): () -> () {\n  _ = call loop\n}\n"
        )
        code, _, err = run_cli("run", str(prog), "--unchecked", "--max-steps", "10")
        assert code == 3
        assert "step limit exceeded after 10 steps" in err


class TestJson:
    def test_check_diagnostic_record(self, run_cli):
        code, out, err = run_cli("check", fixture_path("fig1b_no_store"), "--json")
        assert code == 1
        assert err == ""
        (record,) = json_lines(out)
        assert set(record) == {"severity", "code", "file", "line", "col", "message"}
        assert record["severity"] == "error"
        assert record["code"] == "UseOfJunk"
        assert record["file"].endswith("fig1b_no_store.fuel")
        assert record["line"] == 5

    def test_run_completed_summary(self, run_cli):
        code, out, _ = run_cli("run", fixture_path("fig5"), "--json")
        assert code == 0
        (summary,) = json_lines(out)
        assert summary["severity"] == "summary"
        assert summary["status"] == "completed"
        assert summary["leaks"] == 0
        assert summary["steps"] > 0

    def test_run_fault_record(self, run_cli):
        code, out, _ = run_cli(
            "run", fixture_path("fig1b_no_store"), "--unchecked", "--json"
        )
        assert code == 3
        (record,) = json_lines(out)
        assert record["severity"] == "fault"
        assert record["kind"] == "JunkRead"
        assert record["line"] == 5

    def test_run_leak_records(self, run_cli):
        code, out, _ = run_cli(
            "run", fixture_path("fig5_no_assuming"), "--unchecked", "--json"
        )
        assert code == 4
        records = json_lines(out)
        assert [r["severity"] for r in records] == ["leak", "leak", "summary"]
        assert records[-1]["leaks"] == 2

    def test_fuzz_summary(self, run_cli):
        code, out, _ = run_cli("fuzz", "--seeds", "3", "--json")
        assert code == 0
        (summary,) = json_lines(out)
        assert summary == {
            "severity": "summary",
            "programs": 3,
            "static_rejections": 0,
            "faults": 0,
            "roundtrip_failures": 0,
        }

    def test_oracle_summary(self, run_cli):
        code, out, _ = run_cli(
            "oracle", "--max-instrs", "2", "--max-cells", "1", "--json"
        )
        assert code == 0
        (summary,) = json_lines(out)
        assert summary["disagreements"] == 0
        assert summary["programs"] == summary["accepted"] + summary["rejected"]


class TestHarnessCommands:
    def test_fuzz_human_summary(self, run_cli):
        code, out, err = run_cli("fuzz", "--seeds", "5")
        assert code == 0
        assert out == (
            "programs=5 static_rejections=0 faults=0 roundtrip_failures=0\n"
        )
        assert err == ""

    def test_fuzz_zero_seeds(self, run_cli):
        code, out, _ = run_cli("fuzz", "--seeds", "0")
        assert code == 0
        assert out.startswith("programs=0 ")

    def test_fuzz_feature_subset(self, run_cli):
        assert run_cli("fuzz", "--seeds", "5", "--features", "heap")[0] == 0

    def test_fuzz_violation_exits_5(self, run_cli, monkeypatch):
        def fake(req):
            return models.FuzzResponse(
                ok=False, programs=1, static_rejections=1, faults=0,
                roundtrip_failures=0,
                failures=[models.FuzzFailure(seed=9, kind="static", detail="boom")],
            )

        monkeypatch.setattr(handlers, "run_fuzz", fake)
        code, out, err = run_cli("fuzz", "--seeds", "1")
        assert code == 5
        assert "seed 9: static: boom" in err
        assert "static_rejections=1" in out

    def test_oracle_violation_exits_5(self, run_cli, monkeypatch):
        def fake(req):
            return models.OracleResponse(
                ok=False, programs=2, accepted=1, rejected=1,
                disagreements=["checker=accept oracle=reject"],
            )

        monkeypatch.setattr(handlers, "run_oracle", fake)
        code, _, err = run_cli("oracle")
        assert code == 5
        assert "disagreement:" in err

    def test_oracle_human_summary(self, run_cli):
        code, out, _ = run_cli("oracle", "--max-instrs", "2", "--max-cells", "1")
        assert code == 0
        assert out.startswith("programs=")
        assert "disagreements=0" in out


class TestColor:
    def test_color_forced(self, run_cli, monkeypatch):
        monkeypatch.setenv("FUEL_COLOR", "always")
        _, _, err = run_cli("check", fixture_path("fig1b_no_store"))
        assert "\x1b[" in err

    def test_color_suppressed(self, run_cli, monkeypatch):
        monkeypatch.setenv("FUEL_COLOR", "never")
        _, _, err = run_cli("check", fixture_path("fig1b_no_store"))
        assert "\x1b[" not in err
        assert "UseOfJunk" in err


class TestEntrypoint:
    def test_entrypoint_raises_systemexit(self, capsys, monkeypatch):
        monkeypatch.setattr(
            sys, "argv", ["fuel", "check", fixture_path("fig1b")]
        )
        with pytest.raises(SystemExit) as exc:
            cli.entrypoint()
        assert exc.value.code == 0
        capsys.readouterr()
