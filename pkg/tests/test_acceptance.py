"""Acceptance gate: one test per release criterion, each printing a verdict.

Every test prints a single [PASS]/[FAIL] line on the terminal even under
pytest's capture, so a plain `pytest tests/test_acceptance.py` doubles as
the release checklist.
"""

from contextlib import contextmanager

import pytest

from conftest import FIXTURES, fixture_path, fixture_text, parse_fixture
from fuel import checker, cli, harness, interp, ir, parser, printer
from fuel.service import handlers, models


@contextmanager
def report(capsys, label):
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"[FAIL] {label}")
        raise
    else:
        with capsys.disabled():
            print(f"[PASS] {label}")


def check_exit(path: str) -> int:
    try:
        return cli.main(["check", path])
    except SystemExit as exc:
        return exc.code


def run_unchecked(module: ir.Module) -> tuple:
    it = interp.Interpreter(module, interp.RunOptions(max_call_depth=256))
    return it, it.run("main")


def test_criterion_1_fixture_acceptance(capsys):
    with report(capsys, "criterion 1: shipped example programs check clean"):
        for name in ("fig1b", "fig2b", "fig4", "fig5"):
            assert check_exit(fixture_path(name)) == 0, name


def test_criterion_2_counterfactual_rejection(capsys):
    label = "criterion 2: counterfactual mutants rejected at the exact site"
    with report(capsys, label):
        # (a) missing store: the load reads junk
        (diag,) = checker.check_module(parse_fixture("fig1b_no_store"))
        assert diag.code is checker.ErrorCode.USE_OF_JUNK
        assert diag.span.start_line == 5
        assert check_exit(fixture_path("fig1b_no_store")) == 1

        # (b) missing float store: flagged at the second load, not at the
        # store that takes the address and not at the first load
        (diag,) = checker.check_module(parse_fixture("fig2b_no_store_foo"))
        assert diag.code is checker.ErrorCode.USE_OF_JUNK
        second_load_line = 1 + next(
            i for i, text in enumerate(
                fixture_text("fig2b_no_store_foo").splitlines()
            )
            if text.strip() == "t1 = load t0"
        )
        assert diag.span.start_line == second_load_line == 8

        # (c) unguarded free of a dynamic capability
        (diag,) = checker.check_module(parse_fixture("fig5_unguarded_free"))
        assert diag.code is checker.ErrorCode.UNGUARDED_DYNAMIC_USE
        assert diag.span.start_line == 15


def test_criterion_3_fig5_runtime(capsys):
    label = "criterion 3: fig5 frees every heap cell exactly once, both variants"
    with report(capsys, label):
        for name in ("fig5", "fig5_free_second"):
            it = interp.Interpreter(parse_fixture(name))
            rep = it.run("main")
            assert rep.status is interp.RunStatus.COMPLETED, name
            assert rep.leaked == (), name
            heap = [
                c for c in it.cells.values() if c.region is ir.Region.HEAP
            ]
            assert len(heap) == 2, name
            # FREED state on a completed run means freed exactly once: a
            # second free would have faulted DoubleFree.
            assert all(c.state is interp.CellState.FREED for c in heap), name
            try:
                code = cli.main(["run", fixture_path(name)])
            except SystemExit as exc:
                code = exc.code
            assert code == 0, name


def test_criterion_4_strong_update_observability(capsys):
    with report(capsys, "criterion 4: final cell contents are exact"):
        it = interp.Interpreter(parse_fixture("fig1b"))
        assert it.run("main").status is interp.RunStatus.COMPLETED
        assert it.find_cell("m1").value == interp.Value(interp.ValueTag.I32, 2)

        it = interp.Interpreter(parse_fixture("fig2b"))
        assert it.run("main").status is interp.RunStatus.COMPLETED
        cell = it.find_cell("m0")
        assert cell.value.tag is interp.ValueTag.F32
        assert abs(cell.value.payload - 14.37) < 1e-6


def test_criterion_5_soundness_fuzz(capsys):
    label = "criterion 5: 10,000 fuzzed well-typed programs, zero faults"
    with report(capsys, label):
        resp = handlers.run_fuzz(
            models.FuzzRequest(
                count=10_000, seed=0, features=sorted(harness.FEATURES)
            )
        )
        assert resp.programs == 10_000
        assert resp.static_rejections == 0, resp.failures
        assert resp.faults == 0, resp.failures
        assert resp.roundtrip_failures == 0, resp.failures
        assert resp.ok


def test_criterion_6_oracle_equivalence(capsys):
    label = "criterion 6: exhaustive oracle sweep, zero disagreements"
    with report(capsys, label):
        resp = handlers.run_oracle(models.OracleRequest())
        assert resp.programs == 16_423
        assert resp.disagreements == []
        assert resp.ok


def test_criterion_7_mutation_kill(capsys):
    label = (
        "criterion 7: mutation catalog 12/12 killed statically, "
        "9/9 designated runtime outcomes"
    )
    with report(capsys, label):
        static = runtime = 0
        for entry in harness.CATALOG:
            base = parse_fixture(entry.base)
            mutant = harness.mutate(base, harness.mutation_for(entry, base))

            codes = {d.code.value for d in checker.check_module(mutant)}
            assert set(entry.static_codes) <= codes, (entry.name, codes)
            static += 1

            it, rep = run_unchecked(mutant)
            if entry.runtime == "leak":
                assert rep.status is interp.RunStatus.COMPLETED, entry.name
                assert rep.fault is None and len(rep.leaked) >= 1, entry.name
                runtime += 1
            elif entry.runtime is not None:
                assert rep.status is interp.RunStatus.FAULTED, entry.name
                assert rep.fault.kind.value == entry.runtime, entry.name
                runtime += 1
            # The three catalog entries whose rejection is purely static
            # (conservative) have no designated runtime misbehaviour; their
            # concrete behaviour is still pinned so a regression shows up.
            elif entry.name == "fig5-unguarded-second":
                # the unguarded free happens to target the still-live cell
                assert rep.status is interp.RunStatus.COMPLETED
                assert rep.leaked == ()
                heap = [c for c in it.cells.values()
                        if c.region is ir.Region.HEAP]
                assert all(c.state is interp.CellState.FREED for c in heap)
            elif entry.name == "fig4-extern-no-restore":
                # externs have no body to run, mutated or not
                assert rep.status is interp.RunStatus.FAULTED
                assert rep.fault.kind is interp.FaultKind.MISSING_BODY
            elif entry.name == "fig4-body-no-restore":
                # signature-only edit: the body still behaves
                assert rep.status is interp.RunStatus.COMPLETED
                assert rep.leaked == ()
            else:
                pytest.fail(f"catalog entry {entry.name} has no expectation")
        assert static == 12
        assert runtime == 9


def test_criterion_8_roundtrip(capsys):
    label = "criterion 8: parse/print identity on fixtures + 1,000 generated"
    with report(capsys, label):
        fixtures = sorted(FIXTURES.glob("*.fuel"))
        assert len(fixtures) == 20
        for path in fixtures:
            module = parser.parse_module(path.read_text(), path.name)
            reparsed = parser.parse_module(
                printer.print_module(module), path.name
            )
            assert reparsed == module, path.name
        for seed in range(1_000):
            module = harness.generate_program(
                harness.GenConfig(seed=seed, features=harness.FEATURES)
            )
            assert parser.parse_module(printer.print_module(module)) == module
