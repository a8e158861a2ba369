from __future__ import annotations

import shutil

import pytest
from click.testing import CliRunner

from conftest import CORPUS
from syclopt.cli import check_output, main, parse_check_file, run_check_file

GEMM_BINDS = []
for name in ("A", "B", "C"):
    GEMM_BINDS += ["--bind", f"{name}=" + ":".join(str((i * 7 + ord(name)) % 11 - 5) + ".5" for i in range(64))]
    GEMM_BINDS += ["--shape", f"{name}=8x8"]


def cli(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_opt_default_pipeline_on_gemm():
    res = cli("opt", CORPUS / "gemm.sir", "-p", "canonicalize,licm,detect-reduction,loop-internalize", "--verify-each")
    assert res.exit_code == 0, res.output
    assert res.output.count("mem.local_alloc") == 2
    assert "sycl.work_group_barrier" in res.output


def test_opt_output_is_stable(tmp_path):
    out1, out2 = tmp_path / "a.sir", tmp_path / "b.sir"
    for out in (out1, out2):
        assert cli("opt", CORPUS / "gemm.sir", "-p", "default", "-o", out).exit_code == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert cli("opt", out1).exit_code == 0


def test_unknown_pass_is_a_usage_error():
    res = cli("opt", CORPUS / "gemm.sir", "-p", "canonicalize,nosuchpass")
    assert res.exit_code == 2
    assert "nosuchpass" in res.output
    assert "func @gemm" not in res.output


def test_unknown_analysis_is_a_usage_error():
    res = cli("opt", CORPUS / "gemm.sir", "--print-analysis=nope")
    assert res.exit_code == 2


def test_parse_error_exits_with_diagnostic(tmp_path):
    bad = tmp_path / "bad.sir"
    bad.write_text("module { func @f( }")
    res = cli("opt", bad)
    assert res.exit_code == 1
    assert "error" in res.output


def test_reachdef_printout_on_reaching_defs():
    res = cli("opt", CORPUS / "reaching_defs.sir", "--print-analysis=reachdef")
    assert res.exit_code == 0
    line = next(l for l in res.output.splitlines() if "%ptr1" in l and "MODS" in l)
    assert "PMODS" in line


def test_run_vector_add():
    res = cli(
        "run", CORPUS / "vector_add.sir", "--kernel", "vadd", "--range", "4",
        "--bind", "a=1:2:3:4", "--bind", "b=10:20:30:40", "--bind", "c=0:0:0:0", "--stats",
    )
    assert res.exit_code == 0, res.output
    assert "c = [11.0, 22.0, 33.0, 44.0]" in res.output
    assert "// stat: global_loads = 8" in res.output


def test_run_divergent_barrier_fails():
    res = cli(
        "run", CORPUS / "barrier_divergent.sir", "--kernel", "halves", "--range", "4", "--wg", "4",
        "--bind", "out=0:0:0:0",
    )
    assert res.exit_code == 1
    assert "barrier divergence" in res.output


def test_run_requires_exactly_one_target():
    assert cli("run", CORPUS / "vector_add.sir").exit_code == 2


def test_baseline_and_optimized_gemm_print_the_same_buffers():
    common = ["run", CORPUS / "gemm.sir", "--kernel", "gemm", "--range", "8,8", "--wg", "2,2", *GEMM_BINDS]
    base = cli(*common)
    opt = cli(*common, "-p", "default")
    assert base.exit_code == opt.exit_code == 0, base.output + opt.output
    assert base.output == opt.output
    assert base.output.startswith("A = [")


def test_run_aliasing_binding():
    res = cli(
        "run", CORPUS / "licm_mayalias.sir", "--kernel", "licm_may_alias",
        "--bind", "p=" + ":".join(["1.5"] * 16), "--bind", "q=@p+3", "--bind", "n=4", "-p", "licm",
    )
    assert res.exit_code == 0, res.output
    assert res.output.splitlines() == ["p = [" + ", ".join(["1.5"] * 3 + ["3.0"] * 4 + ["1.5"] * 9) + "]"]


def test_run_host_entry():
    res = cli("run", CORPUS / "range_branch.sir", "--entry", "host", "-p", "raise-host,sycl-constprop,canonicalize")
    assert res.exit_code == 0
    assert "buf = [1, 1, 1, 1, 1, 1, 1, 1]" in res.output


# -- golden harness ------------------------------------------------------------------


def test_single_passing_file(tmp_path):
    shutil.copy(CORPUS / "canonicalize.sir", tmp_path)
    res = cli("test", tmp_path)
    assert res.exit_code == 0
    assert res.output.strip().endswith("1 passed, 0 failed")


def test_whole_corpus_passes():
    res = cli("test", CORPUS)
    assert res.exit_code == 0, res.output
    n = len(list(CORPUS.glob("*.sir")))
    assert f"{n} passed, 0 failed" in res.output


def test_failure_names_file_directive_and_line(tmp_path):
    text = (CORPUS / "canonicalize.sir").read_text().replace("// CHECK-NOT: arith.subi", "// CHECK: arith.subi")
    f = tmp_path / "broken.sir"
    f.write_text(text)
    res = cli("test", tmp_path)
    assert res.exit_code == 1
    fail = next(l for l in res.output.splitlines() if l.startswith("FAIL"))
    assert "broken.sir" in fail
    assert "CHECK: 'arith.subi'" in fail
    assert "first unmatched line" in fail
    assert res.output.strip().endswith("0 passed, 1 failed")


def test_check_not_between_anchors():
    directives = [(1, "CHECK", "a"), (2, "CHECK-NOT", "x"), (3, "CHECK", "b")]
    assert check_output("a\nb\nx\n", directives) is None
    err = check_output("a\nx\nb\n", directives)
    assert err is not None and "CHECK-NOT" in err


def test_checks_are_ordered_and_case_sensitive():
    assert check_output("one two", [(1, "CHECK", "two"), (2, "CHECK", "one")]) is not None
    assert check_output("One", [(1, "CHECK", "one")]) is not None


def test_parse_check_file():
    runs, directives = parse_check_file((CORPUS / "licm_pure.sir").read_text())
    assert runs == ["opt %s -p licm --remarks"]
    assert directives[0][1:] == ("CHECK", "arith.muli")
    assert ("CHECK-NOT", "loop.if") in [d[1:] for d in directives]


def test_expected_failure_that_succeeds_is_reported(tmp_path):
    f = tmp_path / "x.sir"
    f.write_text("// RUN: not opt %s\nmodule { }\n")
    assert "expected to fail" in run_check_file(f)


def test_missing_run_line(tmp_path):
    f = tmp_path / "x.sir"
    f.write_text("module { }\n")
    assert run_check_file(f) == "no RUN line"
