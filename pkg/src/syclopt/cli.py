"""``syclopt`` command line: ``opt`` pipeline driver, ``run`` interpreter front
end and ``test`` golden-file harness.

Exit codes: 0 success, 1 diagnostics or interpreter error, 2 usage error.
"""

from __future__ import annotations

import shlex
import sys
from pathlib import Path

import click

from .analyses.render import RENDERERS
from .host import render_launch
from .interp import (
    AccessorBinding,
    InterpError,
    MemoryImage,
    NDRangeSpec,
    RefBinding,
    format_buffers,
    run_host_program,
    run_kernel,
)
from .ir import ParseError, parse_module, print_module, verify_module
from .ir.types import RefType, sycl_elem
from .dialects import explicit_kernel_params
from .pipeline import PASSES

ANALYSES = dict(RENDERERS, launch=render_launch)
DEFAULT_PIPELINE = "canonicalize,licm,detect-reduction,loop-internalize,canonicalize"


class DiagnosticError(click.ClickException):
    exit_code = 1

    def show(self, file=None) -> None:
        located = ": error: " in self.message.split("\n", 1)[0]
        click.echo(self.message if located else f"error: {self.message}", err=True)


def parse_pipeline(text: str | None) -> list[str]:
    if not text:
        return []
    if text == "default":
        text = DEFAULT_PIPELINE
    names = [p.strip() for p in text.split(",") if p.strip()]
    unknown = [n for n in names if n not in PASSES]
    if unknown:
        raise click.UsageError(f"unknown pass '{unknown[0]}' (known: {', '.join(sorted(PASSES))})")
    return names


def _split_list(values) -> list[str]:
    out = []
    for v in values:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return out


def load_module(path: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise DiagnosticError(f"cannot read {path}: {e.strerror}") from None
    try:
        m = parse_module(text, filename=path)
    except ParseError as e:
        raise DiagnosticError(str(e.diagnostic)) from None
    errs = verify_module(m)
    if errs:
        raise DiagnosticError("\n".join(str(d) for d in errs))
    return m


def run_pipeline(m, names: list[str], verify_each: bool = False) -> list:
    reports = []
    for name in names:
        reports.append(PASSES[name](m))
        if verify_each:
            errs = verify_module(m)
            if errs:
                raise DiagnosticError(f"verification failed after {name}:\n" + "\n".join(str(d) for d in errs))
    return reports


@click.group()
@click.version_option(package_name="artifact")
def main() -> None:
    """Multi-level IR optimizer and interpreter for SYCL-style programs."""


@main.command("opt")
@click.argument("input", type=click.Path(dir_okay=False))
@click.option("-p", "--pipeline", default="", help="Comma-separated passes, or 'default'.")
@click.option("--print-analysis", "analyses", multiple=True, help=f"One of: {', '.join(sorted(ANALYSES))}.")
@click.option("--remarks", is_flag=True, help="Print pass remarks.")
@click.option("--stats", is_flag=True, help="Print per-pass change counters.")
@click.option("--verify-each", is_flag=True, help="Verify the module after every pass.")
@click.option("--locations", is_flag=True, help="Annotate ops with source locations.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def cmd_opt(input, pipeline, analyses, remarks, stats, verify_each, locations, output) -> None:
    """Run a pass pipeline and print the resulting module."""
    names = parse_pipeline(pipeline)
    wanted = _split_list(analyses)
    for a in wanted:
        if a not in ANALYSES:
            raise click.UsageError(f"unknown analysis '{a}' (known: {', '.join(sorted(ANALYSES))})")
    m = load_module(input)
    reports = run_pipeline(m, names, verify_each)
    lines = [print_module(m, locations=locations).rstrip("\n")]
    for a in wanted:
        lines.extend(ANALYSES[a](m))
    if remarks:
        for r in reports:
            lines.extend(r.render_remarks())
    if stats:
        for r in reports:
            keys = sorted({k for c in r.counts.values() for k in c})
            lines.extend(f"// stat: {r.pass_name}.{k} = {r.total(k)}" for k in keys)
    text = "\n".join(lines) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


def _ints(text: str | None) -> tuple | None:
    if not text:
        return None
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got '{text}'") from None


def _parse_values(text: str) -> list:
    vals = []
    for tok in text.split(":"):
        tok = tok.strip()
        try:
            vals.append(float(tok) if any(c in tok for c in ".eEn") else int(tok))
        except ValueError:
            raise click.BadParameter(f"bad binding value '{tok}'") from None
    return vals


def build_image(kernel, binds: list[str], shapes: list[str]) -> MemoryImage:
    """Bind ``name=v0:v1:...`` values (or ``name=@other`` aliases) to kernel parameters."""
    shape_of = {}
    for s in shapes:
        name, _, dims = s.partition("=")
        try:
            shape_of[name] = tuple(int(x) for x in dims.split("x"))
        except ValueError:
            raise click.BadParameter(f"bad shape '{s}', expected name=NxM") from None
    params = {p.name_hint: p for p in explicit_kernel_params(kernel)}
    im = MemoryImage()
    aliases = []
    for b in binds:
        name, eq, text = b.partition("=")
        if not eq:
            raise click.BadParameter(f"bad binding '{b}', expected name=v0:v1:...")
        p = params.get(name)
        if p is None:
            raise click.BadParameter(f"@{kernel.sym_name} has no parameter %{name}")
        if text.startswith("@"):
            aliases.append((name, p, text[1:]))
            continue
        vals = _parse_values(text)
        acc = sycl_elem(p.type, "accessor")
        if acc is not None:
            im.add_buffer(name, vals, acc.elem, shape_of.get(name))
            im.bind_accessor(name, name, acc.mode)
        elif isinstance(p.type, RefType):
            im.add_buffer(name, vals, p.type.elem, shape_of.get(name))
            im.bind(name, RefBinding(name))
        else:
            if len(vals) != 1:
                raise click.BadParameter(f"scalar parameter %{name} takes one value")
            im.bind(name, vals[0])
    for name, p, other in aliases:
        target, _, off = other.partition("+")
        b = im.bindings.get(target)
        if isinstance(b, RefBinding):
            im.bind(name, RefBinding(b.buffer, b.offset + int(off or 0)))
        elif isinstance(b, AccessorBinding):
            im.bind(name, b)
        else:
            raise click.BadParameter(f"%{name} aliases %{target}, which is not bound to a buffer")
    return im


@main.command("run")
@click.argument("input", type=click.Path(dir_okay=False))
@click.option("--entry", default=None, help="Host function to execute.")
@click.option("--kernel", default=None, help="Device function to launch directly.")
@click.option("--range", "range_", default=None, help="Global range, e.g. 8,8.")
@click.option("--wg", default=None, help="Work-group size, e.g. 2,2.")
@click.option("--bind", "binds", multiple=True, help="name=v0:v1:... or name=@other[+k].")
@click.option("--shape", "shapes", multiple=True, help="Buffer shape for a binding, e.g. A=8x8.")
@click.option("-p", "--pipeline", default="", help="Passes to apply before running.")
@click.option("--stats", is_flag=True, help="Print execution counters.")
def cmd_run(input, entry, kernel, range_, wg, binds, shapes, pipeline, stats) -> None:
    """Interpret a host program or a single kernel launch."""
    if (entry is None) == (kernel is None):
        raise click.UsageError("exactly one of --entry or --kernel is required")
    names = parse_pipeline(pipeline)
    m = load_module(input)
    run_pipeline(m, names)
    try:
        if entry is not None:
            image, st = run_host_program(m, entry.lstrip("@"))
        else:
            f = m.lookup(kernel.lstrip("@"))
            if f is None:
                raise DiagnosticError(f"no function @{kernel.lstrip('@')}")
            gs = _ints(range_) or (1,)
            try:
                nd = NDRangeSpec(gs, _ints(wg))
            except ValueError as e:
                raise click.BadParameter(str(e)) from None
            image, st = run_kernel(m, f.sym_name, nd, build_image(f, list(binds), list(shapes)))
    except InterpError as e:
        raise DiagnosticError(str(e)) from None
    lines = format_buffers(image)
    if stats:
        lines.extend(st.render())
    click.echo("\n".join(lines))


# -- golden-file harness -------------------------------------------------------------


def check_output(text: str, directives: list[tuple[int, str, str]]) -> str | None:
    """Apply CHECK / CHECK-NOT in order; return a failure description or None.

    Matching is by substring over the whole output, so consecutive CHECKs may
    match on the same line, each starting after the previous match.
    """

    def line_at(pos: int) -> str:
        if pos >= len(text):
            return "<end of output>"
        start = text.rfind("\n", 0, pos) + 1
        end = text.find("\n", pos)
        return text[start:end if end >= 0 else len(text)]

    pos = 0
    pending_not: list[tuple[int, str]] = []
    for lineno, kind, pat in directives:
        if kind == "CHECK-NOT":
            pending_not.append((lineno, pat))
            continue
        found = text.find(pat, pos)
        if found < 0:
            return f"line {lineno}: CHECK: {pat!r} not found; first unmatched line: {line_at(pos)!r}"
        for nl, npat in pending_not:
            hit = text.find(npat, pos, found)
            if hit >= 0:
                return f"line {nl}: CHECK-NOT: {npat!r} matched {line_at(hit)!r}"
        pending_not = []
        pos = found + len(pat)
    for nl, npat in pending_not:
        hit = text.find(npat, pos)
        if hit >= 0:
            return f"line {nl}: CHECK-NOT: {npat!r} matched {line_at(hit)!r}"
    return None


def parse_check_file(text: str) -> tuple[list[str], list[tuple[int, str, str]]]:
    runs, directives = [], []
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("// RUN:"):
            runs.append(s[len("// RUN:"):].strip())
        elif s.startswith("// CHECK-NOT:"):
            directives.append((n, "CHECK-NOT", s[len("// CHECK-NOT:"):].strip()))
        elif s.startswith("// CHECK:"):
            directives.append((n, "CHECK", s[len("// CHECK:"):].strip()))
    return runs, directives


def invoke(argv: list[str]) -> tuple[int, str]:
    """Run the CLI in-process and return (exit code, combined output)."""
    from click.testing import CliRunner

    result = CliRunner().invoke(main, argv, catch_exceptions=True)
    out = result.output
    if result.exception is not None and not isinstance(result.exception, SystemExit):
        out += f"internal error: {result.exception!r}\n"
        return 1, out
    return result.exit_code, out


def run_check_file(path: Path) -> str | None:
    runs, directives = parse_check_file(path.read_text())
    if not runs:
        return "no RUN line"
    output = []
    for run in runs:
        argv = shlex.split(run.replace("%s", shlex.quote(str(path))))
        expect_fail = bool(argv) and argv[0] == "not"
        if expect_fail:
            argv = argv[1:]
        code, out = invoke(argv)
        if expect_fail and code == 0:
            return f"RUN: {run!r} succeeded but was expected to fail"
        if not expect_fail and code != 0:
            return f"RUN: {run!r} exited with {code}:\n{out}"
        output.append(out)
    return check_output("".join(output), directives)


@main.command("test")
@click.argument("corpus", type=click.Path(exists=True))
def cmd_test(corpus) -> None:
    """Run every .sir check file under CORPUS."""
    root = Path(corpus)
    files = sorted(root.rglob("*.sir")) if root.is_dir() else [root]
    passed = failed = 0
    for f in files:
        err = run_check_file(f)
        if err is None:
            passed += 1
            click.echo(f"PASS: {f}")
        else:
            failed += 1
            click.echo(f"FAIL: {f}: {err}")
    click.echo(f"{passed} passed, {failed} failed")
    if failed:
        sys.exit(1)


if __name__ == "__main__":
    main()
