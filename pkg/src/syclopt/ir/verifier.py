"""Module verifier: structural invariants, dialect rules and SSA dominance."""

from __future__ import annotations

from .core import Diagnostic, ModuleIR, Operation, in_device_module, properly_dominates_use
from .types import I1, INDEX, RefType


def _diag(op: Operation, msg: str) -> Diagnostic:
    return Diagnostic("error", msg, op.location)


def verify_module(m: ModuleIR) -> list[Diagnostic]:
    """Return one error diagnostic per violated rule; empty means the module is valid."""
    from ..dialects import explicit_kernel_params, is_registered, lookup

    errors: list[Diagnostic] = []
    top = m.op
    if top.name != "module":
        return [_diag(top, "top-level operation must be a module")]

    device_modules = [op for op in top.body.ops if op.name == "module" and op.attributes.get("sycl.device") is True]
    if len(device_modules) > 1:
        errors.append(_diag(device_modules[1], "more than one device module"))

    symbols: dict[str, Operation] = {}

    def check_scope(mod: Operation) -> None:
        seen: set[str] = set()
        for op in mod.body.ops:
            if op.name == "module":
                if mod is not top:
                    errors.append(_diag(op, "nested modules are only allowed at the top level"))
                check_scope(op)
            elif op.name == "func.func":
                name = op.sym_name
                if name is None:
                    errors.append(_diag(op, "function without a symbol name"))
                    continue
                if name in seen:
                    errors.append(_diag(op, f"duplicate symbol '@{name}'"))
                seen.add(name)
                symbols.setdefault(name, op)
            else:
                errors.append(_diag(op, f"'{op.name}' is not allowed at module scope"))

    check_scope(top)

    for f in m.functions():
        device = in_device_module(f)
        if f.is_kernel and not device:
            errors.append(_diag(f, "kernel function outside the device module"))
        rtypes = tuple(f.attributes.get("result_types") or ())
        body = f.body
        if not body.ops or body.ops[-1].name != "func.return":
            errors.append(_diag(f, f"function '@{f.sym_name}' must end with func.return"))
        for op in f.walk():
            if op is f:
                continue
            errors.extend(_verify_op(op, f, device, rtypes, symbols, is_registered, lookup, explicit_kernel_params))
    return errors


def _verify_op(op, f, device, rtypes, symbols, is_registered, lookup, explicit_kernel_params) -> list:
    errs: list[Diagnostic] = []
    if not is_registered(op.name):
        return [_diag(op, f"unknown operation '{op.name}'")]
    spec = lookup(op.name)
    lo, hi = spec.operands
    n = len(op.operands)
    if n < lo or (hi is not None and n > hi):
        errs.append(_diag(op, f"'{op.name}' has {n} operands, expected {lo}..{hi if hi is not None else 'n'}"))
        return errs
    lo, hi = spec.results
    n = len(op.results)
    if n < lo or (hi is not None and n > hi):
        errs.append(_diag(op, f"'{op.name}' has {n} results, expected {lo}..{hi if hi is not None else 'n'}"))
        return errs
    lo, hi = spec.regions
    if not lo <= len(op.regions) <= hi:
        errs.append(_diag(op, f"'{op.name}' has {len(op.regions)} regions"))
        return errs
    for key in spec.attrs:
        if key not in op.attributes:
            errs.append(_diag(op, f"'{op.name}' requires attribute '{key}'"))
    if errs:
        return errs

    if spec.context == "device" and not device:
        errs.append(_diag(op, "device-only operation in host context"))
    elif spec.context == "host" and device:
        errs.append(_diag(op, "host-only operation in device context"))

    for v in op.operands:
        if not properly_dominates_use(v, op):
            errs.append(_diag(op, f"dominance violation: operand of '{op.name}' does not dominate its use"))
            break

    if spec.terminator:
        blk = op.parent
        if blk.ops[-1] is not op:
            errs.append(_diag(op, f"'{op.name}' must terminate its block"))
        parent = blk.parent_op
        if op.name == "func.return":
            if parent is not f:
                errs.append(_diag(op, "func.return outside the function body block"))
            elif tuple(v.type for v in op.operands) != rtypes:
                errs.append(_diag(op, "func.return operand types do not match the function signature"))
        elif op.name == "loop.yield":
            if parent is None or parent.name not in ("loop.for", "loop.if"):
                errs.append(_diag(op, "loop.yield outside a loop region"))
            elif tuple(v.type for v in op.operands) != tuple(r.type for r in parent.results):
                errs.append(_diag(op, "loop.yield types do not match the parent results"))

    if spec.verify is not None:
        try:
            msgs = spec.verify(op)
        except (IndexError, AttributeError) as e:
            msgs = [f"malformed '{op.name}': {e}"]
        errs.extend(_diag(op, msg) for msg in msgs)

    if op.name == "loop.for":
        errs.extend(_verify_for(op))
    elif op.name == "loop.if":
        errs.extend(_verify_if(op))
    elif op.name == "func.call":
        errs.extend(_verify_call(op, symbols))
    elif op.name == "sycl.host.schedule_kernel":
        errs.extend(_verify_schedule_target(op, symbols, explicit_kernel_params))
    return errs


def _verify_for(op: Operation) -> list:
    errs = []
    if any(v.type != INDEX for v in op.operands[:3]):
        errs.append(_diag(op, "loop.for bounds must be index-typed"))
    inits = op.operands[3:]
    body = op.regions[0].block
    want = [INDEX] + [v.type for v in inits]
    if [a.type for a in body.args] != want:
        errs.append(_diag(op, "loop.for region arguments must be (index, iter_args...)"))
    if [r.type for r in op.results] != [v.type for v in inits]:
        errs.append(_diag(op, "loop.for results must match iter_args"))
    if inits and (not body.ops or body.ops[-1].name != "loop.yield"):
        errs.append(_diag(op, "loop.for with iter_args must end with loop.yield"))
    return errs


def _verify_if(op: Operation) -> list:
    errs = []
    if op.operands[0].type != I1:
        errs.append(_diag(op, "loop.if condition must be i1"))
    for r in op.regions:
        if r.block.args:
            errs.append(_diag(op, "loop.if regions take no arguments"))
    if op.results:
        if len(op.regions) != 2:
            errs.append(_diag(op, "loop.if with results requires an else region"))
        for r in op.regions:
            if not r.block.ops or r.block.ops[-1].name != "loop.yield":
                errs.append(_diag(op, "loop.if with results must yield in every region"))
                break
    return errs


def _verify_call(op: Operation, symbols: dict) -> list:
    callee = symbols.get(op.symbol or "")
    if callee is None:
        return [_diag(op, f"unresolved symbol '@{op.symbol}'")]
    params = [a.type for a in callee.arguments]
    if [v.type for v in op.operands] != params:
        return [_diag(op, f"call to '@{op.symbol}' does not match its signature")]
    if tuple(r.type for r in op.results) != tuple(callee.attributes.get("result_types") or ()):
        return [_diag(op, f"call to '@{op.symbol}' has wrong result types")]
    return []


def _verify_schedule_target(op: Operation, symbols: dict, explicit_kernel_params) -> list:
    kernel = symbols.get(op.symbol or "")
    if kernel is None:
        return [_diag(op, f"unresolved symbol '@{op.symbol}'")]
    if not kernel.is_kernel or not in_device_module(kernel):
        return [_diag(op, f"'@{op.symbol}' is not a kernel of the device module")]
    params = explicit_kernel_params(kernel)
    if len(op.main_operands) != len(params):
        return [_diag(op, f"schedule of '@{op.symbol}' passes {len(op.main_operands)} arguments, kernel takes {len(params)}")]
    for v, p in zip(op.main_operands, params):
        if isinstance(p.type, RefType) and not isinstance(v.type, RefType):
            return [_diag(op, f"schedule of '@{op.symbol}' passes a scalar for a ref parameter")]
    dead = op.attributes.get("dead_args", ())
    if any(not isinstance(i, int) or not 0 <= i < len(params) for i in dead):
        return [_diag(op, "dead_args index out of range")]
    return []


__all__ = ["verify_module"]
