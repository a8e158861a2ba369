"""Remark-line rendering used by ``--print-analysis``."""

from __future__ import annotations

from ..dialects import READ, effects_of
from ..ir.core import ModuleIR
from .alias import alias, ref_values
from .labels import Labeler
from .memaccess import classify_access, extract_access
from .reachdef import ReachingDefs
from .uniformity import compute_uniformity


def _fmt_matrix(rows) -> str:
    return "[" + ", ".join("[" + ", ".join(str(x) for x in r) + "]" for r in rows) + "]"


def render_alias(m: ModuleIR) -> list[str]:
    L = Labeler()
    out = []
    for f in m.functions():
        vals = ref_values(f)
        for i, a in enumerate(vals):
            for b in vals[i + 1:]:
                out.append(f"// alias: {L.value(a)}, {L.value(b)} -> {alias(a, b)}")
    return out


def render_reachdef(m: ModuleIR) -> list[str]:
    L = Labeler()
    out = []
    for f in m.functions():
        rd = ReachingDefs(f)
        for op in f.walk():
            if op is f or op.regions:
                continue
            for e in effects_of(op):
                if e.kind != READ or e.value is None:
                    continue
                d = rd.before(op, e.value)
                mods = ", ".join(sorted(L.op(x) for x in d.mods))
                pmods = ", ".join(sorted(L.op(x) for x in d.pmods))
                out.append(f"// reachdef: {L.value(e.value)} before {L.op(op)} -> {{MODS: [{mods}], PMODS: [{pmods}]}}")
    return out


def render_uniformity(m: ModuleIR) -> list[str]:
    L = Labeler()
    res = compute_uniformity(m)
    out = []
    for f in m.functions():
        for a in f.arguments:
            out.append(f"// uniformity: {L.value(a)} -> {res.of(a)}")
        for op in f.walk():
            if op is f:
                continue
            for r in op.regions:
                for b in r.blocks:
                    for a in b.args:
                        out.append(f"// uniformity: {L.value(a)} -> {res.of(a)}")
            for r in op.results:
                out.append(f"// uniformity: {L.value(r)} -> {res.of(r)}")
            if res.is_divergent(op):
                out.append(f"// uniformity: {L.op(op)} -> divergent")
    return out


def render_memaccess(m: ModuleIR) -> list[str]:
    L = Labeler()
    out = []
    for f in m.functions():
        rd = ReachingDefs(f)
        for op in f.walk():
            if op.name != "sycl.accessor.subscript":
                continue
            a = extract_access(op, rd)
            if not a.is_affine:
                out.append(f"// memaccess: {L.op(op)} -> NotAffine ({a.reason})")
                continue
            c = classify_access(a)
            out.append(
                f"// memaccess: {L.op(op)} -> basis [{', '.join(a.basis_names())}]"
                f" matrix {_fmt_matrix(a.matrix)} offsets [{', '.join(map(str, a.offsets))}]"
                f" coalescable = {str(c.coalescable).lower()}"
                f" temporal_reuse = {str(c.temporal_reuse).lower()} placement = {c.placement}"
            )
    return out


RENDERERS = {
    "alias": render_alias,
    "reachdef": render_reachdef,
    "uniformity": render_uniformity,
    "memaccess": render_memaccess,
}
