"""Locate the dispatcher, handlers, VM start and VM end of a virtualized function.

All four roles are read off the CFG shape:

* dispatch start: the block with the most distinct successors;
* handlers: every successor of the dispatch start;
* VM start: a predecessor of the dispatch start that lies outside the VM loop;
* VM end: a handler from which the dispatch start can no longer be reached.

Nothing here raises on odd input. Ties, missing roles and degenerate
functions are reported as :class:`Diagnostic` entries on the result.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .cfg import Cfg, UnknownBlock, build_cfg, out_degree, reachable_from
from .ir import InstrKind, IrFunction, IrModule

__all__ = ["DiagCode", "Diagnostic", "DetectionResult", "VmEndMode",
           "find_dispatch_start", "find_handlers", "find_vm_start",
           "find_vm_end", "detect_function", "detect"]


class DiagCode(enum.Enum):
    TIED_DISPATCHER = "TiedDispatcher"
    NO_DISPATCHER = "NoDispatcher"
    MULTIPLE_VM_STARTS = "MultipleVmStarts"
    NO_VM_START = "NoVmStart"
    NO_VM_END = "NoVmEnd"
    VM_START_IS_HANDLER = "VmStartIsHandler"
    DEGENERATE_FUNCTION = "DegenerateFunction"


@dataclass(frozen=True)
class Diagnostic:
    code: DiagCode
    detail: str = ""

    def to_dict(self) -> dict:
        return {"code": self.code.value, "detail": self.detail}


class VmEndMode(str, enum.Enum):
    REACHABILITY = "reachability"
    DIRECT = "direct"


@dataclass(frozen=True)
class DetectionResult:
    function_name: str
    dispatch_start: Optional[str] = None
    dispatch_candidates: tuple[str, ...] = ()
    handlers: tuple[str, ...] = ()
    vm_start: Optional[str] = None
    vm_start_candidates: tuple[str, ...] = ()
    vm_ends: tuple[str, ...] = ()
    diagnostics: tuple[Diagnostic, ...] = field(default=())
    dispatch_out_degree: int = 0

    def has(self, code: DiagCode) -> bool:
        return any(d.code is code for d in self.diagnostics)

    def to_dict(self) -> dict:
        return {
            "function_name": self.function_name,
            "dispatch_start": self.dispatch_start,
            "dispatch_out_degree": self.dispatch_out_degree,
            "dispatch_candidates": list(self.dispatch_candidates),
            "handlers": list(self.handlers),
            "vm_start": self.vm_start,
            "vm_start_candidates": list(self.vm_start_candidates),
            "vm_ends": list(self.vm_ends),
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


def find_dispatch_start(g: Cfg) -> tuple[Optional[str], tuple[str, ...], list[Diagnostic]]:
    if len(g.nodes) < 2:
        return None, (), [Diagnostic(DiagCode.DEGENERATE_FUNCTION,
                                     f"{len(g.nodes)} block(s)")]
    best = max(out_degree(g, b) for b in g.nodes)
    if best <= 1:
        return None, (), [Diagnostic(DiagCode.NO_DISPATCHER,
                                     f"maximum out-degree is {best}")]
    # layout order scan, so the first maximal block wins
    candidates = tuple(b for b in g.nodes if out_degree(g, b) == best)
    diags = []
    if len(candidates) > 1:
        diags.append(Diagnostic(DiagCode.TIED_DISPATCHER,
                                f"{len(candidates)} blocks with out-degree {best}: "
                                + ", ".join(candidates)))
    return candidates[0], candidates, diags


def find_handlers(g: Cfg, dispatch: str) -> tuple[str, ...]:
    if dispatch not in g.succ:
        raise UnknownBlock(dispatch)
    return tuple(g.succ[dispatch])


def _calls_to(f: IrFunction, callee: str) -> list[str]:
    return [b.label for b in f.blocks
            if any(i.kind is InstrKind.CALL and i.callee == callee for i in b.body)]


def _reachable_avoiding(g: Cfg, block: str) -> set[str]:
    """Blocks reachable from the entry on paths that never pass ``block``."""
    if g.entry == block:
        return set()
    seen = {g.entry}
    stack = [g.entry]
    while stack:
        for n in g.succ[stack.pop()]:
            if n != block and n not in seen:
                seen.add(n)
                stack.append(n)
    return seen


def find_vm_start(g: Cfg, f: IrFunction, dispatch: str, handlers
                  ) -> tuple[Optional[str], tuple[str, ...], list[Diagnostic]]:
    """Pick the block that enters the dispatcher from outside the VM loop.

    Handlers and any other predecessor reachable only through the dispatcher
    (the tail of a multi-block handler) are loop-back sources and never count.

    ``f`` is the function searched for call sites. When it is not the function
    that owns ``dispatch``, blocks calling that function also count as
    candidates; within the dispatcher's own function only branches count.
    """
    handlers = set(handlers)
    outside = _reachable_avoiding(g, dispatch)
    preds = [p for p in g.pred[dispatch] if p not in handlers and p in outside]
    candidates = sorted(preds, key=g.index)
    if f.name != g.function_name:
        candidates += [b for b in _calls_to(f, g.function_name) if b not in candidates]
    candidates = tuple(candidates)

    diags = []
    if not candidates:
        diags.append(Diagnostic(DiagCode.NO_VM_START,
                                f"%{dispatch} has no predecessor outside the handler set"))
        return None, candidates, diags
    if len(candidates) > 1:
        diags.append(Diagnostic(DiagCode.MULTIPLE_VM_STARTS, ", ".join(candidates)))
    start = candidates[0]
    if start in handlers and f.name == g.function_name:
        diags.append(Diagnostic(DiagCode.VM_START_IS_HANDLER, start))
    return start, candidates, diags


def find_vm_end(g: Cfg, dispatch: str, handlers,
                mode: VmEndMode = VmEndMode.REACHABILITY
                ) -> tuple[tuple[str, ...], list[Diagnostic]]:
    mode = VmEndMode(mode)
    if mode is VmEndMode.DIRECT:
        ends = tuple(h for h in handlers if dispatch not in g.succ[h])
    else:
        ends = tuple(h for h in handlers if dispatch not in reachable_from(g, h))
    diags = []
    if not ends:
        diags.append(Diagnostic(DiagCode.NO_VM_END,
                                f"every handler returns to %{dispatch}"))
    return ends, diags


def detect_function(f: IrFunction, vm_end_mode: VmEndMode = VmEndMode.REACHABILITY
                    ) -> DetectionResult:
    g = build_cfg(f)
    dispatch, candidates, diags = find_dispatch_start(g)
    if dispatch is None:
        return DetectionResult(f.name, diagnostics=tuple(diags))
    handlers = find_handlers(g, dispatch)
    start, start_candidates, d = find_vm_start(g, f, dispatch, handlers)
    diags += d
    ends, d = find_vm_end(g, dispatch, handlers, vm_end_mode)
    diags += d
    return DetectionResult(
        function_name=f.name,
        dispatch_start=dispatch,
        dispatch_candidates=candidates,
        handlers=handlers,
        vm_start=start,
        vm_start_candidates=start_candidates,
        vm_ends=ends,
        diagnostics=tuple(diags),
        dispatch_out_degree=out_degree(g, dispatch),
    )


def detect(m: IrModule, vm_end_mode: VmEndMode = VmEndMode.REACHABILITY
           ) -> list[DetectionResult]:
    """Run the four-stage detection on every defined function, in module order."""
    return [detect_function(f, vm_end_mode) for f in m.functions]
