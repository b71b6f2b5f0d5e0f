"""Insert marker calls at detected structure boundaries, and remove them again."""
from __future__ import annotations

from dataclasses import dataclass, replace

from .detector import DetectionResult
from .ir import BasicBlock, InstrKind, IrModule, call

__all__ = ["MarkerCollision", "MarkerSpec", "annotate", "strip_markers"]


class MarkerCollision(ValueError):
    def __init__(self, name: str):
        super().__init__(f"marker name @{name} already used in module")
        self.name = name


@dataclass(frozen=True)
class MarkerSpec:
    dispatch_marker: str = "__vmtag_dispatch_start"
    handler_marker: str = "__vmtag_handler"
    vm_start_marker: str = "__vmtag_vm_start"
    vm_end_marker: str = "__vmtag_vm_end"

    @classmethod
    def with_prefix(cls, prefix: str) -> "MarkerSpec":
        return cls(f"{prefix}_dispatch_start", f"{prefix}_handler",
                   f"{prefix}_vm_start", f"{prefix}_vm_end")

    @property
    def names(self) -> tuple[str, str, str, str]:
        return (self.dispatch_marker, self.handler_marker,
                self.vm_start_marker, self.vm_end_marker)


def annotate(m: IrModule, results: list[DetectionResult],
             spec: MarkerSpec = MarkerSpec()) -> IrModule:
    names = spec.names
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise MarkerCollision(dup)
    taken = m.symbols
    for n in names:
        if n in taken:
            raise MarkerCollision(n)

    by_name = {r.function_name: r for r in results}
    functions = []
    for f in m.functions:
        r = by_name.get(f.name)
        if r is None or r.dispatch_start is None:
            functions.append(f)
            continue
        markers: dict[str, list] = {}
        markers.setdefault(r.dispatch_start, []).append(call(spec.dispatch_marker))
        for i, h in enumerate(r.handlers):
            markers.setdefault(h, []).append(call(spec.handler_marker, f"i32 {i}"))
        if r.vm_start is not None:
            markers.setdefault(r.vm_start, []).append(call(spec.vm_start_marker))
        for e in r.vm_ends:
            markers.setdefault(e, []).append(call(spec.vm_end_marker))
        blocks = tuple(
            replace(b, body=tuple(markers[b.label]) + b.body) if b.label in markers else b
            for b in f.blocks)
        functions.append(replace(f, blocks=blocks))

    if functions == list(m.functions):
        return m
    return replace(m, functions=tuple(functions),
                   declared_externals=m.declared_externals + names)


def _strip_block(b: BasicBlock, names: set[str]) -> BasicBlock:
    body = tuple(i for i in b.body
                 if not (i.kind is InstrKind.CALL and i.callee in names))
    return b if len(body) == len(b.body) else replace(b, body=body)


def strip_markers(m: IrModule, spec: MarkerSpec = MarkerSpec()) -> IrModule:
    names = set(spec.names)
    functions = tuple(
        replace(f, blocks=tuple(_strip_block(b, names) for b in f.blocks))
        for f in m.functions)
    externals = tuple(n for n in m.declared_externals if n not in names)
    return replace(m, functions=functions, declared_externals=externals)
