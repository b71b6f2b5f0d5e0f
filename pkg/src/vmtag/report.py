"""Serializable analysis reports and the dispatch-mode x optimization matrix."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from .detector import DetectionResult, DiagCode, VmEndMode, detect
from .ir import IrModule, parse_module
from .synth import GroundTruth, Mode, SynthConfig, generate, merge_transform

ROLES = ("vm_start", "dispatch_start", "handlers", "vm_end")


class Status(str, enum.Enum):
    DETECTED = "Detected"
    ABSENT = "Absent"
    AMBIGUOUS = "Ambiguous"

    @property
    def cell(self) -> str:
        return "O" if self is Status.DETECTED else "X"


def role_status(r: Optional[DetectionResult]) -> dict[str, Status]:
    if r is None or r.dispatch_start is None:
        return {role: Status.ABSENT for role in ROLES}
    tied = r.has(DiagCode.TIED_DISPATCHER)
    hub = Status.AMBIGUOUS if tied else Status.DETECTED
    if r.has(DiagCode.MULTIPLE_VM_STARTS):
        start = Status.AMBIGUOUS
    elif r.vm_start is None:
        start = Status.ABSENT
    else:
        start = Status.DETECTED
    return {
        "vm_start": start,
        "dispatch_start": hub,
        "handlers": hub if r.handlers else Status.ABSENT,
        "vm_end": Status.DETECTED if r.vm_ends else Status.ABSENT,
    }


def primary_candidate(results: Iterable[DetectionResult]) -> Optional[DetectionResult]:
    """The function whose dispatcher has the largest out-degree; first wins ties."""
    best = None
    for r in results:
        if r.dispatch_start is not None and (
                best is None or r.dispatch_out_degree > best.dispatch_out_degree):
            best = r
    return best


def is_clean(results: list[DetectionResult]) -> bool:
    """True when some function has a dispatcher and none with one has diagnostics.

    Functions without a dispatcher are treated as ordinary code, so their
    ``NoDispatcher``/``DegenerateFunction`` notes do not count.
    """
    found = [r for r in results if r.dispatch_start is not None]
    return bool(found) and not any(r.diagnostics for r in found)


@dataclass
class Report:
    tool_version: str
    input_path: str
    per_function: list[DetectionResult]
    timing_ms: float = 0.0
    primary: Optional[DetectionResult] = field(init=False)
    summary: dict[str, Status] = field(init=False)

    def __post_init__(self):
        self.primary = primary_candidate(self.per_function)
        self.summary = role_status(self.primary)

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "input_path": self.input_path,
            "primary_candidate": self.primary.function_name if self.primary else None,
            "summary": {k: v.value for k, v in self.summary.items()},
            "per_function": [r.to_dict() for r in self.per_function],
            "timing_ms": round(self.timing_ms, 3),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"{self.input_path}: primary candidate "
                 f"{'@' + self.primary.function_name if self.primary else '(none)'}"]
        lines += [f"  {role:<15} {self.summary[role].value}" for role in ROLES]
        for r in self.per_function:
            lines.append(f"@{r.function_name}")
            if r.dispatch_start is not None:
                lines.append(f"  dispatch   %{r.dispatch_start} "
                             f"(out-degree {r.dispatch_out_degree})")
                lines.append(f"  handlers   {len(r.handlers)}: "
                             + " ".join("%" + h for h in r.handlers))
                lines.append(f"  vm start   {'%' + r.vm_start if r.vm_start else '-'}")
                lines.append("  vm end     "
                             + (" ".join("%" + e for e in r.vm_ends) or "-"))
            for d in r.diagnostics:
                lines.append(f"  ! {d.code.value}: {d.detail}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# matrix

# expected cell pattern per optimization state, in ROLES order
EXPECTED = {False: "OOOO", True: "XOOX"}


@dataclass
class Sample:
    mode: str
    merged: bool
    module: IrModule
    truth: Optional[GroundTruth] = None
    name: str = ""


@dataclass
class Cell:
    mode: str
    merged: bool
    pattern: str
    exact: Optional[dict[str, bool]] = None
    name: str = ""

    @property
    def expected(self) -> str:
        return EXPECTED[self.merged]

    @property
    def ok(self) -> bool:
        return self.pattern == self.expected


def exact_match(r: Optional[DetectionResult], t: GroundTruth) -> dict[str, bool]:
    if r is None:
        return {role: False for role in ROLES}
    return {
        "vm_start": r.vm_start == t.vm_start_label,
        "dispatch_start": r.dispatch_start == t.dispatch_label,
        "handlers": r.handlers == t.handler_labels,
        "vm_end": r.vm_ends == t.vm_end_labels,
    }


def evaluate(sample: Sample, vm_end_mode: VmEndMode = VmEndMode.REACHABILITY) -> Cell:
    results = detect(sample.module, vm_end_mode)
    status = role_status(primary_candidate(results))
    pattern = "".join(status[role].cell for role in ROLES)
    exact = None
    if sample.truth is not None:
        r = next((x for x in results if x.function_name == sample.truth.function_name), None)
        exact = exact_match(r, sample.truth)
    return Cell(sample.mode, sample.merged, pattern, exact, sample.name)


def default_samples(modes: Iterable[str], base: SynthConfig = SynthConfig()) -> list[Sample]:
    out = []
    for mode in modes:
        m, truth = generate(replace(base, mode=Mode(mode)))
        out.append(Sample(Mode(mode).value, False, m, truth))
        out.append(Sample(Mode(mode).value, True, merge_transform(m), truth))
    return out


def load_corpus(directory: Path) -> list[Sample]:
    """Read ``*.vmir`` files and their ``.truth.json`` sidecars.

    The sidecar's ``mode`` and ``merged`` keys place the sample in the grid.
    """
    samples = []
    for path in sorted(Path(directory).glob("*.vmir")):
        side = path.with_suffix(".truth.json")
        meta = json.loads(side.read_text())
        m = parse_module(path.read_text(), str(path))
        samples.append(Sample(meta["mode"], bool(meta.get("merged", False)), m,
                              GroundTruth.from_dict(meta), path.name))
    return samples


def render_grid(cells: list[Cell]) -> str:
    head = f"{'opt':<8}{'dispatch':<10}" + "".join(f"{r:<16}" for r in ROLES)
    head = head.rstrip()
    lines = [head, "-" * len(head)]
    for c in cells:
        opt = "merged" if c.merged else "plain"
        mode = c.mode + (f" ({c.name})" if c.name else "")
        row = f"{opt:<8}{mode:<10}" + "".join(f"{ch:<16}" for ch in c.pattern)
        lines.append(row.rstrip() + ("" if c.ok else f"   <- expected {' '.join(c.expected)}"))
    if any(c.exact is not None for c in cells):
        lines.append("")
        lines.append("exact match against ground truth:")
        for c in cells:
            if c.exact is None:
                continue
            opt = "merged" if c.merged else "plain"
            flags = " ".join(f"{role}={'yes' if v else 'no'}" for role, v in c.exact.items())
            lines.append(f"  {opt:<7} {c.mode:<9} {flags}")
    verdict = "matches" if all(c.ok for c in cells) else "does NOT match"
    lines.append("")
    lines.append(f"grid {verdict} the expected pattern")
    return "\n".join(lines) + "\n"


def grid_json(cells: list[Cell]) -> str:
    return json.dumps({
        "roles": list(ROLES),
        "cells": [{"mode": c.mode, "merged": c.merged, "name": c.name,
                   "pattern": c.pattern, "expected": c.expected,
                   "exact_match": c.exact} for c in cells],
        "matches_expected": all(c.ok for c in cells),
    }, indent=2)
