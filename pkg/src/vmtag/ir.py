"""Data model, parser and printer for a line-oriented subset of LLVM-style IR.

Only control flow and call sites are modelled. Every other instruction line
is carried verbatim so a parsed module can be printed back and re-analysed.

The parser also tolerates real ``.ll`` files: top-level constructs it does not
understand (globals, metadata, attributes) are skipped, unknown lines inside
function bodies become opaque instructions, and only an unparseable
terminator is fatal.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

__all__ = [
    "IrError", "ParseError", "UnresolvedLabel", "DuplicateLabel",
    "IndirectTargetsUnknown", "InstrKind", "Instruction", "Ret", "Unreachable",
    "Br", "CondBr", "Switch", "IndirectBr", "Terminator", "BasicBlock",
    "IrFunction", "IrModule", "parse_module", "print_module", "structure",
    "structurally_equal", "call",
]


class IrError(Exception):
    """Base class for every error raised while reading IR."""


class ParseError(IrError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class IndirectTargetsUnknown(ParseError):
    """An ``indirectbr`` without a destination list."""


class UnresolvedLabel(IrError):
    def __init__(self, function: str, label: str):
        super().__init__(f"@{function}: branch to undefined label %{label}")
        self.function = function
        self.label = label


class DuplicateLabel(IrError):
    def __init__(self, function: str, label: str):
        super().__init__(f"@{function}: label %{label} defined twice")
        self.function = function
        self.label = label


# --------------------------------------------------------------------------
# data model

class InstrKind(enum.Enum):
    CALL = "call"
    ASSIGN = "assign"
    STORE = "store"
    LOAD = "load"
    OTHER = "other"


@dataclass(frozen=True)
class Instruction:
    kind: InstrKind
    raw_text: str
    callee: Optional[str] = None
    arg_count: int = 0


@dataclass(frozen=True)
class Ret:
    value: str = ""

    @property
    def targets(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class Unreachable:
    @property
    def targets(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class Br:
    target: str

    @property
    def targets(self) -> tuple[str, ...]:
        return (self.target,)


@dataclass(frozen=True)
class CondBr:
    cond: str
    then_target: str
    else_target: str

    @property
    def targets(self) -> tuple[str, ...]:
        return (self.then_target, self.else_target)


@dataclass(frozen=True)
class Switch:
    scrutinee: str
    default_target: str
    cases: tuple[tuple[int, str], ...] = ()

    @property
    def targets(self) -> tuple[str, ...]:
        return (self.default_target,) + tuple(lbl for _, lbl in self.cases)


@dataclass(frozen=True)
class IndirectBr:
    address: str
    possible_targets: tuple[str, ...]

    @property
    def targets(self) -> tuple[str, ...]:
        return self.possible_targets


Terminator = Union[Ret, Unreachable, Br, CondBr, Switch, IndirectBr]


@dataclass(frozen=True)
class BasicBlock:
    label: str
    body: tuple[Instruction, ...]
    terminator: Terminator


@dataclass(frozen=True)
class IrFunction:
    name: str
    params: tuple[tuple[str, str], ...]
    blocks: tuple[BasicBlock, ...]

    @property
    def entry(self) -> str:
        return self.blocks[0].label

    def block(self, label: str) -> BasicBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.blocks)


@dataclass(frozen=True)
class IrModule:
    source_name: str = ""
    functions: tuple[IrFunction, ...] = ()
    declared_externals: tuple[str, ...] = ()

    def function(self, name: str) -> IrFunction:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def symbols(self) -> set[str]:
        return {f.name for f in self.functions} | set(self.declared_externals)


def call(callee: str, *args: str) -> Instruction:
    """Build a direct call instruction in the subset syntax."""
    return Instruction(InstrKind.CALL, f"call @{_fmt_name(callee)}({', '.join(args)})",
                       callee, len(args))


# --------------------------------------------------------------------------
# lexical helpers

_NAME = r'(?:[-\w.$]+|"[^"]*")'
_LABEL_RE = re.compile(rf"^({_NAME}):(?:\s|$)")
_LABEL_REF = re.compile(rf"label\s+%({_NAME})")
_DEFINE_RE = re.compile(rf"^define\b[^@]*@({_NAME})\s*\(")
_DECLARE_RE = re.compile(rf"^declare\b[^@]*@({_NAME})")
_CALL_RE = re.compile(
    rf"^(?:%{_NAME}\s*=\s*)?(?:(?:tail|musttail|notail)\s+)?call\b[^@%]*?@({_NAME})\s*\(")
_ASSIGN_RE = re.compile(rf"^%{_NAME}\s*=\s*(\w+)")
_CASE_RE = re.compile(rf"(?:[\w<>*]+\s+)?(-?\d+)\s*,\s*label\s+%({_NAME})")
_SIMPLE_NAME = re.compile(r"^[-\w.$]+$")


def _unquote(name: str) -> str:
    return name[1:-1] if name.startswith('"') else name


def _fmt_name(name: str) -> str:
    return name if _SIMPLE_NAME.match(name) else f'"{name}"'


def _strip_comment(line: str) -> str:
    in_str = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_str = not in_str
        elif ch == ";" and not in_str:
            return line[:i]
    return line


def _split_top(text: str) -> list[str]:
    """Split on commas that are not nested in brackets or quotes."""
    parts, depth, in_str, cur = [], 0, False, []
    for ch in text:
        if ch == '"':
            in_str = not in_str
        elif not in_str:
            if ch in "([{<":
                depth += 1
            elif ch in ")]}>":
                depth -= 1
            elif ch == "," and depth == 0:
                parts.append("".join(cur).strip())
                cur = []
                continue
        cur.append(ch)
    tail = "".join(cur).strip()
    if tail or parts:
        parts.append(tail)
    return [p for p in parts if p]


def _paren_group(text: str, start: int) -> tuple[str, int]:
    """Return the contents of the parenthesised group opening at ``start``."""
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "(":
            depth += 1
        elif text[i] == ")":
            depth -= 1
            if depth == 0:
                return text[start + 1:i], i
    raise ValueError("unbalanced parentheses")


def _parse_params(text: str) -> tuple[tuple[str, str], ...]:
    params = []
    for p in _split_top(text):
        toks = p.split()
        if toks and toks[-1].startswith("%"):
            params.append((_unquote(toks[-1][1:]), " ".join(toks[:-1])))
        else:
            params.append(("", p))
    return tuple(params)


def _classify(text: str) -> Instruction:
    m = _CALL_RE.match(text)
    if m:
        try:
            args, _ = _paren_group(text, m.end() - 1)
        except ValueError:
            return Instruction(InstrKind.OTHER, text)
        return Instruction(InstrKind.CALL, text, _unquote(m.group(1)),
                           len(_split_top(args)))
    if text.startswith("store "):
        return Instruction(InstrKind.STORE, text)
    m = _ASSIGN_RE.match(text)
    if m:
        kind = InstrKind.LOAD if m.group(1) == "load" else InstrKind.ASSIGN
        return Instruction(kind, text)
    return Instruction(InstrKind.OTHER, text)


_TERMINATOR_OPS = ("ret", "unreachable", "br", "switch", "indirectbr",
                   "invoke", "callbr", "resume", "catchswitch", "catchret",
                   "cleanupret")


def _opcode(text: str) -> str:
    return text.split(None, 1)[0] if text else ""


def _parse_terminator(text: str, lineno: int) -> Terminator:
    op = _opcode(text)
    rest = text[len(op):].strip()
    if op == "ret":
        return Ret(rest)
    if op == "unreachable":
        return Unreachable()
    if op == "br":
        refs = _LABEL_REF.findall(rest)
        if rest.startswith("label") and len(refs) == 1:
            return Br(_unquote(refs[0]))
        parts = _split_top(rest)
        if len(parts) == 3 and len(refs) == 2:
            return CondBr(parts[0], _unquote(refs[0]), _unquote(refs[1]))
        raise ParseError(lineno, f"malformed br: {text!r}")
    if op == "switch":
        lb, rb = rest.find("["), rest.rfind("]")
        if lb < 0 or rb < lb:
            raise ParseError(lineno, f"malformed switch: {text!r}")
        head = _split_top(rest[:lb])
        if len(head) != 2:
            raise ParseError(lineno, f"malformed switch: {text!r}")
        dm = _LABEL_REF.fullmatch(head[1].strip())
        if not dm:
            raise ParseError(lineno, f"malformed switch default: {text!r}")
        body = rest[lb + 1:rb]
        cases = [(int(k), _unquote(lbl)) for k, lbl in _CASE_RE.findall(body)]
        if len(cases) != len(_LABEL_REF.findall(body)):
            raise ParseError(lineno, f"malformed switch case list: {text!r}")
        keys = [k for k, _ in cases]
        if len(set(keys)) != len(keys):
            raise ParseError(lineno, "duplicate switch case constant")
        return Switch(head[0], _unquote(dm.group(1)), tuple(cases))
    if op == "indirectbr":
        lb, rb = rest.find("["), rest.rfind("]")
        addr = rest[:lb].rstrip().rstrip(",").strip() if lb >= 0 else rest
        targets = _LABEL_REF.findall(rest[lb:rb]) if lb >= 0 and rb > lb else []
        if not targets:
            raise IndirectTargetsUnknown(lineno, "indirectbr without target list")
        return IndirectBr(addr, tuple(dict.fromkeys(_unquote(t) for t in targets)))
    raise ParseError(lineno, f"unsupported terminator {op!r}")


# --------------------------------------------------------------------------
# parser

def _logical_lines(text: str) -> Iterator[tuple[int, str]]:
    """Yield (line number, stripped line), joining bracketed continuations."""
    pending, start, depth = [], 0, 0
    for n, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line and not pending:
            continue
        if not pending:
            start = n
        pending.append(line)
        depth += line.count("[") - line.count("]")
        if depth <= 0:
            yield start, " ".join(p for p in pending if p)
            pending, depth = [], 0
    if pending:
        yield start, " ".join(pending)


class _FunctionBuilder:
    def __init__(self, name: str, params, lineno: int):
        self.name = name
        self.params = params
        self.lineno = lineno
        self.blocks: list[BasicBlock] = []
        self.label: Optional[str] = None
        self.body: list[Instruction] = []
        self.closed = True  # no open block yet

    def start_block(self, label: str, lineno: int):
        if not self.closed:
            raise ParseError(lineno, f"block %{self.label} has no terminator")
        self.label, self.body, self.closed = label, [], False

    def add(self, text: str, lineno: int):
        if self.closed:
            if self.blocks:
                raise ParseError(lineno, "instruction after terminator without a label")
            self.start_block("entry", lineno)
        if _opcode(text) in _TERMINATOR_OPS:
            term = _parse_terminator(text, lineno)
            self.blocks.append(BasicBlock(self.label, tuple(self.body), term))
            self.closed = True
        else:
            self.body.append(_classify(text))

    def finish(self, lineno: int) -> IrFunction:
        if not self.closed:
            raise ParseError(lineno, f"block %{self.label} has no terminator")
        if not self.blocks:
            raise ParseError(lineno, f"function @{self.name} has no blocks")
        seen = set()
        for b in self.blocks:
            if b.label in seen:
                raise DuplicateLabel(self.name, b.label)
            seen.add(b.label)
        for b in self.blocks:
            for t in b.terminator.targets:
                if t not in seen:
                    raise UnresolvedLabel(self.name, t)
        return IrFunction(self.name, self.params, tuple(self.blocks))


def parse_module(text: str, source_name: str = "") -> IrModule:
    """Parse IR-subset text (or a real ``.ll`` file) into an :class:`IrModule`."""
    functions: list[IrFunction] = []
    externals: list[str] = []
    fb: Optional[_FunctionBuilder] = None

    for lineno, line in _logical_lines(text):
        if fb is None:
            m = _DEFINE_RE.match(line)
            if m:
                try:
                    params, close = _paren_group(line, m.end() - 1)
                except ValueError:
                    raise ParseError(lineno, "unbalanced parameter list") from None
                if not line.rstrip().endswith("{"):
                    raise ParseError(lineno, "expected '{' at end of define")
                fb = _FunctionBuilder(_unquote(m.group(1)), _parse_params(params), lineno)
                continue
            m = _DECLARE_RE.match(line)
            if m:
                externals.append(_unquote(m.group(1)))
            # anything else at top level is skipped
            continue

        if line == "}":
            functions.append(fb.finish(lineno))
            fb = None
            continue
        m = _LABEL_RE.match(line)
        if m:
            fb.start_block(_unquote(m.group(1)), lineno)
            continue
        fb.add(line, lineno)

    if fb is not None:
        raise ParseError(fb.lineno, f"unterminated function @{fb.name}")

    names = [f.name for f in functions]
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise ParseError(0, f"function @{dup} defined twice")
    externals = list(dict.fromkeys(externals))
    clash = set(externals) & set(names)
    if clash:
        raise ParseError(0, f"@{sorted(clash)[0]} is both declared and defined")
    return IrModule(source_name, tuple(functions), tuple(externals))


# --------------------------------------------------------------------------
# printer

def _print_terminator(t: Terminator) -> str:
    if isinstance(t, Ret):
        return f"ret {t.value}".rstrip()
    if isinstance(t, Unreachable):
        return "unreachable"
    if isinstance(t, Br):
        return f"br label %{_fmt_name(t.target)}"
    if isinstance(t, CondBr):
        return (f"br {t.cond}, label %{_fmt_name(t.then_target)}, "
                f"label %{_fmt_name(t.else_target)}")
    if isinstance(t, Switch):
        cases = " ".join(f"{k}, label %{_fmt_name(lbl)}" for k, lbl in t.cases)
        return f"switch {t.scrutinee}, label %{_fmt_name(t.default_target)} [ {cases} ]"
    if isinstance(t, IndirectBr):
        targets = ", ".join(f"label %{_fmt_name(lbl)}" for lbl in t.possible_targets)
        return f"indirectbr {t.address}, [ {targets} ]"
    raise TypeError(f"not a terminator: {t!r}")


def print_module(m: IrModule) -> str:
    out = [f"declare @{_fmt_name(name)}" for name in m.declared_externals]
    for f in m.functions:
        if out:
            out.append("")
        params = ", ".join(f"{ty} %{_fmt_name(n)}" if n else ty for n, ty in f.params)
        out.append(f"define @{_fmt_name(f.name)}({params}) {{")
        for b in f.blocks:
            out.append(f"{_fmt_name(b.label)}:")
            out.extend(f"  {i.raw_text}" for i in b.body)
            out.append(f"  {_print_terminator(b.terminator)}")
        out.append("}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# structural comparison

def structure(m: IrModule) -> tuple:
    """Reduce a module to what analysis depends on.

    Function names, block labels in order, terminator kind and targets, and
    the callee sequence of each block. Opaque operand text is ignored.
    """
    return (
        tuple(m.declared_externals),
        tuple(
            (f.name, tuple(
                (b.label, type(b.terminator).__name__, b.terminator.targets,
                 tuple(i.callee for i in b.body if i.kind is InstrKind.CALL))
                for b in f.blocks))
            for f in m.functions
        ),
    )


def structurally_equal(a: IrModule, b: IrModule) -> bool:
    return structure(a) == structure(b)
