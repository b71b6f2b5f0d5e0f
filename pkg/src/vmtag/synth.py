"""Synthetic virtualized functions with known ground truth.

Three dispatch shapes are produced:

``switch``
    a switch-loop: the hub block loads the opcode at the virtual PC and
    switches on it; every handler branches back to the hub.
``direct``
    threaded code where each handler ends in the same computed goto on the
    handler address stored in the bytecode. The compiler funnels these into
    one shared ``indirectbr`` block, which is what we emit.
``indirect``
    like ``direct`` but the address comes from a jump table indexed by the
    opcode.

``merge_transform`` models the optimizer's block merging so the effect of
aggressive optimization on detection can be studied.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, replace
from typing import Optional

from .cfg import build_cfg
from .ir import (BasicBlock, Br, IndirectBr, Instruction, IrFunction,
                 IrModule, Ret, Switch, Unreachable, _classify, call)

__all__ = ["Mode", "InvalidConfig", "SynthConfig", "GroundTruth", "generate",
           "merge_transform"]


class Mode(str, enum.Enum):
    SWITCH = "switch"
    DIRECT = "direct"
    INDIRECT = "indirect"


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    mode: Mode = Mode.SWITCH
    handler_count: int = 12
    exit_handler_count: int = 1
    handler_body_blocks: int = 1
    seed: int = 7
    extra_plain_functions: int = 2
    funnel: bool = True

    def validate(self) -> None:
        try:
            Mode(self.mode)
        except ValueError:
            raise InvalidConfig(f"unknown mode {self.mode!r}") from None
        if self.handler_count < 2:
            raise InvalidConfig("handler_count must be >= 2")
        if not 1 <= self.exit_handler_count <= self.handler_count:
            raise InvalidConfig("exit_handler_count must be in [1, handler_count]")
        if self.handler_body_blocks < 1:
            raise InvalidConfig("handler_body_blocks must be >= 1")
        if self.seed < 0:
            raise InvalidConfig("seed must be unsigned")
        if self.extra_plain_functions < 0:
            raise InvalidConfig("extra_plain_functions must be >= 0")
        if not self.funnel:
            if Mode(self.mode) is Mode.SWITCH:
                raise InvalidConfig("funnel-less generation applies to threaded modes only")
            if self.exit_handler_count >= self.handler_count:
                raise InvalidConfig("funnel-less generation needs a non-exit handler")


@dataclass(frozen=True)
class GroundTruth:
    function_name: str
    dispatch_label: Optional[str]
    handler_labels: tuple[str, ...]
    vm_start_label: str
    vm_end_labels: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "function_name": self.function_name,
            "dispatch_label": self.dispatch_label,
            "handler_labels": list(self.handler_labels),
            "vm_start_label": self.vm_start_label,
            "vm_end_labels": list(self.vm_end_labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(d["function_name"], d["dispatch_label"], tuple(d["handler_labels"]),
                   d["vm_start_label"], tuple(d["vm_end_labels"]))


_OPS = ("add", "sub", "xor", "mul", "and", "or", "shl")


class _Emitter:
    """Per-function naming state: fresh labels and SSA temporaries."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.used: set[str] = set()
        self.tmp = 0

    def label(self) -> str:
        while True:
            lbl = f"L{self.rng.randrange(1 << 20):05x}"
            if lbl not in self.used:
                self.used.add(lbl)
                return lbl

    def temp(self) -> str:
        self.tmp += 1
        return f"%t{self.tmp}"

    def filler(self, n: int) -> list[Instruction]:
        out = []
        for _ in range(n):
            src, dst = self.temp(), self.temp()
            op = self.rng.choice(_OPS)
            k = self.rng.randrange(1, 256)
            out += [_opaque(f"{src} = load i32, ptr %acc"),
                    _opaque(f"{dst} = {op} i32 {src}, {k}"),
                    _opaque(f"store i32 {dst}, ptr %acc")]
        return out

    def advance_pc(self, step: int) -> list[Instruction]:
        pc, npc = self.temp(), self.temp()
        return [_opaque(f"{pc} = load ptr, ptr %vpc"),
                _opaque(f"{npc} = getelementptr i32, ptr {pc}, i32 {step}"),
                _opaque(f"store ptr {npc}, ptr %vpc")]


def _opaque(text: str) -> Instruction:
    # same classifier as the parser, so a reparse yields equal instructions
    return _classify(text)


def _hub(e: _Emitter, mode: Mode, label: str, targets: list[str],
         default: Optional[str], n: int) -> BasicBlock:
    pc, op = e.temp(), e.temp()
    body = [_opaque(f"{pc} = load ptr, ptr %vpc")]
    if mode is Mode.SWITCH:
        body.append(_opaque(f"{op} = load i32, ptr {pc}"))
        term = Switch(f"i32 {op}", default, tuple(enumerate(targets)))
    elif mode is Mode.DIRECT:
        addr = e.temp()
        body.append(_opaque(f"{addr} = load ptr, ptr {pc}"))
        term = IndirectBr(f"ptr {addr}", tuple(targets))
    else:
        slot, addr = e.temp(), e.temp()
        body += [_opaque(f"{op} = load i32, ptr {pc}"),
                 _opaque(f"{slot} = getelementptr [{n} x ptr], ptr @jumptab, i32 0, i32 {op}"),
                 _opaque(f"{addr} = load ptr, ptr {slot}")]
        term = IndirectBr(f"ptr {addr}", tuple(targets))
    return BasicBlock(label, tuple(body), term)


def _handler_chain(e: _Emitter, head: str, nblocks: int, exit_to: str) -> list[BasicBlock]:
    labels = [head] + [e.label() for _ in range(nblocks - 1)]
    blocks = []
    for i, lbl in enumerate(labels):
        body = e.filler(e.rng.randrange(1, 3))
        if i + 1 < len(labels):
            blocks.append(BasicBlock(lbl, tuple(body), Br(labels[i + 1])))
        else:
            body += e.advance_pc(e.rng.randrange(1, 4))
            blocks.append(BasicBlock(lbl, tuple(body), Br(exit_to)))
    return blocks


def _epilogue(e: _Emitter, label: str) -> BasicBlock:
    r = e.temp()
    body = (_opaque(f"{r} = load i32, ptr %acc"), call("putchar", f"i32 {r}"))
    return BasicBlock(label, body, Ret(f"i32 {r}"))


def _plain_function(rng: random.Random, name: str) -> IrFunction:
    e = _Emitter(rng)
    nblocks = rng.randrange(1, 4)
    labels = ["entry"] + [e.label() for _ in range(nblocks - 1)]
    blocks = []
    for i, lbl in enumerate(labels):
        body = ([_opaque("%acc = alloca i32")] if i == 0 else []) + e.filler(rng.randrange(1, 3))
        if i + 1 < nblocks:
            blocks.append(BasicBlock(lbl, tuple(body), Br(labels[i + 1])))
        else:
            r = e.temp()
            body += [_opaque(f"{r} = load i32, ptr %acc"), call("putchar", f"i32 {r}")]
            blocks.append(BasicBlock(lbl, tuple(body), Ret(f"i32 {r}")))
    return IrFunction(name, (("x", "i32"),), tuple(blocks))


def _virtualized_function(cfg: SynthConfig, rng: random.Random, name: str
                          ) -> tuple[IrFunction, GroundTruth]:
    mode = Mode(cfg.mode)
    e = _Emitter(rng)
    e.used.add("entry")
    vm_start, hub = e.label(), e.label()
    handlers = [e.label() for _ in range(cfg.handler_count)]   # opcode order
    exits = set(rng.sample(handlers, cfg.exit_handler_count))
    exit_order = [h for h in handlers if h in exits]
    epilogues = {h: e.label() for h in exit_order}
    default = e.label() if mode is Mode.SWITCH else None

    prologue = BasicBlock("entry", (
        _opaque("%vpc = alloca ptr"),
        _opaque("%acc = alloca i32"),
        _opaque("store i32 0, ptr %acc"),
    ), Br(vm_start))

    if cfg.funnel:
        start_block = BasicBlock(vm_start, (
            _opaque("store ptr @bytecode, ptr %vpc"),
        ), Br(hub))
        hub_block = _hub(e, mode, hub, handlers, default, cfg.handler_count)
        chains = {h: _handler_chain(e, h, cfg.handler_body_blocks,
                                    epilogues.get(h, hub)) for h in handlers}
    else:
        # threaded code without a shared dispatch block: the initial jump and
        # every non-exit handler end in their own computed goto
        def dispatching(block: BasicBlock) -> BasicBlock:
            goto = _hub(e, mode, block.label, handlers, None, cfg.handler_count)
            return BasicBlock(block.label, block.body + goto.body, goto.terminator)

        start_block = dispatching(BasicBlock(vm_start, (
            _opaque("store ptr @bytecode, ptr %vpc"),
        ), Unreachable()))
        hub_block = None
        chains = {}
        for h in handlers:
            if h in exits:
                continue
            chain = _handler_chain(e, h, cfg.handler_body_blocks, h)
            chain[-1] = dispatching(chain[-1])
            chains[h] = chain
        for h in exit_order:
            chains[h] = _handler_chain(e, h, cfg.handler_body_blocks, epilogues[h])

    layout = list(handlers)
    rng.shuffle(layout)
    blocks = [prologue, start_block] + ([hub_block] if hub_block else [])
    for h in layout:
        blocks += chains[h]
        if h in epilogues:
            blocks.append(_epilogue(e, epilogues[h]))
    if default is not None:
        blocks.append(BasicBlock(default, tuple(e.filler(1)), Br(hub)))

    f = IrFunction(name, (("argc", "i32"),), tuple(blocks))
    if cfg.funnel:
        succ = ([default] if default else []) + handlers
        truth = GroundTruth(name, hub, tuple(succ), vm_start, tuple(exit_order))
    else:
        truth = GroundTruth(name, None, tuple(handlers), vm_start, tuple(exit_order))
    return f, truth


def generate(cfg: SynthConfig) -> tuple[IrModule, GroundTruth]:
    """Build a module holding one virtualized function plus plain functions."""
    cfg.validate()
    rng = random.Random(cfg.seed)
    vm_name = f"_{cfg.seed}_vm_main"
    vm_func, truth = _virtualized_function(cfg, rng, vm_name)
    plain = [_plain_function(rng, f"plain_{i}") for i in range(cfg.extra_plain_functions)]
    pos = rng.randrange(len(plain) + 1)
    functions = plain[:pos] + [vm_func] + plain[pos:]
    m = IrModule(f"synth-{Mode(cfg.mode).value}-{cfg.seed}.vmir", tuple(functions),
                 ("putchar",))
    return m, truth


# --------------------------------------------------------------------------
# optimizer model

def _merge_function(f: IrFunction) -> IrFunction:
    g = build_cfg(f)
    blocks = {b.label: b for b in f.blocks}
    entry = f.entry

    def absorbable(b: str) -> Optional[str]:
        """Return the block ``b`` would fold into, if any."""
        if b == entry or len(g.pred[b]) != 1:
            return None
        a = g.pred[b][0]
        if a == b or not isinstance(blocks[a].terminator, Br):
            return None
        return a

    absorbed: set[str] = set()
    merged: dict[str, BasicBlock] = {}

    def grow(head: str) -> None:
        body = list(blocks[head].body)
        tail = head
        while True:
            t = blocks[tail].terminator
            if not isinstance(t, Br):
                break
            nxt = t.target
            if nxt == head or nxt in absorbed or absorbable(nxt) != tail:
                break
            absorbed.add(nxt)
            body += blocks[nxt].body
            tail = nxt
        merged[head] = BasicBlock(head, tuple(body), blocks[tail].terminator)

    for lbl in f.labels:
        if absorbable(lbl) is None:
            grow(lbl)
    # cycles made only of foldable blocks have no natural head
    for lbl in f.labels:
        if lbl not in merged and lbl not in absorbed:
            grow(lbl)

    out = tuple(merged[lbl] for lbl in f.labels if lbl in merged)
    return f if len(out) == len(f.blocks) else replace(f, blocks=out)


def merge_transform(m: IrModule) -> IrModule:
    """Fold every single-successor/single-predecessor ``br`` pair until fixpoint.

    The surviving block keeps the first block's label and the second block's
    terminator. The entry block never folds into a predecessor.
    """
    functions = tuple(_merge_function(f) for f in m.functions)
    return replace(m, functions=functions)
