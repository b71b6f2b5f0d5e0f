import random
from dataclasses import replace

import pytest

from vmtag.cfg import build_cfg, out_degree
from vmtag.detector import (DiagCode, VmEndMode, detect, detect_function,
                            find_dispatch_start, find_handlers, find_vm_end,
                            find_vm_start)
from vmtag.ir import IndirectBr, IrModule
from vmtag.synth import Mode, SynthConfig, generate

from conftest import has_path, parse

DIAMOND = """\
define @f(i1 %c) {
A:
  br i1 %c, label %B, label %C
B:
  br i1 %c, label %D, label %E
C:
  br label %D
D:
  br label %E
E:
  ret
}
"""


def _codes(diags):
    return [d.code for d in diags]


def _vm(m, truth):
    return next(r for r in detect(m) if r.function_name == truth.function_name)


def test_switch_dispatch_start():
    m, truth = generate(SynthConfig(mode=Mode.SWITCH, handler_count=12))
    g = build_cfg(m.function(truth.function_name))
    # independent max-scan over the terminators
    best = max(m.function(truth.function_name).blocks,
               key=lambda b: len(set(b.terminator.targets)))
    d, cands, diags = find_dispatch_start(g)
    assert d == best.label == truth.dispatch_label
    assert cands == (d,)
    assert out_degree(g, d) == 13
    assert diags == []


def test_single_block_is_degenerate():
    g = build_cfg(parse("define @f() {\n  ret\n}\n").functions[0])
    d, cands, diags = find_dispatch_start(g)
    assert d is None and cands == ()
    assert _codes(diags) == [DiagCode.DEGENERATE_FUNCTION]


def test_straight_line_has_no_dispatcher():
    g = build_cfg(parse("define @f() {\na:\n  br label %b\nb:\n  ret\n}\n").functions[0])
    d, _, diags = find_dispatch_start(g)
    assert d is None
    assert _codes(diags) == [DiagCode.NO_DISPATCHER]


def test_diamond_tie_picks_earliest():
    g = build_cfg(parse(DIAMOND).functions[0])
    degrees = {n: out_degree(g, n) for n in g.nodes}
    assert degrees == {"A": 2, "B": 2, "C": 1, "D": 1, "E": 0}
    d, cands, diags = find_dispatch_start(g)
    assert d == "A"
    assert cands == ("A", "B")
    assert _codes(diags) == [DiagCode.TIED_DISPATCHER]


def test_handlers_switch_with_default():
    m, truth = generate(SynthConfig(mode=Mode.SWITCH, handler_count=12))
    f = m.function(truth.function_name)
    sw = f.block(truth.dispatch_label).terminator
    textual = [sw.default_target] + [lbl for _, lbl in sw.cases]
    handlers = find_handlers(build_cfg(f), truth.dispatch_label)
    assert handlers == tuple(textual)
    assert len(handlers) == 13


def test_handlers_indirect_match_jump_table():
    m, truth = generate(SynthConfig(mode=Mode.INDIRECT, handler_count=9))
    f = m.function(truth.function_name)
    t = f.block(truth.dispatch_label).terminator
    assert isinstance(t, IndirectBr)
    assert find_handlers(build_cfg(f), truth.dispatch_label) == tuple(dict.fromkeys(t.possible_targets))


def test_self_loop_dispatch_is_its_own_handler():
    src = """\
define @f(i32 %x) {
entry:
  br label %D
D:
  switch i32 %x, label %D [ 0, label %H 1, label %X ]
H:
  br label %D
X:
  ret
}
"""
    r = detect(parse(src))[0]
    assert r.dispatch_start == "D"
    assert r.handlers == ("D", "H", "X")
    assert r.vm_start == "entry"
    assert r.vm_ends == ("X",)
    assert r.diagnostics == ()


def test_vm_start_and_exclusion_of_loop_back():
    m, truth = generate(SynthConfig())
    f = m.function(truth.function_name)
    g = build_cfg(f)
    handlers = find_handlers(g, truth.dispatch_label)
    start, cands, diags = find_vm_start(g, f, truth.dispatch_label, handlers)
    assert start == truth.vm_start_label
    assert cands == (truth.vm_start_label,)
    assert diags == []
    looping = [p for p in g.pred[truth.dispatch_label] if p in handlers]
    assert looping and not set(looping) & set(cands)


def test_vm_start_absent_when_entry_is_dispatcher():
    src = """\
define @f(i32 %x) {
D:
  switch i32 %x, label %H [ 0, label %X ]
H:
  br label %D
X:
  ret
}
"""
    r = detect(parse(src))[0]
    assert r.dispatch_start == "D"
    assert r.vm_start is None
    assert DiagCode.NO_VM_START in _codes(r.diagnostics)


def test_multiple_vm_starts():
    src = """\
define @f(i32 %x, i1 %c) {
entry:
  br i1 %c, label %S1, label %S2
S1:
  br label %D
S2:
  br label %D
D:
  switch i32 %x, label %H [ 0, label %X 1, label %H2 ]
H:
  br label %D
H2:
  br label %D
X:
  ret
}
"""
    r = detect(parse(src))[0]
    assert r.vm_start == "S1"
    assert r.vm_start_candidates == ("S1", "S2")
    assert _codes(r.diagnostics) == [DiagCode.MULTIPLE_VM_STARTS]


def test_call_clause_only_across_functions():
    src = """\
define @vm(i32 %x) {
D:
  switch i32 %x, label %H [ 0, label %X ]
H:
  br label %D
X:
  ret
}

define @caller() {
entry:
  call @vm(i32 0)
  br label %next
next:
  ret
}
"""
    m = parse(src)
    vm, caller = m.function("vm"), m.function("caller")
    g = build_cfg(vm)
    handlers = find_handlers(g, "D")
    start, cands, diags = find_vm_start(g, caller, "D", handlers)
    assert start == "entry" and cands == ("entry",)
    assert diags == []
    start, _, diags = find_vm_start(g, vm, "D", handlers)
    assert start is None and _codes(diags) == [DiagCode.NO_VM_START]


def test_exit_handler_is_vm_end():
    m, truth = generate(SynthConfig(exit_handler_count=1))
    r = _vm(m, truth)
    assert r.vm_ends == truth.vm_end_labels
    assert len(r.vm_ends) == 1


def test_all_handlers_loop_back_gives_no_vm_end():
    src = """\
define @f(i32 %x) {
entry:
  br label %D
D:
  switch i32 %x, label %A [ 0, label %B ]
A:
  br label %D
B:
  br label %D
}
"""
    r = detect(parse(src))[0]
    assert r.vm_ends == ()
    assert _codes(r.diagnostics) == [DiagCode.NO_VM_END]


def test_multi_block_handler_not_vm_end():
    src = """\
define @f(i32 %x) {
entry:
  br label %D
D:
  switch i32 %x, label %A [ 0, label %B 1, label %X ]
A:
  br label %A2
A2:
  br label %D
B:
  br label %D
X:
  ret
}
"""
    m = parse(src)
    g = build_cfg(m.functions[0])
    handlers = find_handlers(g, "D")
    assert "D" not in g.succ["A"]
    ends, _ = find_vm_end(g, "D", handlers)
    assert ends == ("X",)
    # the literal one-edge reading would also flag A
    ends, _ = find_vm_end(g, "D", handlers, VmEndMode.DIRECT)
    assert ends == ("A", "X")


def test_module_with_plain_functions():
    m, truth = generate(SynthConfig(extra_plain_functions=2))
    results = detect(m)
    assert [r.function_name for r in results] == [f.name for f in m.functions]
    assert len(results) == 3
    present = [r for r in results if r.dispatch_start is not None]
    assert len(present) == 1 and present[0].dispatch_out_degree > 2


def test_empty_module():
    assert detect(IrModule()) == []


@pytest.mark.parametrize("mode", list(Mode))
def test_all_modes_all_structures(mode):
    m, truth = generate(SynthConfig(mode=mode))
    r = _vm(m, truth)
    assert r.dispatch_start is not None
    assert r.handlers
    assert r.vm_start is not None
    assert r.vm_ends
    assert r.diagnostics == ()


def test_result_invariants(all_modules):
    for m in all_modules:
        for f, r in zip(m.functions, detect(m)):
            if r.dispatch_start is None:
                assert r.handlers == () and r.vm_ends == ()
                continue
            g = build_cfg(f)
            assert r.dispatch_start in r.dispatch_candidates
            assert out_degree(g, r.dispatch_start) == max(out_degree(g, n) for n in g.nodes)
            assert r.handlers == g.succ[r.dispatch_start]
            assert set(r.vm_ends) <= set(r.handlers)
            assert r.has(DiagCode.TIED_DISPATCHER) == (len(r.dispatch_candidates) > 1)
            if r.vm_start is not None:
                assert r.vm_start not in r.handlers
            for h in r.handlers:
                assert has_path(g.succ, h, r.dispatch_start) == (h not in r.vm_ends)


def test_deterministic(all_modules):
    for m in all_modules[:10]:
        assert detect(m) == detect(m)


def _permute(f, rng):
    rest = list(f.blocks[1:])
    rng.shuffle(rest)
    return replace(f, blocks=(f.blocks[0],) + tuple(rest))


def test_permutation_stability(corpus):
    rng = random.Random(3)
    for _, m, truth in corpus:
        f = m.function(truth.function_name)
        base = detect_function(f)
        assert len(base.dispatch_candidates) == 1 and len(base.vm_start_candidates) <= 1
        for _ in range(3):
            assert detect_function(_permute(f, rng)) == base


def test_tie_choice_follows_layout():
    f = parse(DIAMOND).functions[0]
    swapped = replace(f, blocks=(f.blocks[0], f.blocks[2], f.blocks[1]) + f.blocks[3:])
    assert detect_function(swapped).dispatch_start == "A"
    # with B first in layout, B wins the tie
    g = replace(f, blocks=(f.blocks[1], f.blocks[0]) + f.blocks[2:])
    assert detect_function(g).dispatch_start == "B"


def test_multi_block_handler_tail_is_not_vm_start():
    src = """\
define @f(i32 %x) {
entry:
  br label %D
D:
  switch i32 %x, label %A [ 0, label %X ]
A:
  br label %A2
A2:
  br label %D
X:
  ret
}
"""
    r = detect(parse(src))[0]
    assert "A2" in build_cfg(parse(src).functions[0]).pred["D"]
    assert r.vm_start == "entry"
    assert r.vm_start_candidates == ("entry",)
    assert r.diagnostics == ()
