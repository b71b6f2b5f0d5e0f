import pytest

from vmtag.annotator import MarkerCollision, MarkerSpec, annotate, strip_markers
from vmtag.cfg import build_cfg
from vmtag.detector import detect
from vmtag.ir import InstrKind, call, parse_module, print_module
from vmtag.synth import SynthConfig, generate

from conftest import parse


def _first_calls(block, n):
    return [i.callee for i in block.body[:n] if i.kind is InstrKind.CALL]


def test_dispatch_marker_is_first_instruction():
    m, truth = generate(SynthConfig())
    out = print_module(annotate(m, detect(m)))
    lines = out.splitlines()
    i = lines.index(f"{truth.dispatch_label}:")
    assert lines[i + 1] == "  call @__vmtag_dispatch_start()"
    i = lines.index(f"{truth.vm_start_label}:")
    assert lines[i + 1] == "  call @__vmtag_vm_start()"
    assert "declare @__vmtag_handler" in lines


def test_handler_ordinals_follow_successor_order():
    m, truth = generate(SynthConfig(handler_count=5))
    a = annotate(m, detect(m))
    f = a.function(truth.function_name)
    for i, h in enumerate(truth.handler_labels):
        first = f.block(h).body[0]
        assert first.callee == "__vmtag_handler"
        assert first.raw_text == f"call @__vmtag_handler(i32 {i})"
        assert first.arg_count == 1


def test_handler_and_vm_end_order():
    m, truth = generate(SynthConfig(exit_handler_count=1))
    a = annotate(m, detect(m))
    (end,) = truth.vm_end_labels
    block = a.function(truth.function_name).block(end)
    assert _first_calls(block, 2) == ["__vmtag_handler", "__vmtag_vm_end"]


def test_dispatch_self_successor_gets_both_markers():
    src = ("define @f(i32 %x) {\nentry:\n  br label %D\nD:\n"
           "  switch i32 %x, label %D [ 0, label %X ]\nX:\n  ret\n}\n")
    m = parse(src)
    a = annotate(m, detect(m))
    assert _first_calls(a.functions[0].block("D"), 2) == ["__vmtag_dispatch_start",
                                                          "__vmtag_handler"]


def test_no_structures_is_identity():
    m = parse("declare @g\ndefine @f() {\na:\n  call @g()\n  br label %b\nb:\n  ret\n}\n")
    a = annotate(m, detect(m))
    assert a == m
    assert print_module(a) == print_module(m)


def test_marker_collision():
    m, _ = generate(SynthConfig())
    with pytest.raises(MarkerCollision):
        annotate(m, detect(m), MarkerSpec(handler_marker="putchar"))
    with pytest.raises(MarkerCollision):
        annotate(m, detect(m), MarkerSpec(vm_end_marker="__vmtag_vm_start"))
    a = annotate(m, detect(m))
    with pytest.raises(MarkerCollision):
        annotate(a, detect(a))


def test_prefix():
    spec = MarkerSpec.with_prefix("__x")
    assert all(n.startswith("__x") for n in spec.names)


def test_strip_unannotated_is_identity():
    m, _ = generate(SynthConfig())
    assert strip_markers(m) == m


def test_strip_removes_duplicates():
    m = parse("define @f() {\na:\n  %x = add i32 1, 2\n  ret\n}\n")
    f = m.functions[0]
    b = f.blocks[0]
    dup = b.__class__(b.label, (call("__vmtag_vm_end"), call("__vmtag_vm_end")) + b.body,
                      b.terminator)
    m2 = m.__class__(m.source_name, (f.__class__(f.name, f.params, (dup,)),),
                     ("__vmtag_vm_end",))
    assert strip_markers(m2) == m


def test_round_trip_and_preservation(all_modules):
    for m in all_modules:
        results = detect(m)
        a = annotate(m, results)
        assert strip_markers(a) == m
        for f, fa in zip(m.functions, a.functions):
            assert build_cfg(f) == build_cfg(fa)
            assert [b.terminator for b in f.blocks] == [b.terminator for b in fa.blocks]
        assert detect(a) == results
        # printed annotated text is still valid input
        assert parse_module(print_module(a)).functions == a.functions
