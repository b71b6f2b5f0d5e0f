"""Parse a small switch-loop interpreter and look at its control flow graph."""
from vmtag import build_cfg, parse_module, print_module
from vmtag.cfg import out_degree, to_dot

SOURCE = """\
declare @putchar

define @run(i32 %op) {
entry:
  %vpc = alloca ptr
  br label %loop
loop:
  switch i32 %op, label %halt [ 0, label %inc 1, label %dec ]
inc:
  %a = add i32 %op, 1
  br label %loop
dec:
  %b = sub i32 %op, 1
  br label %loop
halt:
  call @putchar(i32 10)
  ret
}
"""

m = parse_module(SOURCE, "demo.vmir")
f = m.functions[0]
print(f"function @{f.name}: {len(f.blocks)} blocks, entry %{f.entry}")

g = build_cfg(f)
for label in g.nodes:
    print(f"  %{label:<5} out-degree {out_degree(g, label)}  -> {', '.join(g.succ[label]) or '-'}")

# the printer emits the same subset the parser accepts
assert parse_module(print_module(m)).functions == m.functions

print()
print(to_dot(g))
