"""Generate one module per dispatch style and run detection on each."""
from vmtag import SynthConfig, detect, generate
from vmtag.synth import Mode

for mode in Mode:
    m, truth = generate(SynthConfig(mode=mode, handler_count=6))
    r = next(x for x in detect(m) if x.function_name == truth.function_name)
    print(f"{mode.value}:")
    print(f"  dispatch start  %{r.dispatch_start} (out-degree {r.dispatch_out_degree})")
    print(f"  handlers        {len(r.handlers)}")
    print(f"  vm start        %{r.vm_start}")
    print(f"  vm end          {', '.join('%' + h for h in r.vm_ends)}")
    same = (r.dispatch_start, r.handlers, r.vm_start, r.vm_ends) == (
        truth.dispatch_label, truth.handler_labels, truth.vm_start_label, truth.vm_end_labels)
    print(f"  matches ground truth: {same}")

# without the shared dispatch block every handler carries its own computed
# goto, and no single block stands out
m, truth = generate(SynthConfig(mode=Mode.DIRECT, handler_count=6, funnel=False))
r = next(x for x in detect(m) if x.function_name == truth.function_name)
print("direct, no funnel:")
print(f"  {len(r.dispatch_candidates)} tied candidates, diagnostics:",
      [d.code.value for d in r.diagnostics])
