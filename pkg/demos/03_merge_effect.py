"""What block merging does to an interpreter loop.

Merging folds single-branch chains together. The VM-start block disappears
into the function entry and each exit handler absorbs its epilogue. The
dispatcher and handlers are untouched.
"""
from vmtag import SynthConfig, build_cfg, detect, generate, merge_transform
from vmtag.report import ROLES, primary_candidate, role_status

m, truth = generate(SynthConfig(handler_count=4))
merged = merge_transform(m)

before = m.function(truth.function_name)
after = merged.function(truth.function_name)
print(f"blocks: {len(before.blocks)} -> {len(after.blocks)}")
print(f"vm start %{truth.vm_start_label} still present: {truth.vm_start_label in after.labels}")

(exit_h,) = truth.vm_end_labels
print(f"exit handler %{exit_h} successors: {build_cfg(before).succ[exit_h]} -> "
      f"{build_cfg(after).succ[exit_h]}")

for name, mod in (("plain", m), ("merged", merged)):
    r = next(x for x in detect(mod) if x.function_name == truth.function_name)
    status = role_status(primary_candidate(detect(mod)))
    cells = " ".join(status[role].cell for role in ROLES)
    print(f"{name:<7} {cells}   vm_start=%{r.vm_start} vm_end={list(r.vm_ends)}")
