"""Insert marker calls at the detected blocks, then remove them again."""
from vmtag import SynthConfig, annotate, detect, generate, print_module, strip_markers
from vmtag.annotator import MarkerSpec

m, truth = generate(SynthConfig(handler_count=3, extra_plain_functions=0))
results = detect(m)
spec = MarkerSpec.with_prefix("__demo")
annotated = annotate(m, results, spec)

text = print_module(annotated)
for line in text.splitlines():
    if line.startswith("declare") or "__demo" in line or line.endswith(":"):
        print(line)

# markers are calls to undefined externals: the CFG and detection are unchanged
assert detect(annotated) == results
assert strip_markers(annotated, spec) == m
print("\nstrip(annotate(m)) == m")
