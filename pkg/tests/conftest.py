import random
from collections import deque

import pytest

from vmtag.ir import parse_module
from vmtag.synth import Mode, SynthConfig, generate, merge_transform


def bfs_reach(succ, src):
    """Independent reachability: plain BFS over an adjacency dict."""
    seen = set()
    q = deque(succ[src])
    while q:
        n = q.popleft()
        if n not in seen:
            seen.add(n)
            q.extend(succ[n])
    return seen


def closure(nodes, succ):
    """Transitive closure by repeated edge relaxation until nothing changes."""
    reach = {n: set(succ[n]) for n in nodes}
    changed = True
    while changed:
        changed = False
        for a in nodes:
            for b in list(reach[a]):
                extra = reach[b] - reach[a]
                if extra:
                    reach[a] |= extra
                    changed = True
    return reach


def has_path(succ, src, dst):
    """Depth-first path search, src -> dst over >= 1 edge."""
    stack, seen = list(succ[src]), set()
    while stack:
        n = stack.pop()
        if n == dst:
            return True
        if n not in seen:
            seen.add(n)
            stack.extend(succ[n])
    return False


def random_succ(rng, n_nodes, p=0.25):
    nodes = [f"n{i}" for i in range(n_nodes)]
    succ = {a: [b for b in nodes if rng.random() < p] for a in nodes}
    return nodes, succ


def fuzz_configs(count=200, seed=1234):
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        handlers = rng.randint(2, 64)
        out.append(SynthConfig(mode=rng.choice(list(Mode)),
                               handler_count=handlers,
                               exit_handler_count=min(rng.randint(1, 3), handlers),
                               handler_body_blocks=rng.randint(1, 4),
                               seed=rng.randrange(2 ** 32),
                               extra_plain_functions=rng.randint(0, 3)))
    return out


CORPUS_CONFIGS = (
    [SynthConfig(mode=m) for m in Mode]
    + [SynthConfig(mode=m, handler_count=h, exit_handler_count=e, handler_body_blocks=b, seed=s)
       for m in Mode for (h, e, b, s) in [(2, 1, 1, 0), (5, 2, 3, 11), (20, 3, 2, 99)]]
    + fuzz_configs(30, seed=77)
)


@pytest.fixture(scope="session")
def corpus():
    """(config, module, truth) for a spread of generated modules."""
    return [(c, *generate(c)) for c in CORPUS_CONFIGS]


@pytest.fixture(scope="session")
def all_modules(corpus):
    """Every corpus module, un-merged and merged."""
    out = []
    for _, m, _ in corpus:
        out += [m, merge_transform(m)]
    return out


def parse(text):
    return parse_module(text, "<test>")
