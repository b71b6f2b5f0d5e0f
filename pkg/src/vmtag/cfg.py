"""Per-function control-flow graphs and the queries the detector needs."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

from .ir import IrFunction, IrModule

__all__ = ["UnknownBlock", "Cfg", "build_cfg", "cfg_from_edges", "out_degree",
           "reachable_from", "to_dot", "module_to_dot"]


class UnknownBlock(KeyError):
    def __init__(self, label: str):
        super().__init__(label)
        self.label = label

    def __str__(self):
        return f"unknown block %{self.label}"


@dataclass(frozen=True)
class Cfg:
    function_name: str
    nodes: tuple[str, ...]
    succ: Mapping[str, tuple[str, ...]]
    pred: Mapping[str, tuple[str, ...]]

    @property
    def entry(self) -> str:
        return self.nodes[0]

    def index(self, label: str) -> int:
        """Layout position of ``label``."""
        try:
            return self._order[label]
        except KeyError:
            raise UnknownBlock(label) from None

    @property
    def _order(self) -> dict[str, int]:
        order = self.__dict__.get("_order_cache")
        if order is None:
            order = {n: i for i, n in enumerate(self.nodes)}
            object.__setattr__(self, "_order_cache", order)
        return order

    def edges(self) -> list[tuple[str, str]]:
        return [(a, b) for a in self.nodes for b in self.succ[a]]


def cfg_from_edges(name: str, nodes: Iterable[str],
                   succ: Mapping[str, Iterable[str]]) -> Cfg:
    """Build a :class:`Cfg` from an adjacency map; duplicate edges collapse."""
    nodes = tuple(nodes)
    known = set(nodes)
    s = {}
    for n in nodes:
        targets = tuple(dict.fromkeys(succ.get(n, ())))
        for t in targets:
            if t not in known:
                raise UnknownBlock(t)
        s[n] = targets
    p: dict[str, list[str]] = {n: [] for n in nodes}
    for n in nodes:
        for t in s[n]:
            p[t].append(n)
    return Cfg(name, nodes, s, {n: tuple(v) for n, v in p.items()})


def build_cfg(f: IrFunction) -> Cfg:
    return cfg_from_edges(f.name, f.labels,
                          {b.label: b.terminator.targets for b in f.blocks})


def out_degree(g: Cfg, b: str) -> int:
    if b not in g.succ:
        raise UnknownBlock(b)
    return len(g.succ[b])


def reachable_from(g: Cfg, src: str) -> set[str]:
    """Labels reachable from ``src`` over one or more edges.

    ``src`` itself is included only when it lies on a cycle.
    """
    if src not in g.succ:
        raise UnknownBlock(src)
    seen: set[str] = set()
    work = deque(g.succ[src])
    while work:
        n = work.popleft()
        if n in seen:
            continue
        seen.add(n)
        work.extend(g.succ[n])
    return seen


def _dot_id(label: str) -> str:
    return '"' + label.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: Cfg) -> str:
    lines = [f"digraph {_dot_id(g.function_name)} {{"]
    lines += [f"  {_dot_id(n)};" for n in g.nodes]
    lines += [f"  {_dot_id(a)} -> {_dot_id(b)};" for a, b in g.edges()]
    lines.append("}")
    return "\n".join(lines) + "\n"


def module_to_dot(m: IrModule) -> str:
    return "".join(to_dot(build_cfg(f)) for f in m.functions)
