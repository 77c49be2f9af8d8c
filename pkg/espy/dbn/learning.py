"""Structure learning for two-slice networks.

Nodes are ``<variable>@t-1`` (lagged slice) and ``<variable>@t`` (current
slice). Edges between two lagged nodes are never considered, and arcs always
point out of the lagged slice. All iteration runs over name-sorted nodes, so
a learner's output does not depend on the column order of the panel.
"""

import itertools
import logging
import typing

import networkx as nx

from .citest import FisherZTest
from .scoring import LocalAic
from .sliced import SlicedDataset
from .structure import MMHC, PC_STABLE, SI_HITON, DbnStructure, is_lagged, legal_arc, legal_pair


logger = logging.getLogger("dbn")


Edge = typing.FrozenSet[str]
SepSets = typing.Dict[Edge, typing.Tuple[str, ...]]


def _subsets(pool: typing.Sequence[str], max_size: int) -> typing.Iterator[typing.Tuple[str, ...]]:
    pool = sorted(pool)
    for size in range(min(max_size, len(pool)) + 1):
        yield from itertools.combinations(pool, size)


def _separating_set(test: FisherZTest, x: str, y: str, pool: typing.Iterable[str]) -> typing.Optional[typing.Tuple[str, ...]]:
    for z in _subsets([n for n in pool if n not in (x, y)], test.max_cond_size):
        if test.independent(x, y, z):
            return z

    return None


def pc_stable_skeleton(nodes: typing.Sequence[str], test: FisherZTest) -> typing.Tuple[typing.Dict[str, typing.Set[str]], SepSets]:
    """Level-wise edge removal. Conditioning sets at each level come from the
    adjacencies frozen at the start of that level, and both endpoints'
    neighbourhoods are searched."""
    nodes = sorted(nodes)
    adjacent = {n: {m for m in nodes if legal_pair(n, m)} for n in nodes}
    sepsets: SepSets = {}

    level = 0
    while level <= test.max_cond_size:
        frozen = {n: sorted(adjacent[n]) for n in nodes}

        if not any(len(frozen[n]) - 1 >= level for n in nodes):
            break

        removals = []
        for x in nodes:
            for y in frozen[x]:
                if y < x:
                    continue

                for a, b in ((x, y), (y, x)):
                    pool = [n for n in frozen[a] if n != b]
                    if len(pool) < level:
                        continue

                    found = next((z for z in itertools.combinations(pool, level) if test.independent(a, b, z)), None)

                    if found is not None:
                        sepsets[frozenset((x, y))] = found
                        removals.append((x, y))
                        break

        for x, y in removals:
            adjacent[x].discard(y)
            adjacent[y].discard(x)

        logger.debug(f"PC-Stable level {level}: removed {len(removals)} edges")
        level += 1

    return adjacent, sepsets


class _PartialGraph:
    """Mixed graph of directed arcs and undirected edges used while orienting."""

    def __init__(self, adjacent: typing.Mapping[str, typing.Set[str]]) -> None:
        self.nodes = sorted(adjacent)
        self.undirected: typing.Set[Edge] = {frozenset((a, b)) for a in adjacent for b in adjacent[a]}
        self.directed = nx.DiGraph()
        self.directed.add_nodes_from(self.nodes)

    def adjacent(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.undirected or self.directed.has_edge(a, b) or self.directed.has_edge(b, a)

    def is_undirected(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.undirected

    def neighbours(self, a: str) -> typing.List[str]:
        return sorted(n for n in self.nodes if self.is_undirected(a, n))

    def can_orient(self, a: str, b: str) -> bool:
        return legal_arc(a, b) and not nx.has_path(self.directed, b, a)

    def orient(self, a: str, b: str) -> bool:
        if not self.is_undirected(a, b) or not self.can_orient(a, b):
            return False

        self.undirected.discard(frozenset((a, b)))
        self.directed.add_edge(a, b)

        return True


def orient(adjacent: typing.Mapping[str, typing.Set[str]],
           sepsets: SepSets,
           test: typing.Optional[FisherZTest] = None) -> typing.List[typing.Tuple[str, str]]:
    """Orients a skeleton: colliders first, then every cross-slice edge
    forward in time, then Meek's rules, then whatever is left in the order of
    a topological sort. Collider candidates with no recorded separating set
    get one searched for when ``test`` is given."""
    graph = _PartialGraph(adjacent)

    for z in graph.nodes:
        if is_lagged(z):
            continue

        for x, y in itertools.combinations(sorted(adjacent[z]), 2):
            if graph.adjacent(x, y) or not legal_pair(x, y):
                continue

            key = frozenset((x, y))
            if key not in sepsets and test is not None:
                found = _separating_set(test, x, y, set(adjacent[x]) | set(adjacent[y]))
                if found is not None:
                    sepsets[key] = found

            if key not in sepsets or z in sepsets[key]:
                continue

            # each side must already point into z or be orientable into it
            sides = [w for w in (x, y) if not graph.directed.has_edge(w, z)]
            if all(graph.is_undirected(w, z) and graph.can_orient(w, z) for w in sides):
                for w in sides:
                    graph.orient(w, z)
            else:
                logger.debug(f"Collider {x} -> {z} <- {y} conflicts with earlier orientations")

    for edge in sorted(graph.undirected, key=sorted):
        a, b = sorted(edge)
        if is_lagged(a) != is_lagged(b):
            source, target = (a, b) if is_lagged(a) else (b, a)
            graph.orient(source, target)

    _apply_meek_rules(graph)

    order = {n: i for i, n in enumerate(nx.lexicographical_topological_sort(graph.directed))}
    for edge in sorted(graph.undirected, key=sorted):
        a, b = sorted(edge, key=lambda n: order[n])
        graph.orient(a, b)

    return sorted(graph.directed.edges())


def _apply_meek_rules(graph: _PartialGraph) -> None:
    changed = True

    while changed:
        changed = False

        for edge in sorted(graph.undirected, key=sorted):
            a, b = sorted(edge)

            for x, y in ((a, b), (b, a)):
                if not graph.is_undirected(x, y):
                    break

                # incoming arc from a node not adjacent to y
                rule1 = any(not graph.adjacent(w, y) for w in graph.directed.predecessors(x) if w != y)

                # directed path x -> w -> y
                rule2 = any(graph.directed.has_edge(w, y) for w in graph.directed.successors(x))

                # two non-adjacent neighbours of x that both point into y
                into_y = [w for w in graph.neighbours(x) if graph.directed.has_edge(w, y)]
                rule3 = any(not graph.adjacent(c, d) for c, d in itertools.combinations(into_y, 2))

                if (rule1 or rule2 or rule3) and graph.orient(x, y):
                    changed = True
                    break


def _symmetric(pc: typing.Mapping[str, typing.Set[str]]) -> typing.Dict[str, typing.Set[str]]:
    return {n: {m for m in pc[n] if n in pc.get(m, set())} for n in pc}


def learn_pc_stable(data: SlicedDataset, ci_alpha: float = 0.05, max_cond_size: int = 3) -> DbnStructure:
    test = FisherZTest(data, ci_alpha, max_cond_size)

    adjacent, sepsets = pc_stable_skeleton(data.nodes, test)
    arcs = orient(adjacent, sepsets)

    logger.debug(f"PC-Stable: {len(arcs)} arcs after {test.n_tests} tests")

    return DbnStructure(data.nodes, tuple(arcs), PC_STABLE, ci_alpha)


def max_min_parents_children(target: str, nodes: typing.Sequence[str], test: FisherZTest) -> typing.Set[str]:
    """Forward admission by maximum minimum association, then backward
    removal of members separated from the target by a subset of the rest."""
    candidates = sorted(n for n in nodes if legal_pair(target, n))
    members: typing.List[str] = []

    while candidates:
        min_assoc = {x: min(test.association(target, x, z) for z in _subsets(members, test.max_cond_size))
                     for x in candidates}

        candidates = [x for x in candidates if min_assoc[x] > 0]
        if not candidates:
            break

        # first maximum of the name-sorted candidates
        best = max(candidates, key=lambda x: min_assoc[x])
        members.append(best)
        candidates.remove(best)

    for x in list(members):
        rest = [m for m in members if m != x]
        if any(test.independent(target, x, z) for z in _subsets(rest, test.max_cond_size)):
            members.remove(x)

    return set(members)


def hill_climb(candidate_arcs: typing.Iterable[typing.Tuple[str, str]],
               nodes: typing.Sequence[str],
               local: LocalAic,
               max_steps: int = 10000) -> typing.List[typing.Tuple[str, str]]:
    """Greedy add/delete/reverse search from the empty graph, restricted to
    ``candidate_arcs``. Only strictly AIC-decreasing moves are taken."""
    candidates = sorted(set(candidate_arcs))
    graph = nx.DiGraph()
    graph.add_nodes_from(nodes)

    def parents(node):
        return tuple(sorted(graph.predecessors(node)))

    for _ in range(max_steps):
        best_delta, best_move = 0.0, None

        for source, target in candidates:
            if graph.has_edge(source, target):
                delta = local(target, tuple(p for p in parents(target) if p != source)) - local(target, parents(target))
                moves = [(delta, ("delete", source, target))]

                if (target, source) in candidates and legal_arc(target, source):
                    graph.remove_edge(source, target)
                    acyclic = not nx.has_path(graph, source, target)
                    graph.add_edge(source, target)

                    if acyclic:
                        delta = (local(target, tuple(p for p in parents(target) if p != source)) - local(target, parents(target))
                                 + local(source, parents(source) + (target,)) - local(source, parents(source)))
                        moves.append((delta, ("reverse", source, target)))
            elif not graph.has_edge(target, source) and not nx.has_path(graph, target, source):
                delta = local(target, parents(target) + (source,)) - local(target, parents(target))
                moves = [(delta, ("add", source, target))]
            else:
                continue

            for delta, move in moves:
                if delta < best_delta:
                    best_delta, best_move = delta, move

        if best_move is None:
            break

        kind, source, target = best_move
        if kind == "add":
            graph.add_edge(source, target)
        elif kind == "delete":
            graph.remove_edge(source, target)
        else:
            graph.remove_edge(source, target)
            graph.add_edge(target, source)

        logger.debug(f"Hill climb: {kind} {source} -> {target} ({best_delta:+.3f})")

    return sorted(graph.edges())


def learn_mmhc(data: SlicedDataset, ci_alpha: float = 0.05, max_cond_size: int = 3) -> DbnStructure:
    test = FisherZTest(data, ci_alpha, max_cond_size)

    pc = _symmetric({n: max_min_parents_children(n, data.nodes, test) for n in data.nodes})
    candidate_arcs = [(a, b) for a in pc for b in pc[a] if legal_arc(a, b)]

    arcs = hill_climb(candidate_arcs, data.nodes, LocalAic(data))

    logger.debug(f"MMHC: {len(arcs)} arcs from {len(candidate_arcs)} candidates after {test.n_tests} tests")

    return DbnStructure(data.nodes, tuple(arcs), MMHC, ci_alpha)


def semi_interleaved_hiton_pc(target: str, nodes: typing.Sequence[str], test: FisherZTest,
                              sepsets: typing.Optional[SepSets] = None) -> typing.Set[str]:
    """Admits candidates in order of decreasing marginal association; each
    admission is checked against subsets of the current members, and a final
    pass re-checks every member."""
    sepsets = sepsets if sepsets is not None else {}

    associated = [n for n in sorted(nodes) if legal_pair(target, n) and test.association(target, n) > 0]
    associated.sort(key=lambda n: -test.association(target, n))

    members: typing.List[str] = []

    def eliminated(x):
        rest = [m for m in members if m != x]
        z = next((z for z in _subsets(rest, test.max_cond_size) if test.independent(target, x, z)), None)
        if z is not None:
            sepsets[frozenset((target, x))] = z
            return True

        return False

    for x in associated:
        members.append(x)
        if eliminated(x):
            members.remove(x)

    for x in list(members):
        if eliminated(x):
            members.remove(x)

    for n in sorted(nodes):
        if legal_pair(target, n) and n not in associated:
            sepsets.setdefault(frozenset((target, n)), ())

    return set(members)


def learn_si_hiton_pc(data: SlicedDataset, ci_alpha: float = 0.05, max_cond_size: int = 3) -> DbnStructure:
    test = FisherZTest(data, ci_alpha, max_cond_size)
    sepsets: SepSets = {}

    pc = {n: semi_interleaved_hiton_pc(n, data.nodes, test, sepsets) for n in data.nodes}
    adjacent = _symmetric(pc)

    for n in adjacent:
        for m in adjacent[n]:
            sepsets.pop(frozenset((n, m)), None)

    arcs = orient(adjacent, sepsets, test)

    logger.debug(f"SI-HITON-PC: {len(arcs)} arcs after {test.n_tests} tests")

    return DbnStructure(data.nodes, tuple(arcs), SI_HITON, ci_alpha)


LEARNERS = {
    PC_STABLE: learn_pc_stable,
    MMHC: learn_mmhc,
    SI_HITON: learn_si_hiton_pc,
}
