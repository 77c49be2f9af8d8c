import dataclasses
import logging
import typing

import networkx as nx

from ..errors import ModelError


logger = logging.getLogger("dbn")


LAG_SUFFIX = "@t-1"
NOW_SUFFIX = "@t"

PC_STABLE = "pc_stable"
MMHC = "mmhc"
SI_HITON = "si_hiton"

# also the tie-break order of structure selection
ALGORITHMS = (PC_STABLE, MMHC, SI_HITON)

Arc = typing.Tuple[str, str]


class DbnError(ModelError):

    def __init__(self, message: str, node: typing.Optional[str] = None) -> None:
        super().__init__(message)
        self.node = node


def lagged(variable: str) -> str:
    return variable + LAG_SUFFIX


def current(variable: str) -> str:
    return variable + NOW_SUFFIX


def is_lagged(node: str) -> bool:
    return node.endswith(LAG_SUFFIX)


def variable_of(node: str) -> str:
    if is_lagged(node):
        return node[:-len(LAG_SUFFIX)]

    if node.endswith(NOW_SUFFIX):
        return node[:-len(NOW_SUFFIX)]

    raise DbnError(f"'{node}' is not a slice-tagged node", node=node)


def legal_pair(a: str, b: str) -> bool:
    """Nodes that may be joined by an edge: not both in the lagged slice."""
    return a != b and not (is_lagged(a) and is_lagged(b))


def legal_arc(source: str, target: str) -> bool:
    return source != target and not is_lagged(target)


@dataclasses.dataclass(frozen=True)
class DbnStructure:
    nodes: typing.Tuple[str, ...]
    arcs: typing.Tuple[Arc, ...]
    algorithm_id: str
    ci_alpha: float

    def __post_init__(self) -> None:
        known = set(self.nodes)

        for source, target in self.arcs:
            if source not in known or target not in known:
                raise DbnError(f"Arc {source} -> {target} uses an unknown node", node=source if source not in known else target)

            if not legal_arc(source, target):
                raise DbnError(f"Arc {source} -> {target} points into the lagged slice or loops", node=target)

        if not nx.is_directed_acyclic_graph(self.graph()):
            raise DbnError(f"{self.algorithm_id} structure has a cycle in the current slice")

        object.__setattr__(self, "arcs", tuple(sorted(set(self.arcs))))

    @staticmethod
    def for_variables(variables: typing.Sequence[str], arcs: typing.Iterable[Arc], algorithm_id: str, ci_alpha: float) -> "DbnStructure":
        nodes = tuple(lagged(v) for v in variables) + tuple(current(v) for v in variables)
        return DbnStructure(nodes, tuple(arcs), algorithm_id, ci_alpha)

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    @property
    def current_nodes(self) -> typing.List[str]:
        return [n for n in self.nodes if not is_lagged(n)]

    def graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from(self.arcs)
        return graph

    def parents(self, node: str) -> typing.Tuple[str, ...]:
        return tuple(sorted(s for s, t in self.arcs if t == node))

    def topological_order(self) -> typing.List[str]:
        """Current-slice nodes, parents before children, ties by name."""
        graph = self.graph().subgraph(self.current_nodes)
        return list(nx.lexicographical_topological_sort(graph))

    def to_arc_list(self) -> str:
        return "".join(f"{source} -> {target}\n" for source, target in self.arcs)

    def __str__(self) -> str:
        return f"{self.algorithm_id}({self.n_arcs} arcs, ci_alpha={self.ci_alpha})"


def read_arc_list(text: str, variables: typing.Sequence[str], algorithm_id: str, ci_alpha: float) -> DbnStructure:
    arcs = []

    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue

        parts = [p.strip() for p in line.split("->")]
        if len(parts) != 2 or not all(parts):
            raise DbnError(f"Line {number} is not of the form 'from -> to': '{line}'")

        arcs.append((parts[0], parts[1]))

    return DbnStructure.for_variables(variables, arcs, algorithm_id, ci_alpha)
