import logging
import math
import typing

import numpy as np
from scipy import linalg

from .sliced import SlicedDataset
from .structure import ALGORITHMS, DbnError, DbnStructure, is_lagged


logger = logging.getLogger("dbn")


def node_design(columns: typing.Mapping[str, np.ndarray], parents: typing.Sequence[str], n: int) -> np.ndarray:
    return np.column_stack([np.ones(n)] + [columns[p] for p in parents])


class LocalAic:
    """Memoized AIC contribution of one current-slice node given its parents.

    The node is regressed on its parents with an intercept; the residual
    variance is the maximum-likelihood RSS / n. A rank-deficient design or a
    zero residual scores +inf.
    """

    def __init__(self, data: SlicedDataset) -> None:
        self.n = data.n_rows
        self.columns = dict(zip(data.nodes, data.matrix.T))
        self.diagnostics: typing.List[str] = []
        self._cache: typing.Dict[typing.Tuple[str, typing.Tuple[str, ...]], float] = {}

    def __call__(self, node: str, parents: typing.Iterable[str]) -> float:
        parents = tuple(sorted(parents))
        key = (node, parents)

        if key not in self._cache:
            self._cache[key] = self._score(node, parents)

        return self._cache[key]

    def _score(self, node, parents):
        design = node_design(self.columns, parents, self.n)
        y = self.columns[node]

        coefs, _, rank, _ = linalg.lstsq(design, y)

        if rank < design.shape[1]:
            return self._singular(node, f"design on {list(parents)} has rank {rank} of {design.shape[1]}")

        residuals = y - design @ coefs
        sigma2 = float(np.dot(residuals, residuals)) / self.n

        if not sigma2 > 0:
            return self._singular(node, "zero residual variance")

        loglik = -0.5 * self.n * (math.log(2 * math.pi * sigma2) + 1.0)
        k = len(parents) + 2

        return -2.0 * loglik + 2.0 * k

    def _singular(self, node, reason):
        message = f"Node {node} skipped in AIC: {reason}"
        logger.warning(message)
        self.diagnostics.append(message)
        return math.inf


def score_aic(structure: DbnStructure, data: SlicedDataset, local: typing.Optional[LocalAic] = None) -> float:
    """AIC = -2 logL + 2k over the regressions of the current-slice nodes.

    Lagged nodes are conditioned on and contribute nothing; lower is better.
    """
    local = local or LocalAic(data)

    if set(structure.nodes) != set(data.nodes):
        raise DbnError(f"{structure} does not cover the dataset's nodes")

    return float(sum(local(node, structure.parents(node)) for node in structure.nodes if not is_lagged(node)))


def select_structure(candidates: typing.Sequence[DbnStructure], data: SlicedDataset) -> DbnStructure:
    """Lowest AIC, then fewest arcs, then algorithm order."""
    if not candidates:
        raise DbnError("No candidate structures to select from")

    local = LocalAic(data)

    def rank(structure):
        order = ALGORITHMS.index(structure.algorithm_id) if structure.algorithm_id in ALGORITHMS else len(ALGORITHMS)
        return score_aic(structure, data, local), structure.n_arcs, order

    ranked = sorted(candidates, key=rank)

    for structure in ranked:
        logger.debug(f"{structure}: AIC {rank(structure)[0]:.3f}")

    return ranked[0]
