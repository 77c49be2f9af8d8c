import dataclasses
import logging
import typing

import networkx as nx
import numpy as np
from scipy import linalg

from ..data import AlignedPanel
from .learning import LEARNERS
from .scoring import node_design, select_structure
from .sliced import SlicedDataset, make_sliced
from .structure import DbnError, DbnStructure, current, is_lagged, variable_of


logger = logging.getLogger("dbn")


RIDGE = 1e-8

# floor for an exactly fitted node
_MIN_RESIDUAL_VARIANCE = np.finfo(float).tiny


@dataclasses.dataclass(frozen=True)
class NodeParams:
    parents: typing.Tuple[str, ...]
    coefficients: np.ndarray
    intercept: float
    residual_variance: float
    ridge: bool = False

    def mean(self, parent_values: typing.Sequence[float]) -> float:
        return float(self.intercept + np.dot(self.coefficients, parent_values))


@dataclasses.dataclass(frozen=True)
class DbnModel:
    """Linear-Gaussian parameters of a structure, in standardized units.

    ``means`` and ``stds`` map each variable back to raw units.
    """

    structure: DbnStructure
    params: typing.Dict[str, NodeParams]
    means: typing.Dict[str, float]
    stds: typing.Dict[str, float]

    @property
    def flagged_nodes(self) -> typing.List[str]:
        return [node for node, p in self.params.items() if p.ridge]


def fit_linear_gaussian(structure: DbnStructure, data: SlicedDataset) -> DbnModel:
    columns = dict(zip(data.nodes, data.matrix.T))
    n = data.n_rows
    params = {}

    for node in structure.current_nodes:
        parents = structure.parents(node)
        design = node_design(columns, parents, n)
        y = columns[node]
        dof = n - len(parents) - 1

        if dof <= 0:
            raise DbnError(f"{n} rows cannot fit {len(parents)} parents", node=node)

        coefs, _, rank, _ = linalg.lstsq(design, y)
        ridge = rank < design.shape[1]

        if ridge:
            logger.warning(f"Singular design for {node} on {list(parents)}: ridge fallback")
            gram = design.T @ design + RIDGE * np.eye(design.shape[1])
            coefs = linalg.solve(gram, design.T @ y, assume_a="pos")

        residuals = y - design @ coefs
        residual_variance = max(float(np.dot(residuals, residuals)) / dof, _MIN_RESIDUAL_VARIANCE)

        params[node] = NodeParams(parents, coefs[1:].copy(), float(coefs[0]), residual_variance, ridge)

    return DbnModel(
        structure=structure,
        params=params,
        means=dict(zip(data.variables, data.means.tolist())),
        stds=dict(zip(data.variables, data.stds.tolist()))
    )


def forecast_one_day(model: DbnModel, evidence: typing.Mapping[str, float], target: str) -> float:
    """Conditional mean of ``target`` on the next day, in raw units.

    ``evidence`` holds the latest raw value of each variable (the lagged
    slice). Current-slice ancestors of the target are evaluated in
    topological order from their own conditional means.
    """
    target_node = current(target)

    if target_node not in model.params:
        raise DbnError(f"'{target}' is not a variable of the model", node=target_node)

    needed = nx.ancestors(model.structure.graph(), target_node) | {target_node}
    values: typing.Dict[str, float] = {}

    for node in needed:
        if not is_lagged(node):
            continue

        variable = variable_of(node)
        if variable not in evidence or not np.isfinite(evidence[variable]):
            raise DbnError(f"No evidence for parent {node} of {target_node}", node=node)

        values[node] = (float(evidence[variable]) - model.means[variable]) / model.stds[variable]

    for node in model.structure.topological_order():
        if node in needed:
            p = model.params[node]
            values[node] = p.mean([values[parent] for parent in p.parents])

    return values[target_node] * model.stds[target] + model.means[target]



class DbnForecaster:
    """One-day-ahead target forecasts for one learning algorithm.

    The structure is relearned every ``relearn_every`` forecasts, keeping the
    minimum-AIC structure over the candidate significance levels; parameters
    are refitted on every call.
    """

    def __init__(self,
                 algorithm: str,
                 target: str,
                 window_len: int,
                 ci_alphas: typing.Sequence[float] = (0.05,),
                 max_cond_size: int = 3,
                 relearn_every: int = 21) -> None:
        if algorithm not in LEARNERS:
            raise DbnError(f"Unknown structure learner '{algorithm}'")

        self.algorithm = algorithm
        self.target = target
        self.window_len = window_len
        self.ci_alphas = tuple(sorted(set(ci_alphas)))
        self.max_cond_size = max_cond_size
        self.relearn_every = relearn_every

        self.structure: typing.Optional[DbnStructure] = None
        self._since_relearn = 0
        self.left_out: typing.Tuple[str, ...] = ()

    def learn(self, data: SlicedDataset) -> DbnStructure:
        learner = LEARNERS[self.algorithm]
        candidates = [learner(data, ci_alpha, self.max_cond_size) for ci_alpha in self.ci_alphas]

        return select_structure(candidates, data)

    def forecast(self, panel: AlignedPanel, position: int) -> typing.Tuple[float, bool]:
        """Log return of the target from row ``position - 1`` to the
        forecast for row ``position``, trained on the ``window_len`` rows
        before ``position``. Also tells whether the structure was relearned."""
        if position < self.window_len:
            raise DbnError(f"Row {position} has fewer than {self.window_len} rows of history")

        panel = self._complete_columns(panel, position)
        data = make_sliced(panel, position - self.window_len, position)

        relearned = (self.structure is None
                     or self._since_relearn >= self.relearn_every
                     or set(self.structure.nodes) != set(data.nodes))
        if relearned:
            self.structure = self.learn(data)
            self._since_relearn = 0
            logger.debug(f"{self.algorithm} relearned for row {position}: {self.structure}")

        self._since_relearn += 1

        model = fit_linear_gaussian(self.structure, data)
        latest = panel.frame.iloc[position - 1]
        predicted = forecast_one_day(model, latest.to_dict(), self.target)
        last_close = float(latest[self.target])

        if not predicted > 0:
            raise DbnError(f"Forecast close {predicted} is not positive", node=current(self.target))

        return float(np.log(predicted / last_close)), relearned

    def _complete_columns(self, panel: AlignedPanel, position: int) -> AlignedPanel:
        """Leaves out the variables still missing somewhere in the training
        window, such as late starters in their leading gap."""
        window = panel.frame.iloc[position - self.window_len:position]
        missing = window.isna().any()

        if missing.get(self.target, False):
            raise DbnError(f"Target '{self.target}' has missing values in the training window", node=self.target)

        left_out = tuple(window.columns[missing.to_numpy()])

        if left_out != self.left_out:
            if left_out:
                logger.warning(f"{self.algorithm} at row {position}: leaving out {list(left_out)}, "
                               f"not yet available over the whole training window")
            else:
                logger.info(f"{self.algorithm} at row {position}: all variables available")
            self.left_out = left_out

        if not left_out:
            return panel

        return dataclasses.replace(panel, frame=panel.frame.drop(columns=list(left_out)))
