"""Gaussian conditional-independence testing.

The partial correlation of x and y given Z is the correlation of the
residuals of x and y regressed (with intercept) on Z. Fisher's z transform of
that correlation, scaled by sqrt(n - |Z| - 3), is standard normal under
independence.
"""

import dataclasses
import logging
import typing

import numpy as np
from scipy import linalg, stats

from .sliced import SlicedDataset
from .structure import DbnError


logger = logging.getLogger("dbn")


class SingularTestError(DbnError):
    pass


@dataclasses.dataclass(frozen=True)
class CiResult:
    statistic: float
    p_value: float
    skipped: bool = False


def partial_correlation(x: np.ndarray, y: np.ndarray, z: typing.Optional[np.ndarray] = None) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)

    design = np.ones((n, 1)) if z is None or np.size(z) == 0 else np.column_stack([np.ones(n), z])

    coefs, _, rank, _ = linalg.lstsq(design, np.column_stack([x, y]))

    if rank < design.shape[1]:
        raise SingularTestError(f"Conditioning regression is rank {rank} of {design.shape[1]}")

    residuals = np.column_stack([x, y]) - design @ coefs
    rx, ry = residuals[:, 0], residuals[:, 1]

    denominator = np.sqrt(np.dot(rx, rx) * np.dot(ry, ry))

    if not denominator > 0:
        raise SingularTestError("A variable is fully explained by the conditioning set")

    return float(np.dot(rx, ry) / denominator)


def ci_test_fisher_z(x: np.ndarray, y: np.ndarray, z: typing.Optional[np.ndarray] = None,
                     max_cond_size: int = 3) -> typing.Tuple[float, float]:
    n = len(x)
    cond_size = 0 if z is None else (1 if np.ndim(z) == 1 else np.shape(z)[1])

    if cond_size > max_cond_size:
        raise DbnError(f"Conditioning set of {cond_size} exceeds the maximum of {max_cond_size}")

    dof = n - cond_size - 3
    if dof <= 0:
        raise DbnError(f"{n} rows are too few for a conditioning set of {cond_size}")

    r = float(np.clip(partial_correlation(x, y, z), -1 + 1e-15, 1 - 1e-15))
    statistic = float(np.arctanh(r) * np.sqrt(dof))

    return statistic, float(2.0 * stats.norm.sf(abs(statistic)))


class FisherZTest:
    """Memoized Fisher-z tests over the nodes of a sliced dataset.

    Arguments are put in canonical order (x < y by name, Z sorted) so that a
    test gives the same answer whichever side of an edge asks for it. A test
    whose conditioning regression is singular is skipped and reported as
    dependent.
    """

    def __init__(self, data: SlicedDataset, ci_alpha: float = 0.05, max_cond_size: int = 3) -> None:
        self.ci_alpha = ci_alpha
        self.max_cond_size = max_cond_size
        self.diagnostics: typing.List[str] = []
        self.n_tests = 0

        self._columns = dict(zip(data.nodes, data.matrix.T))
        self._cache: typing.Dict[tuple, CiResult] = {}

    def __call__(self, x: str, y: str, z: typing.Iterable[str] = ()) -> CiResult:
        x, y = sorted((x, y))
        z = tuple(sorted(z))
        key = (x, y, z)

        if key in self._cache:
            return self._cache[key]

        self.n_tests += 1

        conditioning = np.column_stack([self._columns[c] for c in z]) if z else None

        try:
            statistic, p_value = ci_test_fisher_z(self._columns[x], self._columns[y], conditioning, self.max_cond_size)
            result = CiResult(statistic, p_value)
        except SingularTestError as e:
            message = f"Skipped test {x} _||_ {y} | {list(z)}: {e.message}"
            logger.warning(message)
            self.diagnostics.append(message)
            result = CiResult(float("nan"), 0.0, skipped=True)

        self._cache[key] = result

        return result

    def independent(self, x: str, y: str, z: typing.Iterable[str] = ()) -> bool:
        return self(x, y, z).p_value > self.ci_alpha

    def association(self, x: str, y: str, z: typing.Iterable[str] = ()) -> float:
        """Strength of dependence; zero for an independent pair."""
        result = self(x, y, z)
        if result.skipped:
            return np.inf

        return 0.0 if result.p_value > self.ci_alpha else abs(result.statistic)
