import functools
import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import WrongShape

if TYPE_CHECKING:
    from .problem import CoefficientField, HyperbolicProblem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundaryTerm:
    """One pointwise contribution w(t) * u_col(side, t - delay) to (Ru)_row(t)."""

    row: int
    col: int
    side: int
    weight: "CoefficientField"
    delay: float = 0.0

    def __post_init__(self):
        if self.side not in (0, 1):
            raise WrongShape(f"boundary term side must be 0 or 1, got {self.side}")

    def weight_at(self, s: np.ndarray) -> np.ndarray:
        return self.weight(np.zeros_like(s), s)


class BoundaryOperator(ABC):
    """The boundary operator R of a problem, an affine map on boundary traces.

    (Ru)_j(t) = sum over terms of row j of w(t) * u_col(side, t - delay) + mu_j(t).
    Concrete families only describe their terms; evaluation, norms and the
    reflection-matrix view are shared. Operators without pointwise terms can
    subclass this and override ``apply``; norm-based criteria then report
    UnsupportedBoundary.
    """

    kind: str = "abstract"

    def __init__(
        self,
        n: int,
        m: Optional[int] = None,
        source: Optional[Sequence["CoefficientField"]] = None,
    ):
        self.n = n
        self.m = m
        if source is not None and len(source) != n:
            raise WrongShape(f"boundary source needs {n} components, got {len(source)}")
        self.source = tuple(source) if source is not None else None

    @property
    @abstractmethod
    def terms(self) -> List[BoundaryTerm]:
        pass

    @abstractmethod
    def to_dict(self) -> Dict:
        pass

    @property
    def has_pointwise_terms(self) -> bool:
        return True

    @property
    def has_source(self) -> bool:
        return self.source is not None and not all(mu.is_zero for mu in self.source)

    def x_side(self, j: int) -> int:
        if self.m is None:
            raise WrongShape(f"{self.kind} boundary does not fix the split index m")
        return 0 if j < self.m else 1

    def terms_for_row(self, j: int) -> List[BoundaryTerm]:
        return [term for term in self.terms if term.row == j]

    def source_at(self, j: int, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.source is None:
            return np.zeros(s.shape)
        return np.broadcast_to(self.source[j](np.zeros_like(s), s), s.shape)

    def apply(
        self,
        trace: Callable[[int, int, np.ndarray], np.ndarray],
        j: int,
        s: np.ndarray,
        include_source: bool = True,
    ) -> np.ndarray:
        """Evaluate (Ru)_j at times s, reading boundary traces via trace(col, side, tau)."""
        s = np.asarray(s, dtype=float)
        total = np.zeros(s.shape)
        for term in self.terms_for_row(j):
            total = total + term.weight_at(s) * trace(term.col, term.side, s - term.delay)
        if include_source:
            total = total + self.source_at(j, s)
        return total

    def row_abs_sums(self, s: np.ndarray) -> np.ndarray:
        """sum_terms |w(s)| per row, shape (n,) + s.shape."""
        s = np.asarray(s, dtype=float)
        sums = np.zeros((self.n,) + s.shape)
        for term in self.terms:
            sums[term.row] += np.abs(term.weight_at(s))
        return sums

    def norm(self, t_samples: np.ndarray) -> float:
        """Induced sup-norm of the linear part, sampled at t_samples."""
        if not self.terms:
            return 0.0
        return float(np.max(self.row_abs_sums(t_samples)))

    def is_reflection_form(self) -> bool:
        if self.m is None or not self.has_pointwise_terms:
            return False
        return all(
            term.delay == 0.0 and term.side == 1 - self.x_side(term.col)
            for term in self.terms
        )

    def reflection_matrix(self, t: np.ndarray) -> np.ndarray:
        """p_jk(t) of u_j(x_j, t) = sum_k p_jk(t) u_k(1 - x_k, t), shape (len(t), n, n)."""
        if not self.is_reflection_form():
            raise WrongShape(
                f"{self.kind} boundary is not an undelayed reflection u_j(x_j) = sum_k p_jk u_k(1 - x_k)"
            )
        t = np.atleast_1d(np.asarray(t, dtype=float))
        p = np.zeros((t.size, self.n, self.n))
        for term in self.terms:
            p[:, term.row, term.col] += term.weight_at(t)
        return p

    def coefficient_fields(self) -> List["CoefficientField"]:
        fields = [term.weight for term in self.terms]
        if self.source is not None:
            fields.extend(self.source)
        return fields

    def with_source(self, source: Sequence["CoefficientField"]) -> "BoundaryOperator":
        clone = self.__class__.__new__(self.__class__)
        clone.__dict__.update(self.__dict__)
        if len(source) != self.n:
            raise WrongShape(f"boundary source needs {self.n} components, got {len(source)}")
        clone.source = tuple(source)
        return clone


class ResonanceCriterion(ABC):
    """A verifiable sufficient (or sharp) condition for bijectivity of I - C."""

    criterion_id: str = "abstract"

    @abstractmethod
    def evaluate(self, problem: "HyperbolicProblem"):
        """Return a CriterionVerdict for the problem."""
        pass


class ProblemSolver(ABC):
    """Strategy for the operator equation u = Cu + Bu + Ff on a fixed grid.

    Implementations receive a DiscretizedProblem and the sampled forcing and
    return a SolveOutcome; diagnosed divergence or singularity is reported in the
    outcome, not raised.
    """

    strategy: str = "abstract"

    def __init__(self, options, callback_handler=None):
        self.options = options
        self.callback_handler = callback_handler

    @abstractmethod
    def solve(self, discretization, forcing):
        pass


class Engine(ABC):
    def __init__(self):
        self.time = {}
        self.operator_usage = {}  # Operator applications per stage.

    def collect_and_reset_operator_usage(self) -> Dict[str, int]:
        return {}

    def log_execution_time_and_operator_usage(self, func):
        """Decorator to log the execution time and operator usage of a function."""

        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.time()
            result = func(*args, **kwargs)
            end_time = time.time()
            execution_time = end_time - start_time
            self.time[func.__name__] = execution_time
            logger.info(f"{func.__name__} executed in {execution_time:.4f} seconds")
            self.operator_usage[func.__name__] = (
                self.collect_and_reset_operator_usage()
            )
            return result

        return wrapper

    def apply_decorators(self):
        """Apply decorators to methods that need them."""
        methods_to_decorate = [
            method_name
            for method_name in dir(self)
            if method_name.startswith("run_") and callable(getattr(self, method_name))
        ]
        for method_name in methods_to_decorate:
            original_method = getattr(self, method_name)
            decorated_method = self.log_execution_time_and_operator_usage(
                original_method
            )
            setattr(self, method_name, decorated_method)

    @abstractmethod
    def run(self, **kwargs):
        pass

    def summary(self):
        print("***** Execution time *****")
        for k, v in self.time.items():
            print(f"{k}: {v:.4f} seconds")

        print("***** Operator applications: *****")
        for k, v in self.operator_usage.items():
            print(f"{k}")
            for operator_name, count in v.items():
                print(f"    {operator_name}: {count}")
