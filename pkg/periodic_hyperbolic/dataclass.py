import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import ProblemFormatError, WrongShape

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
CSV_COLUMNS = ["component", "i_x", "i_t", "x", "t", "value"]


@dataclass(frozen=True)
class GridDims:
    """Uniform (x, t) grid: x_i = i/(n_x-1) on [0, 1], t_k = 2*pi*k/n_t (periodic)."""

    n_x: int
    n_t: int

    def __post_init__(self):
        if self.n_x < 2 or self.n_t < 2:
            raise WrongShape(
                f"grid needs at least 2 nodes in x and t, got ({self.n_x}, {self.n_t})"
            )

    @classmethod
    def parse(cls, text: str) -> "GridDims":
        try:
            n_x, n_t = (int(part) for part in text.split(","))
        except ValueError as err:
            raise ProblemFormatError(
                f"grid must look like 'NX,NT', got {text!r}"
            ) from err
        return cls(n_x=n_x, n_t=n_t)

    @property
    def x_nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_x)

    @property
    def t_nodes(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_t) / self.n_t

    @property
    def hx(self) -> float:
        return 1.0 / (self.n_x - 1)

    @property
    def dt(self) -> float:
        return TWO_PI / self.n_t

    def size(self, n: int) -> int:
        return n * self.n_x * self.n_t

    def to_dict(self):
        return {"n_x": self.n_x, "n_t": self.n_t}


def periodic_stencil(
    tau: np.ndarray, n_t: int, order: str = "linear"
) -> Tuple[np.ndarray, np.ndarray]:
    """Node indices and weights for periodic interpolation in t.

    Returns arrays with a trailing stencil axis (2 points for linear, 4 for cubic).
    Weights reproduce stored values exactly at the nodes.
    """
    position = np.asarray(tau, dtype=float) * (n_t / TWO_PI)
    base = np.floor(position)
    theta = position - base
    base = base.astype(np.int64)
    if order == "linear":
        idx = np.stack([base, base + 1], axis=-1)
        wts = np.stack([1.0 - theta, theta], axis=-1)
    elif order == "cubic":
        idx = np.stack([base - 1, base, base + 1, base + 2], axis=-1)
        wts = np.stack(
            [
                -theta * (theta - 1.0) * (theta - 2.0) / 6.0,
                (theta + 1.0) * (theta - 1.0) * (theta - 2.0) / 2.0,
                -(theta + 1.0) * theta * (theta - 2.0) / 2.0,
                (theta + 1.0) * theta * (theta - 1.0) / 6.0,
            ],
            axis=-1,
        )
    else:
        raise ValueError(f"unknown interpolation order {order!r}")
    return np.mod(idx, n_t), wts


def linear_x_stencil(x: np.ndarray, n_x: int) -> Tuple[np.ndarray, np.ndarray]:
    position = np.clip(np.asarray(x, dtype=float), 0.0, 1.0) * (n_x - 1)
    base = np.minimum(np.floor(position).astype(np.int64), n_x - 2)
    theta = position - base
    return np.stack([base, base + 1], axis=-1), np.stack([1.0 - theta, theta], axis=-1)


@dataclass(eq=False)
class GridFunction:
    """n-component field sampled on a GridDims grid, values shaped (n, n_x, n_t)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3:
            raise WrongShape(
                f"grid function values must be (n, n_x, n_t), got shape {self.values.shape}"
            )

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> GridDims:
        return GridDims(self.values.shape[1], self.values.shape[2])

    @classmethod
    def zeros(cls, n: int, dims: GridDims) -> "GridFunction":
        return cls(np.zeros((n, dims.n_x, dims.n_t)))

    @classmethod
    def ones(cls, n: int, dims: GridDims) -> "GridFunction":
        return cls(np.ones((n, dims.n_x, dims.n_t)))

    @classmethod
    def random(cls, n: int, dims: GridDims, rng: np.random.Generator) -> "GridFunction":
        return cls(rng.uniform(-1.0, 1.0, size=(n, dims.n_x, dims.n_t)))

    @classmethod
    def from_callables(
        cls, funcs: Sequence[Callable[[np.ndarray, np.ndarray], Any]], dims: GridDims
    ) -> "GridFunction":
        """Sample one callable f(x, t) per component on the grid nodes."""
        x = dims.x_nodes[:, None]
        t = dims.t_nodes[None, :]
        values = np.empty((len(funcs), dims.n_x, dims.n_t))
        for j, func in enumerate(funcs):
            values[j] = np.broadcast_to(np.asarray(func(x, t), dtype=float), x.shape[:1] + t.shape[1:])
        return cls(values)

    @classmethod
    def from_flat(cls, vector: np.ndarray, n: int, dims: GridDims) -> "GridFunction":
        return cls(np.asarray(vector, dtype=float).reshape(n, dims.n_x, dims.n_t))

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def copy(self) -> "GridFunction":
        return GridFunction(self.values.copy())

    def sup_norm(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.max(np.abs(self.values)))

    def boundary_trace(self, j: int, side: int) -> np.ndarray:
        return self.values[j, 0 if side == 0 else -1, :]

    def evaluate(self, j: int, x, t, interpolation: str = "linear") -> np.ndarray:
        """Interpolate component j at arbitrary (x, t): linear in x, periodic in t."""
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        x_idx, x_wts = linear_x_stencil(x, self.values.shape[1])
        t_idx, t_wts = periodic_stencil(t, self.values.shape[2], interpolation)
        component = self.values[j]
        result = np.zeros(x.shape)
        for a in range(x_idx.shape[-1]):
            for b in range(t_idx.shape[-1]):
                result += (
                    x_wts[..., a] * t_wts[..., b] * component[x_idx[..., a], t_idx[..., b]]
                )
        return result

    def _check_compatible(self, other: "GridFunction"):
        if self.values.shape != other.values.shape:
            raise WrongShape(
                f"grid functions differ in shape: {self.values.shape} vs {other.values.shape}"
            )

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_compatible(other)
        return GridFunction(self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check_compatible(other)
        return GridFunction(self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(-self.values)

    def meta(self) -> Dict[str, int]:
        return {"n": self.n, "n_x": self.values.shape[1], "n_t": self.values.shape[2]}

    def to_csv(self, path: str):
        """Write the CSV table and a JSON sidecar (same stem, .json) with the shape."""
        n, n_x, n_t = self.values.shape
        comp, i_x, i_t = np.meshgrid(np.arange(n), np.arange(n_x), np.arange(n_t), indexing="ij")
        dims = GridDims(n_x, n_t)
        frame = pd.DataFrame(
            {
                "component": comp.ravel(),
                "i_x": i_x.ravel(),
                "i_t": i_t.ravel(),
                "x": dims.x_nodes[i_x.ravel()],
                "t": dims.t_nodes[i_t.ravel()],
                "value": self.values.ravel(),
            },
            columns=CSV_COLUMNS,
        )
        frame.to_csv(path, index=False, float_format="%.17g")
        with open(sidecar_path(path), "w", encoding="utf-8") as fw:
            json.dump(self.meta(), fw, indent=2)
            fw.write("\n")

    @classmethod
    def from_csv(cls, path: str) -> "GridFunction":
        meta_path = sidecar_path(path)
        if not os.path.exists(meta_path):
            raise ProblemFormatError(f"{path}: missing sidecar {meta_path}")
        with open(meta_path, "r", encoding="utf-8") as fr:
            meta = json.load(fr)
        frame = pd.read_csv(path, float_precision="round_trip")
        missing = [c for c in CSV_COLUMNS if c not in frame.columns]
        if missing:
            raise ProblemFormatError(f"{path}: missing columns {missing}")
        n, n_x, n_t = int(meta["n"]), int(meta["n_x"]), int(meta["n_t"])
        if len(frame) != n * n_x * n_t:
            raise ProblemFormatError(
                f"{path}: expected {n * n_x * n_t} rows for shape ({n}, {n_x}, {n_t}), found {len(frame)}"
            )
        values = np.zeros((n, n_x, n_t))
        values[
            frame["component"].to_numpy(),
            frame["i_x"].to_numpy(),
            frame["i_t"].to_numpy(),
        ] = frame["value"].to_numpy(dtype=float)
        return cls(values)


def sidecar_path(csv_path: str) -> str:
    stem, _ = os.path.splitext(csv_path)
    return stem + ".json"


@dataclass
class CharacteristicPath:
    """Samples (xi_i, omega_i) of one characteristic; omega is not wrapped mod 2*pi."""

    j: int
    anchor: Tuple[float, float]
    xi: np.ndarray
    omega: np.ndarray
    h_char: float

    @property
    def terminal(self) -> float:
        return float(self.omega[-1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"xi": self.xi, "omega": self.omega})


@dataclass(frozen=True)
class WeightPair:
    c: float
    d: float


@dataclass
class ValidationCheck:
    name: str
    passed: bool
    value: float
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "details": self.details,
        }


@dataclass
class ValidationReport:
    checks: List[ValidationCheck]
    grid: Dict[str, Any]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def get(self, name: str) -> ValidationCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_dict(self):
        return {
            "passed": self.passed,
            "grid": self.grid,
            "checks": [check.to_dict() for check in self.checks],
        }


@dataclass
class FactorizationPair:
    j: int
    k: int
    defect: float
    coincidence_count: int
    witness_supplied: bool
    witness_sup: float
    # reconstructed (or supplied) witness sampled on the validation grid
    witness: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self):
        return {
            "j": self.j,
            "k": self.k,
            "defect": self.defect,
            "coincidence_count": self.coincidence_count,
            "witness_supplied": self.witness_supplied,
            "witness_sup": self.witness_sup,
        }


@dataclass
class FactorizationReport:
    pairs: List[FactorizationPair]
    tol_factor: float
    eps_coincide: float

    @property
    def defect(self) -> float:
        return max((pair.defect for pair in self.pairs), default=0.0)

    @property
    def passed(self) -> bool:
        return self.defect <= self.tol_factor

    def pair(self, j: int, k: int) -> FactorizationPair:
        for pair in self.pairs:
            if pair.j == j and pair.k == k:
                return pair
        raise KeyError((j, k))

    def to_dict(self):
        return {
            "passed": self.passed,
            "defect": self.defect,
            "tol_factor": self.tol_factor,
            "eps_coincide": self.eps_coincide,
            "pairs": [pair.to_dict() for pair in self.pairs],
        }


@dataclass
class CriterionVerdict:
    """Outcome of one non-resonance criterion; holds iff margin > 0."""

    criterion: str
    holds: bool
    margin: Optional[float]
    applicable: bool = True
    grid: Dict[str, Any] = field(default_factory=dict)
    notes: str = ""
    details: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_margin(cls, criterion: str, margin: float, **kwargs) -> "CriterionVerdict":
        return cls(criterion=criterion, holds=bool(margin > 0.0), margin=float(margin), **kwargs)

    @classmethod
    def inapplicable(cls, criterion: str, notes: str, **kwargs) -> "CriterionVerdict":
        return cls(criterion=criterion, holds=False, margin=None, applicable=False, notes=notes, **kwargs)

    def to_dict(self):
        return {
            "criterion": self.criterion,
            "holds": self.holds,
            "margin": self.margin,
            "applicable": self.applicable,
            "details": {**self.details, "grid": self.grid, "notes": self.notes},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CriterionVerdict":
        details = dict(data.get("details", {}))
        grid = details.pop("grid", {})
        notes = details.pop("notes", "")
        return cls(
            criterion=data["criterion"],
            holds=data["holds"],
            margin=data["margin"],
            applicable=data.get("applicable", True),
            grid=grid,
            notes=notes,
            details=details,
        )


class Overall:
    NON_RESONANT = "NonResonant"
    INCONCLUSIVE = "Inconclusive"
    RESONANT_2X2 = "Resonant2x2"


@dataclass
class ResonanceReport:
    verdicts: List[CriterionVerdict]
    overall: str
    factorization_violated: bool
    factorization: Optional[Dict[str, Any]] = None

    def verdict(self, criterion: str) -> CriterionVerdict:
        for verdict in self.verdicts:
            if verdict.criterion == criterion:
                return verdict
        raise KeyError(criterion)

    def to_dict(self):
        return {
            "overall": self.overall,
            "factorization_violated": self.factorization_violated,
            "factorization": self.factorization,
            "criteria": [verdict.to_dict() for verdict in self.verdicts],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ResonanceReport":
        return cls(
            verdicts=[CriterionVerdict.from_dict(v) for v in data["criteria"]],
            overall=data["overall"],
            factorization_violated=data["factorization_violated"],
            factorization=data.get("factorization"),
        )


@dataclass
class KernelEstimate:
    singular_values_tail: List[float]
    sigma_max: float
    sigma_cut: float
    estimated_dim: int
    kernel_vectors: List[GridFunction] = field(default_factory=list, repr=False)
    cokernel_vectors: List[GridFunction] = field(default_factory=list, repr=False)

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values_tail[-1]) if self.singular_values_tail else 0.0

    def to_dict(self):
        return {
            "singular_values_tail": list(self.singular_values_tail),
            "sigma_max": self.sigma_max,
            "sigma_min": self.sigma_min,
            "sigma_cut": self.sigma_cut,
            "estimated_dim": self.estimated_dim,
        }


class SolveStatus:
    CONVERGED = "Converged"
    DIVERGED = "Diverged"
    SINGULAR = "Singular"


@dataclass
class SolveOutcome:
    status: str
    solution: Optional[GridFunction]
    residual_sup: float
    iterations: int
    strategy: str
    kernel_estimate: Optional[KernelEstimate] = None
    history: List[float] = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == SolveStatus.CONVERGED

    def to_dict(self):
        return {
            "status": self.status,
            "strategy": self.strategy,
            "residual": self.residual_sup,
            "iterations": self.iterations,
            "sigma_tail": (
                self.kernel_estimate.singular_values_tail if self.kernel_estimate else None
            ),
            "kernel": self.kernel_estimate.to_dict() if self.kernel_estimate else None,
        }
