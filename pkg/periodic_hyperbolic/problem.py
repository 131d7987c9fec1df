"""Problem instances for time-periodic first-order hyperbolic systems.

A problem is

    d_t u_j + a_j(x, t) d_x u_j + sum_k b_jk(x, t) u_k = f_j(x, t),   x in [0, 1],
    u_j(x_j, t) = (R u)_j(t),   u(x, t + 2 pi) = u(x, t),

with x_j = 0 for j < m and x_j = 1 otherwise (components are 0-based here).
"""

import dataclasses
import json
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dataclass import (
    TWO_PI,
    FactorizationPair,
    FactorizationReport,
    ValidationCheck,
    ValidationReport,
)
from .errors import BadParameters, FactorizationViolated, ProblemFormatError, WrongShape
from .interface import BoundaryOperator, BoundaryTerm
from .utils import FileIOHelper, makeStringRed

logger = logging.getLogger(__name__)

DEFAULT_H_FD = 1e-6

_EXPRESSION_NAMESPACE = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "arctan": np.arctan,
    "abs": np.abs,
    "sign": np.sign,
    "where": np.where,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "pi": np.pi,
}


class CoefficientField:
    """Scalar function of (x, t), 2*pi-periodic in t.

    Calling the field reduces t modulo 2*pi before evaluation; ``raw`` skips the
    reduction and is what the periodicity check uses. Missing partial derivatives
    fall back to central differences with step ``h_fd``.
    """

    def __init__(
        self,
        func: Callable[[np.ndarray, np.ndarray], Any],
        d_dx: Optional[Callable] = None,
        d_dt: Optional[Callable] = None,
        depends_on_t: bool = True,
        h_fd: float = DEFAULT_H_FD,
        spec: Any = None,
        constant: Optional[float] = None,
    ):
        self._func = func
        self._d_dx = d_dx
        self._d_dt = d_dt
        self.depends_on_t = depends_on_t
        self.h_fd = h_fd
        self._spec = spec
        self.constant_value = constant

    @classmethod
    def constant(cls, value: float) -> "CoefficientField":
        value = float(value)
        return cls(
            lambda x, t: value,
            d_dx=lambda x, t: 0.0,
            d_dt=lambda x, t: 0.0,
            depends_on_t=False,
            spec=value,
            constant=value,
        )

    @classmethod
    def expression(
        cls, text: str, params: Optional[Dict[str, float]] = None
    ) -> "CoefficientField":
        """Closed-form field such as ``"2 + sin(t)"``; names come from numpy and params."""
        params = {k: float(v) for k, v in (params or {}).items()}
        try:
            code = compile(text, "<coefficient>", "eval")
        except SyntaxError as err:
            raise ProblemFormatError(f"cannot parse expression {text!r}: {err.msg}") from err
        allowed = set(_EXPRESSION_NAMESPACE) | set(params) | {"x", "t"}
        unknown = [name for name in code.co_names if name not in allowed]
        if unknown:
            raise ProblemFormatError(f"expression {text!r} uses unknown names {unknown}")
        namespace = {"__builtins__": {}, **_EXPRESSION_NAMESPACE, **params}

        def func(x, t):
            return eval(code, namespace, {"x": x, "t": t})

        return cls(
            func,
            depends_on_t="t" in code.co_names,
            spec={"expression": text, "params": params},
        )

    @classmethod
    def table(cls, x_nodes, t_nodes, values) -> "CoefficientField":
        """Tabulated field, bilinear in (x, t) and periodic in t."""
        x_nodes = np.asarray(x_nodes, dtype=float)
        t_nodes = np.asarray(t_nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape != (x_nodes.size, t_nodes.size):
            raise ProblemFormatError(
                f"table values must have shape ({x_nodes.size}, {t_nodes.size}), got {values.shape}"
            )
        if x_nodes.size < 2 or np.any(np.diff(x_nodes) <= 0):
            raise ProblemFormatError("table x_nodes must be strictly increasing (at least 2)")
        if np.any(np.diff(t_nodes) <= 0) or t_nodes[0] < 0 or t_nodes[-1] >= TWO_PI:
            raise ProblemFormatError("table t_nodes must be strictly increasing inside [0, 2*pi)")
        t_ext = np.concatenate([[t_nodes[-1] - TWO_PI], t_nodes, [t_nodes[0] + TWO_PI]])
        v_ext = np.concatenate([values[:, -1:], values, values[:, :1]], axis=1)

        def func(x, t):
            x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.mod(t, TWO_PI))
            ix = np.clip(np.searchsorted(x_nodes, x, side="right") - 1, 0, x_nodes.size - 2)
            fx = np.clip((x - x_nodes[ix]) / (x_nodes[ix + 1] - x_nodes[ix]), 0.0, 1.0)
            it = np.clip(np.searchsorted(t_ext, t, side="right") - 1, 0, t_ext.size - 2)
            ft = (t - t_ext[it]) / (t_ext[it + 1] - t_ext[it])
            return (
                (1 - fx) * (1 - ft) * v_ext[ix, it]
                + fx * (1 - ft) * v_ext[ix + 1, it]
                + (1 - fx) * ft * v_ext[ix, it + 1]
                + fx * ft * v_ext[ix + 1, it + 1]
            )

        spec = {
            "table": {
                "x_nodes": x_nodes.tolist(),
                "t_nodes": t_nodes.tolist(),
                "values": values.tolist(),
            }
        }
        depends_on_t = t_nodes.size > 1 and not np.allclose(values, values[:, :1])
        return cls(func, depends_on_t=depends_on_t, spec=spec)

    @classmethod
    def from_spec(cls, spec: Any) -> "CoefficientField":
        if isinstance(spec, bool):
            raise ProblemFormatError(f"invalid field specification {spec!r}")
        if isinstance(spec, (int, float)):
            return cls.constant(spec)
        if isinstance(spec, str):
            return cls.expression(spec)
        if isinstance(spec, dict):
            if "expression" in spec:
                return cls.expression(spec["expression"], spec.get("params"))
            if "table" in spec:
                table = spec["table"]
                try:
                    return cls.table(table["x_nodes"], table["t_nodes"], table["values"])
                except KeyError as err:
                    raise ProblemFormatError(f"table field is missing key {err}") from err
            if "constant" in spec:
                return cls.constant(spec["constant"])
        raise ProblemFormatError(f"invalid field specification {spec!r}")

    def to_spec(self) -> Any:
        if self._spec is None:
            raise ProblemFormatError(
                "field defined by a Python callable cannot be written to a problem file"
            )
        return self._spec

    @property
    def is_zero(self) -> bool:
        return self.constant_value == 0.0

    def _evaluate(self, x, t) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.asarray(self._func(x, t), dtype=float)
        shape = np.broadcast_shapes(x.shape, t.shape)
        if out.shape != shape:
            out = np.broadcast_to(out, shape)
        return out

    def __call__(self, x, t) -> np.ndarray:
        return self._evaluate(x, np.mod(t, TWO_PI))

    def raw(self, x, t) -> np.ndarray:
        return self._evaluate(x, t)

    def partial_x(self, x, t) -> np.ndarray:
        if self._d_dx is not None:
            return self._derivative(self._d_dx, x, t)
        h = self.h_fd
        x = np.asarray(x, dtype=float)
        return (self(x + h, t) - self(x - h, t)) / (2.0 * h)

    def partial_t(self, x, t) -> np.ndarray:
        if self._d_dt is not None:
            return self._derivative(self._d_dt, x, t)
        if not self.depends_on_t:
            return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(t)))
        h = self.h_fd
        t = np.asarray(t, dtype=float)
        return (self(x, t + h) - self(x, t - h)) / (2.0 * h)

    @staticmethod
    def _derivative(func, x, t) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = np.mod(np.asarray(t, dtype=float), TWO_PI)
        return np.broadcast_to(
            np.asarray(func(x, t), dtype=float), np.broadcast_shapes(x.shape, t.shape)
        )

    def __repr__(self):
        if self._spec is None:
            return "CoefficientField(<callable>)"
        return f"CoefficientField({self._spec!r})"


FieldLike = Union[CoefficientField, float, int, str, dict, Callable]


def as_field(obj: FieldLike) -> CoefficientField:
    if isinstance(obj, CoefficientField):
        return obj
    if isinstance(obj, (int, float, str, dict)) and not isinstance(obj, bool):
        return CoefficientField.from_spec(obj)
    if callable(obj):
        return CoefficientField(obj)
    raise ProblemFormatError(f"cannot interpret {obj!r} as a coefficient field")


def _field_tuple(items: Sequence[FieldLike]) -> Tuple[CoefficientField, ...]:
    return tuple(as_field(item) for item in items)


class FixedData(BoundaryOperator):
    """u_j(x_j, t) = mu_j(t); the linear part of R is zero."""

    kind = "fixed_data"

    def __init__(self, n: int, mu: Optional[Sequence[FieldLike]] = None):
        source = _field_tuple(mu) if mu is not None else tuple(
            CoefficientField.constant(0.0) for _ in range(n)
        )
        super().__init__(n=n, m=None, source=source)

    @property
    def terms(self) -> List[BoundaryTerm]:
        return []

    def reflection_matrix(self, t):
        raise WrongShape("fixed boundary data is not a reflection boundary condition")

    def to_dict(self):
        return {"variant": self.kind, "mu": [mu.to_spec() for mu in self.source]}


class ReflectionDelay(BoundaryOperator):
    """Reflections with delays, given as a list of pointwise terms."""

    kind = "reflection_delay"

    def __init__(
        self,
        n: int,
        m: int,
        terms: Sequence[BoundaryTerm],
        source: Optional[Sequence[FieldLike]] = None,
    ):
        super().__init__(n=n, m=m, source=_field_tuple(source) if source is not None else None)
        for term in terms:
            if not (0 <= term.row < n and 0 <= term.col < n):
                raise WrongShape(f"boundary term ({term.row}, {term.col}) outside n={n}")
        self._terms = list(terms)

    @property
    def terms(self) -> List[BoundaryTerm]:
        return self._terms

    @classmethod
    def from_matrices(
        cls,
        m: int,
        r0: Sequence[Sequence[FieldLike]],
        r1: Sequence[Sequence[FieldLike]],
        delays: Sequence[float] = (0.0,),
        source: Optional[Sequence[FieldLike]] = None,
    ) -> "ReflectionDelay":
        """(Ru)_j(t) = sum_k sum_s [r0_jk(t) u_k(0, t - theta_s) + r1_jk(t) u_k(1, t - theta_s)]."""
        n = len(r0)
        if len(r1) != n or any(len(row) != n for row in list(r0) + list(r1)):
            raise WrongShape("r0 and r1 must both be n x n")
        terms = []
        for delay in delays:
            for side, matrix in ((0, r0), (1, r1)):
                for j in range(n):
                    for k in range(n):
                        weight = as_field(matrix[j][k])
                        if not weight.is_zero:
                            terms.append(BoundaryTerm(j, k, side, weight, float(delay)))
        return cls(n=n, m=m, terms=terms, source=source)

    @classmethod
    def from_reflection_matrix(
        cls,
        p: Sequence[Sequence[FieldLike]],
        m: int,
        source: Optional[Sequence[FieldLike]] = None,
    ) -> "ReflectionDelay":
        """u_j(x_j, t) = sum_k p_jk(t) u_k(1 - x_k, t)."""
        n = len(p)
        terms = []
        for j in range(n):
            for k in range(n):
                weight = as_field(p[j][k])
                if not weight.is_zero:
                    side = 1 if k < m else 0
                    terms.append(BoundaryTerm(j, k, side, weight))
        return cls(n=n, m=m, terms=terms, source=source)

    def to_dict(self):
        data = {
            "variant": self.kind,
            "m": self.m,
            "terms": [
                {
                    "row": term.row,
                    "col": term.col,
                    "side": term.side,
                    "delay": term.delay,
                    "weight": term.weight.to_spec(),
                }
                for term in self._terms
            ],
        }
        if self.source is not None:
            data["source"] = [mu.to_spec() for mu in self.source]
        return data


class PeriodicInX(BoundaryOperator):
    """u_j(x_j, t) = u_j(1 - x_j, t)."""

    kind = "periodic_in_x"

    def __init__(self, n: int, m: int, source: Optional[Sequence[FieldLike]] = None):
        super().__init__(n=n, m=m, source=_field_tuple(source) if source is not None else None)
        one = CoefficientField.constant(1.0)
        self._terms = [BoundaryTerm(j, j, 1 - self.x_side(j), one) for j in range(n)]

    @property
    def terms(self) -> List[BoundaryTerm]:
        return self._terms

    def to_dict(self):
        data = {"variant": self.kind, "m": self.m}
        if self.source is not None:
            data["source"] = [mu.to_spec() for mu in self.source]
        return data


class TwoByTwoReflection(BoundaryOperator):
    """u_1(0, t) = p0(t) u_2(0, t) + mu_1(t),  u_2(1, t) = p1(t) u_1(1, t) + mu_2(t)."""

    kind = "two_by_two_reflection"

    def __init__(
        self,
        p0: FieldLike,
        p1: FieldLike,
        source: Optional[Sequence[FieldLike]] = None,
    ):
        super().__init__(n=2, m=1, source=_field_tuple(source) if source is not None else None)
        self.p0 = as_field(p0)
        self.p1 = as_field(p1)
        self._terms = [BoundaryTerm(0, 1, 0, self.p0), BoundaryTerm(1, 0, 1, self.p1)]

    @property
    def terms(self) -> List[BoundaryTerm]:
        return self._terms

    def to_dict(self):
        data = {"variant": self.kind, "p0": self.p0.to_spec(), "p1": self.p1.to_spec()}
        if self.source is not None:
            data["source"] = [mu.to_spec() for mu in self.source]
        return data


def boundary_from_dict(data: Dict[str, Any], n: int, m: int) -> BoundaryOperator:
    variant = data.get("variant")
    source = data.get("source")
    if variant == FixedData.kind:
        return FixedData(n=n, mu=data.get("mu"))
    if variant == PeriodicInX.kind:
        return PeriodicInX(n=n, m=data.get("m", m), source=source)
    if variant == TwoByTwoReflection.kind:
        return TwoByTwoReflection(p0=data["p0"], p1=data["p1"], source=source)
    if variant == ReflectionDelay.kind:
        m = data.get("m", m)
        if "terms" in data:
            terms = [
                BoundaryTerm(
                    row=int(term["row"]),
                    col=int(term["col"]),
                    side=int(term["side"]),
                    weight=as_field(term["weight"]),
                    delay=float(term.get("delay", 0.0)),
                )
                for term in data["terms"]
            ]
            return ReflectionDelay(n=n, m=m, terms=terms, source=source)
        if "p" in data:
            return ReflectionDelay.from_reflection_matrix(data["p"], m=m, source=source)
        return ReflectionDelay.from_matrices(
            m=m,
            r0=data["r0"],
            r1=data["r1"],
            delays=data.get("delays", [0.0]),
            source=source,
        )
    raise ProblemFormatError(f"unknown boundary variant {variant!r}")


@dataclass(frozen=True, eq=False)
class HyperbolicProblem:
    """A complete problem instance. Immutable; hashing is by identity."""

    a: Tuple[CoefficientField, ...]
    b: Tuple[Tuple[CoefficientField, ...], ...]
    f: Tuple[CoefficientField, ...]
    boundary: BoundaryOperator
    m: int
    b_tilde: Optional[Tuple[Tuple[Optional[CoefficientField], ...], ...]] = None
    name: str = "problem"

    def __post_init__(self):
        n = len(self.a)
        if n < 1:
            raise BadParameters("a problem needs at least one component")
        if not 0 <= self.m <= n:
            raise BadParameters(f"split index m={self.m} must lie in [0, {n}]")
        if len(self.b) != n or any(len(row) != n for row in self.b):
            raise WrongShape(f"lower-order matrix must be {n} x {n}")
        if len(self.f) != n:
            raise WrongShape(f"forcing needs {n} components, got {len(self.f)}")
        if self.b_tilde is not None and (
            len(self.b_tilde) != n or any(len(row) != n for row in self.b_tilde)
        ):
            raise WrongShape(f"factorization witness must be {n} x {n}")
        if self.boundary.n != n:
            raise WrongShape(
                f"boundary operator is for n={self.boundary.n}, problem has n={n}"
            )
        if self.boundary.m is not None and self.boundary.m != self.m:
            raise WrongShape(
                f"boundary operator uses m={self.boundary.m}, problem has m={self.m}"
            )

    @classmethod
    def build(
        cls,
        a: Sequence[FieldLike],
        b: Optional[Sequence[Sequence[FieldLike]]] = None,
        f: Optional[Sequence[FieldLike]] = None,
        boundary: Optional[BoundaryOperator] = None,
        m: Optional[int] = None,
        b_tilde: Optional[Sequence[Sequence[Optional[FieldLike]]]] = None,
        name: str = "problem",
    ) -> "HyperbolicProblem":
        """Convenience constructor accepting numbers, expressions and callables."""
        n = len(a)
        if m is None:
            if boundary is None or boundary.m is None:
                raise BadParameters("the split index m is required for this boundary")
            m = boundary.m
        zero = CoefficientField.constant(0.0)
        b_fields = (
            tuple(_field_tuple(row) for row in b)
            if b is not None
            else tuple(tuple(zero for _ in range(n)) for _ in range(n))
        )
        witness = None
        if b_tilde is not None:
            witness = tuple(
                tuple(as_field(item) if item is not None else None for item in row)
                for row in b_tilde
            )
        return cls(
            a=_field_tuple(a),
            b=b_fields,
            f=_field_tuple(f) if f is not None else tuple(zero for _ in range(n)),
            boundary=boundary if boundary is not None else FixedData(n),
            m=m,
            b_tilde=witness,
            name=name,
        )

    @property
    def n(self) -> int:
        return len(self.a)

    def x_side(self, j: int) -> int:
        """x_j: 0 for the first m components, 1 for the others."""
        return 0 if j < self.m else 1

    def replace(self, **changes) -> "HyperbolicProblem":
        return dataclasses.replace(self, **changes)

    def fields(self) -> List[CoefficientField]:
        items = list(self.a) + [field for row in self.b for field in row] + list(self.f)
        if self.b_tilde is not None:
            items.extend(field for row in self.b_tilde for field in row if field is not None)
        return items

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "speeds": [field.to_spec() for field in self.a],
            "lower_order": [[field.to_spec() for field in row] for row in self.b],
            "forcing": [field.to_spec() for field in self.f],
            "boundary": self.boundary.to_dict(),
        }
        if self.b_tilde is not None:
            data["factorization_witness"] = [
                [field.to_spec() if field is not None else None for field in row]
                for row in self.b_tilde
            ]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HyperbolicProblem":
        try:
            n = int(data["n"])
            m = int(data["m"])
            speeds = data["speeds"]
            boundary_data = data["boundary"]
        except KeyError as err:
            raise ProblemFormatError(f"problem file is missing key {err}") from err
        if len(speeds) != n:
            raise ProblemFormatError(f"'speeds' needs {n} entries, got {len(speeds)}")
        if not 0 <= m <= n:
            raise BadParameters(f"split index m={m} must lie in [0, {n}]")
        return cls.build(
            a=speeds,
            b=data.get("lower_order"),
            f=data.get("forcing"),
            boundary=boundary_from_dict(boundary_data, n=n, m=m),
            m=m,
            b_tilde=data.get("factorization_witness"),
            name=data.get("name", "problem"),
        )

    def save(self, path: str):
        FileIOHelper.dump_json(self.to_dict(), path)

    @classmethod
    def load(cls, path: str) -> "HyperbolicProblem":
        try:
            data = FileIOHelper.load_json(path)
        except json.JSONDecodeError as err:
            raise ProblemFormatError(
                f"{path}:{err.lineno}:{err.colno}: {err.msg}"
            ) from err
        return cls.from_dict(data)


@dataclass(frozen=True)
class ValidationGridSpec:
    n_x: int = 21
    n_t: int = 32
    eps_coincide_rel: float = 1e-8
    tol_factor: float = 1e-6
    tol_periodic: float = 1e-9

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        x = np.linspace(0.0, 1.0, self.n_x)[:, None]
        t = (TWO_PI * np.arange(self.n_t) / self.n_t)[None, :]
        return x, t

    def to_dict(self):
        return dataclasses.asdict(self)


def check_factorization(
    problem: HyperbolicProblem,
    grid: ValidationGridSpec = ValidationGridSpec(),
    strict: bool = True,
) -> FactorizationReport:
    """Measure how far b_jk is from b~_jk (a_k - a_j) for every j != k.

    Without a supplied witness the defect is sup |b_jk| over the coincidence set
    |a_k - a_j| < eps_coincide, and b~_jk is reconstructed by division elsewhere
    (extended by zero on the set). With ``strict`` a defect above tol_factor raises
    FactorizationViolated.
    """
    x, t = grid.mesh()
    speeds = [field(x, t) for field in problem.a]
    scale = max(float(np.max(np.abs(a))) for a in speeds)
    eps_coincide = grid.eps_coincide_rel * max(scale, 1.0)
    pairs = []
    for j in range(problem.n):
        for k in range(problem.n):
            if j == k:
                continue
            b_jk = problem.b[j][k](x, t)
            gap = speeds[k] - speeds[j]
            witness_field = problem.b_tilde[j][k] if problem.b_tilde is not None else None
            coincide = np.abs(gap) < eps_coincide
            if witness_field is not None:
                witness = np.broadcast_to(witness_field(x, t), gap.shape)
                defect = float(np.max(np.abs(b_jk - witness * gap)))
            else:
                witness = np.where(coincide, 0.0, b_jk / np.where(coincide, 1.0, gap))
                defect = float(np.max(np.abs(np.where(coincide, b_jk, 0.0))))
            pairs.append(
                FactorizationPair(
                    j=j,
                    k=k,
                    defect=defect,
                    coincidence_count=int(np.count_nonzero(coincide)),
                    witness_supplied=witness_field is not None,
                    witness_sup=float(np.max(np.abs(witness))),
                    witness=np.array(witness),
                )
            )
    report = FactorizationReport(
        pairs=pairs, tol_factor=grid.tol_factor, eps_coincide=eps_coincide
    )
    if strict and not report.passed:
        worst = max(pairs, key=lambda pair: pair.defect)
        raise FactorizationViolated(
            makeStringRed(
                f"b[{worst.j}][{worst.k}] violates the factorization condition: "
                f"defect {worst.defect:.3e} > {grid.tol_factor:.1e}"
            ),
            report=report,
        )
    return report


def _periodicity_defect(fields: Sequence[CoefficientField], x, t) -> float:
    defect = 0.0
    for field in fields:
        if not field.depends_on_t:
            continue
        diff = np.abs(field.raw(x, t + TWO_PI) - field.raw(x, t))
        defect = max(defect, float(np.max(diff)))
    return defect


def validate(
    problem: HyperbolicProblem, grid: ValidationGridSpec = ValidationGridSpec()
) -> ValidationReport:
    """Check the standing assumptions on a sampling grid; failures are reported, not raised."""
    x, t = grid.mesh()
    checks = []

    min_abs = np.inf
    sign_constant = True
    for a in problem.a:
        values = a(x, t)
        min_abs = min(min_abs, float(np.min(np.abs(values))))
        if not (np.all(values > 0) or np.all(values < 0)):
            sign_constant = False
    checks.append(
        ValidationCheck(
            name="speed_sign",
            passed=bool(min_abs > 0 and sign_constant),
            value=min_abs,
            details={"sign_constant": sign_constant},
        )
    )

    defect = _periodicity_defect(problem.fields(), x, t)
    checks.append(
        ValidationCheck(
            name="t_periodicity",
            passed=defect <= grid.tol_periodic,
            value=defect,
        )
    )

    t_line = t.ravel()
    boundary_defect = _periodicity_defect(
        problem.boundary.coefficient_fields(), np.zeros_like(t_line), t_line
    )
    checks.append(
        ValidationCheck(
            name="boundary_periodicity",
            passed=boundary_defect <= grid.tol_periodic,
            value=boundary_defect,
            details={"variant": problem.boundary.kind},
        )
    )

    if problem.n >= 2:
        factorization = check_factorization(problem, grid, strict=False)
        checks.append(
            ValidationCheck(
                name="factorization",
                passed=factorization.passed,
                value=factorization.defect,
                details=factorization.to_dict(),
            )
        )

    report = ValidationReport(checks=checks, grid=grid.to_dict())
    for check in checks:
        if not check.passed:
            logger.warning(f"{problem.name}: check {check.name} failed (value {check.value:.3e})")
    return report
