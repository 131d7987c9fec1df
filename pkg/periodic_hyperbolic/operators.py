"""Discrete operators C, B, F of the integral form u = Cu + Bu + Ff.

For every grid anchor (x_i, t_k) the j-th characteristic is marched toward the
boundary end x_j across the x-grid cells. The samples at x-grid nodes feed the
B and F quadratures (only periodic interpolation in t is needed there) and the
terminal values feed C:

    (Cu)_j(x, t) = c_j(x_j, x, t) (Ru)_j(omega_j(x_j, x, t)),
    (Bu)_j(x, t) = -int_{x_j}^x d_j(xi, x, t) sum_{k != j} b_jk u_k (xi, omega_j(xi)) d xi,
    (Ff)_j(x, t) =  int_{x_j}^x d_j(xi, x, t) f_j(xi, omega_j(xi)) d xi.
"""

import logging
import math
import threading
import weakref
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix

from .characteristics import characteristic_rhs, quadrature_weights, rk4_step
from .dataclass import GridDims, GridFunction, periodic_stencil
from .errors import BadParameters, DenseCapExceeded, NoConvergence, UnsupportedBoundary, WrongShape
from .problem import HyperbolicProblem
from .utils import makeStringRed

logger = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 20000


@dataclass(frozen=True)
class OperatorOptions:
    n_char: int = 256
    interpolation: str = "linear"
    quadrature: str = "simpson"
    # largest number of stored characteristic samples per component before the
    # bundles are recomputed on every application instead of cached
    cache_limit: int = 2_000_000
    neumann_tol: float = 1e-10
    neumann_max_terms: int = 200
    max_workers: int = 1

    def __post_init__(self):
        if self.n_char < 2 or self.n_char % 2:
            raise BadParameters(f"n_char must be even and >= 2, got {self.n_char}")
        if self.interpolation not in ("linear", "cubic"):
            raise BadParameters(f"unknown interpolation {self.interpolation!r}")
        if self.quadrature not in ("simpson", "trapezoid"):
            raise BadParameters(f"unknown quadrature rule {self.quadrature!r}")
        if not self.neumann_tol > 0:
            raise BadParameters("neumann_tol must be positive")
        if self.neumann_max_terms < 1 or self.max_workers < 1:
            raise BadParameters("neumann_max_terms and max_workers must be >= 1")


_usage = Counter()
_usage_lock = threading.Lock()


def record_usage(name: str, count: int = 1):
    with _usage_lock:
        _usage[name] += count


def peek_usage() -> Dict[str, int]:
    with _usage_lock:
        return dict(_usage)


def collect_and_reset_usage() -> Dict[str, int]:
    """Operator applications since the last call, keyed by operator name."""
    with _usage_lock:
        usage = dict(_usage)
        _usage.clear()
    return usage


def interpolate_periodic(values: np.ndarray, tau: np.ndarray, order: str = "linear") -> np.ndarray:
    """Interpolate a periodic t-sampled line at times tau."""
    idx, wts = periodic_stencil(tau, values.shape[-1], order)
    return np.sum(values[idx] * wts, axis=-1)


def quadrature_matrix(n_x: int, side: int, rule: str = "simpson") -> np.ndarray:
    """W[i, c]: weight of the c-th node on the way from x_i to the boundary end `side`."""
    matrix = np.zeros((n_x, n_x))
    for i in range(n_x):
        intervals = i if side == 0 else n_x - 1 - i
        matrix[i, : intervals + 1] = quadrature_weights(intervals, rule)
    return matrix


@dataclass
class BundleStep:
    """Characteristics of all still active anchor rows after crossing c cells."""

    c: int
    rows: slice
    nodes: np.ndarray
    omega: np.ndarray
    shifted: bool
    # dir * hx * W[i, c] * d_j, in the units of the B and F integrals
    quad_weight: np.ndarray
    coupling: Dict[int, np.ndarray] = field(default_factory=dict)

    def times(self, t_nodes: np.ndarray) -> np.ndarray:
        return self.omega + t_nodes if self.shifted else self.omega


class CharacteristicBundle:
    """All characteristics of component j through the grid anchors.

    When a_j and b_jj do not depend on t, omega_j(xi, x, t) - t and c_j do not
    either, and a single column of anchors (t = 0) is marched.
    """

    def __init__(
        self,
        problem: HyperbolicProblem,
        j: int,
        dims: GridDims,
        options: OperatorOptions,
    ):
        self.problem = problem
        self.j = j
        self.dims = dims
        self.options = options
        self.side = problem.x_side(j)
        self.direction = 1.0 if self.side == 1 else -1.0
        self.shifted = not (problem.a[j].depends_on_t or problem.b[j][j].depends_on_t)
        self.substeps = max(1, math.ceil(options.n_char / (dims.n_x - 1)))
        self.quadrature = quadrature_matrix(dims.n_x, self.side, options.quadrature)
        self.couplings = [
            k for k in range(problem.n) if k != j and not problem.b[j][k].is_zero
        ]

        width = 1 if self.shifted else dims.n_t
        coupling_width = dims.n_t
        if self.shifted and not any(problem.b[j][k].depends_on_t for k in self.couplings):
            coupling_width = 1
        samples = dims.n_x * (dims.n_x + 1) // 2
        footprint = samples * (2 * width + len(self.couplings) * coupling_width)
        self.cached = footprint <= options.cache_limit

        self.terminal_omega = np.empty((dims.n_x, width))
        self.terminal_weight = np.empty((dims.n_x, width))
        self._steps: List[BundleStep] = []
        for step in self._march(record_terminal=True):
            if self.cached:
                self._steps.append(step)
        logger.debug(
            f"component {j}: bundle of {dims.n_x}x{dims.n_t} anchors, "
            f"{self.substeps} RK4 substeps per cell, shifted={self.shifted}, cached={self.cached}"
        )

    def steps(self) -> Iterator[BundleStep]:
        if self.cached:
            return iter(self._steps)
        return self._march()

    def terminal_times(self) -> np.ndarray:
        """omega_j(x_j, x_i, t_k) as an (n_x, n_t) array."""
        if self.shifted:
            return self.terminal_omega + self.dims.t_nodes
        return self.terminal_omega

    def terminal_weights(self) -> np.ndarray:
        """c_j(x_j, x_i, t_k) as an (n_x, n_t) array."""
        return np.broadcast_to(self.terminal_weight, (self.dims.n_x, self.dims.n_t))

    def _march(self, record_terminal: bool = False) -> Iterator[BundleStep]:
        dims = self.dims
        n_x = dims.n_x
        x_nodes = dims.x_nodes
        rhs = characteristic_rhs(self.problem, self.j)
        if self.shifted:
            omega = np.zeros((n_x, 1))
        else:
            omega = np.repeat(dims.t_nodes[None, :], n_x, axis=0)
        exponent = np.zeros_like(omega)
        h = self.direction * dims.hx / self.substeps
        step_back = 1 if self.side == 0 else -1
        for c in range(n_x):
            if self.side == 0:
                rows, nodes, done = slice(c, n_x), np.arange(0, n_x - c), c
            else:
                rows, nodes, done = slice(0, n_x - c), np.arange(c, n_x), n_x - 1 - c
            if c > 0:
                xi = x_nodes[nodes + step_back][:, None]
                state = (omega[rows], exponent[rows])
                for q in range(self.substeps):
                    state = rk4_step(rhs, xi + q * h, state, h)
                omega[rows], exponent[rows] = state
            if record_terminal:
                self.terminal_omega[done] = omega[done]
                self.terminal_weight[done] = np.exp(exponent[done])
            yield self._make_step(c, rows, nodes, omega[rows].copy(), exponent[rows])

    def _make_step(self, c, rows, nodes, omega, exponent) -> BundleStep:
        problem, j, dims = self.problem, self.j, self.dims
        xi = dims.x_nodes[nodes][:, None]
        d = np.exp(exponent) / problem.a[j](xi, omega)
        quad_weight = self.direction * dims.hx * self.quadrature[rows, c][:, None] * d
        step = BundleStep(
            c=c,
            rows=rows,
            nodes=nodes,
            omega=omega,
            shifted=self.shifted,
            quad_weight=quad_weight,
        )
        if self.couplings:
            times = step.times(dims.t_nodes)
            for k in self.couplings:
                b_jk = problem.b[j][k]
                at = times if b_jk.depends_on_t else omega
                step.coupling[k] = quad_weight * b_jk(xi, at)
        return step

    def _gather(self, values: np.ndarray, step: BundleStep, stencil) -> np.ndarray:
        idx, wts = stencil
        return np.sum(values[step.nodes[:, None, None], idx] * wts, axis=-1)

    def integrate_coupling(self, u: np.ndarray) -> np.ndarray:
        """(Bu)_j on the grid."""
        out = np.zeros((self.dims.n_x, self.dims.n_t))
        if not self.couplings:
            return out
        for step in self.steps():
            stencil = periodic_stencil(
                step.times(self.dims.t_nodes), self.dims.n_t, self.options.interpolation
            )
            for k, weight in step.coupling.items():
                out[step.rows] += weight * self._gather(u[k], step, stencil)
        return out

    def integrate_forcing(self, f_j: np.ndarray) -> np.ndarray:
        """(Ff)_j on the grid."""
        out = np.zeros((self.dims.n_x, self.dims.n_t))
        for step in self.steps():
            stencil = periodic_stencil(
                step.times(self.dims.t_nodes), self.dims.n_t, self.options.interpolation
            )
            out[step.rows] -= step.quad_weight * self._gather(f_j, step, stencil)
        return out

    def coupling_entries(self, offset_rows: int, size: int):
        """COO triplets of the B block row of component j."""
        dims = self.dims
        entries = []
        k_axis = np.arange(dims.n_t)[None, :, None]
        for step in self.steps():
            if not step.coupling:
                continue
            idx, wts = periodic_stencil(
                step.times(dims.t_nodes), dims.n_t, self.options.interpolation
            )
            anchors = np.arange(dims.n_x)[step.rows][:, None, None]
            rows = offset_rows + anchors * dims.n_t + k_axis
            for k, weight in step.coupling.items():
                cols = k * size + step.nodes[:, None, None] * dims.n_t + idx
                vals = np.broadcast_to(weight, idx.shape[:-1])[..., None] * wts
                entries.append(
                    (np.broadcast_to(rows, idx.shape).ravel(), cols.ravel(), vals.ravel())
                )
        return entries


class DiscretizedProblem:
    """A problem bound to a grid and operator options, with lazily built bundles."""

    def __init__(self, problem: HyperbolicProblem, dims: GridDims, options: OperatorOptions):
        self.problem = problem
        self.dims = dims
        self.options = options
        self._bundles: Dict[int, CharacteristicBundle] = {}
        self._locks = [threading.Lock() for _ in range(problem.n)]

    def bundle(self, j: int) -> CharacteristicBundle:
        with self._locks[j]:
            if j not in self._bundles:
                self._bundles[j] = CharacteristicBundle(self.problem, j, self.dims, self.options)
            return self._bundles[j]

    def _map_components(self, func) -> List[np.ndarray]:
        components = range(self.problem.n)
        if self.options.max_workers > 1 and self.problem.n > 1:
            with ThreadPoolExecutor(max_workers=self.options.max_workers) as executor:
                return list(executor.map(func, components))
        return [func(j) for j in components]

    def _check(self, u: GridFunction, what: str):
        if u.n != self.problem.n or u.dims != self.dims:
            raise WrongShape(
                f"{what} has shape {u.values.shape}, expected "
                f"({self.problem.n}, {self.dims.n_x}, {self.dims.n_t})"
            )

    def _boundary_part(self, u: GridFunction, j: int, include_source: bool) -> np.ndarray:
        bundle = self.bundle(j)
        order = self.options.interpolation

        def trace(col, side, tau):
            return interpolate_periodic(u.boundary_trace(col, side), tau, order)

        try:
            value = self.problem.boundary.apply(
                trace, j, bundle.terminal_times(), include_source=include_source
            )
        except NotImplementedError as err:
            raise UnsupportedBoundary(
                f"{self.problem.boundary.kind} boundary has no discrete evaluation"
            ) from err
        return bundle.terminal_weights() * value

    def apply_C(self, u: GridFunction, include_source: bool = True) -> GridFunction:
        self._check(u, "argument of C")
        record_usage("C")
        return GridFunction(
            np.stack(self._map_components(lambda j: self._boundary_part(u, j, include_source)))
        )

    def apply_abs_C(self, v: GridFunction) -> GridFunction:
        """The weight-modulus operator |C|: |c_j| sum |w| v_col(side, s - delay), linear in t."""
        self._check(v, "argument of |C|")
        boundary = self.problem.boundary
        if not boundary.has_pointwise_terms:
            raise UnsupportedBoundary(
                f"{boundary.kind} boundary has no pointwise weights, |C| is undefined"
            )
        record_usage("abs_C")

        def component(j):
            bundle = self.bundle(j)
            s = bundle.terminal_times()
            total = np.zeros(s.shape)
            for term in boundary.terms_for_row(j):
                trace = v.boundary_trace(term.col, term.side)
                total += np.abs(term.weight_at(s)) * interpolate_periodic(trace, s - term.delay)
            return bundle.terminal_weights() * total

        return GridFunction(np.stack(self._map_components(component)))

    def apply_B(self, u: GridFunction) -> GridFunction:
        self._check(u, "argument of B")
        record_usage("B")
        return GridFunction(
            np.stack(self._map_components(lambda j: self.bundle(j).integrate_coupling(u.values)))
        )

    def apply_F(self, f: GridFunction) -> GridFunction:
        self._check(f, "forcing")
        record_usage("F")
        return GridFunction(
            np.stack(
                self._map_components(lambda j: self.bundle(j).integrate_forcing(f.values[j]))
            )
        )

    def forcing_grid(self) -> GridFunction:
        return GridFunction.from_callables(self.problem.f, self.dims)

    def _boundary_entries(self, size: int):
        dims = self.dims
        boundary = self.problem.boundary
        anchors = (
            np.arange(dims.n_x)[:, None, None] * dims.n_t + np.arange(dims.n_t)[None, :, None]
        )
        entries = []
        for j in range(self.problem.n):
            bundle = self.bundle(j)
            s = bundle.terminal_times()
            weight = bundle.terminal_weights()
            for term in boundary.terms_for_row(j):
                idx, wts = periodic_stencil(s - term.delay, dims.n_t, self.options.interpolation)
                node = 0 if term.side == 0 else dims.n_x - 1
                rows = j * size + np.broadcast_to(anchors, idx.shape)
                cols = term.col * size + node * dims.n_t + idx
                vals = (weight * term.weight_at(s))[..., None] * wts
                entries.append((rows.ravel(), cols.ravel(), vals.ravel()))
        return entries

    def _boundary_columns(self, total: int) -> np.ndarray:
        """Columns of the linear part of C from nodal basis vectors."""
        columns = np.zeros((total, total))
        basis = np.zeros(total)
        for col in range(total):
            basis[col] = 1.0
            unit = GridFunction.from_flat(basis, self.problem.n, self.dims)
            columns[:, col] = self.apply_C(unit, include_source=False).flat()
            basis[col] = 0.0
        return columns

    def assemble_dense(
        self, dense_cap: int = DEFAULT_DENSE_CAP, include_coupling: bool = True
    ) -> np.ndarray:
        """Matrix of I - C - B (or I - C) in the nodal basis; C without its source."""
        total = self.dims.size(self.problem.n)
        if total > dense_cap:
            raise DenseCapExceeded(
                makeStringRed(
                    f"dense assembly needs {total} unknowns, above the cap of {dense_cap}"
                )
            )
        record_usage("dense")
        size = self.dims.n_x * self.dims.n_t
        entries = []
        if include_coupling:
            for j in range(self.problem.n):
                entries.extend(self.bundle(j).coupling_entries(j * size, size))
        if self.problem.boundary.has_pointwise_terms:
            entries.extend(self._boundary_entries(size))
            operator = np.zeros((total, total))
        else:
            operator = self._boundary_columns(total)
        if entries:
            rows, cols, vals = (np.concatenate(parts) for parts in zip(*entries))
            operator += coo_matrix((vals, (rows, cols)), shape=(total, total)).toarray()
        return np.eye(total) - operator


_discretizations: "weakref.WeakKeyDictionary[HyperbolicProblem, Dict]" = weakref.WeakKeyDictionary()
_discretizations_lock = threading.Lock()


def discretize(
    problem: HyperbolicProblem,
    dims: GridDims,
    options: Optional[OperatorOptions] = None,
) -> DiscretizedProblem:
    """Shared DiscretizedProblem for (problem, dims, options); lives as long as the problem."""
    options = options or OperatorOptions()
    with _discretizations_lock:
        per_problem = _discretizations.setdefault(problem, {})
        key = (dims, options)
        if key not in per_problem:
            per_problem[key] = DiscretizedProblem(problem, dims, options)
        return per_problem[key]


def apply_C(
    problem: HyperbolicProblem, u: GridFunction, options: Optional[OperatorOptions] = None
) -> GridFunction:
    """The affine boundary operator C, boundary source included."""
    return discretize(problem, u.dims, options).apply_C(u)


def apply_C_linear(
    problem: HyperbolicProblem, u: GridFunction, options: Optional[OperatorOptions] = None
) -> GridFunction:
    return discretize(problem, u.dims, options).apply_C(u, include_source=False)


def apply_abs_C(
    problem: HyperbolicProblem, v: GridFunction, options: Optional[OperatorOptions] = None
) -> GridFunction:
    return discretize(problem, v.dims, options).apply_abs_C(v)


def apply_B(
    problem: HyperbolicProblem, u: GridFunction, options: Optional[OperatorOptions] = None
) -> GridFunction:
    return discretize(problem, u.dims, options).apply_B(u)


def apply_F(
    problem: HyperbolicProblem, f: GridFunction, options: Optional[OperatorOptions] = None
) -> GridFunction:
    return discretize(problem, f.dims, options).apply_F(f)


def trace_bundle(
    problem: HyperbolicProblem,
    j: int,
    dims: GridDims,
    options: Optional[OperatorOptions] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """omega_j(x_j, x_i, t_k) and c_j(x_j, x_i, t_k) for every grid anchor."""
    bundle = discretize(problem, dims, options).bundle(j)
    return bundle.terminal_times(), np.array(bundle.terminal_weights())


def solve_I_minus_C(
    problem: HyperbolicProblem,
    rhs: GridFunction,
    options: Optional[OperatorOptions] = None,
    full_output: bool = False,
):
    """Solve v = Cv + rhs by the Neumann iteration v <- Cv + rhs.

    Stops as soon as ||Cv + rhs - v||_inf <= neumann_tol. With ``full_output`` the
    number of C applications is returned as well.
    """
    options = options or OperatorOptions()
    discretization = discretize(problem, rhs.dims, options)
    v = rhs.copy()
    residual = np.inf
    for applications in range(1, options.neumann_max_terms + 1):
        update = discretization.apply_C(v) + rhs - v
        residual = update.sup_norm()
        if residual <= options.neumann_tol:
            logger.debug(f"Neumann series converged after {applications} terms ({residual:.2e})")
            return (v, applications) if full_output else v
        v = v + update
    raise NoConvergence(
        f"Neumann series for I - C did not reach {options.neumann_tol:.1e} in "
        f"{options.neumann_max_terms} terms (residual {residual:.3e})",
        iterations=options.neumann_max_terms,
        residual=float(residual),
    )


def assemble_dense(
    problem: HyperbolicProblem,
    dims: GridDims,
    options: Optional[OperatorOptions] = None,
    dense_cap: int = DEFAULT_DENSE_CAP,
    include_coupling: bool = True,
) -> np.ndarray:
    return discretize(problem, dims, options).assemble_dense(
        dense_cap=dense_cap, include_coupling=include_coupling
    )
