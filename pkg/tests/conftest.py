import numpy as np
import pytest

from periodic_hyperbolic.dataclass import GridDims
from periodic_hyperbolic.interface import BoundaryOperator
from periodic_hyperbolic.operators import collect_and_reset_usage
from periodic_hyperbolic.problem import HyperbolicProblem, TwoByTwoReflection


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def small_dims():
    return GridDims(11, 16)


@pytest.fixture(autouse=True)
def clean_usage_counters():
    collect_and_reset_usage()
    yield
    collect_and_reset_usage()


@pytest.fixture
def make_reflection():
    """Factory for 2x2 constant-coefficient reflection problems u1(0) = p0 u2(0), u2(1) = p1 u1(1)."""

    def make(p0=0.5, p1=0.5, a=(1.0, -1.0), b=((0.0, 0.0), (0.0, 0.0)), f=(0.0, 0.0), name="reflection"):
        return HyperbolicProblem.build(
            a=list(a),
            b=[list(row) for row in b],
            f=list(f),
            boundary=TwoByTwoReflection(p0, p1),
            m=1,
            name=name,
        )

    return make


@pytest.fixture
def time_dependent_problem():
    """2x2 problem with t-dependent speeds, couplings and reflection weight."""
    return HyperbolicProblem.build(
        a=["1 + 0.3*sin(t)", "-1 - 0.2*cos(t + x)"],
        b=[[0.1, "0.2*cos(t)"], [-0.3, "0.05*x"]],
        f=["cos(t)", "sin(t)*x"],
        boundary=TwoByTwoReflection("0.5 + 0.1*sin(t)", 0.4),
        m=1,
        name="time_dependent",
    )


class MeanBoundary(BoundaryOperator):
    """u(0, t) = (u(1, t) + u(1, t - 1)) / 4, evaluated only through apply."""

    kind = "mean"

    def __init__(self):
        super().__init__(n=1, m=1)

    @property
    def terms(self):
        return []

    @property
    def has_pointwise_terms(self):
        return False

    def to_dict(self):
        return {"variant": self.kind}

    def apply(self, trace, j, s, include_source=True):
        s = np.asarray(s, dtype=float)
        return 0.25 * (trace(0, 1, s) + trace(0, 1, s - 1.0))


@pytest.fixture
def mean_boundary_problem():
    """Scalar problem whose boundary operator has no pointwise weights."""
    return HyperbolicProblem.build(a=[1.5], boundary=MeanBoundary(), m=1, name="mean")
