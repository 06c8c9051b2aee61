import factory
import numpy as np

from geoflow.diagnostics import DiagnosticRecord
from geoflow.flow import FlowConfig
from geoflow.scenarios import Scenario
from geoflow.selfsimilar import SolitonKind, SolitonSpec

SIN_30, COS_30 = 0.5, float(np.sqrt(3.0) / 2.0)
SINH_HALF, COSH_HALF = float(np.sinh(0.5)), float(np.cosh(0.5))


def vertical_barriers(start, end):
    return (
        {"point": start, "tangent": (0.0, 0.0, 1.0)},
        {"point": end, "tangent": (0.0, 0.0, 1.0)},
    )


class FlowConfigFactory(factory.Factory):
    class Meta:
        model = FlowConfig

    cfl = 0.25
    t_max = 10.0
    kappa_converged = 1e-5
    kappa_blowup = 1e4
    regrid_every = 50
    record_every = 10


class ScenarioFactory(factory.Factory):
    class Meta:
        model = Scenario

    name = factory.Sequence(lambda n: "plane-sine-%d" % n)
    surface = "plane"
    start = (0.0, 0.0, 0.0)
    end = (1.0, 0.0, 0.0)
    curve = factory.Dict({"kind": "sine", "amplitude": 0.01})
    barriers = (
        {"point": (0.0, 0.0, 0.0), "tangent": (0.0, 1.0, 0.0)},
        {"point": (1.0, 0.0, 0.0), "tangent": (0.0, 1.0, 0.0)},
    )
    n = 32
    flow = factory.SubFactory(FlowConfigFactory)


class SphereScenarioFactory(ScenarioFactory):
    name = factory.Sequence(lambda n: "sphere-bow-%d" % n)
    surface = "sphere"
    start = (COS_30, -SIN_30, 0.0)
    end = (COS_30, SIN_30, 0.0)
    curve = factory.Dict({"kind": "sine", "amplitude": 0.2})
    barriers = vertical_barriers((COS_30, -SIN_30, 0.0), (COS_30, SIN_30, 0.0))


class HyperbolicScenarioFactory(ScenarioFactory):
    name = factory.Sequence(lambda n: "hyperbolic-bow-%d" % n)
    surface = "hyperbolic"
    start = (COSH_HALF, -SINH_HALF, 0.0)
    end = (COSH_HALF, SINH_HALF, 0.0)
    curve = factory.Dict({"kind": "sine", "amplitude": 0.1})
    barriers = vertical_barriers((COSH_HALF, -SINH_HALF, 0.0), (COSH_HALF, SINH_HALF, 0.0))


class DoubleBumpScenarioFactory(ScenarioFactory):
    name = factory.Sequence(lambda n: "double-bump-%d" % n)
    curve = factory.Dict({"kind": "bump", "amplitude": 0.25, "centers": [0.3, 0.7], "width": 0.08})
    n = 128


class LoopScenarioFactory(ScenarioFactory):
    name = factory.Sequence(lambda n: "loop-%d" % n)
    curve = factory.Dict({"kind": "loop"})
    barriers = None
    in_hypothesis = False
    n = 128


class SolitonSpecFactory(factory.Factory):
    class Meta:
        model = SolitonSpec

    kind = SolitonKind.SHRINKING_CIRCLE
    radius = 1.0


class DiagnosticRecordFactory(factory.Factory):
    class Meta:
        model = DiagnosticRecord

    t = factory.Sequence(lambda n: 0.01 * n)
    length = 1.0
    kappa_sq_integral = 1.0
    dkappa_sq_integral = 1.0
    turning = 0.0
    kappa_sup = 1.0
    theta_min = 1.0
    alpha = 0.0
    step = factory.Sequence(lambda n: 10 * n)
