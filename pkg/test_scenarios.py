import numpy as np
import pytest

from geoflow.errors import ScenarioError
from geoflow.scenarios import (
    BumpCurve,
    build_curve,
    load_scenario,
    region_for,
    validate_scenario,
)
from test_factories import (
    COS_30,
    SIN_30,
    LoopScenarioFactory,
    ScenarioFactory,
    SphereScenarioFactory,
    vertical_barriers,
)
from test_helpers import SCENARIO_DIR, OutputTest

TILTED_BARRIERS = (
    {"point": (0.0, 0.0, 0.0), "tangent": (1.0, 0.5, 0.0)},
    {"point": (1.0, 0.0, 0.0), "tangent": (0.0, 1.0, 0.0)},
)


class LoadScenarioTest(OutputTest):
    def test_bundled_scenarios(self):
        paths = sorted(SCENARIO_DIR.glob("*.json"))
        assert len(paths) == 6
        for path in paths:
            assert load_scenario(path).name == path.stem

    def test_round_trip(self):
        scenario = SphereScenarioFactory()
        assert load_scenario(self.write_scenario(scenario)) == scenario

    def test_missing_file(self):
        with pytest.raises(ScenarioError, match="cannot read"):
            load_scenario(self.directory / "missing.json")

    def test_invalid_json(self):
        path = self.directory / "broken.json"
        path.write_text('{"name": ')
        with pytest.raises(ScenarioError, match="is not valid JSON"):
            load_scenario(path)

    def test_unknown_key(self):
        path = self.directory / "extra.json"
        path.write_text('{"name": "extra", "surface": "plane", "colour": "red"}')
        with pytest.raises(ScenarioError) as e:
            load_scenario(path)
        assert e.value.field is not None

    def test_invalid_field(self):
        path = self.directory / "coarse.json"
        path.write_text(
            '{"name": "coarse", "surface": "plane", "n": 4, '
            '"curve": {"kind": "sine", "amplitude": 0.1}}'
        )
        with pytest.raises(ScenarioError, match="^n: "):
            load_scenario(path)


class BuildCurveTest(OutputTest):
    def test_bump_endpoints_are_exact(self):
        scenario = ScenarioFactory(curve={"kind": "bump", "amplitude": 0.2, "centers": [0.4]})
        curve = build_curve(scenario)

        assert curve.n == 32
        assert np.array_equal(curve.points[0], [0.0, 0.0, 0.0])
        assert np.array_equal(curve.points[-1], [1.0, 0.0, 0.0])
        assert np.max(curve.points[:, 1]) > 0.1

    def test_bump_profile_vanishes_at_ends(self):
        spec = BumpCurve(kind="bump", amplitude=0.3, centers=[0.2, 0.9], width=0.2)
        assert np.array_equal(spec.profile(np.array([0.0, 1.0])), [0.0, 0.0])

    def test_sine_on_sphere(self):
        curve = build_curve(SphereScenarioFactory())
        assert np.all(curve.surface.contains(curve.points))
        assert np.max(np.abs(curve.points[:, 2])) > 0.1

    def test_points_curve(self):
        points = [(x, x**2, 0.0) for x in np.linspace(0.0, 1.0, 9)]
        curve = build_curve(ScenarioFactory(curve={"kind": "points", "points": points}))
        assert curve.n == 8
        assert np.allclose(curve.points, points)

    def test_points_off_the_surface(self):
        points = [(x, 0.0, 1.0) for x in np.linspace(0.0, 1.0, 9)]
        scenario = ScenarioFactory(curve={"kind": "points", "points": points})
        with pytest.raises(ScenarioError, match="^curve.points: points are not on the plane"):
            build_curve(scenario)

    def test_start_off_the_sphere(self):
        with pytest.raises(ScenarioError, match="^start: point is not on the sphere") as e:
            build_curve(SphereScenarioFactory(start=(1.0, 1.0, 0.0)))
        assert e.value.field == "start"

    def test_missing_endpoint(self):
        with pytest.raises(ScenarioError, match="^start: endpoint is required"):
            build_curve(ScenarioFactory(start=None))

    def test_coinciding_endpoints(self):
        with pytest.raises(ScenarioError, match="^end: endpoints coincide"):
            build_curve(ScenarioFactory(end=(0.0, 0.0, 0.0)))

    def test_planar_only_kinds(self):
        with pytest.raises(ScenarioError, match="^curve.kind: grim reaper"):
            build_curve(SphereScenarioFactory(curve={"kind": "grim_reaper"}))
        with pytest.raises(ScenarioError, match="^curve.kind: loop"):
            build_curve(SphereScenarioFactory(curve={"kind": "loop"}))

    def test_grim_reaper_half_width(self):
        scenario = ScenarioFactory(curve={"kind": "grim_reaper", "half_width": 2.0})
        with pytest.raises(ScenarioError, match="^curve.half_width: "):
            build_curve(scenario)


class RegionTest(OutputTest):
    def test_sides(self):
        scenario = ScenarioFactory()
        region = region_for(scenario, build_curve(scenario))
        sides = region.sides([[0.5, 0.05, 0.0], [-0.1, 0.0, 0.0], [1.2, 0.0, 0.0]])

        assert np.all(sides[0] > 0.0)
        assert sides[1, 0] < 0.0 < sides[1, 1]
        assert sides[2, 1] < 0.0 < sides[2, 0]
        assert list(region([[0.5, 0.05, 0.0], [1.2, 0.0, 0.0]])) == [True, False]

    def test_no_barriers(self):
        scenario = LoopScenarioFactory()
        assert region_for(scenario, build_curve(scenario)) is None

    def test_barrier_tangent_vanishes(self):
        scenario = ScenarioFactory(barriers=vertical_barriers((0.0, 0.0, 0.0), (1.0, 0.0, 0.0)))
        with pytest.raises(ScenarioError, match="^barriers.0: barrier tangent vanishes"):
            region_for(scenario, build_curve(scenario))


class ValidateScenarioTest(OutputTest):
    def test_bundled_scenarios(self):
        for path in sorted(SCENARIO_DIR.glob("*.json")):
            report = validate_scenario(load_scenario(path))
            expected = ["embedded"] if path.stem == "plane-loop-overhang" else []
            assert [check.name for check in report.failures] == expected, path.stem

    def test_sphere_checks(self):
        report = validate_scenario(load_scenario(SCENARIO_DIR / "sphere-hemisphere.json"))
        names = [check.name for check in report.checks]

        assert report.passed
        assert names == ["endpoints_on_barriers", "inside_region", "embedded", "convex_region"]
        assert "barrier opening 1.0472" in report.checks[-1].detail

    def test_barriers_on_one_great_circle(self):
        barriers = (
            {"point": (COS_30, -SIN_30, 0.0), "tangent": (SIN_30, COS_30, 0.0)},
            {"point": (COS_30, SIN_30, 0.0), "tangent": (-SIN_30, COS_30, 0.0)},
        )
        report = validate_scenario(SphereScenarioFactory(barriers=barriers))

        assert [check.name for check in report.failures] == ["convex_region"]
        assert "barrier arcs 6.28319" in report.failures[0].detail

    def test_curve_crosses_barrier(self):
        curve = {"kind": "sine", "amplitude": 0.3}
        scenario = ScenarioFactory(curve=curve, barriers=TILTED_BARRIERS)
        report = validate_scenario(scenario)
        assert not report.passed
        assert [check.name for check in report.failures] == ["inside_region"]

    def test_self_intersecting_curve(self):
        report = validate_scenario(LoopScenarioFactory())
        assert [check.name for check in report.failures] == ["embedded"]
        assert "self-intersections" in report.failures[0].detail
