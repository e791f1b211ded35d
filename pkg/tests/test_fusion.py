import pytest
from hypothesis import given, strategies as st

from detkit.errors import AlignmentError, ConfigError, InputError
from detkit.fusion import (
    DomainSpec,
    SensorObservation,
    State,
    SynonymTable,
    accel_magnitude,
    align,
    discretize,
    fuse_activity,
    parse_observations,
)

CAM = "camera"
ACC = "accel"


def lying(t):
    return SensorObservation(CAM, t, label="lying", confidence=0.9)


def standing(t):
    return SensorObservation(CAM, t, label="standing", confidence=0.9)


def g(t, v):
    return SensorObservation(ACC, t, value=v)


class TestAlignment:
    table = SynonymTable.from_dict({"cam_a": {"person_lying": "lying"}, "cam_b": {"on_floor": "lying"}})

    def test_maps_native_labels(self):
        assert align(SensorObservation("cam_a", 0, label="person_lying"), self.table).label == "lying"
        assert align(SensorObservation("cam_b", 0, label="on_floor"), self.table).label == "lying"

    def test_canonical_passes_through(self):
        assert align(SensorObservation("cam_c", 0, label="lying"), self.table).label == "lying"

    def test_unknown_label(self):
        with pytest.raises(AlignmentError, match="sitting"):
            align(SensorObservation("cam_a", 0, label="sitting"), self.table)

    def test_numeric_untouched(self):
        o = g(0, 1.0)
        assert align(o, self.table) is o


class TestDiscretize:
    spec = DomainSpec("accel_magnitude", (1.5, 3.0), ("low", "medium", "high"))

    @pytest.mark.parametrize("v, label", [(0.0, "low"), (1.49, "low"), (1.5, "medium"), (2.9, "medium"), (3.0, "high"), (9, "high")])
    def test_bins(self, v, label):
        assert discretize(v, self.spec) == label

    def test_bad_specs(self):
        with pytest.raises(ConfigError):
            DomainSpec("a", (2.0, 1.0), ("x", "y", "z"))
        with pytest.raises(ConfigError):
            DomainSpec("a", (1.0,), ("x",))

    @given(st.floats(-100, 100), st.floats(-100, 100))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        labels = self.spec.labels
        assert labels.index(discretize(lo, self.spec)) <= labels.index(discretize(hi, self.spec))


class TestFuse:
    def test_spike_before_lying_is_fall(self):
        states = fuse_activity([lying(10000), lying(10500)], [g(9000, 1.0), g(9500, 3.2), g(10000, 1.0)])
        assert [s.state for s in states] == [State.FALL_DETECTED]
        assert (states[0].t0, states[0].t1) == (10000, 10500)
        assert g(9500, 3.2) in states[0].supporting

    def test_no_spike_is_lying_down(self):
        states = fuse_activity([lying(10000)], [g(9500, 1.1), g(9800, 1.0)])
        assert [s.state for s in states] == [State.LYING_DOWN]

    def test_spike_outside_window(self):
        states = fuse_activity([lying(10000)], [g(7999, 3.2), g(10001, 3.2)])
        assert states[0].state is State.LYING_DOWN

    def test_window_edges_inclusive(self):
        assert fuse_activity([lying(10000)], [g(8000, 2.5)])[0].state is State.FALL_DETECTED
        assert fuse_activity([lying(10000)], [g(10000, 2.5)])[0].state is State.FALL_DETECTED

    def test_empty_visual_is_unknown(self):
        (s,) = fuse_activity([], [g(0, 1.0), g(500, 1.0)])
        assert (s.state, s.t0, s.t1, s.supporting) == (State.UNKNOWN, 0, 500, ())
        (s,) = fuse_activity([], [], query_window=(0, 5000))
        assert (s.state, s.t0, s.t1) == (State.UNKNOWN, 0, 5000)

    def test_runs_and_query_window(self):
        visual = [standing(1000), standing(2000), lying(3000), SensorObservation(CAM, 4000, label="other")]
        states = fuse_activity(visual, [], query_window=(0, 6000))
        assert [s.state for s in states] == [State.UNKNOWN, State.STANDING, State.LYING_DOWN, State.UNKNOWN, State.UNKNOWN]
        assert [(s.t0, s.t1) for s in states] == [(0, 1000), (1000, 2000), (3000, 3000), (4000, 4000), (4000, 6000)]

    def test_gap_becomes_unknown(self):
        states = fuse_activity([standing(0), standing(10000)], [], max_gap_ms=5000)
        assert [s.state for s in states] == [State.STANDING, State.UNKNOWN, State.STANDING]

    def test_out_of_order(self):
        with pytest.raises(InputError, match="t=500"):
            fuse_activity([lying(1000), lying(500)], [])

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            fuse_activity([], [], window_ms=0)
        with pytest.raises(ConfigError):
            fuse_activity([], [], spike_g=1.0)

    @given(st.lists(st.tuples(st.integers(0, 10**6), st.sampled_from(["lying", "standing", "x"])), max_size=30),
           st.lists(st.tuples(st.integers(0, 10**6), st.floats(0, 6)), max_size=30))
    def test_states_ordered_and_cover_observations(self, vis, acc):
        visual = [SensorObservation(CAM, t, label=l) for t, l in sorted(vis)]
        accel = [g(t, v) for t, v in sorted(acc)]
        states = fuse_activity(visual, accel)
        assert all(s.t0 <= s.t1 for s in states)
        assert all(a.t1 <= b.t0 for a, b in zip(states, states[1:]))
        supported = [o for s in states for o in s.supporting if o.sensor_id == CAM]
        assert supported == visual


def test_magnitude():
    assert accel_magnitude(3.0, 4.0, 0.0) == 5.0


def test_parse_observations():
    text = '{"sensor_id": "camera", "t_ms": 5, "label": "lying"}\n\n{"sensor_id": "accel", "t_ms": 6, "value": 1.2}\n'
    obs = parse_observations(text)
    assert obs == [SensorObservation(CAM, 5, label="lying"), g(6, 1.2)]
    with pytest.raises(InputError):
        parse_observations('{"t_ms": 1}')
    with pytest.raises(InputError):
        parse_observations('{"sensor_id": "a", "t_ms": 1, "label": "x", "value": 2}')
