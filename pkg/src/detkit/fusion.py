"""Feature-level fusion of camera labels and accelerometer samples.

Three steps: align every sensor's native labels to one canonical
vocabulary, discretize numeric attributes into labelled bins, and resolve a
timeline of activity states. The resolver tells a fall from someone lying
down on purpose by looking for an acceleration spike shortly before a run of
"lying" detections starts. The rule and its defaults (2000 ms lookback,
2.5 g spike) are configuration choices, not measured constants.
"""

from __future__ import annotations

import bisect
import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import AlignmentError, ConfigError, InputError

LYING = "lying"
STANDING = "standing"


@dataclass(frozen=True)
class SensorObservation:
    """One timestamped reading: either a label (with confidence) or a number."""

    sensor_id: str
    t_ms: float
    label: Optional[str] = None
    confidence: Optional[float] = None
    value: Optional[float] = None

    def __post_init__(self):
        if self.t_ms < 0:
            raise InputError(f"timestamp must be >= 0, got {self.t_ms}")
        if (self.label is None) == (self.value is None):
            raise InputError("observation needs exactly one of label or value")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise InputError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class SynonymTable:
    mapping: Mapping[Tuple[str, str], str]

    @property
    def canonical(self) -> frozenset:
        return frozenset(self.mapping.values())

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping[str, str]]) -> "SynonymTable":
        """Build from ``{sensor_id: {native_label: canonical_label}}``."""
        return cls({(sensor, native): canon for sensor, labels in data.items() for native, canon in labels.items()})


def align(obs: SensorObservation, table: SynonymTable) -> SensorObservation:
    if obs.label is None:
        return obs
    key = (obs.sensor_id, obs.label)
    if key in table.mapping:
        return replace(obs, label=table.mapping[key])
    if obs.label in table.canonical:
        return obs
    raise AlignmentError(obs.sensor_id, obs.label)


@dataclass(frozen=True)
class DomainSpec:
    attribute: str
    edges: Tuple[float, ...]
    labels: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "labels", tuple(self.labels))
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ConfigError(f"{self.attribute}: bin edges must be strictly increasing")
        if len(self.labels) != len(self.edges) + 1:
            raise ConfigError(f"{self.attribute}: need {len(self.edges) + 1} labels for {len(self.edges)} edges")


def discretize(value: float, spec: DomainSpec) -> str:
    """Label of the half-open bin ``[edge_i, edge_i+1)`` holding ``value``."""
    return spec.labels[bisect.bisect_right(spec.edges, value)]


class State(str, enum.Enum):
    STANDING = "STANDING"
    LYING_DOWN = "LYING_DOWN"
    FALL_DETECTED = "FALL_DETECTED"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class ActivityState:
    state: State
    t0: float
    t1: float
    supporting: Tuple[SensorObservation, ...] = ()

    def to_dict(self) -> dict:
        return {
            "state": self.state.value,
            "t0": self.t0,
            "t1": self.t1,
            "supporting": [observation_to_dict(o) for o in self.supporting],
        }


def accel_magnitude(ax: float, ay: float, az: float) -> float:
    return math.sqrt(ax * ax + ay * ay + az * az)


def _check_ordered(stream, name):
    for prev, cur in zip(stream, stream[1:]):
        if cur.t_ms < prev.t_ms:
            raise InputError(f"{name} stream is not time-ordered: t={cur.t_ms} after t={prev.t_ms}")


def fuse_activity(
    visual: Sequence[SensorObservation],
    accel: Sequence[SensorObservation],
    window_ms: float = 2000.0,
    spike_g: float = 2.5,
    max_gap_ms: Optional[float] = None,
    query_window: Optional[Tuple[float, float]] = None,
) -> List[ActivityState]:
    """Turn canonical visual labels plus accelerometer magnitudes into states.

    Consecutive visual observations with the same label form a run. A
    "lying" run is a FALL_DETECTED when some accelerometer sample of at least
    ``spike_g`` falls within ``window_ms`` before (or at) the run's first
    observation, otherwise LYING_DOWN; "standing" runs are STANDING and any
    other label is UNKNOWN. Two observations further apart than
    ``max_gap_ms`` end a run and the gap between them becomes UNKNOWN, as do
    the parts of ``query_window`` before the first and after the last
    observation. With no visual data at all the whole ``query_window`` is a
    single UNKNOWN.
    """
    if window_ms <= 0:
        raise ConfigError("window_ms must be > 0")
    if spike_g <= 1:
        raise ConfigError("spike_g must be > 1")
    visual = list(visual)
    accel = list(accel)
    _check_ordered(visual, "visual")
    _check_ordered(accel, "accelerometer")
    if any(o.label is None for o in visual):
        raise InputError("visual stream must contain label observations")
    if any(o.value is None for o in accel):
        raise InputError("accelerometer stream must contain numeric observations")

    if not visual:
        t0, t1 = query_window if query_window else ((accel[0].t_ms, accel[-1].t_ms) if accel else (0, 0))
        return [ActivityState(State.UNKNOWN, t0, t1)]

    runs: List[List[SensorObservation]] = [[visual[0]]]
    for obs in visual[1:]:
        last = runs[-1][-1]
        gap = max_gap_ms is not None and obs.t_ms - last.t_ms > max_gap_ms
        if obs.label == last.label and not gap:
            runs[-1].append(obs)
        else:
            runs.append([obs])

    spike_times = [o.t_ms for o in accel]
    states: List[ActivityState] = []
    if query_window and query_window[0] < visual[0].t_ms:
        states.append(ActivityState(State.UNKNOWN, query_window[0], visual[0].t_ms))
    for n, run in enumerate(runs):
        if n and max_gap_ms is not None and run[0].t_ms - runs[n - 1][-1].t_ms > max_gap_ms:
            states.append(ActivityState(State.UNKNOWN, runs[n - 1][-1].t_ms, run[0].t_ms))
        start, end = run[0].t_ms, run[-1].t_ms
        label = run[0].label
        if label == LYING:
            lo = bisect.bisect_left(spike_times, start - window_ms)
            hi = bisect.bisect_right(spike_times, start)
            spikes = tuple(o for o in accel[lo:hi] if o.value >= spike_g)
            if spikes:
                states.append(ActivityState(State.FALL_DETECTED, start, end, tuple(run) + spikes))
            else:
                states.append(ActivityState(State.LYING_DOWN, start, end, tuple(run)))
        elif label == STANDING:
            states.append(ActivityState(State.STANDING, start, end, tuple(run)))
        else:
            states.append(ActivityState(State.UNKNOWN, start, end, tuple(run)))
    if query_window and query_window[1] > visual[-1].t_ms:
        states.append(ActivityState(State.UNKNOWN, visual[-1].t_ms, query_window[1]))
    return states


# ---------------------------------------------------------------------------
# JSON helpers


def observation_from_dict(d: Mapping) -> SensorObservation:
    try:
        return SensorObservation(
            sensor_id=str(d["sensor_id"]),
            t_ms=d["t_ms"],
            label=d.get("label"),
            confidence=d.get("confidence"),
            value=d.get("value"),
        )
    except KeyError as exc:
        raise InputError(f"observation missing field {exc.args[0]!r}") from None


def observation_to_dict(o: SensorObservation) -> dict:
    d = {"sensor_id": o.sensor_id, "t_ms": o.t_ms}
    if o.label is not None:
        d["label"] = o.label
        if o.confidence is not None:
            d["confidence"] = o.confidence
    else:
        d["value"] = o.value
    return d


def parse_observations(jsonl: str) -> List[SensorObservation]:
    out = []
    for lineno, line in enumerate(jsonl.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
        out.append(observation_from_dict(data))
    return out


def parse_domain_specs(text: str) -> Dict[str, DomainSpec]:
    """Read ``[{"attribute": ..., "edges": [...], "labels": [...]}, ...]``."""
    data = json.loads(text)
    specs = {}
    for item in data:
        spec = DomainSpec(item["attribute"], tuple(item["edges"]), tuple(item["labels"]))
        specs[spec.attribute] = spec
    return specs
