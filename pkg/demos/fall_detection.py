"""
Telling a fall from lying down
==============================

A camera says "lying". Was it a fall? We look for an accelerometer spike
in the two seconds before the lying run starts.
"""

from detkit.fusion import DomainSpec, SensorObservation, SynonymTable, align, discretize, fuse_activity

# each camera model has its own vocabulary
table = SynonymTable.from_dict({
    "cam_hall": {"person_upright": "standing", "person_floor": "lying"},
    "cam_room": {"up": "standing", "down": "lying"},
})

raw = [
    SensorObservation("cam_hall", 1000, label="person_upright", confidence=0.97),
    SensorObservation("cam_hall", 2000, label="person_upright", confidence=0.95),
    SensorObservation("cam_room", 10000, label="down", confidence=0.89),
    SensorObservation("cam_room", 11000, label="down", confidence=0.91),
    SensorObservation("cam_room", 20000, label="up", confidence=0.99),
    SensorObservation("cam_room", 30000, label="down", confidence=0.88),   # slow, deliberate
]
visual = [align(o, table) for o in raw]

# magnitude in g; ~1 g at rest
accel = [SensorObservation("wrist", t, value=v) for t, v in
         [(0, 1.0), (9000, 1.1), (9500, 3.2), (9800, 1.4), (29000, 1.0), (29900, 1.2)]]

for s in fuse_activity(visual, accel, window_ms=2000, spike_g=2.5, query_window=(0, 35000)):
    print(f"{s.t0:>7.0f} - {s.t1:>7.0f} ms  {s.state.value}")

# numeric readings can be put in bins too
bins = DomainSpec("accel_magnitude", (1.5, 3.0), ("low", "medium", "high"))
print([discretize(o.value, bins) for o in accel])
