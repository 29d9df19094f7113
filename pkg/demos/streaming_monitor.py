"""
Early warning on a live stream
==============================

Feed an extinction-phase recording into the streaming monitor sample block
by sample block and report when the first warning fires.
"""

import numpy as np

from arcstab import Dataset, RegimeLabel, extract, synthesize_dataset_trace, train
from arcstab.monitor import Monitor, MonitorConfig, calibrate_threshold
from arcstab.signal import default_phase_params, generate_phase

rows = extract(synthesize_dataset_trace(seed=0))
ds = Dataset.from_vectors([v for _, v in rows], [f.label for f, _ in rows])
delta = calibrate_threshold(ds)
model = train(ds, "svm").with_calibration(asi_threshold=delta)
print(f"ASI threshold from stable training windows: {delta:.4f}")

###############################################################################
# A fresh extinction trace, generated with a different seed than the
# training data, arriving in 37-sample chunks.

params = default_phase_params(seed=1)[RegimeLabel.EXTINCTION]
x = generate_phase(RegimeLabel.EXTINCTION, params).samples

mon = Monitor(model, MonitorConfig(warmup_windows=3))
events = []
for i in range(0, len(x), 37):
    events.extend(mon.feed(x[i:i + 37]))

first = next((e for e in events if e.warning), None)
print(f"{len(events)} windows, {sum(e.warning for e in events)} warnings")
if first is not None:
    print(f"first warning at t = {1e3 * first.frame_time_s:.1f} ms ({first.reason})")
print(f"median processing time {1e3 * np.median(mon.latencies_s):.3f} ms per window")

###############################################################################
# Each event serialises to one NDJSON line.

print(events[-1].to_json())
