"""
Simulating irregular sampling
=============================

A sensor that samples at a fixed rate rarely delivers a perfectly regular
stream. This script builds a small synthetic recording and applies the
three degradations available in ``irregular_har.perturb``.
"""

import numpy as np

from irregular_har import SynthConfig, synth_generate
from irregular_har.perturb import downsample, interpolate_at, jitter_timestamps, random_dropout

# One subject, 4 s per activity segment, sampled at 50 Hz
ds = synth_generate(SynthConfig(num_subjects=1, segment_seconds=4.0, segments_per_subject=4))
sid, series = ds.recordings[0]
print(f"subject {sid}: {len(series)} samples, {series.num_channels} channels, "
      f"{series.sample_rate:g} Hz")

# %%
# Timestamp jitter
# ----------------
# Every timestamp moves by at most ``epsilon`` times the nominal interval.
# Values at the new times come from linear interpolation of the original
# signal; labels stay attached to their sample.

jittered = jitter_timestamps(series, epsilon=0.9, seed=7)
shift = jittered.timestamps - series.timestamps
print("largest shift / dt:", np.abs(shift).max() / series.nominal_interval)
print("still strictly increasing:", bool(np.all(np.diff(jittered.timestamps) > 0)))
print("first five gaps (ms):", np.round(np.diff(jittered.timestamps[:6]) * 1e3, 2))

# %%
# The interpolation is exact on straight lines, which is a handy sanity check.

line = series.replace(values=np.column_stack([2.0 * series.timestamps + 1.0] * 3))
q = np.array([0.013, 1.5, 3.999])
print("interpolated line:", interpolate_at(line, q)[:, 0], "expected:", 2.0 * q + 1.0)

# %%
# Random dropout and downsampling
# -------------------------------
# Dropout removes ``floor(alpha * N)`` samples chosen uniformly at random,
# leaving gaps of varying size. Downsampling keeps every k-th sample.

dropped = random_dropout(series, alpha=0.6, seed=1)
gaps = np.rint(np.diff(dropped.timestamps) / series.nominal_interval)
print(f"dropout 0.6: {len(dropped)} of {len(series)} samples kept, "
      f"gaps of {int(gaps.min())} to {int(gaps.max())} intervals")

slow = downsample(series, 5)
print(f"downsample x5: {len(slow)} samples at {slow.sample_rate:g} Hz")
