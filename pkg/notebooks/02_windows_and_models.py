"""
Windows and the three classifiers
=================================

Recordings are cut into 2 s windows with a 1 s step. Discrete-time models
(ConvDense, DeepConvLSTM) see only the sample values; the continuous-time
CfcNet also receives the gap before every sample.
"""

import numpy as np

from irregular_har import SynthConfig, synth_generate
from irregular_har.models import ModelConfig, build_model
from irregular_har.perturb import random_dropout
from irregular_har.windowing import pad_to_length, sliding_windows

ds = synth_generate(SynthConfig(num_subjects=1, segment_seconds=4.0, segments_per_subject=4))
_, series = ds.recordings[0]
windows = sliding_windows(series, window_seconds=2.0, step_seconds=1.0)
print(f"{len(windows)} windows of {len(windows[0])} samples; labels:",
      [w.label for w in windows])

# %%
# After dropout the same time span holds fewer samples. The windows are
# aligned with the regular ones so every window has a regular twin.

irregular = random_dropout(series, 0.4, seed=0)
irr_windows = sliding_windows(irregular, 2.0, 1.0, start_time=series.timestamps[0],
                              end_time=series.timestamps[-1] + series.nominal_interval)
print("samples per window after dropout:", [len(w) for w in irr_windows])

# %%
# Discrete models need a fixed length, so short windows are padded by
# repeating their last sample.

padded = pad_to_length(irr_windows[0], 100)
print("padded length:", len(padded))

# %%
# Build one untrained model of each kind and compare their outputs on the
# same window when only the elapsed-time vector changes.

models = {
    arch: build_model(ModelConfig(arch, ds.num_channels, ds.num_classes,
                                  window_len=None if arch == "cfc_net" else 100, seed=0))
    for arch in ("conv_dense", "deep_conv_lstm", "cfc_net")
}
w = windows[3]
stretched = w.values, w.elapsed * 2.0
for arch, model in models.items():
    a = model.forward(w.values, w.elapsed).data
    b = model.forward(*stretched).data
    print(f"{arch:15s} params={model.num_parameters:6d}  "
          f"logit change when gaps double: {np.abs(a - b).max():.3g}")
