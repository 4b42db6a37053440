"""
Macro F1 and performance loss
=============================

Classifiers are scored with macro F1, the unweighted mean of per-class F1.
Robustness is the relative drop from regular to irregular test data.
"""

import numpy as np

from irregular_har.metrics import confusion_matrix, macro_f1, per_class_f1, performance_loss

truth = [0, 0, 1, 1, 2, 2]
pred = [0, 1, 1, 1, 0, 2]
cm = confusion_matrix(pred, truth, num_classes=3)
print(cm.counts)
print("per-class F1:", np.round(per_class_f1(cm), 4))
print("macro F1:", round(macro_f1(cm), 4))

# %%
# A class that never occurs and is never predicted scores 0, which pulls
# the macro average down. A classifier that always answers class 0 on a
# balanced two-class set therefore gets 1/3.

print("always class 0:", macro_f1(confusion_matrix([0, 0, 0, 0], [0, 0, 1, 1], 2)))

# %%
# Performance loss is signed: negative values mean the irregular data
# scored better than the regular data.

p_regular = 0.622
p_irregular = p_regular * (1 - 0.0133)
print(f"P_irregular = {p_irregular:.4f}, loss = {performance_loss(p_regular, p_irregular):.4f}")
print("improvement shows as", performance_loss(0.80, 0.82))
