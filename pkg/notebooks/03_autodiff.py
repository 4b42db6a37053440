"""
Reverse-mode differentiation on a tape
======================================

The models are trained with a small numpy autodiff engine. Each operation
records its parents and a backward rule; ``backward`` walks the graph in
reverse topological order.
"""

import numpy as np

from irregular_har import autodiff as ad

# A tiny expression: loss = sum(tanh(W x + b) ** 2)
rng = np.random.default_rng(0)
W = ad.Tensor(rng.normal(size=(3, 4)), requires_grad=True)
b = ad.Tensor(np.zeros(3), requires_grad=True)
x = rng.normal(size=4)

h = ad.tanh(ad.linear(x, W, b))
loss = (h * h).sum()
ad.backward(loss)
print("loss:", float(loss.data))

# %%
# Compare the tape gradient of ``W`` with central finite differences.

def value(Wdata):
    z = np.tanh(Wdata @ x)
    return float((z * z).sum())

step = 1e-6
numeric = np.zeros_like(W.data)
for i in np.ndindex(W.data.shape):
    up, down = W.data.copy(), W.data.copy()
    up[i] += step
    down[i] -= step
    numeric[i] = (value(up) - value(down)) / (2 * step)
print("max |tape - finite difference|:", np.abs(W.grad - numeric).max())

# %%
# Training uses a ``ParamStore`` and momentum SGD. Here it fits a
# two-class problem with a single linear layer.

store = ad.ParamStore(seed=1)
store.create("w", (2, 2))
store.create("b", (2,), init="zeros")
X = np.vstack([rng.normal(-1, 0.5, (50, 2)), rng.normal(1, 0.5, (50, 2))])
y = np.repeat([0, 1], 50)
for epoch in range(30):
    loss = ad.cross_entropy(ad.linear(X, store["w"], store["b"]), y)
    ad.backward(loss, store)
    ad.sgd_step(store, 0.1)
    if epoch % 10 == 0:
        print(f"epoch {epoch:2d}  loss {float(loss.data):.4f}")
pred = np.argmax(ad.linear(X, store["w"], store["b"]).data, axis=1)
print("training accuracy:", (pred == y).mean())
