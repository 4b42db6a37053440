"""Layer kernels built on :mod:`irregular_har.autodiff`.

Each kernel accepts numpy arrays or tensors and returns tensors, so the same
function serves plain evaluation and differentiable model code. Inputs may
carry a leading batch axis.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor


def conv1d_forward(inputs, kernels, bias) -> Tensor:
    """Valid 1-D cross-correlation of an ``(m, c_in)`` or ``(B, m, c_in)`` input."""
    x = as_tensor(inputs)
    if x.ndim == 2:
        return ad.conv1d(ad.reshape(x, (1,) + x.shape), kernels, bias)[0]
    return ad.conv1d(x, kernels, bias)


def dense_forward(inputs, weight, bias) -> Tensor:
    """``weight @ inputs + bias`` for an ``(n,)`` vector or an ``(B, n)`` batch."""
    x, w = as_tensor(inputs), as_tensor(weight)
    if x.shape[-1] != w.shape[1]:
        raise ValueError(f"input size {x.shape[-1]} does not match weight {w.shape}")
    if as_tensor(bias).shape != (w.shape[0],):
        raise ValueError(f"bias shape {as_tensor(bias).shape} does not match weight {w.shape}")
    return ad.linear(x, w, bias)


def lstm_cell(x, h_prev, c_prev, w_ih, w_hh, bias) -> tuple[Tensor, Tensor]:
    """One LSTM step.

    ``w_ih`` is ``(4H, n)``, ``w_hh`` is ``(4H, H)`` and ``bias`` is
    ``(4H,)``, with gate blocks stacked in the order input, forget, cell,
    output.
    """
    w_ih, w_hh = as_tensor(w_ih), as_tensor(w_hh)
    hidden = w_hh.shape[1]
    if w_ih.shape[0] != 4 * hidden or w_hh.shape[0] != 4 * hidden:
        raise ValueError("gate weights must have 4 * hidden rows")
    h_prev, c_prev = as_tensor(h_prev), as_tensor(c_prev)
    if h_prev.shape[-1] != hidden or c_prev.shape[-1] != hidden:
        raise ValueError("state size does not match weights")
    z = ad.linear(x, w_ih, bias) + ad.linear(h_prev, w_hh)
    lead = (slice(None),) * (z.ndim - 1)
    i = ad.sigmoid(z[lead + (slice(0, hidden),)])
    f = ad.sigmoid(z[lead + (slice(hidden, 2 * hidden),)])
    g = ad.tanh(z[lead + (slice(2 * hidden, 3 * hidden),)])
    o = ad.sigmoid(z[lead + (slice(3 * hidden, 4 * hidden),)])
    c = f * c_prev + i * g
    h = o * ad.tanh(c)
    return h, c


def cfc_heads(x, h_prev, w_f, b_f, w_g, b_g, w_h, b_h):
    """Time-constant, first and second heads of the closed-form cell."""
    u = ad.concat([as_tensor(x), as_tensor(h_prev)], axis=-1)
    f = ad.softplus(ad.linear(u, w_f, b_f))
    g = ad.tanh(ad.linear(u, w_g, b_g))
    h_tilde = ad.tanh(ad.linear(u, w_h, b_h))
    return f, g, h_tilde


def cfc_cell(x, h_prev, tau, w_f, b_f, w_g, b_g, w_h, b_h) -> Tensor:
    """Closed-form continuous-time update over an elapsed time ``tau``.

    With ``u = [x; h_prev]`` the cell computes a positive rate
    ``f = softplus(W_f u + b_f)`` and two candidate states
    ``g = tanh(W_g u + b_g)``, ``h~ = tanh(W_h u + b_h)``, then returns
    ``sigmoid(-f*tau) * g + sigmoid(f*tau) * h~``. At ``tau = 0`` this is
    the midpoint of both heads and it decays to ``h~`` as ``tau`` grows.
    ``tau`` is a scalar or one value per batch row.
    """
    tau = np.asarray(tau.data if isinstance(tau, Tensor) else tau, dtype=np.float64)
    if np.any(tau < 0) or not np.all(np.isfinite(tau)):
        raise ValueError("elapsed time tau must be finite and >= 0")
    f, g, h_tilde = cfc_heads(x, h_prev, w_f, b_f, w_g, b_g, w_h, b_h)
    if tau.ndim:
        tau = tau.reshape(tau.shape + (1,))
    rate = f * tau
    keep_g = ad.sigmoid(-rate)
    keep_h = ad.sigmoid(rate)
    return keep_g * g + keep_h * h_tilde


def softmax_cross_entropy(logits, target) -> Tensor:
    """``-log softmax(logits)[target]`` for a ``(K,)`` vector, or the batch mean."""
    z = as_tensor(logits)
    if z.shape[-1] < 2:
        raise ValueError("need at least two classes")
    if z.ndim == 1:
        return ad.cross_entropy(ad.reshape(z, (1, z.shape[0])), np.array([target]))
    return ad.cross_entropy(z, target)
