"""Layer-wise relevance propagation for dense networks.

Relevance starts at the model output and is redistributed backward in
proportion to each neuron's contribution w_jk * a_j to the linear part
of the next layer; activation functions are ignored (the rules linearly
approximate the model). Rules:

  lrp-0      plain proportional redistribution
  lrp-eps    adds eps*sign(z) to the denominator for stability
  lrp-gamma  boosts positive weights by (1 + gamma)
  lrp-ab     splits positive and negative contributions with weights
             alpha and beta (alpha=1, beta=0 keeps only positive parts)

Input-layer rules avoid multiplying by the raw input activations:
  pixel-bounds(l, h)  for inputs bounded to [l, h]
  squared-weights     for unbounded real inputs

Recurrent layers are rejected; this path is for dense stacks only.
"""

from __future__ import annotations

import numpy as np

from ..nn.layers import Dense, Dropout, Lstm, Masking

_EPS_DEFAULT = 1e-6
_GUARD = 1e-12


def _safe_div(num, den):
    tiny = np.abs(den) < _GUARD
    return np.where(tiny, 0.0, num / np.where(tiny, 1.0, den))


def _redistribute(a, w, rel, eps):
    """Generic LRP step: contributions c_jk = a_j w_jk, denominators
    z_k = sum_j c_jk (+ eps*sign), relevance pulled back along c/z."""
    z = a @ w
    if eps:
        z = z + eps * np.sign(np.where(z == 0.0, 1.0, z))
    tiny = np.abs(z) < _GUARD
    s = np.where(tiny, 0.0, rel / np.where(tiny, 1.0, z))
    return a * (s @ w.T)


def _layer_step(a, w, rel, rule, eps, gamma, alpha, beta):
    if rule == "lrp-0":
        return _redistribute(a, w, rel, 0.0)
    if rule == "lrp-eps":
        return _redistribute(a, w, rel, eps)
    if rule == "lrp-gamma":
        return _redistribute(a, w + gamma * np.maximum(w, 0.0), rel, eps)
    if rule == "lrp-ab":
        w_pos = np.maximum(w, 0.0)
        w_neg = np.minimum(w, 0.0)
        r_pos = _redistribute(a, w_pos, rel, eps)
        r_neg = _redistribute(a, w_neg, rel, eps)
        return alpha * r_pos - beta * r_neg
    raise ValueError(f"unknown rule {rule!r}")


def _input_step(x, w, rel, input_rule, low, high):
    if input_rule == "pixel-bounds":
        w_pos = np.maximum(w, 0.0)
        w_neg = np.minimum(w, 0.0)
        contrib = (x[:, :, None] * w - low * w_pos - high * w_neg)
        z = contrib.sum(axis=1)
        s = _safe_div(rel, z)
        return (contrib * s[:, None, :]).sum(axis=2)
    if input_rule == "squared-weights":
        w2 = w * w
        z = w2.sum(axis=0)
        s = _safe_div(rel, z[None, :])
        return s @ w2.T
    raise ValueError(f"unknown input rule {input_rule!r}")


def lrp(model, x, rule: str = "lrp-0", input_rule: str | None = None,
        head: int = 0, eps: float = _EPS_DEFAULT, gamma: float = 0.25,
        alpha: float = 1.0, beta: float = 0.0, normalize: bool = False):
    """Relevance of each input feature for the selected output head.

    ``x``: (n, d) inputs. Returns (n, d) relevance scores. The output
    relevance starts at the model output, or at 1 when ``normalize`` is
    set. When ``input_rule`` is None the selected layer rule is also
    used for the step into the input domain.
    """
    dense = []
    for layer in model.layers:
        if isinstance(layer, (Lstm, Masking)):
            raise ValueError("relevance propagation supports dense "
                             "stacks only")
        if isinstance(layer, Dense):
            dense.append(layer)
        elif not isinstance(layer, Dropout):
            raise ValueError(f"unsupported layer {type(layer).__name__}")
    x = np.asarray(x, dtype=float)
    out = model.forward(x)
    rel = np.zeros_like(out)
    rel[:, head] = 1.0 if normalize else out[:, head]
    for depth, layer in enumerate(reversed(dense)):
        a = layer.cache["x"]
        w = layer.weights["W"]
        last = depth == len(dense) - 1
        if last and input_rule is not None:
            rel = _input_step(a, w, rel, input_rule, low=0.0, high=1.0)
        else:
            rel = _layer_step(a, w, rel, rule, eps, gamma, alpha, beta)
    return rel


def lrp_conservation_sums(model, x, rule: str = "lrp-0", head: int = 0,
                          **kw):
    """Total relevance per layer, output first; under lrp-0 these sums
    telescope and should all match the model output."""
    dense = [l for l in model.layers if isinstance(l, Dense)]
    x = np.asarray(x, dtype=float)
    out = model.forward(x)
    rel = np.zeros_like(out)
    rel[:, head] = out[:, head]
    sums = [rel.sum(axis=1)]
    for layer in reversed(dense):
        rel = _layer_step(layer.cache["x"], layer.weights["W"], rel, rule,
                          kw.get("eps", _EPS_DEFAULT),
                          kw.get("gamma", 0.25), kw.get("alpha", 1.0),
                          kw.get("beta", 0.0))
        sums.append(rel.sum(axis=1))
    return np.array(sums)
