"""Central finite-difference validation of the autodiff gradients."""

from __future__ import annotations

import numpy as np


def grad_check(f, params, eps=1e-5, floor=1e-8, coords_per_tensor=None,
               rng=None) -> float:
    """Compare autodiff gradients of f() against central differences.

    f is a zero-argument callable returning a scalar Tensor and must be
    deterministic in the parameter values. Every coordinate of every
    parameter is perturbed unless coords_per_tensor caps the count, in
    which case coordinates are sampled with rng. Returns the max relative
    error |a - n| / max(|a|, |n|) over coordinates where either side
    exceeds `floor`; below that both are indistinguishable from the
    rounding noise of the probe and relative error is meaningless. Run
    parameters in float64; at float32 the probe drowns in rounding.
    """
    for p in params:
        p.zero_grad()
    loss = f()
    loss.backward()
    analytic = []
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        analytic.append(g.copy())
        p.zero_grad()

    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if coords_per_tensor is not None and flat.size > coords_per_tensor:
            if rng is None:
                rng = np.random.default_rng(0)
            idx = rng.choice(flat.size, size=coords_per_tensor, replace=False)
        aflat = a.reshape(-1)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            f_hi = float(f().data)
            flat[i] = orig - eps
            f_lo = float(f().data)
            flat[i] = orig
            numeric = (f_hi - f_lo) / (2.0 * eps)
            denom = max(abs(aflat[i]), abs(numeric))
            if denom <= floor:
                continue
            err = abs(aflat[i] - numeric) / denom
            if err > worst:
                worst = err
    return worst
