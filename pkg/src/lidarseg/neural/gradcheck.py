"""Finite-difference gradient verification.

The numeric side never touches the backward pass: it re-runs the forward
loss with one entry nudged up and down and takes the central difference.
Run it on float64 weights; float32 rounding drowns the signal.
"""

from __future__ import annotations

import numpy as np


def relative_error(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def numeric_gradient(loss_fn, array: np.ndarray, flat_index: int, step: float = 1e-5) -> float:
    """Central difference of loss_fn w.r.t. one entry of `array` (restored after)."""
    flat = array.reshape(-1)
    saved = flat[flat_index]
    flat[flat_index] = saved + step
    up = loss_fn()
    flat[flat_index] = saved - step
    down = loss_fn()
    flat[flat_index] = saved
    return (up - down) / (2.0 * step)


def max_gradcheck_error(loss_fn, value_grad_pairs, rng: np.random.Generator,
                        samples_per_array: int = 8, step: float = 1e-5,
                        state_fn=None) -> float:
    """Largest relative error between analytic and numeric gradients.

    Args:
        loss_fn: zero-argument forward pass returning the scalar loss.
        value_grad_pairs: (value_array, analytic_grad_array) tuples; the
            analytic gradients must already be populated.
        samples_per_array: entries checked per array (all, if smaller).
        state_fn: optional activation-state probe evaluated after each
            forward pass. Coordinates whose +/-step evaluations disagree
            on the state crossed a kink (a ReLU flipped), where a central
            difference measures nothing; those coordinates are skipped.
    """
    worst = 0.0
    for value, grad in value_grad_pairs:
        n = value.size
        if n <= samples_per_array:
            indices = np.arange(n)
        else:
            indices = rng.choice(n, size=samples_per_array, replace=False)
        flat = value.reshape(-1)
        for idx in indices:
            idx = int(idx)
            saved = flat[idx]
            flat[idx] = saved + step
            up = loss_fn()
            state_up = state_fn() if state_fn else None
            flat[idx] = saved - step
            down = loss_fn()
            state_down = state_fn() if state_fn else None
            flat[idx] = saved
            if state_fn and state_up != state_down:
                continue
            numeric = (up - down) / (2.0 * step)
            analytic = float(grad.reshape(-1)[idx])
            worst = max(worst, relative_error(analytic, numeric))
    return worst
