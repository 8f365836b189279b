"""Independent oracles shared by the unit and acceptance tests.

The finite-difference graders only use forward evaluation through the flat
parameter layout, so they stay independent of the analytic backward passes
they check.
"""

import numpy as np

from pbrnn import baseline_nets, recurrent_nets


def lstm_fd_gradient(params, vectors, label, eps=1e-5):
    """Central finite differences of the cross entropy wrt every parameter."""
    flat = params.to_flat()
    grad = np.empty_like(flat)
    dims = (params.input_dim, params.hidden_dim, params.num_classes)

    def loss_at(theta):
        p = recurrent_nets.LstmParams.from_flat(theta, *dims)
        return recurrent_nets.sequence_loss(p, vectors, label)

    for j in range(flat.size):
        bump = np.zeros_like(flat)
        bump[j] = eps
        grad[j] = (loss_at(flat + bump) - loss_at(flat - bump)) / (2 * eps)
    return grad


def ffn_fd_gradient(params, x, label, eps=1e-5):
    flat = baseline_nets.ffn_to_flat(params)
    grad = np.empty_like(flat)

    def loss_at(theta):
        p = baseline_nets.ffn_from_flat(
            theta, params.input_dim, params.hidden_dim, params.num_classes,
            activation=params.activation)
        probs = baseline_nets.ffn_forward(p, x)
        return recurrent_nets.cross_entropy_loss(probs, label)

    for j in range(flat.size):
        bump = np.zeros_like(flat)
        bump[j] = eps
        grad[j] = (loss_at(flat + bump) - loss_at(flat - bump)) / (2 * eps)
    return grad


def max_relative_error(analytic, numeric):
    """max_j |a - n| / max(1, |a|, |n|): absolute below 1, relative above."""
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


def brute_force_patch(series, t, row, col, patch_x, patch_y):
    """Nested-loop patch flattener: rows, then columns, then bands innermost."""
    stack = series.scenes[t]
    bands = stack.toa.shape[0]
    out = []
    for wr in range(row - patch_y // 2, row + patch_y // 2 + 1):
        for wc in range(col - patch_x // 2, col + patch_x // 2 + 1):
            for b in range(bands):
                out.append(stack.toa[b, wr, wc])
    return np.array(out)
