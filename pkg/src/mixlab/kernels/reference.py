"""Numpy reference implementations of the hot-path kernels.

Same contracts as the compiled module; results agree with it to float
rounding (each backend is deterministic on its own).
"""

import numpy as np


def excursion_dp(n, tau, gamma):
    """Probability that a biased walk stays at or below -tau from step tau on.

    Forward dynamic program over (step, position) with P(step +1) =
    (1 + gamma) / 2.  The barrier S_i <= -tau is enforced at every step
    i in [tau, n].  O(n^2) time, O(n) space.
    """
    p_up = 0.5 * (1.0 + gamma)
    p_dn = 1.0 - p_up
    prob = np.zeros(2 * n + 1)
    prob[n] = 1.0
    new = np.empty_like(prob)
    for i in range(1, n + 1):
        new[:] = 0.0
        new[1:] += p_up * prob[:-1]
        new[:-1] += p_dn * prob[1:]
        if i >= tau:
            new[n - tau + 1 :] = 0.0
        prob, new = new, prob
    return float(prob.sum())


def walk_batch_stats(steps, tau, wtab, vtab, l1tab, l2tab):
    """Per-replicate path statistics for the two-expert construction.

    steps: (R, n+1) array of +-1; entries 0..n-1 drive the walk S_1..S_n,
    entry i is also the sign of output i+1 (+1 means the y1 branch).
    Lookup tables are indexed by S + n for S in [-n, n]:
    wtab   weight of the leading expert given S,
    vtab   prediction of the traced rule given S,
    l1tab  loss of that prediction against y1,  l2tab  against y2.

    Returns (s_n, excursion, p_avg, w_tail_max, value_avg, seq_loss, n_plus);
    averages run over steps i = 0..n, the excursion flag and tail maximum
    over i in [tau, n] (vacuous excursion and 0 maximum if tau > n).
    """
    steps = np.ascontiguousarray(steps, dtype=np.int8)
    r, n1 = steps.shape
    n = n1 - 1
    s = np.zeros((r, n1), dtype=np.int32)
    np.cumsum(steps[:, :n], axis=1, dtype=np.int32, out=s[:, 1:])
    idx = s + n
    w = wtab[idx]
    p_avg = w.mean(axis=1)
    if tau <= n:
        excursion = (s[:, tau:] <= -tau).all(axis=1)
        w_tail_max = w[:, tau:].max(axis=1)
    else:
        excursion = np.ones(r, dtype=bool)
        w_tail_max = np.zeros(r)
    value_avg = vtab[idx].mean(axis=1)
    pos = steps > 0
    seq_loss = np.where(pos, l1tab[idx], l2tab[idx]).sum(axis=1)
    n_plus = pos.sum(axis=1, dtype=np.int32)
    return (
        s[:, n].copy(),
        excursion.astype(np.uint8),
        p_avg,
        w_tail_max,
        value_avg,
        seq_loss,
        n_plus,
    )
