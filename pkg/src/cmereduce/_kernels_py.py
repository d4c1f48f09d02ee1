"""Pure-Python simulation kernels (reference for the compiled versions).

Both kernels are resumable: they return a status code and the caller may
grow buffers or supply missing data and call again with the returned time
and state.  Uniform draws come from ``gen.random()``, which reads the same
``next_double`` stream the compiled kernels use, so the two backends produce
identical paths.

Status codes: 0 finished, 1 cap exceeded, 2 path buffer full, 3 column missing.
"""

from __future__ import annotations

import math

DONE = 0
CAP_EXCEEDED = 1
BUFFER_FULL = 2
NEED_COLUMN = 3


def _propensities(state, reactants, rates, out):
    a0 = 0.0
    for l, terms in enumerate(reactants):
        h = rates[l]
        for s, c in terms:
            n = state[s]
            b = 1.0
            for q in range(c):
                b = b * (n - q) / (q + 1)
            h = h * b
        if h < 0.0:
            h = 0.0
        out[l] = h
        a0 += h
    return a0


def _uniform_positive(gen):
    u = gen.random()
    while u == 0.0:
        u = gen.random()
    return u


def direct_run(
    state, t, t_end, react_species, react_coef, change, rates, caps,
    grid, gi, grid_out, jt_buf, js_buf, nused, record, gen,
):
    """Gillespie direct method on species counts; ``state`` is updated in place."""
    reactants = [
        [(int(s), int(c)) for s, c in zip(rs, rc) if s >= 0]
        for rs, rc in zip(react_species.tolist(), react_coef.tolist())
    ]
    rate_list = rates.tolist()
    moves = [[(i, d) for i, d in enumerate(row) if d] for row in change.tolist()]
    cap_list = caps.tolist()
    grid_list = grid.tolist()
    st = state.tolist()
    r = len(rate_list)
    ng = len(grid_list)
    a = [0.0] * r

    def finish(status):
        state[:] = st
        return status, t, gi, nused

    while True:
        a0 = _propensities(st, reactants, rate_list, a)
        if a0 <= 0.0:
            while gi < ng:
                grid_out[gi, :] = st
                gi += 1
            return finish(DONE)
        u1 = _uniform_positive(gen)
        tnew = t - math.log(u1) / a0
        while gi < ng and grid_list[gi] < tnew:
            grid_out[gi, :] = st
            gi += 1
        if tnew > t_end:
            return finish(DONE)
        target = gen.random() * a0
        cum = 0.0
        chosen = -1
        for l in range(r):
            if a[l] > 0.0:
                chosen = l
                cum += a[l]
                if cum >= target:
                    break
        exceeded = False
        for i, d in moves[chosen]:
            st[i] += d
            if st[i] > cap_list[i]:
                exceeded = True
        t = tnew
        if exceeded:
            return finish(CAP_EXCEEDED)
        if record:
            jt_buf[nused] = t
            js_buf[nused, :] = st
            nused += 1
            if nused == jt_buf.shape[0]:
                return finish(BUFFER_FULL)


def chain_run(
    state, t, t_end, col_start, col_len, indices, data, exit_rate,
    grid, gi, grid_out, jt_buf, js_buf, nused, record, gen,
):
    """Direct method on a finite chain given column-wise off-diagonal rates."""
    ng = grid.shape[0]
    while True:
        if col_len[state] < 0:
            return NEED_COLUMN, state, t, gi, nused
        a0 = exit_rate[state]
        if a0 <= 0.0:
            while gi < ng:
                grid_out[gi] = state
                gi += 1
            return DONE, state, t, gi, nused
        u1 = _uniform_positive(gen)
        tnew = t - math.log(u1) / a0
        while gi < ng and grid[gi] < tnew:
            grid_out[gi] = state
            gi += 1
        if tnew > t_end:
            return DONE, state, t, gi, nused
        target = gen.random() * a0
        cum = 0.0
        start = col_start[state]
        chosen = -1
        for k in range(start, start + col_len[state]):
            if data[k] > 0.0:
                chosen = indices[k]
                cum += data[k]
                if cum >= target:
                    break
        state = chosen
        t = tnew
        if record:
            jt_buf[nused] = t
            js_buf[nused] = state
            nused += 1
            if nused == jt_buf.shape[0]:
                return BUFFER_FULL, state, t, gi, nused
