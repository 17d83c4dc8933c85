"""Compiled per-round learner arithmetic and the episode loop.

The Python learner classes and the compiled episode call the very same
functions here, so both produce bit-identical trajectories.

Loss-based learners keep *cumulative* (estimated) losses in ``table`` and act
with ``softmax(-eta_t * table[ctx])``; with a fixed ``eta`` this is ordinary
multiplicative weights, with the default schedule it is the anytime variant.
"""

import math

import numpy as np
from numba import njit

# follower algorithms
HEDGE, EXP3, REGRET_MATCHING, BEST_RESPONSE, GREEDY_Q, WORST_RESPONSE = range(6)
# leader algorithms
FIXED, EXP3_GRID, Q_MEMORY = range(3)
# schedule kinds
ALWAYS, EVERY_K, AFTER_K, NEVER = range(4)

TIE_TOL = 1e-9


@njit(cache=True)
def default_step_size(n, T):
    return math.sqrt(8.0 * math.log(max(n, 2)) / T)


@njit(cache=True)
def anytime_exploration(n, t):
    return min(0.5, math.sqrt(n * math.log(max(n, 2)) / t))


@njit(cache=True)
def schedule_active(kind, k, epoch_length, t):
    if kind == ALWAYS:
        return True
    if kind == NEVER:
        return False
    epoch = t // epoch_length
    if kind == EVERY_K:
        return epoch % k == 0
    return epoch >= k


@njit(cache=True)
def sample(p, u):
    acc = 0.0
    total = p.sum()
    target = u * total
    for k in range(p.size):
        acc += p[k]
        if target < acc:
            return k
    # u*total can round onto the last boundary; fall back to the last positive entry
    for k in range(p.size - 1, -1, -1):
        if p[k] > 0.0:
            return k
    return p.size - 1


@njit(cache=True)
def softmin(losses, eta):
    lo = losses.min()
    out = np.empty(losses.size)
    for k in range(losses.size):
        out[k] = math.exp(-eta * (losses[k] - lo))
    return out / out.sum()


@njit(cache=True)
def first_argmax(v):
    best = 0
    for k in range(1, v.size):
        if v[k] > v[best]:
            best = k
    return best


@njit(cache=True)
def strong_best_response(f_row, l_row):
    top = f_row.max()
    best = -1
    for k in range(f_row.size):
        if f_row[k] >= top - TIE_TOL:
            if best < 0 or l_row[k] > l_row[best] + TIE_TOL:
                best = k
    return best


@njit(cache=True)
def _eta(step, n, count):
    if step >= 0.0:
        return step
    return default_step_size(n, count + 1)


@njit(cache=True)
def _gamma(explore, n, count):
    if explore >= 0.0:
        return explore
    return anytime_exploration(n, count + 1)


# ---------------------------------------------------------------- follower


@njit(cache=True)
def follower_probs(alg, table, counts, i, step, explore):
    n = table.shape[1]
    if alg == HEDGE:
        return softmin(table[i], _eta(step, n, counts[i]))
    if alg == EXP3:
        g = _gamma(explore, n, counts[i])
        return (1.0 - g) * softmin(table[i], _eta(step, n, counts[i])) + g / n
    if alg == REGRET_MATCHING:
        pos = np.maximum(table[i], 0.0)
        s = pos.sum()
        if s > 0.0:
            return pos / s
        return np.full(n, 1.0 / n)
    out = np.zeros(n)
    return out


@njit(cache=True)
def follower_act(alg, table, counts, F, L, i, u, step, explore):
    if alg == BEST_RESPONSE:
        return strong_best_response(F[i], L[i])
    if alg == WORST_RESPONSE:
        return first_argmax(-F[i])
    if alg == GREEDY_Q:
        return first_argmax(table[i])
    return sample(follower_probs(alg, table, counts, i, step, explore), u)


@njit(cache=True)
def follower_update(alg, table, counts, F, i, j, step, explore, lr, active):
    if alg == BEST_RESPONSE or alg == WORST_RESPONSE:
        return
    if alg == GREEDY_Q:
        # baseline learner: not governed by the no-regret schedule
        table[i, j] += lr * (F[i, j] - table[i, j])
        counts[i] += 1
        return
    if not active:
        return
    n = table.shape[1]
    if alg == HEDGE:
        for k in range(n):
            table[i, k] += 0.5 * (1.0 - F[i, k])
    elif alg == EXP3:
        p = follower_probs(alg, table, counts, i, step, explore)
        table[i, j] += 0.5 * (1.0 - F[i, j]) / p[j]
    elif alg == REGRET_MATCHING:
        for k in range(n):
            table[i, k] += F[i, k] - F[i, j]
    counts[i] += 1


# ------------------------------------------------------------------ leader


@njit(cache=True)
def leader_probs(alg, table, counts, c, step, explore):
    K = table.shape[1]
    if alg == EXP3_GRID:
        g = _gamma(explore, K, counts[c])
        return (1.0 - g) * softmin(table[c], _eta(step, K, counts[c])) + g / K
    out = np.zeros(K)
    if alg == FIXED:
        out[0] = 1.0
    return out


@njit(cache=True)
def leader_act(alg, table, counts, arms, c, u1, u2, step, explore):
    m = arms.shape[1]
    if alg == FIXED:
        return 0, sample(arms[0], u2)
    if alg == EXP3_GRID:
        arm = sample(leader_probs(alg, table, counts, c, step, explore), u1)
        return arm, sample(arms[arm], u2)
    # Q_MEMORY: epsilon-greedy over pure actions
    if u1 < explore:
        a = min(int(u2 * m), m - 1)
    else:
        a = first_argmax(table[c])
    return a, a


@njit(cache=True)
def leader_update(alg, table, counts, arms, c, arm, action, reward, step, explore, lr, per_action):
    if alg == FIXED:
        return
    if alg == EXP3_GRID:
        p = leader_probs(alg, table, counts, c, step, explore)
        loss = 0.5 * (1.0 - reward)
        if per_action:
            # every commitment's loss is linear in the drawn pure action
            q = 0.0
            for k in range(arms.shape[0]):
                q += p[k] * arms[k, action]
            for k in range(arms.shape[0]):
                table[c, k] += arms[k, action] * loss / q
        else:
            table[c, arm] += loss / p[arm]
    else:
        table[c, arm] += lr * (reward - table[c, arm])
    counts[c] += 1


@njit(cache=True)
def memory_context(codes, base):
    c = 0
    mult = 1
    for k in range(codes.size):
        c += codes[k] * mult
        mult *= base
    return c


# ----------------------------------------------------------------- episode


@njit(cache=True)
def run_episode(
    L, F, T,
    l_alg, l_table, l_counts, arms, l_step, l_explore, l_lr, l_per_action, memory_length,
    f_alg, f_table, f_counts, f_step, f_explore, f_lr,
    mask_kind, mask_k, epoch_length,
    u_leader, u_follower,
):
    m, n = L.shape
    a_lead = np.empty(T, np.int64)
    a_fol = np.empty(T, np.int64)
    r_lead = np.empty(T)
    r_fol = np.empty(T)
    active = np.empty(T, np.bool_)
    base = m * n + 1
    hist = np.full(memory_length, m * n, np.int64)
    for t in range(T):
        c = memory_context(hist, base)
        arm, i = leader_act(
            l_alg, l_table, l_counts, arms, c, u_leader[t, 0], u_leader[t, 1], l_step, l_explore
        )
        j = follower_act(f_alg, f_table, f_counts, F, L, i, u_follower[t], f_step, f_explore)
        rl = L[i, j]
        rf = F[i, j]
        on = schedule_active(mask_kind, mask_k, epoch_length, t)
        leader_update(l_alg, l_table, l_counts, arms, c, arm, i, rl, l_step, l_explore, l_lr, l_per_action)
        follower_update(f_alg, f_table, f_counts, F, i, j, f_step, f_explore, f_lr, on)
        if memory_length > 0:
            for k in range(memory_length - 1):
                hist[k] = hist[k + 1]
            hist[memory_length - 1] = i * n + j
        a_lead[t] = i
        a_fol[t] = j
        r_lead[t] = rl
        r_fol[t] = rf
        active[t] = on
    return a_lead, a_fol, r_lead, r_fol, active
