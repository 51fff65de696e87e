"""Flat-array JIT backend for benchmark-scale experiment runs.

The object planner in :mod:`bapomcp.planner` is the readable reference
implementation, but a learning experiment multiplies plan calls by
simulations by steps into billions of count-table operations, far beyond
what Python objects can sustain. This module reimplements the run loop's
hot path (tree search, step variants, rejection updates) as numba kernels
over preallocated arrays, keyed to the same ``(seed, run, episode, step,
purpose)`` stream scheme, and exposes :func:`run_one_fast` with the same
record semantics as the reference backend.

Representation notes:

* factored count layouts only (the benchmark domains); the chain domain
  stays on the reference backend;
* the search tree lives in fixed arrays indexed by node id (each
  simulation adds at most one node);
* linking-state deltas are fixed-capacity key/value arrays with linear
  scans (capacity is the merge threshold plus the horizon, tens of
  entries); unlike the reference representation each particle owns a
  private base table, which preserves every per-simulation copy-elision
  property but not the shared-base memory footprint.
"""

from __future__ import annotations

import time

import numpy as np
from numba import njit

from bapomcp import rng as rngs

# step modes: bit 0 = expected sampling, bit 1 = linking delta, bit 2 = root model
PLAIN, EXPECTED, LINK_PLAIN, LINK_EXPECTED = 0, 1, 2, 3
ROOT_PLAIN, ROOT_EXPECTED, ROOT_LINK_PLAIN, ROOT_LINK_EXPECTED = 4, 5, 6, 7


@njit(cache=True)
def _copy_flat(dst, src):
    d = dst.ravel()
    s = src.ravel()
    for i in range(d.shape[0]):
        d[i] = s[i]


@njit(cache=True)
def _cat(row, n):
    total = 0.0
    for j in range(n):
        total += row[j]
    u = np.random.random() * total
    acc = 0.0
    for j in range(n):
        acc += row[j]
        if u < acc:
            return j
    return n - 1


@njit(cache=True)
def _gamma_inplace(row, n):
    for j in range(n):
        c = row[j]
        row[j] = np.random.gamma(c, 1.0) if c > 0.0 else 0.0


@njit(cache=True)
def _compose_trow(out, base, keys, vals, nkeys, s, a, S, A, Z):
    for j in range(S):
        out[j] = base[j]
    for j in range(nkeys):
        k = keys[j]
        rest = k // Z
        s1 = rest % S
        rest //= S
        if rest % A == a and rest // A == s:
            out[s1] += vals[j]


@njit(cache=True)
def _compose_orow(out, base, keys, vals, nkeys, a, s1, S, A, Z):
    for j in range(Z):
        out[j] = base[j]
    for j in range(nkeys):
        k = keys[j]
        z = k % Z
        rest = k // Z
        if rest % S == s1 and (rest // S) % A == a:
            out[z] += vals[j]


@njit(cache=True)
def _delta_add(keys, vals, n, key):
    for j in range(n):
        if keys[j] == key:
            vals[j] += 1.0
            return n
    keys[n] = key
    vals[n] = 1.0
    return n + 1


@njit(cache=True)
def _step(
    mode, i, s, a,
    Tcnt, Ocnt, dkeys, dvals, dlen,
    Tscr, Oscr, Tmod, Omod, tmat, omat,
    skeys, svals, nsim, trow, orow, S, A, Z,
):
    """Advance one simulated step; returns (s1, z, new_sim_delta_len)."""
    if mode == PLAIN or mode == EXPECTED:
        base_t = Tscr[s, a]
        if mode == PLAIN:
            for j in range(S):
                trow[j] = base_t[j]
            _gamma_inplace(trow, S)
            s1 = _cat(trow, S)
        else:
            s1 = _cat(base_t, S)
        base_o = Oscr[a, s1]
        if mode == PLAIN:
            for j in range(Z):
                orow[j] = base_o[j]
            _gamma_inplace(orow, Z)
            z = _cat(orow, Z)
        else:
            z = _cat(base_o, Z)
        Tscr[s, a, s1] += 1.0
        Oscr[a, s1, z] += 1.0
        return s1, z, nsim
    if mode == LINK_PLAIN or mode == LINK_EXPECTED:
        _compose_trow(trow, Tcnt[i, s, a], skeys, svals, nsim, s, a, S, A, Z)
        if mode == LINK_PLAIN:
            _gamma_inplace(trow, S)
        s1 = _cat(trow, S)
        _compose_orow(orow, Ocnt[i, a, s1], skeys, svals, nsim, a, s1, S, A, Z)
        if mode == LINK_PLAIN:
            _gamma_inplace(orow, Z)
        z = _cat(orow, Z)
        key = ((s * A + a) * S + s1) * Z + z
        nsim = _delta_add(skeys, svals, nsim, key)
        return s1, z, nsim
    # root-sampled modes: no count updates of any kind
    nd = dlen[i] if (mode == ROOT_LINK_PLAIN or mode == ROOT_LINK_EXPECTED) else 0
    if mode == ROOT_EXPECTED:
        s1 = _cat(Tcnt[i, s, a], S)
        z = _cat(Ocnt[i, a, s1], Z)
        return s1, z, nsim
    if mode == ROOT_LINK_EXPECTED:
        _compose_trow(trow, Tcnt[i, s, a], dkeys[i], dvals[i], nd, s, a, S, A, Z)
        s1 = _cat(trow, S)
        _compose_orow(orow, Ocnt[i, a, s1], dkeys[i], dvals[i], nd, a, s1, S, A, Z)
        z = _cat(orow, Z)
        return s1, z, nsim
    # lazily materialized model drawn from the root counts
    if tmat[s, a] == 0:
        if mode == ROOT_LINK_PLAIN:
            _compose_trow(Tmod[s, a], Tcnt[i, s, a], dkeys[i], dvals[i], nd, s, a, S, A, Z)
        else:
            for j in range(S):
                Tmod[s, a, j] = Tcnt[i, s, a, j]
        _gamma_inplace(Tmod[s, a], S)
        tmat[s, a] = 1
    s1 = _cat(Tmod[s, a], S)
    if omat[a, s1] == 0:
        if mode == ROOT_LINK_PLAIN:
            _compose_orow(Omod[a, s1], Ocnt[i, a, s1], dkeys[i], dvals[i], nd, a, s1, S, A, Z)
        else:
            for j in range(Z):
                Omod[a, s1, j] = Ocnt[i, a, s1, j]
        _gamma_inplace(Omod[a, s1], Z)
        omat[a, s1] = 1
    z = _cat(Omod[a, s1], Z)
    return s1, z, nsim


@njit(cache=True)
def plan_kernel(
    seed, num_sims, max_depth, gamma, ucb_c, mode,
    states, Tcnt, Ocnt, dkeys, dvals, dlen,
    R,
    na, q, nh, child,
    Tscr, Oscr, Tmod, Omod, tmat, omat,
    skeys, svals, trow, orow,
    path_nodes, path_actions, path_rewards,
):
    """One full tree search; returns the greedy root action."""
    np.random.seed(seed)
    K = states.shape[0]
    S = R.shape[0]
    A = R.shape[1]
    Z = Oscr.shape[2]
    na.fill(0)
    q.fill(0.0)
    nh.fill(0)
    child.fill(-1)
    node_count = 1
    root_model = mode >= ROOT_PLAIN
    linking = mode == LINK_PLAIN or mode == LINK_EXPECTED

    for _sim in range(num_sims):
        i = int(np.random.random() * K)
        s = states[i]
        nsim = 0
        if root_model:
            if mode == ROOT_PLAIN or mode == ROOT_LINK_PLAIN:
                tmat.fill(0)
                omat.fill(0)
        elif linking:
            nsim = dlen[i]
            for j in range(nsim):
                skeys[j] = dkeys[i, j]
                svals[j] = dvals[i, j]
        else:
            _copy_flat(Tscr, Tcnt[i])
            _copy_flat(Oscr, Ocnt[i])

        # tree descent with confidence-bound action selection
        node = 0
        depth = 0
        path_len = 0
        while depth < max_depth:
            unvisited = 0
            for a in range(A):
                if na[node, a] == 0:
                    unvisited += 1
            if unvisited > 0:
                pick = int(np.random.random() * unvisited)
                chosen = 0
                idx = 0
                for a in range(A):
                    if na[node, a] == 0:
                        if idx == pick:
                            chosen = a
                            break
                        idx += 1
            else:
                log_term = np.log(nh[node] + 1.0)
                best = -1.0e300
                ties = 0
                chosen = 0
                for a in range(A):
                    score = q[node, a] + ucb_c * np.sqrt(log_term / na[node, a])
                    if score > best:
                        best = score
                        chosen = a
                        ties = 1
                    elif score == best:
                        ties += 1
                        if np.random.random() * ties < 1.0:
                            chosen = a
            reward = R[s, chosen]
            s1, z, nsim = _step(
                mode, i, s, chosen, Tcnt, Ocnt, dkeys, dvals, dlen,
                Tscr, Oscr, Tmod, Omod, tmat, omat,
                skeys, svals, nsim, trow, orow, S, A, Z,
            )
            path_nodes[path_len] = node
            path_actions[path_len] = chosen
            path_rewards[path_len] = reward
            path_len += 1
            s = s1
            depth += 1
            nxt = child[node, chosen, z]
            if nxt < 0:
                child[node, chosen, z] = node_count
                node_count += 1
                break
            node = nxt

        # uniform-random rollout to the horizon
        roll = 0.0
        disc = 1.0
        while depth < max_depth:
            a = int(np.random.random() * A)
            roll += disc * R[s, a]
            s1, z, nsim = _step(
                mode, i, s, a, Tcnt, Ocnt, dkeys, dvals, dlen,
                Tscr, Oscr, Tmod, Omod, tmat, omat,
                skeys, svals, nsim, trow, orow, S, A, Z,
            )
            s = s1
            disc *= gamma
            depth += 1

        # incremental-mean backup along the visited path
        ret = roll
        for j in range(path_len - 1, -1, -1):
            ret = path_rewards[j] + gamma * ret
            nd = path_nodes[j]
            a = path_actions[j]
            na[nd, a] += 1
            nh[nd] += 1
            q[nd, a] += (ret - q[nd, a]) / na[nd, a]

    # greedy action among visited root actions, ties uniform
    best_q = -1.0e300
    ties = 0
    action = 0
    for a in range(A):
        if na[0, a] == 0:
            continue
        if q[0, a] > best_q:
            best_q = q[0, a]
            action = a
            ties = 1
        elif q[0, a] == best_q:
            ties += 1
            if np.random.random() * ties < 1.0:
                action = a
    return action


@njit(cache=True)
def update_kernel(
    seed, action, real_obs, expected_sampling, linking, lam, max_attempts,
    states_in, T_in, O_in, dk_in, dv_in, dl_in,
    states_out, T_out, O_out, dk_out, dv_out, dl_out,
    trow, orow,
):
    """Rejection-sampling refill of the particle arrays.

    Returns ``(filled, attempts)``; ``filled < K`` means the attempt budget
    ran out (belief deprivation). Accepted linking particles are
    merge-checked against ``lam`` right away.
    """
    np.random.seed(seed)
    K = states_in.shape[0]
    S = T_in.shape[1]
    A = T_in.shape[2]
    Z = O_in.shape[3]
    filled = 0
    attempts = 0
    while filled < K:
        if attempts >= max_attempts:
            return filled, attempts
        attempts += 1
        i = int(np.random.random() * K)
        s = states_in[i]
        if linking:
            nd = dl_in[i]
            _compose_trow(trow, T_in[i, s, action], dk_in[i], dv_in[i], nd, s, action, S, A, Z)
            if not expected_sampling:
                _gamma_inplace(trow, S)
            s1 = _cat(trow, S)
            _compose_orow(orow, O_in[i, action, s1], dk_in[i], dv_in[i], nd, action, s1, S, A, Z)
            if not expected_sampling:
                _gamma_inplace(orow, Z)
            z = _cat(orow, Z)
            if z != real_obs:
                continue
            for j in range(nd):
                dk_out[filled, j] = dk_in[i, j]
                dv_out[filled, j] = dv_in[i, j]
            key = ((s * A + action) * S + s1) * Z + z
            nd = _delta_add(dk_out[filled], dv_out[filled], nd, key)
            _copy_flat(T_out[filled], T_in[i])
            _copy_flat(O_out[filled], O_in[i])
            if nd > lam:
                for j in range(nd):
                    k = dk_out[filled, j]
                    v = dv_out[filled, j]
                    zz = k % Z
                    rest = k // Z
                    ss1 = rest % S
                    rest //= S
                    aa = rest % A
                    ss = rest // A
                    T_out[filled, ss, aa, ss1] += v
                    O_out[filled, aa, ss1, zz] += v
                nd = 0
            dl_out[filled] = nd
        else:
            base_t = T_in[i, s, action]
            if expected_sampling:
                s1 = _cat(base_t, S)
            else:
                for j in range(S):
                    trow[j] = base_t[j]
                _gamma_inplace(trow, S)
                s1 = _cat(trow, S)
            base_o = O_in[i, action, s1]
            if expected_sampling:
                z = _cat(base_o, Z)
            else:
                for j in range(Z):
                    orow[j] = base_o[j]
                _gamma_inplace(orow, Z)
                z = _cat(orow, Z)
            if z != real_obs:
                continue
            _copy_flat(T_out[filled], T_in[i])
            _copy_flat(O_out[filled], O_in[i])
            T_out[filled, s, action, s1] += 1.0
            O_out[filled, action, s1, z] += 1.0
        states_out[filled] = s1
        filled += 1
    return filled, attempts


def run_one_fast(cfg, run: int):
    """Fast-backend equivalent of the reference single-run loop."""
    from bapomcp.experiments import RunRecord

    domain = cfg.build_domain()
    S, A, Z = domain.num_states, domain.num_actions, domain.num_observations
    R = np.array([[domain.reward(s, a) for a in range(A)] for s in range(S)])
    prior = domain.prior_counts(rngs.stream(cfg.seed, run, 0, 0, rngs.PRIOR))
    K = cfg.particles
    mode = (
        (ROOT_PLAIN if not cfg.linking else ROOT_LINK_PLAIN) + (1 if cfg.expected else 0)
        if cfg.root_sample
        else (LINK_PLAIN if cfg.linking else PLAIN) + (1 if cfg.expected else 0)
    )
    ucb_c = cfg.exploration_constant(domain)

    dmax = cfg.lam + 2
    Tbufs = [np.repeat(prior.trans[None, ...], K, axis=0), np.empty((K, S, A, S))]
    Obufs = [np.repeat(prior.obs[None, ...], K, axis=0), np.empty((K, A, S, Z))]
    sbufs = [np.empty(K, dtype=np.int64), np.empty(K, dtype=np.int64)]
    dkbufs = [np.zeros((K, dmax), dtype=np.int64), np.zeros((K, dmax), dtype=np.int64)]
    dvbufs = [np.zeros((K, dmax)), np.zeros((K, dmax))]
    dlbufs = [np.zeros(K, dtype=np.int32), np.zeros(K, dtype=np.int32)]
    cur = 0

    init_rng = rngs.stream(cfg.seed, run, 0, 0, rngs.BELIEF_INIT)
    for idx in range(K):
        sbufs[cur][idx] = domain.sample_initial_state(init_rng)

    nmax = cfg.num_sims + 2
    na = np.zeros((nmax, A), dtype=np.int64)
    qv = np.zeros((nmax, A))
    nh = np.zeros(nmax, dtype=np.int64)
    child = np.full((nmax, A, Z), -1, dtype=np.int32)
    Tscr = np.empty((S, A, S))
    Oscr = np.empty((A, S, Z))
    Tmod = np.empty((S, A, S))
    Omod = np.empty((A, S, Z))
    tmat = np.zeros((S, A), dtype=np.uint8)
    omat = np.zeros((A, S), dtype=np.uint8)
    skeys = np.zeros(cfg.lam + cfg.horizon + 2, dtype=np.int64)
    svals = np.zeros(cfg.lam + cfg.horizon + 2)
    trow = np.empty(S)
    orow = np.empty(max(Z, 2))
    path_nodes = np.empty(cfg.horizon, dtype=np.int64)
    path_actions = np.empty(cfg.horizon, dtype=np.int64)
    path_rewards = np.empty(cfg.horizon)

    max_attempts = cfg.max_attempt_factor * K
    records = []
    env_state = domain.sample_initial_state(
        rngs.stream(cfg.seed, run, 0, 0, rngs.EPISODE_RESET)
    )
    for ep in range(cfg.episodes):
        if ep > 0:
            reset_rng = rngs.stream(cfg.seed, run, ep, 0, rngs.EPISODE_RESET)
            env_state = domain.sample_initial_state(reset_rng)
            states = sbufs[cur]
            for idx in range(K):
                states[idx] = domain.sample_initial_state(reset_rng)
        ep_return = 0.0
        discount = 1.0
        times = []
        capped = False
        for t in range(cfg.horizon):
            start = time.perf_counter()
            if cfg.planner == "lookahead":
                # depth-1 expectimax: leaf values are zero, so the value of
                # an action is its belief-averaged immediate reward
                values = R[sbufs[cur]].mean(axis=0)
                tie_rng = rngs.stream(cfg.seed, run, ep, t, rngs.PLAN)
                best = np.flatnonzero(values == values.max())
                action = int(best[int(tie_rng.integers(best.size))])
            else:
                action = int(
                    plan_kernel(
                        rngs.kernel_seed(cfg.seed, run, ep, t, rngs.PLAN),
                        cfg.num_sims, cfg.horizon - t, cfg.gamma, ucb_c, mode,
                        sbufs[cur], Tbufs[cur], Obufs[cur],
                        dkbufs[cur], dvbufs[cur], dlbufs[cur],
                        R, na, qv, nh, child,
                        Tscr, Oscr, Tmod, Omod, tmat, omat,
                        skeys, svals, trow, orow,
                        path_nodes, path_actions, path_rewards,
                    )
                )
            elapsed = time.perf_counter() - start
            times.append(elapsed)
            if elapsed > cfg.time_cap:
                capped = True
            ep_return += discount * R[env_state, action]
            discount *= cfg.gamma
            env_state, real_obs = domain.sample_true(
                env_state, action, rngs.stream(cfg.seed, run, ep, t, rngs.ENV)
            )
            nxt = 1 - cur
            filled, _attempts = update_kernel(
                rngs.kernel_seed(cfg.seed, run, ep, t, rngs.UPDATE),
                action, real_obs, cfg.expected, cfg.linking, cfg.lam, max_attempts,
                sbufs[cur], Tbufs[cur], Obufs[cur], dkbufs[cur], dvbufs[cur], dlbufs[cur],
                sbufs[nxt], Tbufs[nxt], Obufs[nxt], dkbufs[nxt], dvbufs[nxt], dlbufs[nxt],
                trow, orow,
            )
            if filled < K:
                records.append(
                    RunRecord(run, ep, float(ep_return), float(np.mean(times)), capped, True, cfg.seed)
                )
                return records
            cur = nxt
        records.append(
            RunRecord(run, ep, float(ep_return), float(np.mean(times)), capped, False, cfg.seed)
        )
    return records
