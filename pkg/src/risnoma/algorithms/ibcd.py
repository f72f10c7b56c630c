"""Block-coordinate loop: joint (W, a) by SCA, then V by SRCR."""
from __future__ import annotations

import numpy as np

from ..metrics import Solution, achievable_rates, passive_mat_from_vec
from ..conic import eigen_ratio
from .common import (Clock, RunTrace, choose_passive, make_problem, min_gain, noma_qos_rows,
                     passive_rows, passive_step, power_polish, random_passive_vec, rank_one_vectors)
from .sca import ScaState, find_feasible_init, solve_joint_sca


def qos_ok(problem, w_vecs, a, v):
    cfg = problem.config
    sol = Solution.from_vectors(w_vecs, a, v)
    rates = achievable_rates(problem.channels, sol, problem.scaling.noise, check=False)
    return rates.satisfies(cfg.qos_rnu, cfg.qos_rfu, slack=0.0)


def try_passive_update(problem, w_vecs, a, v, trace, outer_it, label="srcr"):
    """SRCR step with a safeguard: keep the old ``v`` unless a rank-one
    candidate satisfies every rate floor and does not lower the objective.
    Returns ``(v, objective, V_ratio, accepted)``."""
    rows = noma_qos_rows(problem.k, a, problem.r_n, problem.r_f)
    sub = RunTrace()
    cands = passive_step(problem, w_vecs, lambda C: passive_rows(C, rows),
                         passive_mat_from_vec(v), sub, label)
    trace.extend(sub, outer=outer_it)
    v, obj, V_rel, accepted = choose_passive(
        cands, v, lambda x: min_gain(problem, w_vecs, x), lambda x: qos_ok(problem, w_vecs, a, x))
    return v, obj, (eigen_ratio(V_rel) if accepted else None), accepted


def active_from_normalized(problem, mats):
    """Rank-one beams in watts from normalized SDR matrices."""
    vecs, ratios, errors = rank_one_vectors([problem.scaling.p_max * W for W in mats])
    return vecs, ratios, errors


def warm_state(problem, w_vecs, a, v):
    """Fixed points that are tight (hence feasible) at the current iterate."""
    H = problem.link_mats(passive_mat_from_vec(v))
    s = 1.0 / problem.scaling.p_max
    t_n = [s * np.vdot(w, H[(k, "n")] @ w).real for k, w in enumerate(w_vecs)]
    t_f = [s * np.vdot(w, H[(k, "f")] @ w).real for k, w in enumerate(w_vecs)]
    return ScaState.from_point(a[:, 0], t_n, t_f)


def run_ibcd(channels, sensing_spec, config, seed=0, v_init=None):
    """Alternate the joint SCA step and the SRCR step until the min-beampattern
    objective settles.  Returns ``(Solution, RunTrace)``."""
    problem = make_problem(channels, sensing_spec, config)
    alg = config.algorithm
    trace = RunTrace()
    clock = Clock()
    v = random_passive_vec(problem.m, seed) if v_init is None else np.asarray(v_init, dtype=complex)
    state = None
    prev = None
    w_vecs = a = None
    w_ratios = w_errors = v_ratio = None
    for t in range(1, alg.max_outer + 1):
        V = passive_mat_from_vec(v)
        sub = RunTrace()
        if state is None:
            state = find_feasible_init(problem, V, seed, sub)
        mats, a_n, chi, _ = solve_joint_sca(problem, V, state, sub)
        trace.extend(sub, outer=t)
        cand, ratios, errors = active_from_normalized(problem, mats)
        cand = power_polish(cand, problem.scaling.p_max)
        a_cand = np.column_stack([a_n, 1.0 - a_n])
        obj_w = min_gain(problem, cand, v)
        if w_vecs is None or obj_w >= min_gain(problem, w_vecs, v):
            w_vecs, a, w_ratios, w_errors = cand, a_cand, ratios, errors
        v, obj, ratio, accepted = try_passive_update(problem, w_vecs, a, v, trace, t)
        if ratio is not None and accepted:
            v_ratio = ratio
        trace.add("outer", t, objective=obj, objective_active=obj_w, passive_accepted=accepted,
                  w_ratios=list(w_ratios), v_ratio=v_ratio, time=clock())
        if prev is not None and abs(obj - prev) <= alg.tol_outer * max(abs(prev), 1e-300):
            break
        prev = obj
        state = warm_state(problem, w_vecs, a, v)
    sol = Solution.from_vectors(w_vecs, a, v, scheme="ibcd", objective=min_gain(problem, w_vecs, v),
                                w_ratios=list(w_ratios), w_errors=list(w_errors), v_ratio=v_ratio,
                                outer_iterations=t, time=clock())
    return sol, trace
