"""Low-complexity alternation: W by one SDR at fixed power split, V by SRCR,
then the power split in closed form."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateChannel, InfeasibleScenario, InvalidArgument
from ..metrics import Solution, passive_mat_from_vec, qos_rate_thresholds
from .common import (Clock, RunTrace, active_rows, build_active_program, make_problem, min_gain,
                     noma_qos_rows, power_polish, random_passive_vec, rank_one_vectors,
                     solve_active)
from .ibcd import try_passive_update


@dataclass
class PowerBounds:
    """Per-cluster interval for the RFU share ``a_f``.

    ``a_max`` keeps the RNU rate floor, ``a_min1`` the RNU's SIC decoding of
    the RFU signal and ``a_min2`` the RFU's own decoding.
    """

    a_max: np.ndarray
    a_min1: np.ndarray
    a_min2: np.ndarray

    @property
    def a_min(self):
        return np.maximum(self.a_min1, self.a_min2)

    @property
    def feasible(self):
        return (self.a_min <= self.a_max) & (self.a_max < 1.0)

    @property
    def all_feasible(self):
        return bool(self.feasible.all())


def bounds_from_gains(t_n, i_n, t_f, i_f, noise, r_n, r_f):
    """Interval of feasible ``a_f`` from own-beam gains ``t`` and inter-cluster
    interference ``i`` (same units as ``noise``)."""
    t_n, i_n, t_f, i_f = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (t_n, i_n, t_f, i_f))
    if (t_n <= 0).any() or (t_f <= 0).any():
        raise DegenerateChannel("a user receives zero power from its own beam")
    a_max = 1.0 - r_n * (i_n + noise) / t_n
    if r_f > 0:
        a_min1 = (t_n + i_n + noise) / ((1.0 + 1.0 / r_f) * t_n)
        a_min2 = (t_f + i_f + noise) / ((1.0 + 1.0 / r_f) * t_f)
    else:
        a_min1 = np.zeros_like(t_n)
        a_min2 = np.zeros_like(t_f)
    return PowerBounds(a_max, a_min1, a_min2)


def _gains(h, active_mats, k_clusters):
    t = {}
    i = {}
    for role in ("n", "f"):
        t[role] = np.array([np.trace(active_mats[k] @ h[(k, role)]).real for k in range(k_clusters)])
        i[role] = np.array([sum(np.trace(active_mats[j] @ h[(k, role)]).real
                                for j in range(k_clusters) if j != k) for k in range(k_clusters)])
    return t, i


def power_feasibility_bounds(h, active_mats, config, r_n=None, r_f=None):
    """Feasible RFU-share interval per cluster for fixed beams and passive matrix.

    ``h`` maps ``(k, role)`` to ``H_{k,i} = Gamma^H V Gamma`` in raw units and
    ``active_mats`` are the ``W_k`` in watts.  Thresholds default to the
    configured rate floors.
    """
    K = len(active_mats)
    r_n = qos_rate_thresholds(config.qos_rnu) if r_n is None else r_n
    r_f = qos_rate_thresholds(config.qos_rfu) if r_f is None else r_f
    t, i = _gains(h, active_mats, K)
    return bounds_from_gains(t["n"], i["n"], t["f"], i["f"], config.noise_w, r_n, r_f)


def closed_form_power(bounds, floor=1e-6):
    """Smallest feasible RFU share ``a_f = max(a_min1, a_min2)`` per cluster.

    Returns a ``(K, 2)`` array of ``(a_n, a_f)``.  A zero RFU floor would give
    ``a_f = 0``, outside the open interval, so ``a_f`` is floored at ``floor``.
    """
    if not bounds.all_feasible:
        bad = np.flatnonzero(~bounds.feasible).tolist()
        raise InfeasibleScenario(f"no feasible power split for clusters {bad}")
    a_f = np.maximum(bounds.a_min, floor)
    if (a_f > bounds.a_max).any():
        raise InfeasibleScenario("feasible interval narrower than the positivity floor")
    return np.column_stack([1.0 - a_f, a_f])


def build_active_subproblem(channels, passive_mat, power_coeffs, sensing_spec, config):
    """Relaxed active-beamforming program at fixed ``V`` and power split (normalized units)."""
    problem = make_problem(channels, sensing_spec, config)
    a = np.asarray(power_coeffs, dtype=float).reshape(-1, 2)
    if a.shape[0] != problem.k:
        raise InvalidArgument("one (a_n, a_f) row per cluster is required")
    H = problem.link_mats(passive_mat)
    rows = active_rows(H, noma_qos_rows(problem.k, a, problem.r_n, problem.r_f))
    prog, _ = build_active_program(problem, problem.beam_mats(passive_mat), rows, problem.k)
    return prog


def update_power(problem, w_vecs, v, a):
    """Closed-form split for the current beams, cluster by cluster.

    The active step tends to make both rate floors of a cluster tight at the
    current split, so its interval shrinks to a point and rounding can leave it
    empty.  Such clusters keep their current (feasible) split.  Returns the new
    ``(K, 2)`` split, the per-cluster update mask and the bounds.
    """
    V = passive_mat_from_vec(v)
    h = {key: gm.conj().T @ V @ gm for key, gm in problem.gamma.items()}
    mats = [np.outer(w, w.conj()) for w in w_vecs]
    t, i = _gains(h, mats, problem.k)
    bounds = bounds_from_gains(t["n"], i["n"], t["f"], i["f"], problem.scaling.noise,
                               problem.r_n, problem.r_f)
    floor = problem.config.algorithm.margin
    a_f = np.maximum(bounds.a_min, floor)
    ok = bounds.feasible & (a_f <= bounds.a_max)
    out = np.array(a, dtype=float, copy=True)
    out[ok, 1] = a_f[ok]
    out[ok, 0] = 1.0 - a_f[ok]
    return out, ok, bounds


def run_iao(channels, sensing_spec, config, seed=0, v_init=None, a_init=None):
    """Alternate W (one SDR), V (SRCR) and the closed-form split until the
    objective settles.  Returns ``(Solution, RunTrace)``."""
    problem = make_problem(channels, sensing_spec, config)
    alg = config.algorithm
    trace = RunTrace()
    clock = Clock()
    v = random_passive_vec(problem.m, seed) if v_init is None else np.asarray(v_init, dtype=complex)
    if a_init is None:
        share = alg.iao_rfu_share
        a = np.tile([1.0 - share, share], (problem.k, 1))
    else:
        a = np.asarray(a_init, dtype=float).reshape(-1, 2)
    w_vecs = w_ratios = w_errors = v_ratio = None
    prev = None
    for t in range(1, alg.max_outer + 1):
        V = passive_mat_from_vec(v)
        rows = active_rows(problem.link_mats(V), noma_qos_rows(problem.k, a, problem.r_n, problem.r_f))
        rep, mats = solve_active(problem, V, rows, problem.k)
        trace.add("active", 1, objective=rep.objective if mats is not None else None,
                  status=rep.status, outer=t, time=clock())
        if mats is None:
            if w_vecs is None:
                raise InfeasibleScenario(f"active step infeasible at the initial power split "
                                         f"({rep.status}: {rep.raw_status})")
            obj_w = min_gain(problem, w_vecs, v)
        else:
            cand, ratios, errors = rank_one_vectors([problem.scaling.p_max * W for W in mats])
            cand = power_polish(cand, problem.scaling.p_max)
            obj_w = min_gain(problem, cand, v)
            if w_vecs is None or obj_w >= min_gain(problem, w_vecs, v):
                w_vecs, w_ratios, w_errors = cand, ratios, errors
            obj_w = min_gain(problem, w_vecs, v)
        v, obj, ratio, accepted = try_passive_update(problem, w_vecs, a, v, trace, t)
        if ratio is not None and accepted:
            v_ratio = ratio
        a, updated, _ = update_power(problem, w_vecs, v, a)
        trace.add("power", 1, outer=t, a_f=a[:, 1].tolist(), updated=updated.tolist())
        trace.add("outer", t, objective=obj, objective_active=obj_w, passive_accepted=accepted,
                  w_ratios=list(w_ratios), v_ratio=v_ratio, time=clock())
        if prev is not None and abs(obj - prev) <= alg.tol_outer * max(abs(prev), 1e-300):
            break
        prev = obj
    sol = Solution.from_vectors(w_vecs, a, v, scheme="iao", objective=min_gain(problem, w_vecs, v),
                                w_ratios=list(w_ratios), w_errors=list(w_errors), v_ratio=v_ratio,
                                outer_iterations=t, time=clock())
    return sol, trace
