"""Comparison schemes: fixed-direction beamformers and the two benchmark systems.

* ``baseline_zf`` / ``baseline_mrt`` fix the beam directions (zero-forcing on
  the RNU combined channels, or matched to the RFU combined channels), load
  the beams with optimized scalar powers and one power split shared by every
  cluster, and optimize the RIS by SRCR.
* ``ris_isac_no_noma`` serves the ``2K`` users with one beam each and no SIC.
  Its interference term is the leakage of a user's own beam into the other
  users' channels, exactly as the benchmark's rate expression is written.
* ``ris_sensing`` spends the whole budget on sensing (no rate floors).
"""
from __future__ import annotations

import enum
import math

import numpy as np

from . import conic
from .algorithms.common import (Clock, RunTrace, choose_passive, make_problem, min_gain,
                                noma_qos_rows, passive_candidates, passive_coefficients,
                                passive_step, power_polish, random_passive_vec, rank_one_vectors,
                                solve_active, solve_program)
from .algorithms.ibcd import try_passive_update
from .errors import DegenerateChannel, InfeasibleScenario
from .metrics import Solution, oma_rates, passive_mat_from_vec


class SchemeId(str, enum.Enum):
    IBCD = "ibcd"
    IAO = "iao"
    BASELINE_ZF = "baseline_zf"
    BASELINE_MRT = "baseline_mrt"
    RIS_ISAC_NO_NOMA = "ris_isac_no_noma"
    RIS_SENSING = "ris_sensing"


# -- fixed-direction beams ---------------------------------------------------------

def combined_channel(channels, key, v):
    """Row vector ``g_{k,i}^H Theta G`` for ``Theta = diag(v)``."""
    return (channels.user(*key).conj() * v) @ channels.g_bs_ris


def zf_directions(channels, v, cond_limit=1e10):
    """Unit-norm columns of the pseudo-inverse of the stacked RNU channels."""
    K = channels.k_clusters
    rows = np.array([combined_channel(channels, (k, "n"), v) for k in range(K)])
    s = np.linalg.svd(rows, compute_uv=False)
    if s[-1] <= 0 or s[0] / s[-1] > cond_limit or K > channels.n_antennas:
        raise DegenerateChannel("stacked RNU channels are rank deficient")
    D = np.linalg.pinv(rows)
    return [D[:, k] / np.linalg.norm(D[:, k]) for k in range(K)]


def mrt_directions(channels, v):
    out = []
    for k in range(channels.k_clusters):
        h = combined_channel(channels, (k, "f"), v).conj()
        nrm = np.linalg.norm(h)
        if nrm == 0:
            raise DegenerateChannel(f"cluster {k} RFU combined channel is zero")
        out.append(h / nrm)
    return out


def _power_lp(problem, dirs, v, a_f):
    """Max-min beampattern over per-beam powers ``p_k >= 0`` for unit directions
    ``dirs`` and one shared split; returns ``(chi, p)`` or ``None``."""
    K = problem.k
    alg = problem.config.algorithm
    V = passive_mat_from_vec(v)
    beam = problem.beam_mats(V)
    H = problem.link_mats(V)
    prog = conic.ConicProgram("power-lp")
    p = [prog.scalar(f"p{k}", lower=0.0) for k in range(K)]
    chi = prog.scalar("chi", lower=alg.margin)
    for q, Y in enumerate(beam):
        gains = [float(np.vdot(d, Y @ d).real) for d in dirs]
        prog.add(sum((g * pk for g, pk in zip(gains, p)), conic.Affine()), ">=", chi, name=f"beam{q}")
    prog.add(sum(p, conic.Affine()), "<=", 1.0, name="power")
    a = np.tile([1.0 - a_f, a_f], (K, 1))
    for label, key, coefs, b in noma_qos_rows(K, a, problem.r_n, problem.r_f):
        s = {j: float(np.vdot(dirs[j], H[key] @ dirs[j]).real) for j in coefs}
        prog.add(sum((c * s[j] * p[j] for j, c in coefs.items()), conic.Affine()), ">=", b, name=label)
    prog.maximize(chi)
    rep = solve_program(prog, problem.config)
    if rep.status != "optimal":
        return None
    return rep.objective, np.array([rep.values[f"p{k}"] for k in range(K)])


def _best_split(problem, dirs, v, n_grid=19, n_golden=20):
    """Grid then golden-section search of the shared RFU share."""
    grid = np.linspace(0.05, 0.95, n_grid)
    vals = []
    for x in grid:
        r = _power_lp(problem, dirs, v, x)
        vals.append(-np.inf if r is None else r[0])
    vals = np.array(vals)
    if not np.isfinite(vals).any():
        return None
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)] if i > 0 else 1e-4
    hi = grid[min(i + 1, n_grid - 1)] if i < n_grid - 1 else 1.0 - 1e-4
    f = lambda x: (lambda r: -np.inf if r is None else r[0])(_power_lp(problem, dirs, v, x))
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = hi - g * (hi - lo), lo + g * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(n_golden):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = f(d)
    cands = [(vals[i], grid[i]), (fc, c), (fd, d)]
    best_val, best_x = max(cands, key=lambda t: t[0])
    chi, p = _power_lp(problem, dirs, v, best_x)
    return best_x, chi, p


def _fixed_direction(channels, sensing_spec, config, direction_fn, name, seed=0, v_init=None):
    problem = make_problem(channels, sensing_spec, config)
    alg = config.algorithm
    trace = RunTrace()
    clock = Clock()
    v = random_passive_vec(problem.m, seed) if v_init is None else np.asarray(v_init, dtype=complex)
    w_vecs = a = None
    prev = None
    for t in range(1, alg.max_outer + 1):
        dirs = direction_fn(channels, v)
        found = _best_split(problem, dirs, v)
        if found is not None:
            a_f, _, p = found
            cand = power_polish([math.sqrt(problem.scaling.p_max * max(pk, 0.0)) * d
                                 for pk, d in zip(p, dirs)], problem.scaling.p_max)
            a_cand = np.tile([1.0 - a_f, a_f], (problem.k, 1))
            if w_vecs is None or min_gain(problem, cand, v) >= min_gain(problem, w_vecs, v):
                w_vecs, a = cand, a_cand
        elif w_vecs is None:
            raise InfeasibleScenario(f"{name}: no power loading meets the rate floors")
        obj_w = min_gain(problem, w_vecs, v)
        v, obj, ratio, accepted = try_passive_update(problem, w_vecs, a, v, trace, t)
        trace.add("outer", t, objective=obj, objective_active=obj_w, passive_accepted=accepted,
                  a_f=float(a[0, 1]), time=clock())
        if prev is not None and abs(obj - prev) <= alg.tol_outer * max(abs(prev), 1e-300):
            break
        prev = obj
    sol = Solution.from_vectors(w_vecs, a, v, scheme=name, objective=min_gain(problem, w_vecs, v),
                                outer_iterations=t, time=clock())
    return sol, trace


def baseline_zf(channels, sensing_spec, config, seed=0, v_init=None):
    """Zero-forcing directions on the RNU combined channels; SRCR for the RIS."""
    return _fixed_direction(channels, sensing_spec, config, zf_directions, "baseline_zf", seed, v_init)


def baseline_mrt(channels, sensing_spec, config, seed=0, v_init=None):
    """Maximum-ratio directions on the RFU combined channels; SRCR for the RIS."""
    return _fixed_direction(channels, sensing_spec, config, mrt_directions, "baseline_mrt", seed, v_init)


# -- benchmark systems -------------------------------------------------------------

def _oma_thresholds(problem, users):
    return [problem.r_n if role == "n" else problem.r_f for _, role in users]


def _oma_active_rows(problem, H, users):
    r = _oma_thresholds(problem, users)
    rows = []
    for u, key in enumerate(users):
        leak = sum(H[other] for other in users if other != key)
        rows.append((f"user{u}", {u: H[key] - r[u] * leak}, r[u]))
    return rows


def _oma_passive_rows(problem, C, users):
    r = _oma_thresholds(problem, users)
    rows = []
    for u, key in enumerate(users):
        leak = sum(C[other][u] for other in users if other != key)
        rows.append((f"user{u}", C[key][u] - r[u] * leak, r[u]))
    return rows


def _oma_ok(problem, w_vecs, v):
    cfg = problem.config
    sol = Solution.from_vectors(w_vecs, None, v)
    rates = oma_rates(problem.channels, sol, problem.scaling.noise)
    floors = np.array([cfg.qos_rnu if role == "n" else cfg.qos_rfu for _, role in problem.channels.users()])
    return bool((rates >= floors).all())


def ris_isac_no_noma(channels, sensing_spec, config, seed=0, v_init=None):
    """One beam per user, no SIC; alternating active SDR and SRCR."""
    problem = make_problem(channels, sensing_spec, config)
    alg = config.algorithm
    users = channels.users()
    trace = RunTrace()
    clock = Clock()
    v = random_passive_vec(problem.m, seed) if v_init is None else np.asarray(v_init, dtype=complex)
    w_vecs = w_ratios = v_ratio = None
    prev = None
    for t in range(1, alg.max_outer + 1):
        V = passive_mat_from_vec(v)
        rows = _oma_active_rows(problem, problem.link_mats(V), users)
        rep, mats = solve_active(problem, V, rows, len(users), name="oma-active")
        trace.add("active", 1, objective=rep.objective if mats is not None else None,
                  status=rep.status, outer=t, time=clock())
        if mats is not None:
            cand, ratios, _ = rank_one_vectors([problem.scaling.p_max * W for W in mats])
            cand = power_polish(cand, problem.scaling.p_max)
            better = w_vecs is None or min_gain(problem, cand, v) >= min_gain(problem, w_vecs, v)
            if better and _oma_ok(problem, cand, v):
                w_vecs, w_ratios = cand, ratios
        if w_vecs is None:
            raise InfeasibleScenario(f"no-NOMA benchmark: active step found no rank-one point "
                                     f"meeting the rate floors ({rep.status})")
        obj_w = min_gain(problem, w_vecs, v)
        sub = RunTrace()
        cands = passive_step(problem, w_vecs, lambda C: _oma_passive_rows(problem, C, users), V, sub)
        trace.extend(sub, outer=t)
        v, obj, V_rel, accepted = choose_passive(cands, v, lambda x: min_gain(problem, w_vecs, x),
                                                 lambda x: _oma_ok(problem, w_vecs, x))
        if accepted:
            v_ratio = conic.eigen_ratio(V_rel)
        trace.add("outer", t, objective=obj, objective_active=obj_w, passive_accepted=accepted,
                  w_ratios=list(w_ratios), v_ratio=v_ratio, time=clock())
        if prev is not None and abs(obj - prev) <= alg.tol_outer * max(abs(prev), 1e-300):
            break
        prev = obj
    sol = Solution.from_vectors(w_vecs, None, v, scheme="ris_isac_no_noma",
                                objective=min_gain(problem, w_vecs, v), w_ratios=list(w_ratios),
                                v_ratio=v_ratio, outer_iterations=t, time=clock())
    return sol, trace


def ris_sensing(channels, sensing_spec, config, seed=0, v_init=None):
    """Sensing-only system: one transmit covariance under the budget, then SRCR."""
    problem = make_problem(channels, sensing_spec, config)
    alg = config.algorithm
    trace = RunTrace()
    clock = Clock()
    v = random_passive_vec(problem.m, seed) if v_init is None else np.asarray(v_init, dtype=complex)
    R = None
    prev = None
    v_ratio = None

    def gain(R, v):
        V = passive_mat_from_vec(v)
        return min(np.trace(V @ u @ R @ u.conj().T).real for u in problem.upsilon)

    for t in range(1, alg.max_outer + 1):
        V = passive_mat_from_vec(v)
        rep, mats = solve_active(problem, V, [], 1, name="sensing-active")
        if mats is not None:
            cand = problem.scaling.p_max * mats[0]
            cand = cand * (problem.scaling.p_max / np.trace(cand).real)
            if R is None or gain(cand, v) >= gain(R, v):
                R = cand
        elif R is None:
            raise InfeasibleScenario(f"sensing-only active step failed ({rep.status})")
        obj_w = gain(R, v)
        sub = RunTrace()
        cands = passive_candidates(problem, passive_coefficients(problem, [R]), [], V, sub)
        trace.extend(sub, outer=t)
        v, obj, V_rel, accepted = choose_passive(cands, v, lambda x: gain(R, x), lambda x: True)
        if accepted:
            v_ratio = conic.eigen_ratio(V_rel)
        trace.add("outer", t, objective=obj, objective_active=obj_w, passive_accepted=accepted,
                  v_ratio=v_ratio, time=clock())
        if prev is not None and abs(obj - prev) <= alg.tol_outer * max(abs(prev), 1e-300):
            break
        prev = obj
    sol = Solution([0.5 * (R + R.conj().T)], None, passive_mat_from_vec(v), None, v,
                   {"scheme": "ris_sensing", "objective": gain(R, v), "v_ratio": v_ratio,
                    "outer_iterations": t, "time": clock()})
    return sol, trace
