"""Pieces shared by every alternating scheme.

Scaling.  Raw quantities span many decades (powers of a few watts, noise of
1e-12 W, path gains of 1e-8), which interior-point solvers dislike.  All
programs are therefore posed in normalized units:

* active matrices ``W~ = W / P_max`` (so the power budget reads ``sum Tr W~ <= 1``),
* link gains divided by the noise power (so the noise term is ``1``),
* beampattern gains divided by ``bp_scale = P_max * M * ||G||_F^2``, a rough
  upper bound of the coherent gain.

:class:`Scaling` converts back and forth.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .. import _random, conic
from ..errors import InvalidArgument
from ..metrics import (Solution, gamma_matrix, passive_mat_from_vec, passive_vec_from_mat,
                       qos_rate_thresholds, upsilon_matrix)


@dataclass(frozen=True)
class Scaling:
    p_max: float
    noise: float
    bp_scale: float

    @classmethod
    def for_channels(cls, channels, p_max, noise):
        if not (p_max > 0 and noise > 0):
            raise InvalidArgument("power budget and noise power must be positive")
        g = np.linalg.norm(channels.g_bs_ris) ** 2
        return cls(float(p_max), float(noise), float(p_max * channels.m_elements * max(g, 1e-300)))


@dataclass
class Problem:
    """Channel-derived constants of one scenario, in normalized units."""

    channels: object
    scaling: Scaling
    gamma: dict                 # (k, role) -> M x N
    upsilon: list               # q -> M x N
    r_n: float
    r_f: float
    config: object

    @property
    def k(self):
        return self.channels.k_clusters

    @property
    def n(self):
        return self.channels.n_antennas

    @property
    def m(self):
        return self.channels.m_elements

    def link_mats(self, V):
        """``P/sigma^2 * Gamma^H V Gamma`` for every user: normalized ``H_{k,i}``."""
        s = self.scaling.p_max / self.scaling.noise
        out = {}
        for key, gm in self.gamma.items():
            h = gm.conj().T @ V @ gm
            out[key] = s * 0.5 * (h + h.conj().T)
        return out

    def beam_mats(self, V):
        """Normalized ``Upsilon_q^H V Upsilon_q`` so that ``Tr(W~ Y_q)`` is the scaled gain."""
        s = self.scaling.p_max / self.scaling.bp_scale
        out = []
        for u in self.upsilon:
            y = u.conj().T @ V @ u
            out.append(s * 0.5 * (y + y.conj().T))
        return out


def make_problem(channels, sensing_spec, config):
    scaling = Scaling.for_channels(channels, config.p_max_w, config.noise_w)
    G = channels.g_bs_ris
    gamma = {key: gamma_matrix(g, G) for key, g in channels.g_ris_user.items()}
    upsilon = [upsilon_matrix(t, G, channels.spacing_ratio) for t in sensing_spec.interest_angles]
    r_n = qos_rate_thresholds(config.qos_rnu + config.algorithm.qos_guard)
    r_f = qos_rate_thresholds(config.qos_rfu + config.algorithm.qos_guard)
    if config.qos_rnu == 0:
        r_n = 0.0
    if config.qos_rfu == 0:
        r_f = 0.0
    return Problem(channels, scaling, gamma, upsilon, r_n, r_f, config)


# -- traces --------------------------------------------------------------------

@dataclass
class RunTrace:
    """Flat list of per-iteration records.

    Every record has ``phase`` (``feasibility``, ``sca``, ``active``, ``srcr``,
    ``power``, ``outer``) and ``iteration``; the remaining keys depend on the
    phase (``objective``, ``delta``, ``epsilon``, ``rho``, ``ratios``,
    ``accepted``, ``time``).
    """

    records: list = field(default_factory=list)

    def add(self, phase, iteration, **values):
        rec = {"phase": phase, "iteration": int(iteration)}
        rec.update(values)
        self.records.append(rec)
        return rec

    def extend(self, other, **extra):
        for rec in other.records:
            self.records.append({**rec, **extra})

    def series(self, phase, key="objective", **match):
        return [r[key] for r in self.records
                if r["phase"] == phase and all(r.get(k) == v for k, v in match.items())]

    def outer_objectives(self):
        return self.series("outer")

    def is_monotone(self, phase="outer", slack=1e-6, **match):
        vals = self.series(phase, **match)
        return all(b >= a - slack * max(1.0, abs(a)) for a, b in zip(vals, vals[1:]))

    def to_list(self):
        return [dict(r) for r in self.records]


class Clock:
    def __init__(self):
        self.t0 = time.perf_counter()

    def __call__(self):
        return time.perf_counter() - self.t0


# -- shared helpers ------------------------------------------------------------

def solve_program(program, config):
    alg = config.algorithm
    return conic.solve(program, tolerance=alg.solver_tol, max_iter=alg.solver_max_iter,
                       backend=alg.solver)


def random_passive_vec(m, seed):
    """Independent phases uniform on [0, 2 pi)."""
    rng = _random.stream(seed, _random.PASSIVE_INIT)
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, m))


def rank_one_vectors(mats):
    """Principal components and eigen-ratios of a list of PSD matrices."""
    vecs, ratios, errors = [], [], []
    for X in mats:
        r = conic.extract_rank_one(X)
        vecs.append(r.vector)
        ratios.append(r.ratio)
        nrm = np.linalg.norm(X)
        errors.append(r.error / nrm if nrm > 0 else 0.0)
    return vecs, ratios, errors


def min_gain(problem, w_vecs, v):
    """Min beampattern gain (watts-scale units) over the interest set, direct form."""
    R = sum(np.outer(w, w.conj()) for w in w_vecs)
    V = passive_mat_from_vec(v)
    return min(np.trace(V @ u @ R @ u.conj().T).real for u in problem.upsilon)


def power_polish(w_vecs, p_max):
    """Scale all beams so the budget is met with equality.

    Every SINR is non-decreasing under a common scaling ``c >= 1`` of all
    beams and the beampattern grows by ``c``, so this never hurts.
    """
    total = sum(float(np.vdot(w, w).real) for w in w_vecs)
    if total <= 0:
        return list(w_vecs)
    c = math.sqrt(p_max / total)
    return [c * w for w in w_vecs] if c > 1.0 else list(w_vecs)


def make_solution(w_vecs, a, v, **meta):
    return Solution.from_vectors(w_vecs, a, v, **meta)


# -- generic active-beamforming SDR ---------------------------------------------

def build_active_program(problem, beam_mats, qos_rows, n_beams=None, name="active"):
    """``max chi`` over PSD ``W_0..W_{J-1}`` with the budget, beampattern floors and
    linear QoS rows.

    ``qos_rows`` is a list of ``(label, {j: A_j}, b)`` meaning
    ``sum_j Tr(A_j W_j) >= b`` in normalized units.
    """
    margin = problem.config.algorithm.margin
    if n_beams is None:
        n_beams = len(qos_rows_beams(qos_rows, default=problem.k))
    prog = conic.ConicProgram(name)
    W = [prog.hermitian(f"W{j}", problem.n) for j in range(n_beams)]
    chi = prog.scalar("chi", lower=margin)
    for q, Y in enumerate(beam_mats):
        prog.add(sum((conic.trace(Y, Wj) for Wj in W), conic.Affine()), ">=", chi, name=f"beam{q}")
    prog.add(sum((Wj.trace() for Wj in W), conic.Affine()), "<=", 1.0, name="power")
    for label, coefs, b in qos_rows:
        lhs = sum((conic.trace(A, W[j]) for j, A in coefs.items()), conic.Affine())
        prog.add(lhs, ">=", b, name=label)
    prog.maximize(chi)
    return prog, W


def qos_rows_beams(qos_rows, default):
    beams = set(range(default))
    for _, coefs, _ in qos_rows:
        beams.update(coefs)
    return sorted(beams)


def solve_active(problem, V, qos_rows, n_beams=None, name="active"):
    """Solve the active SDR at fixed ``V``; returns ``(report, W~ list)``."""
    beam = problem.beam_mats(V)
    prog, W = build_active_program(problem, beam, qos_rows, n_beams, name)
    rep = solve_program(prog, problem.config)
    mats = [rep.values[w.name] for w in W] if rep.status == "optimal" else None
    return rep, mats


# -- generic SRCR passive step ---------------------------------------------------

@dataclass
class SrcrState:
    epsilon: float
    rho: float
    v_current: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidArgument("epsilon must lie in [0, 1]")
        if not self.rho > 0:
            raise InvalidArgument("rho must be positive")


def srcr(problem, beam_coefs, qos_rows, V_start, trace=None, label="srcr", epsilon0=0.0):
    """Sequential rank-one constraint relaxation for the passive matrix.

    ``beam_coefs`` are ``M x M`` matrices ``B_q`` (objective ``Tr(B_q V) >= chi``)
    and ``qos_rows`` are ``(label, A, b)`` with ``Tr(A V) >= b``.  The first
    rank constraint uses ``epsilon0`` and the principal eigenvector of
    ``V_start``; ``epsilon0 = 0`` starts from the plain relaxation.  Returns
    ``(V, info)``; ``info['stalled']`` is set when the step size underflows.
    """
    alg = problem.config.algorithm
    m = problem.m
    trace = RunTrace() if trace is None else trace
    state = SrcrState(float(epsilon0), alg.rho0, np.asarray(V_start, dtype=complex))
    V_t = state.v_current
    lam, vecs = np.linalg.eigh(V_t)
    e_max = vecs[:, -1]
    prev_obj = None
    best = None
    stalled = False
    clock = Clock()
    for it in range(1, alg.max_srcr + 1):
        prog = conic.ConicProgram(label)
        X = prog.hermitian("V", m)
        chi = prog.scalar("chi", lower=alg.margin)
        for i in range(m):
            E = np.zeros((m, m), dtype=complex)
            E[i, i] = 1.0
            prog.add(conic.trace(E, X), "==", 1.0, name=f"diag{i}")
        for q, B in enumerate(beam_coefs):
            prog.add(conic.trace(B, X), ">=", chi, name=f"beam{q}")
        for qlabel, A, b in qos_rows:
            prog.add(conic.trace(A, X), ">=", b, name=qlabel)
        if state.epsilon > 0:
            prog.add(conic.trace(np.outer(e_max, e_max.conj()), X) - state.epsilon * m, ">=", 0.0,
                     name="rank")
        prog.maximize(chi)
        if state.epsilon >= 1.0 and _equal_rank_one_infeasible(e_max):
            rep = _SKIPPED
        else:
            rep = solve_program(prog, problem.config)
        solvable = rep.status == "optimal"
        if solvable:
            V_t = rep.values["V"]
            state.rho = alg.rho0
        else:
            state.rho /= 2.0
        lam, vecs = np.linalg.eigh(V_t)
        e_max = vecs[:, -1]
        ratio_tr = float(np.trace(V_t).real / lam[-1])
        state.epsilon = min(1.0, lam[-1] / np.trace(V_t).real + state.rho)
        obj = rep.objective if solvable else prev_obj
        trace.add(label, it, objective=obj, epsilon=state.epsilon, rho=state.rho,
                  accepted=solvable, trace_ratio=ratio_tr, status=rep.status, time=clock())
        if solvable:
            best = V_t
        if prev_obj is None and not solvable and epsilon0 == 0.0:
            # the plain relaxation itself failed
            break
        if solvable and prev_obj is not None and ratio_tr < 1.0 + alg.tol_rank \
                and abs(obj - prev_obj) <= alg.tol_srcr * max(abs(prev_obj), 1e-12):
            prev_obj = obj
            break
        if solvable:
            prev_obj = obj
        if state.rho < alg.rho_min:
            stalled = True
            break
    return best, {"stalled": stalled, "iterations": it, "objective": prev_obj}


class _Skipped:
    status = "infeasible"
    raw_status = "rank constraint provably infeasible"
    objective = float("nan")


_SKIPPED = _Skipped()


def _equal_rank_one_infeasible(e, tol=1e-9):
    """With ``epsilon = 1`` the rank constraint forces ``V = c e e^H``, which has
    a unit diagonal only if every ``|e_m|^2`` equals ``1/M``."""
    m = e.size
    return float(np.abs(m * np.abs(e) ** 2 - 1.0).max()) > tol


def passive_coefficients(problem, w_mats):
    """``B_q = Upsilon_q R Upsilon_q^H / bp_scale`` for ``R = sum W`` in watts."""
    R = sum(w_mats)
    out = []
    for u in problem.upsilon:
        b = u @ R @ u.conj().T / problem.scaling.bp_scale
        out.append(0.5 * (b + b.conj().T))
    return out


def user_gain_coefs(problem, w_mats):
    """``C[(k, i)][j] = Gamma_{k,i} W_j Gamma_{k,i}^H / sigma^2`` so ``Tr(C V)`` is an SNR."""
    out = {}
    for key, gm in problem.gamma.items():
        row = []
        for W in w_mats:
            c = gm @ W @ gm.conj().T / problem.scaling.noise
            row.append(0.5 * (c + c.conj().T))
        out[key] = row
    return out


# -- QoS rows ------------------------------------------------------------------

def noma_qos_rows(k_clusters, a, r_n, r_f):
    """NOMA rate floors as rows ``sum_j c_j S_{key}^j >= b`` over normalized link
    gains ``S_{(k,i)}^j = |g_{k,i}^H Theta G w_j|^2 / sigma^2``.

    ``a`` is ``(K, 2)`` with rows ``(a_n, a_f)``.  Returns a list of
    ``(label, key, {j: c_j}, b)``.
    """
    rows = []
    for k in range(k_clusters):
        a_n, a_f = float(a[k][0]), float(a[k][1])
        others = [j for j in range(k_clusters) if j != k]
        near = {k: a_n, **{j: -r_n for j in others}}
        rows.append((f"rnu{k}", (k, "n"), near, r_n))
        for role in ("n", "f"):
            coefs = {k: a_f - r_f * a_n, **{j: -r_f for j in others}}
            rows.append((f"rfu{k}_{role}", (k, role), coefs, r_f))
    return rows


def active_rows(H, rows):
    """Rows on ``W~_j`` from :func:`noma_qos_rows` at fixed normalized ``H``."""
    return [(label, {j: c * H[key] for j, c in coefs.items()}, b) for label, key, coefs, b in rows]


def passive_rows(C, rows):
    """Rows on ``V`` from :func:`noma_qos_rows` with :func:`user_gain_coefs` matrices."""
    out = []
    for label, key, coefs, b in rows:
        A = sum(c * C[key][j] for j, c in coefs.items())
        out.append((label, A, b))
    return out


def passive_candidates(problem, B, rows, V_start, trace, label="srcr"):
    """SRCR from the plain relaxation and, if enabled, warm-started at ``V_start``.

    Returns a list of ``(v, V_relaxed, info)`` with ``v`` the unit-modulus
    extraction of each result.
    """
    alg = problem.config.algorithm
    starts = [("cold", 0.0)]
    if alg.srcr_warm:
        starts.append(("warm", max(0.0, 1.0 - alg.rho0)))
    out = []
    for tag, eps0 in starts:
        V, info = srcr(problem, B, rows, V_start, trace, f"{label}-{tag}" if tag == "warm" else label, eps0)
        if V is not None:
            out.append((passive_vec_from_mat(V), V, info))
    return out


def choose_passive(candidates, v, objective, feasible):
    """Best candidate that is feasible and no worse than the current ``v``.

    Returns ``(v, objective, V_relaxed or None, accepted)``.
    """
    best = (v, objective(v), None, False)
    for v_new, V_rel, _ in candidates:
        val = objective(v_new)
        if val >= best[1] and feasible(v_new):
            best = (v_new, val, V_rel, True)
    return best


def passive_step(problem, w_vecs, rows_of, V_start, trace, label="srcr"):
    """SRCR candidates for beams ``w_vecs``; ``rows_of(C)`` maps the gain
    coefficient matrices to QoS rows on ``V``."""
    mats = [np.outer(w, w.conj()) for w in w_vecs]
    B = passive_coefficients(problem, mats)
    C = user_gain_coefs(problem, mats)
    return passive_candidates(problem, B, rows_of(C), V_start, trace, label)
