"""Joint active beamforming / NOMA power split at fixed passive beamforming.

The bilinear products ``a_k Tr(W_k H)`` are handled by

* a slack ``eta_k`` with ``eta_k^2 <= a_k Tr(W_k H_{k,n})`` written as a 2x2 LMI
  and a first-order lower bound ``eta~^2 + 2 eta~ (eta - eta~)`` on ``eta_k^2``;
* the arithmetic-geometric mean bound ``a T <= beta a^2 / 2 + T^2 / (2 beta)``,
  imposed through a 3x3 LMI ``[[L, sqrt(beta/2) a, T/sqrt(2 beta)], [., 1, 0], [., 0, 1]]``
  whose Schur complement is ``L - beta a^2/2 - T^2/(2 beta) >= 0``.

All quantities are in the normalized units of :mod:`.common`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _random, conic
from ..errors import InfeasibleScenario, InvalidArgument, NeedsInitialization
from .common import Clock, RunTrace, solve_program

TINY = 1e-12


@dataclass
class ScaState:
    beta1: np.ndarray
    beta2: np.ndarray
    eta_tilde: np.ndarray
    eta: np.ndarray | None = None

    def __post_init__(self):
        for name in ("beta1", "beta2", "eta_tilde"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not (arr > 0).all():
                raise InvalidArgument(f"{name} must be strictly positive")
            setattr(self, name, arr)

    @classmethod
    def from_point(cls, a_n, t_n, t_f):
        """Fixed points that make every approximation tight at ``(a_n, T_n, T_f)``."""
        a_n = np.maximum(np.asarray(a_n, dtype=float), TINY)
        t_n = np.maximum(np.asarray(t_n, dtype=float), TINY)
        t_f = np.maximum(np.asarray(t_f, dtype=float), TINY)
        return cls(t_n / a_n, t_f / a_n, np.sqrt(a_n * t_n))


def _link_traces(W, H, k_clusters):
    """``T[(k,i)] = Tr(W_k H_{k,i})`` and ``I[(k,i)] = sum_{j != k} Tr(W_j H_{k,i})`` (affine)."""
    T, I = {}, {}
    for (k, role), h in H.items():
        T[(k, role)] = conic.trace(h, W[k])
        I[(k, role)] = sum((conic.trace(h, W[j]) for j in range(k_clusters) if j != k), conic.Affine())
    return T, I


def build_joint_program(problem, H, beam_mats, sca, feasibility=False):
    """Convex restriction of the joint problem at the fixed points ``sca``.

    With ``feasibility=True`` the infeasibility indicator ``delta`` pads the
    beampattern, Taylor, AGM and power constraints and the objective becomes
    ``min delta``; the 2x2 LMI is left unpadded.
    """
    alg = problem.config.algorithm
    K, r_n, r_f = problem.k, problem.r_n, problem.r_f
    prog = conic.ConicProgram("feasibility" if feasibility else "joint")
    W = [prog.hermitian(f"W{k}", problem.n) for k in range(K)]
    a = [prog.scalar(f"a{k}", lower=alg.margin, upper=1.0 - alg.margin) for k in range(K)]
    eta = [prog.scalar(f"eta{k}", lower=alg.margin) for k in range(K)]
    chi = prog.scalar("chi", lower=alg.margin)
    pad = prog.scalar("delta", lower=0.0) if feasibility else 0.0

    for q, Y in enumerate(beam_mats):
        prog.add(sum((conic.trace(Y, w) for w in W), conic.Affine()) + pad, ">=", chi, name=f"beam{q}")
    prog.add(sum((w.trace() for w in W), conic.Affine()), "<=", 1.0 + pad, name="power")

    T, I = _link_traces(W, H, K)
    for k in range(K):
        prog.add_lmi([[a[k], eta[k]], [eta[k], T[(k, "n")]]], name=f"schur{k}")
        et = float(sca.eta_tilde[k])
        prog.add(et * et + 2.0 * et * (eta[k] - et) + pad, ">=", r_n * (I[(k, "n")] + 1.0),
                 name=f"taylor{k}")
        for idx, (role, beta) in enumerate((("n", sca.beta1[k]), ("f", sca.beta2[k])), start=1):
            lhs = (T[(k, role)] - r_f * (I[(k, role)] + 1.0)) / (1.0 + r_f) + pad
            x = math.sqrt(beta / 2.0) * a[k]
            y = T[(k, role)] / math.sqrt(2.0 * beta)
            prog.add_lmi([[lhs, x, y], [x, 1.0, 0.0], [y, 0.0, 1.0]], name=f"agm{k}_{idx}")

    if feasibility:
        prog.minimize(pad)
    else:
        prog.maximize(chi)
    return prog, W


def _update(problem, H, values, W):
    K = problem.k
    mats = [values[w.name] for w in W]
    a_n = np.array([values[f"a{k}"] for k in range(K)])
    t_n = np.array([np.trace(mats[k] @ H[(k, "n")]).real for k in range(K)])
    t_f = np.array([np.trace(mats[k] @ H[(k, "f")]).real for k in range(K)])
    eta = np.array([values[f"eta{k}"] for k in range(K)])
    state = ScaState(np.maximum(t_n, TINY) / a_n, np.maximum(t_f, TINY) / a_n,
                     np.maximum(eta, problem.config.algorithm.margin), eta)
    return mats, a_n, state


def random_sca_state(problem, H, seed):
    """Random positive fixed points on the scale of the channel gains."""
    rng = _random.stream(seed, _random.SCA_INIT)
    K = problem.k
    top_n = np.array([max(np.linalg.eigvalsh(H[(k, "n")])[-1], TINY) for k in range(K)])
    top_f = np.array([max(np.linalg.eigvalsh(H[(k, "f")])[-1], TINY) for k in range(K)])
    u = rng.uniform(0.1, 1.0, size=(3, K))
    return ScaState(u[0] * top_n, u[1] * top_f, np.sqrt(u[2] * top_n))


def find_feasible_init(problem, V, seed=0, trace=None):
    """Drive the infeasibility indicator to zero by successive convex steps.

    Returns the fixed points at which the joint restriction is feasible.
    Raises :class:`InfeasibleScenario` when ``delta`` stalls or the iteration
    cap is reached.
    """
    alg = problem.config.algorithm
    trace = RunTrace() if trace is None else trace
    H = problem.link_mats(V)
    beam = problem.beam_mats(V)
    state = random_sca_state(problem, H, seed)
    clock = Clock()
    history = []
    for it in range(1, alg.max_feasibility + 1):
        prog, W = build_joint_program(problem, H, beam, state, feasibility=True)
        rep = solve_program(prog, problem.config)
        if rep.status != "optimal":
            trace.add("feasibility", it, delta=None, status=rep.status, time=clock())
            raise InfeasibleScenario(f"feasibility step failed ({rep.raw_status})",
                                     history[-1] if history else None)
        delta = float(rep.values["delta"])
        history.append(delta)
        _, _, state = _update(problem, H, rep.values, W)
        trace.add("feasibility", it, delta=delta, status=rep.status, time=clock())
        if delta < alg.delta_tol:
            return state
        if len(history) > 5 and history[-6] - delta <= 1e-6 * max(history[-6], TINY):
            raise InfeasibleScenario("infeasibility indicator stalled", delta)
    raise InfeasibleScenario("feasibility search hit its iteration cap", history[-1])


def solve_joint_sca(problem, V, init, trace=None):
    """Successive convex steps on the joint restriction until ``chi`` settles.

    Returns ``(W~ list, a_n array, chi, state)`` in normalized units.
    """
    alg = problem.config.algorithm
    trace = RunTrace() if trace is None else trace
    H = problem.link_mats(V)
    beam = problem.beam_mats(V)
    state = init
    clock = Clock()
    best = None
    prev = None
    for it in range(1, alg.max_inner + 1):
        prog, W = build_joint_program(problem, H, beam, state)
        rep = solve_program(prog, problem.config)
        if rep.status != "optimal":
            trace.add("sca", it, objective=None, status=rep.status, time=clock())
            if best is None:
                raise NeedsInitialization(f"joint subproblem not solvable at the given fixed points "
                                          f"({rep.status}: {rep.raw_status})")
            break
        mats, a_n, new_state = _update(problem, H, rep.values, W)
        chi = float(rep.objective)
        trace.add("sca", it, objective=chi, status=rep.status, time=clock())
        if prev is not None and chi < prev - 1e-7 * max(abs(prev), 1.0):
            # a numerically worse restriction; keep the better iterate
            break
        best = (mats, a_n, chi, new_state)
        state = new_state
        if prev is not None and abs(chi - prev) <= alg.tol_inner * max(abs(prev), TINY):
            break
        prev = chi
    return best
