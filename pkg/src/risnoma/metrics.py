"""Communication and sensing metrics.

Passive-beamforming convention: with ``Theta = diag(v)`` the lifted matrix is
``V = u u^H`` where ``u = conj(v)``.  This is the choice that makes every
trace form ``Tr(V Gamma W Gamma^H)`` equal the direct quadratic form
``|g^H Theta G w|^2`` exactly; :func:`passive_mat_from_vec` and
:func:`passive_vec_from_mat` are the only places that know about it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .geometry import steering_vector

HERMITIAN_TOL = 1e-10


def _real(z, scale=None):
    """Drop the imaginary part of a Hermitian quadratic form after checking it."""
    z = complex(z)
    ref = max(abs(z), 1e-300) if scale is None else max(scale, 1e-300)
    if abs(z.imag) > 1e-8 * ref + 1e-300:
        raise ArithmeticError(f"imaginary residue {z.imag:.3e} on a real quantity {z.real:.3e}")
    return z.real


def _check_hermitian(x, name="matrix"):
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise InvalidArgument(f"{name} must be square, got shape {x.shape}")
    scale = max(np.abs(x).max(), 1.0)
    if np.abs(x - x.conj().T).max() > HERMITIAN_TOL * scale:
        raise InvalidArgument(f"{name} is not Hermitian")
    return x


def passive_mat_from_vec(v):
    u = np.conj(np.asarray(v))
    return np.outer(u, u.conj())


def passive_vec_from_mat(V):
    """Unit-modulus phase vector whose lifted matrix best matches ``V``."""
    lam, vecs = np.linalg.eigh(V)
    u = vecs[:, -1]
    phases = np.angle(u)
    return np.exp(-1j * (phases - phases[0]))


@dataclass
class Solution:
    """Active/passive beamformers and NOMA power split.

    ``power_coeffs`` is a (K, 2) array of ``(a_n, a_f)`` rows, or ``None`` for
    systems without NOMA.
    """

    active_mats: list
    power_coeffs: np.ndarray | None
    passive_mat: np.ndarray
    active_vecs: list | None = None
    passive_vec: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_vectors(cls, w, a, v, **meta):
        w = [np.asarray(x, dtype=complex) for x in w]
        mats = [np.outer(x, x.conj()) for x in w]
        a = None if a is None else np.asarray(a, dtype=float).reshape(-1, 2)
        v = np.asarray(v, dtype=complex)
        return cls(mats, a, passive_mat_from_vec(v), w, v, dict(meta))

    @property
    def total_power(self):
        return float(sum(np.trace(W).real for W in self.active_mats))

    def covariance(self):
        return sum(self.active_mats)

    def validate(self, psd_tol=1e-8, outer_tol=1e-6):
        if self.power_coeffs is not None:
            a = self.power_coeffs
            if np.abs(a.sum(axis=1) - 1).max() > 1e-9:
                raise InvalidArgument("power coefficients must sum to one per cluster")
            if (a <= 0).any() or (a >= 1).any():
                raise InvalidArgument("power coefficients must lie in (0, 1)")
        if np.abs(np.diag(self.passive_mat) - 1).max() > psd_tol:
            raise InvalidArgument("passive matrix must have unit diagonal")
        for name, X in [("passive_mat", self.passive_mat)] + [
                (f"active_mats[{k}]", W) for k, W in enumerate(self.active_mats)]:
            _check_hermitian(X, name)
            lam = np.linalg.eigvalsh(X)
            if lam[0] < -psd_tol * max(1.0, lam[-1]):
                raise InvalidArgument(f"{name} is not PSD (min eigenvalue {lam[0]:.3e})")
        if self.active_vecs is not None:
            for k, (w, W) in enumerate(zip(self.active_vecs, self.active_mats)):
                if np.linalg.norm(np.outer(w, w.conj()) - W) > outer_tol * max(1.0, np.linalg.norm(W)):
                    raise InvalidArgument(f"active_mats[{k}] differs from its vector outer product")
        if self.passive_vec is not None:
            if np.linalg.norm(passive_mat_from_vec(self.passive_vec) - self.passive_mat) > outer_tol * len(self.passive_vec):
                raise InvalidArgument("passive_mat differs from its vector outer product")
        return self


@dataclass
class SensingSpec:
    angle_grid: np.ndarray
    interest_set: np.ndarray
    desired_mask: np.ndarray
    beam_width: float
    target_angles: tuple = ()

    @property
    def interest_angles(self):
        return self.angle_grid[self.interest_set]


def build_sensing_spec(target_angles, beam_width, grid_step):
    """Angle grid over [-90, 90], the 0/1 desired mask and the interest set."""
    if not beam_width > 0:
        raise InvalidArgument("beam_width must be positive")
    if not grid_step > 0:
        raise InvalidArgument("grid_step must be positive")
    steps = 180.0 / grid_step
    n = int(round(steps))
    if abs(n - steps) < 1e-9:
        grid = np.linspace(-90.0, 90.0, n + 1)
    else:
        grid = -90.0 + grid_step * np.arange(int(np.floor(steps)) + 1)
    half = beam_width / 2.0 + 1e-9
    mask = np.zeros(grid.size, dtype=int)
    for t in target_angles:
        mask[np.abs(grid - t) <= half] = 1
    interest = np.flatnonzero(mask)
    if interest.size == 0:
        raise InvalidArgument("no grid angle lies inside the desired beams")
    return SensingSpec(grid, interest, mask, float(beam_width), tuple(float(t) for t in target_angles))


@dataclass
class EffectiveMatrices:
    gamma: dict
    upsilon: list
    h: dict | None = None


def gamma_matrix(g_user, g_bs_ris):
    return g_user.conj()[:, None] * g_bs_ris


def upsilon_matrix(theta, g_bs_ris, spacing_ratio=0.5):
    a = steering_vector(theta, g_bs_ris.shape[0], spacing_ratio)
    return a.conj()[:, None] * g_bs_ris


def build_effective_matrices(channels, sensing_spec, passive_mat=None):
    G = channels.g_bs_ris
    gamma = {key: gamma_matrix(g, G) for key, g in channels.g_ris_user.items()}
    upsilon = [upsilon_matrix(t, G, channels.spacing_ratio) for t in sensing_spec.interest_angles]
    h = None
    if passive_mat is not None:
        h = {}
        for key, gm in gamma.items():
            hk = gm.conj().T @ passive_mat @ gm
            h[key] = 0.5 * (hk + hk.conj().T)
    return EffectiveMatrices(gamma, upsilon, h)


def beampattern_gain_direct(passive_vec, g_bs_ris, active_vecs, theta, spacing_ratio=0.5):
    """``a^H Theta G (sum_k w_k w_k^H) G^H Theta^H a`` at angle ``theta``."""
    a = steering_vector(theta, g_bs_ris.shape[0], spacing_ratio)
    row = (a.conj() * np.asarray(passive_vec)) @ g_bs_ris
    return float(sum(abs(row @ w) ** 2 for w in active_vecs))


def beampattern_gain_trace(passive_mat, upsilon_q, active_mats):
    """``Tr[V Upsilon (sum W_k) Upsilon^H]``."""
    V = _check_hermitian(passive_mat, "passive_mat")
    R = sum(_check_hermitian(W, "active matrix") for W in active_mats)
    val = np.trace(V @ upsilon_q @ R @ upsilon_q.conj().T)
    scale = np.linalg.norm(V) * np.linalg.norm(upsilon_q) ** 2 * np.linalg.norm(R)
    return _real(val, scale)


def beampattern_profile(solution, channels, angles):
    """Beampattern gain at each angle in ``angles`` (trace form)."""
    R = solution.covariance()
    V = solution.passive_mat
    G = channels.g_bs_ris
    out = np.empty(len(angles))
    for i, t in enumerate(angles):
        u = upsilon_matrix(t, G, channels.spacing_ratio)
        out[i] = np.trace(V @ u @ R @ u.conj().T).real
    return out


def min_beampattern(solution, channels, sensing_spec):
    return float(beampattern_profile(solution, channels, sensing_spec.interest_angles).min())


def illumination_power(passive_mat, active_mats, g_bs_ris, probe_channel):
    ups = np.asarray(probe_channel).conj()[:, None] * g_bs_ris
    R = sum(active_mats)
    val = np.trace(passive_mat @ ups @ R @ ups.conj().T)
    return max(_real(val, np.linalg.norm(passive_mat) * np.linalg.norm(ups) ** 2 * np.linalg.norm(R)), 0.0)


def qos_rate_thresholds(qos_bits):
    """SINR thresholds ``2^R - 1`` for rate floors in bits/s/Hz."""
    q = np.asarray(qos_bits, dtype=float)
    if (q < 0).any():
        raise InvalidArgument("QoS rate floors must be non-negative")
    r = np.exp2(q) - 1.0
    return float(r) if r.ndim == 0 else r


def link_gains(channels, solution):
    """``S[(k, role)][j] = |g_{k,role}^H Theta G w_j|^2`` for every beam ``j``.

    Uses the direct vector form when vectors are available, otherwise the
    trace form with ``H_{k,i}``.
    """
    G = channels.g_bs_ris
    out = {}
    if solution.active_vecs is not None and solution.passive_vec is not None:
        v = solution.passive_vec
        for key, g in channels.g_ris_user.items():
            row = (g.conj() * v) @ G
            out[key] = np.array([abs(row @ w) ** 2 for w in solution.active_vecs])
    else:
        V = solution.passive_mat
        for key, g in channels.g_ris_user.items():
            gm = gamma_matrix(g, G)
            out[key] = np.array([np.trace(V @ gm @ W @ gm.conj().T).real for W in solution.active_mats])
    return out


def link_gains_trace(channels, solution):
    G = channels.g_bs_ris
    V = solution.passive_mat
    out = {}
    for key, g in channels.g_ris_user.items():
        H = gamma_matrix(g, G).conj().T @ V @ gamma_matrix(g, G)
        out[key] = np.array([np.trace(W @ H).real for W in solution.active_mats])
    return out


@dataclass
class SinrTerms:
    """Numerators and denominators of the three NOMA SINRs, per cluster."""

    num_f_to_n: np.ndarray
    den_f_to_n: np.ndarray
    num_n: np.ndarray
    den_n: np.ndarray
    num_f_to_f: np.ndarray
    den_f_to_f: np.ndarray


def sinr_terms(gains, power_coeffs, noise_power):
    K = len(power_coeffs)
    a_n, a_f = power_coeffs[:, 0], power_coeffs[:, 1]
    t = {name: np.zeros(K) for name in ("nfn", "dfn", "nn", "dn", "nff", "dff")}
    for k in range(K):
        sn, sf = gains[(k, "n")], gains[(k, "f")]
        inter_n = sn.sum() - sn[k]
        inter_f = sf.sum() - sf[k]
        t["nfn"][k] = a_f[k] * sn[k]
        t["dfn"][k] = a_n[k] * sn[k] + inter_n + noise_power
        t["nn"][k] = a_n[k] * sn[k]
        t["dn"][k] = inter_n + noise_power
        t["nff"][k] = a_f[k] * sf[k]
        t["dff"][k] = a_n[k] * sf[k] + inter_f + noise_power
    return SinrTerms(t["nfn"], t["dfn"], t["nn"], t["dn"], t["nff"], t["dff"])


def _rate(num, den):
    out = np.empty_like(num)
    unbounded = np.zeros(num.shape, dtype=bool)
    for i, (x, y) in enumerate(zip(num, den)):
        if y > 0:
            out[i] = np.log2(1.0 + x / y)
        elif x > 0:
            out[i] = np.inf
            unbounded[i] = True
        else:
            out[i] = 0.0
    return out, unbounded


@dataclass
class RateReport:
    rate_f_to_n: np.ndarray
    rate_n: np.ndarray
    rate_f_to_f: np.ndarray
    rate_f: np.ndarray
    unbounded: np.ndarray
    terms: SinrTerms

    def satisfies(self, qos_rnu, qos_rfu, slack=1e-6):
        return bool((self.rate_n >= qos_rnu - slack).all() and (self.rate_f >= qos_rfu - slack).all())

    def as_dict(self):
        return {k: getattr(self, k).tolist() for k in ("rate_f_to_n", "rate_n", "rate_f_to_f", "rate_f")}


def achievable_rates(channels, solution, noise_power, check=True):
    """Per-cluster NOMA rates with the RNU decoding the RFU signal first.

    When both vector and matrix forms are present the direct quadratic forms
    are cross-checked against the trace forms.
    """
    if solution.power_coeffs is None:
        raise InvalidArgument("solution carries no NOMA power coefficients")
    gains = link_gains(channels, solution)
    if check and solution.active_vecs is not None and solution.passive_vec is not None:
        alt = link_gains_trace(channels, solution)
        for key in gains:
            scale = max(np.abs(gains[key]).max(), np.abs(alt[key]).max(), 1e-300)
            if np.abs(gains[key] - alt[key]).max() > 1e-8 * scale:
                raise ArithmeticError(f"direct and trace link gains disagree for user {key}")
    t = sinr_terms(gains, solution.power_coeffs, noise_power)
    r_fn, u1 = _rate(t.num_f_to_n, t.den_f_to_n)
    r_n, u2 = _rate(t.num_n, t.den_n)
    r_ff, u3 = _rate(t.num_f_to_f, t.den_f_to_f)
    return RateReport(r_fn, r_n, r_ff, np.minimum(r_fn, r_ff), u1 | u2 | u3, t)


def oma_rates(channels, solution, noise_power):
    """Rates of the no-NOMA benchmark, one beam per user in ``channels.users()`` order.

    The interference term sums the leakage of beam ``k`` into the other users'
    channels, exactly as the benchmark's rate expression is written.
    """
    users = channels.users()
    gains = link_gains(channels, solution)
    rates = np.empty(len(users))
    for idx, key in enumerate(users):
        leak = sum(gains[other][idx] for other in users if other != key)
        rates[idx] = np.log2(1.0 + gains[key][idx] / (leak + noise_power))
    return rates
