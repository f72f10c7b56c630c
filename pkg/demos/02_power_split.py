"""Closed-form NOMA power split for fixed beams: the feasible interval and its
smallest point, checked against a brute-force scan."""
import numpy as np

from risnoma import ScenarioConfig
from risnoma.algorithms import closed_form_power, power_feasibility_bounds
from risnoma.algorithms.common import make_problem, random_passive_vec
from risnoma.harness import scenario
from risnoma.metrics import Solution, achievable_rates, passive_mat_from_vec

cfg = ScenarioConfig(k_clusters=2, n_antennas=4, m_elements=8)
channels, spec = scenario(cfg, seed=0)
problem = make_problem(channels, spec, cfg)

# fixed RIS phases and matched-filter beams toward each cluster's near user
v = random_passive_vec(cfg.m_elements, 0)
V = passive_mat_from_vec(v)
w = []
for k in range(cfg.k_clusters):
    h = (channels.user(k, "n").conj() * v) @ channels.g_bs_ris
    w.append(np.sqrt(cfg.p_max_w / cfg.k_clusters) * h.conj() / np.linalg.norm(h))

# H_{k,i} = Gamma^H V Gamma for every user
h = {key: gm.conj().T @ V @ gm for key, gm in problem.gamma.items()}
b = power_feasibility_bounds(h, [np.outer(x, x.conj()) for x in w], cfg)
for k in range(cfg.k_clusters):
    print(f"cluster {k}: a_f in [{max(b.a_min1[k], b.a_min2[k]):.6f}, {b.a_max[k]:.6f}]  feasible={b.feasible[k]}")

# the smallest feasible RFU share leaves the most power to the near user
a = closed_form_power(b)
print("closed form (a_n, a_f):\n", np.round(a, 6))
rates = achievable_rates(channels, Solution.from_vectors(w, a, v), cfg.noise_w)
print("RFU rate at the closed form: %s (floor 0.1, binding)" % np.round(rates.rate_f, 8))
print("RNU rate: %s (floor 0.5)" % np.round(rates.rate_n, 4))

# brute force: scan a_f on a fine grid for cluster 0 with the others at their closed form
grid = np.linspace(1e-4, 1 - 1e-4, 10_000)
ok = []
for x in grid:
    trial = a.copy()
    trial[0] = (1 - x, x)
    r = achievable_rates(channels, Solution.from_vectors(w, trial, v), cfg.noise_w, check=False)
    ok.append(r.rate_n[0] >= cfg.qos_rnu and r.rate_f[0] >= cfg.qos_rfu)
ok = np.array(ok)
print("grid: smallest feasible a_f = %.6f, largest = %.6f" % (grid[ok].min(), grid[ok].max()))
