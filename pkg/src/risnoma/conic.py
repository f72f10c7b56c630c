"""Trace-affine semidefinite programs over complex Hermitian variables.

A :class:`ConicProgram` collects Hermitian PSD matrix variables, bounded real
scalars, linear constraints ``sum_j Tr(A_j X_j) + sum_i c_i s_i (<=|>=|=) b``
and small real affine LMI blocks.  :func:`solve` lifts every ``n x n``
Hermitian variable to a free ``2n x 2n`` real symmetric variable ``Y`` using

    embed(X) = [[Re X, -Im X], [Im X, Re X]],    Re Tr(A X) = Tr(embed(A) Y) / 2,

hands the resulting real conic program to an interior-point backend and
decodes ``Y`` by averaging its two diagonal and two off-diagonal blocks,
which restores exact Hermitian structure.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument

SQRT2 = math.sqrt(2.0)
STATUSES = ("optimal", "infeasible", "numerical-failure")


# -- embedding --------------------------------------------------------------

def embed_hermitian(h, tol=1e-10):
    """Real symmetric ``2n x 2n`` image of a complex Hermitian ``n x n`` matrix."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidArgument(f"expected a square matrix, got shape {h.shape}")
    if np.abs(h - h.conj().T).max(initial=0.0) > tol * max(1.0, np.abs(h).max(initial=0.0)):
        raise InvalidArgument("matrix is not Hermitian")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def decode_embedded(y):
    """Hermitian matrix from a (possibly block-asymmetric) real embedding."""
    n = y.shape[0] // 2
    a, b = y[:n, :n], y[:n, n:]
    c, d = y[n:, :n], y[n:, n:]
    re = 0.5 * (a + d)
    im = 0.5 * (c - b)
    x = re + 1j * im
    return 0.5 * (x + x.conj().T)


def _tril(k):
    # column-major upper triangle == row-major lower triangle of the transpose
    j, i = np.tril_indices(k)
    return i, j


def svec(s):
    """Scaled upper-triangle vectorisation (off-diagonals times sqrt 2)."""
    i, j = _tril(s.shape[0])
    w = np.where(i == j, 1.0, SQRT2)
    return s[i, j] * w


def smat(x, k):
    i, j = _tril(k)
    w = np.where(i == j, 1.0, 1.0 / SQRT2)
    s = np.zeros((k, k))
    s[i, j] = x * w
    s[j, i] = x * w
    return s


# -- expressions -------------------------------------------------------------

class Affine:
    """Real affine form ``const + sum c_s s + sum Re Tr(A_X X)``."""

    __slots__ = ("const", "scal", "tr")

    def __init__(self, const=0.0, scal=None, tr=None):
        self.const = float(const)
        self.scal = dict(scal or {})
        self.tr = dict(tr or {})

    @staticmethod
    def lift(x):
        if isinstance(x, Affine):
            return x
        if isinstance(x, (int, float, np.floating, np.integer)):
            return Affine(float(x))
        raise TypeError(f"cannot use {type(x).__name__} in an affine expression")

    def copy(self):
        return Affine(self.const, self.scal, self.tr)

    def __add__(self, other):
        other = Affine.lift(other)
        out = self.copy()
        out.const += other.const
        for k, v in other.scal.items():
            out.scal[k] = out.scal.get(k, 0.0) + v
        for k, v in other.tr.items():
            out.tr[k] = out.tr[k] + v if k in out.tr else v
        return out

    __radd__ = __add__

    def __mul__(self, c):
        c = float(c)
        return Affine(self.const * c, {k: v * c for k, v in self.scal.items()},
                      {k: v * c for k, v in self.tr.items()})

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-Affine.lift(other))

    def __rsub__(self, other):
        return Affine.lift(other) - self

    def value(self, values):
        out = self.const
        for k, c in self.scal.items():
            out += c * values[k]
        for k, a in self.tr.items():
            out += np.trace(a @ values[k]).real
        return float(out)

    def __repr__(self):
        parts = [f"{self.const:g}"] if self.const else []
        parts += [f"{c:+g}*{k}" for k, c in self.scal.items()]
        parts += [f"+Tr(A*{k})" for k in self.tr]
        return "Affine(" + " ".join(parts or ["0"]) + ")"


@dataclass(frozen=True)
class MatrixVar:
    name: str
    n: int

    def trace(self):
        return Affine(tr={self.name: np.eye(self.n, dtype=complex)})


def trace(a, x):
    """``Re Tr(A X)`` for a constant Hermitian ``A`` and matrix variable ``X``."""
    a = np.asarray(a, dtype=complex)
    if a.shape != (x.n, x.n):
        raise InvalidArgument(f"coefficient shape {a.shape} does not match {x.name} ({x.n}x{x.n})")
    if np.abs(a - a.conj().T).max(initial=0.0) > 1e-9 * max(1.0, np.abs(a).max(initial=0.0)):
        raise InvalidArgument(f"coefficient of {x.name} is not Hermitian")
    return Affine(tr={x.name: 0.5 * (a + a.conj().T)})


@dataclass
class LinearConstraint:
    name: str
    expr: Affine  # expr (cmp) 0
    cmp: str


@dataclass
class BlockConstraint:
    name: str
    entries: list  # k x k nested list of Affine, symmetric


@dataclass
class ConicProgram:
    name: str = "program"
    matrix_vars: dict = field(default_factory=dict)
    scalar_vars: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    objective: Affine = field(default_factory=Affine)
    sense: str = "max"

    def hermitian(self, name, n):
        if name in self.matrix_vars or name in self.scalar_vars:
            raise InvalidArgument(f"duplicate variable {name!r}")
        self.matrix_vars[name] = int(n)
        return MatrixVar(name, int(n))

    def scalar(self, name, lower=None, upper=None):
        if name in self.matrix_vars or name in self.scalar_vars:
            raise InvalidArgument(f"duplicate variable {name!r}")
        self.scalar_vars[name] = (lower, upper)
        return Affine(scal={name: 1.0})

    def add(self, lhs, cmp, rhs=0.0, name=None):
        if cmp not in ("<=", ">=", "=="):
            raise InvalidArgument(f"unknown comparison {cmp!r}")
        expr = Affine.lift(lhs) - Affine.lift(rhs)
        self._check(expr)
        self.constraints.append(LinearConstraint(name or f"c{len(self.constraints)}", expr, cmp))

    def add_lmi(self, entries, name=None):
        k = len(entries)
        rows = [[Affine.lift(e) for e in row] for row in entries]
        if any(len(r) != k for r in rows):
            raise InvalidArgument("LMI block must be square")
        for i in range(k):
            for j in range(k):
                self._check(rows[i][j])
        self.blocks.append(BlockConstraint(name or f"lmi{len(self.blocks)}", rows))

    def maximize(self, expr):
        self.objective, self.sense = Affine.lift(expr), "max"

    def minimize(self, expr):
        self.objective, self.sense = Affine.lift(expr), "min"

    def _check(self, expr):
        for k in expr.scal:
            if k not in self.scalar_vars:
                raise InvalidArgument(f"unknown scalar variable {k!r}")
        for k, a in expr.tr.items():
            if k not in self.matrix_vars:
                raise InvalidArgument(f"unknown matrix variable {k!r}")
            if a.shape != (self.matrix_vars[k],) * 2:
                raise InvalidArgument(f"coefficient shape mismatch for {k!r}")

    @property
    def n_constraints(self):
        return len(self.constraints) + len(self.blocks)

    def dump(self):
        """Human-readable listing of variables, constraints and objective."""
        out = [f"program {self.name}", f"sense {self.sense}"]
        for k, n in self.matrix_vars.items():
            out.append(f"var hermitian {k} {n}")
        for k, (lo, hi) in self.scalar_vars.items():
            out.append(f"var scalar {k} [{lo}, {hi}]")
        out.append(f"objective {_fmt(self.objective)}")
        for c in self.constraints:
            out.append(f"constraint {c.name}: {_fmt(c.expr)} {c.cmp} 0")
        for b in self.blocks:
            cells = "; ".join(", ".join(_fmt(e) for e in row) for row in b.entries)
            out.append(f"lmi {b.name}: [{cells}] >= 0")
        return "\n".join(out) + "\n"


def _fmt(e):
    parts = [repr(e.const)]
    parts += [f"{c!r}*{k}" for k, c in sorted(e.scal.items())]
    for k, a in sorted(e.tr.items()):
        parts.append(f"Tr(<{a.shape[0]}x{a.shape[1]} |A|_F={np.linalg.norm(a):.6g}>*{k})")
    return " + ".join(parts)


# -- standard form -----------------------------------------------------------

class _Layout:
    def __init__(self, program):
        self.offsets = {}
        off = 0
        for name, n in program.matrix_vars.items():
            k = 2 * n
            self.offsets[name] = (off, k)
            off += k * (k + 1) // 2
        self.scalar_index = {}
        for name in program.scalar_vars:
            self.scalar_index[name] = off
            off += 1
        self.size = off

    def row(self, expr):
        r = np.zeros(self.size)
        for k, c in expr.scal.items():
            r[self.scalar_index[k]] += c
        for k, a in expr.tr.items():
            off, dim = self.offsets[k]
            r[off:off + dim * (dim + 1) // 2] += 0.5 * svec(embed_hermitian(a, tol=1e-6))
        return r, expr.const


@dataclass
class _Cone:
    kind: str     # "zero" | "nonneg" | "psd"
    dim: int      # number of rows ("psd": matrix order)
    rows: list    # entry rows: for psd, unscaled upper-triangle entries (column-major)


def _standard_form(program):
    lay = _Layout(program)
    zero, nonneg, psd = [], [], []
    for c in program.constraints:
        a, c0 = lay.row(c.expr)
        if c.cmp == "==":
            zero.append((a, c0))
        elif c.cmp == "<=":
            nonneg.append((-a, -c0))  # -expr >= 0
        else:
            nonneg.append((a, c0))
    for name, (lo, hi) in program.scalar_vars.items():
        e = np.zeros(lay.size)
        e[lay.scalar_index[name]] = 1.0
        if lo is not None:
            nonneg.append((e, -float(lo)))
        if hi is not None:
            nonneg.append((-e, float(hi)))
    for name, (off, k) in lay.offsets.items():
        rows = []
        i, j = _tril(k)
        for idx, (ii, jj) in enumerate(zip(i, j)):
            e = np.zeros(lay.size)
            e[off + idx] = 1.0 if ii == jj else 1.0 / SQRT2
            rows.append((e, 0.0))
        psd.append(_Cone("psd", k, rows))
    for b in program.blocks:
        k = len(b.entries)
        i, j = _tril(k)
        psd.append(_Cone("psd", k, [lay.row(b.entries[ii][jj]) for ii, jj in zip(i, j)]))
    obj, obj_c = lay.row(program.objective)
    if program.sense == "max":
        q, q0 = -obj, -obj_c
    else:
        q, q0 = obj, obj_c
    return lay, zero, nonneg, psd, q, q0


# -- solve ---------------------------------------------------------------------

@dataclass
class SolveReport:
    status: str
    objective: float
    values: dict
    solver_iterations: int
    primal_residual: float
    dual_residual: float
    raw_status: str = ""
    solve_time: float = 0.0
    backend: str = ""

    @property
    def ok(self):
        return self.status == "optimal"


def _clarabel(lay, zero, nonneg, psd, q, tolerance, max_iter):
    import clarabel

    rows_a, rows_b, cones = [], [], []
    # entries are written as expr = c0 + a.x ; Clarabel wants A x + s = b, s in K
    if zero:
        for a, c0 in zero:
            rows_a.append(a)
            rows_b.append(-c0)
        cones.append(clarabel.ZeroConeT(len(zero)))
    if nonneg:
        for a, c0 in nonneg:
            rows_a.append(-a)
            rows_b.append(c0)
        cones.append(clarabel.NonnegativeConeT(len(nonneg)))
    for cone in psd:
        i, j = _tril(cone.dim)
        for (a, c0), ii, jj in zip(cone.rows, i, j):
            w = 1.0 if ii == jj else SQRT2
            rows_a.append(-w * a)
            rows_b.append(w * c0)
        cones.append(clarabel.PSDTriangleConeT(cone.dim))
    A = sp.csc_matrix(np.vstack(rows_a))
    b = np.asarray(rows_b)
    P = sp.csc_matrix((lay.size, lay.size))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = int(max_iter)
    settings.tol_gap_abs = tolerance
    settings.tol_gap_rel = tolerance
    settings.tol_feas = tolerance
    settings.max_threads = 1
    try:
        sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    except BaseException as exc:
        # the Rust core can panic (a BaseException) inside the PSD-cone
        # eigendecomposition, seen on infeasible programs
        if type(exc).__name__ != "PanicException":
            raise
        return "numerical-failure", np.zeros(lay.size), 0, math.inf, f"panic: {exc}"
    raw = str(sol.status)
    if raw in ("Solved",):
        status = "optimal"
    elif raw == "AlmostSolved":
        status = "almost"
    elif raw in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        status = "infeasible"
    else:
        status = "numerical-failure"
    return status, np.asarray(sol.x), int(sol.iterations), float(sol.r_dual), raw


def _cvxopt(lay, zero, nonneg, psd, q, tolerance, max_iter):
    import cvxopt
    from cvxopt import solvers

    G_rows, h = [], []
    for a, c0 in nonneg:           # s = c0 + a.x >= 0  ->  G = -a, h = c0
        G_rows.append(-a)
        h.append(c0)
    sdims = []
    for cone in psd:
        k = cone.dim
        i, j = _tril(k)
        full = [None] * (k * k)
        for (a, c0), ii, jj in zip(cone.rows, i, j):
            full[ii + jj * k] = (a, c0)
            full[jj + ii * k] = (a, c0)
        for a, c0 in full:
            G_rows.append(-a)
            h.append(c0)
        sdims.append(k)
    G = cvxopt.matrix(np.vstack(G_rows))
    hh = cvxopt.matrix(np.asarray(h, dtype=float))
    if zero:
        A = cvxopt.matrix(np.vstack([a for a, _ in zero]))
        b = cvxopt.matrix(np.asarray([-c0 for _, c0 in zero], dtype=float))
    else:
        A = cvxopt.matrix(np.zeros((0, lay.size)))
        b = cvxopt.matrix(np.zeros(0))
    opts = {"show_progress": False, "abstol": tolerance, "reltol": tolerance,
            "feastol": tolerance, "maxiters": int(max_iter)}
    res = solvers.conelp(cvxopt.matrix(q), G, hh, {"l": len(nonneg), "q": [], "s": sdims}, A, b, options=opts)
    raw = res["status"]
    status = {"optimal": "optimal", "primal infeasible": "infeasible"}.get(raw, "numerical-failure")
    if raw == "unknown" and res["x"] is not None:
        status = "almost"
    x = np.zeros(lay.size) if res["x"] is None else np.asarray(res["x"]).ravel()
    dual = res.get("dual infeasibility")
    return status, x, int(res.get("iterations", 0)), float(dual if dual is not None else np.nan), raw


BACKENDS = {"clarabel": _clarabel, "cvxopt": _cvxopt}


def _decode(program, lay, x):
    values = {}
    for name, (off, k) in lay.offsets.items():
        y = smat(x[off:off + k * (k + 1) // 2], k)
        values[name] = decode_embedded(y)
    for name, idx in lay.scalar_index.items():
        values[name] = float(x[idx])
    return values


def primal_violation(program, values):
    """Largest relative constraint violation of ``values`` in ``program``."""
    worst = 0.0
    for c in program.constraints:
        v = c.expr.value(values)
        ref = 1.0 + abs(c.expr.const)
        viol = {"<=": max(v, 0.0), ">=": max(-v, 0.0), "==": abs(v)}[c.cmp]
        worst = max(worst, viol / ref)
    for name, (lo, hi) in program.scalar_vars.items():
        v = values[name]
        if lo is not None:
            worst = max(worst, (lo - v) / (1.0 + abs(lo)))
        if hi is not None:
            worst = max(worst, (v - hi) / (1.0 + abs(hi)))
    for b in program.blocks:
        m = np.array([[e.value(values) for e in row] for row in b.entries])
        lam = np.linalg.eigvalsh(0.5 * (m + m.T))
        worst = max(worst, -lam[0] / (1.0 + np.abs(lam).max()))
    for name in program.matrix_vars:
        lam = np.linalg.eigvalsh(values[name])
        worst = max(worst, -lam[0] / (1.0 + np.abs(lam).max()))
    return float(worst)


def solve(program, tolerance=1e-8, max_iter=200, backend="clarabel", feas_check=1e-6):
    """Solve ``program`` and classify the outcome.

    ``status`` is ``"optimal"`` only if the backend reports success (or near
    success) *and* the decoded point violates no constraint by more than
    ``feas_check`` in relative terms.
    """
    if backend not in BACKENDS:
        raise InvalidArgument(f"unknown backend {backend!r}; choose from {sorted(BACKENDS)}")
    lay, zero, nonneg, psd, q, q0 = _standard_form(program)
    t0 = time.perf_counter()
    status, x, iters, dual_res, raw = BACKENDS[backend](lay, zero, nonneg, psd, q, tolerance, max_iter)
    elapsed = time.perf_counter() - t0
    values = _decode(program, lay, x)
    viol = primal_violation(program, values) if status != "infeasible" else float("inf")
    if status in ("optimal", "almost"):
        status = "optimal" if viol <= feas_check else "numerical-failure"
    obj = program.objective.value(values) if status == "optimal" else float("nan")
    return SolveReport(status, obj, values, iters, viol, dual_res, raw, elapsed, backend)


# -- rank-one extraction -------------------------------------------------------

class RankOne(NamedTuple):
    vector: np.ndarray
    ratio: float
    error: float


def eigen_ratio(x, floor=1e-12):
    lam = np.linalg.eigvalsh(0.5 * (x + x.conj().T))
    if lam.size < 2 or lam[-2] <= floor:
        return math.inf
    return float(lam[-1] / lam[-2])


def extract_rank_one(x, floor=1e-12):
    """Principal component ``sqrt(lam_max) e_max``, eigen-ratio and fit error.

    ``ratio`` is ``lam_max / lam_2`` or ``inf`` when ``lam_2 <= floor``;
    ``error`` is ``||x - v v^H||_F``.
    """
    x = 0.5 * (np.asarray(x) + np.asarray(x).conj().T)
    lam, vecs = np.linalg.eigh(x)
    top = max(lam[-1], 0.0)
    v = math.sqrt(top) * vecs[:, -1]
    if lam.size < 2 or lam[-2] <= floor:
        ratio = math.inf
    else:
        ratio = float(lam[-1] / lam[-2])
    err = float(np.linalg.norm(x - np.outer(v, v.conj())))
    return RankOne(v, ratio, err)
