"""
Exact quadratic-cost transport between finitely supported measures.
"""

import io
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _simplex
from ._fmt import fmt
from .measures import DiscreteMeasure, make_discrete

MARGINAL_RTOL = 1e-9
BALANCE_RTOL = 1e-12
AUDIT_RTOL = 1e-9
PRICING_RTOL = 1e-14
EXHAUSTIVE_LIMIT = 12
BRUTE_FORCE_LIMIT = 9


class UnbalancedMassError(ValueError):
    def __init__(self, mass_mu, mass_nu):
        self.mass_mu = mass_mu
        self.mass_nu = mass_nu
        super().__init__(f"total masses differ: mu has {mass_mu!r}, nu has {mass_nu!r}")


class SolverAuditError(RuntimeError):
    """The simplex finished but its output failed the optimality audit."""


class SlacknessError(ValueError):
    """The coupling's support admits no dual potential: it is not optimal."""

    def __init__(self, message, cycle=None):
        super().__init__(message)
        self.cycle = cycle


class Coupling:
    """Finitely supported coupling of two discrete measures.

    Pairs are stored by atom index: ``src[k]`` indexes ``left.points`` and
    ``tgt[k]`` indexes ``right.points``; ``mass[k] > 0`` is the mass on
    that pair. Construction checks that summing pair masses reproduces both
    marginals up to ``1e-9 * total mass``.
    """

    __slots__ = ("src", "tgt", "mass", "left", "right")

    def __init__(self, src, tgt, mass, left: DiscreteMeasure, right: DiscreteMeasure, check=True):
        src = np.asarray(src, dtype=np.int64)
        tgt = np.asarray(tgt, dtype=np.int64)
        mass = np.asarray(mass, dtype=float)
        if not (src.shape == tgt.shape == mass.shape and src.ndim == 1):
            raise ValueError("src, tgt and mass must be 1-d arrays of equal length")
        if left.dim != right.dim:
            raise ValueError(f"marginal dimensions differ: {left.dim} vs {right.dim}")
        if check:
            if np.any(mass <= 0):
                raise ValueError("coupling masses must be positive")
            if len(src) and (src.min() < 0 or src.max() >= len(left) or tgt.min() < 0 or tgt.max() >= len(right)):
                raise ValueError("pair index outside the marginal support")
            total = max(left.total_mass, right.total_mass)
            tol = MARGINAL_RTOL * total
            for idx, marg, name in ((src, left, "left"), (tgt, right, "right")):
                sums = np.bincount(idx, weights=mass, minlength=len(marg))
                gap = np.max(np.abs(sums - marg.masses)) if len(marg) else 0.0
                if gap > tol:
                    raise ValueError(f"{name} marginal violated by {gap:.3e} (tolerance {tol:.3e})")
        for arr in (src, tgt, mass):
            arr.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "tgt", tgt)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def __setattr__(self, name, value):
        raise AttributeError("Coupling is immutable")

    def __len__(self):
        return len(self.mass)

    def __repr__(self):
        return f"Coupling(pairs={len(self)}, dim={self.dim}, total_mass={self.mass.sum():.6g})"

    @property
    def dim(self):
        return self.left.dim

    @property
    def x(self):
        return self.left.points[self.src]

    @property
    def y(self):
        return self.right.points[self.tgt]

    def support(self):
        """Support pairs as (k, 2, d) array."""
        return np.stack([self.x, self.y], axis=1)

    def as_joint_measure(self) -> DiscreteMeasure:
        """The coupling viewed as a measure on R^(2d)."""
        return DiscreteMeasure(np.hstack([self.x, self.y]), self.mass, 2 * self.dim)

    def to_csv(self):
        d = self.dim
        header = ["i", "j", "mass"] + [f"x{k}" for k in range(d)] + [f"y{k}" for k in range(d)]
        out = io.StringIO()
        out.write(",".join(header) + "\n")
        xs, ys = self.x, self.y
        for k in range(len(self)):
            row = [str(int(self.src[k])), str(int(self.tgt[k])), fmt(self.mass[k])]
            row += [fmt(v) for v in xs[k]] + [fmt(v) for v in ys[k]]
            out.write(",".join(row) + "\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text):
        """Parse the ``i,j,mass,x...,y...`` format. Marginals are rebuilt from
        the pairs; rows sharing an index must agree on its coordinates."""
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty coupling file")
        header = [h.strip() for h in lines[0].split(",")]
        if header[:3] != ["i", "j", "mass"] or (len(header) - 3) % 2 or len(header) == 3:
            raise ValueError(f"bad coupling header: {lines[0]!r}")
        d = (len(header) - 3) // 2
        try:
            rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
        except ValueError as exc:
            raise ValueError(f"malformed coupling row: {exc}") from exc
        if rows.ndim != 2 or rows.shape[1] != len(header) or len(rows) == 0:
            raise ValueError("coupling rows do not match the header")
        src = rows[:, 0].astype(np.int64)
        tgt = rows[:, 1].astype(np.int64)
        if np.any(rows[:, 0] != src) or np.any(rows[:, 1] != tgt) or src.min() < 0 or tgt.min() < 0:
            raise ValueError("indices must be nonnegative integers")
        mass = rows[:, 2]
        xs, ys = rows[:, 3:3 + d], rows[:, 3 + d:]
        left = _marginal_from_rows(src, xs, mass, "i")
        right = _marginal_from_rows(tgt, ys, mass, "j")
        return cls(src, tgt, mass, left, right)


def _marginal_from_rows(idx, pts, mass, name):
    n = idx.max() + 1
    if set(np.unique(idx)) != set(range(n)):
        raise ValueError(f"column {name} does not index a contiguous atom list")
    points = np.empty((n, pts.shape[1]))
    points[idx] = pts
    if not np.array_equal(points[idx], pts):
        raise ValueError(f"rows sharing index {name} disagree on coordinates")
    masses = np.bincount(idx, weights=mass, minlength=n)
    canon = make_discrete(points, masses)
    if not np.array_equal(canon.points, points):
        raise ValueError(f"atoms indexed by {name} are not in canonical order")
    return DiscreteMeasure(points, masses)


@dataclass(frozen=True)
class CycleViolation:
    """Witness that ``cycle`` (ordered (x, y) pairs) beats its own assignment
    by re-routing each x_i to y_{i+1}."""

    cycle: tuple
    lhs_cost: float
    rhs_cost: float

    def __str__(self):
        steps = " -> ".join(f"({_vec(x)}, {_vec(y)})" for x, y in self.cycle)
        return f"cycle {steps}: assigned cost {self.lhs_cost:.17g} > shifted cost {self.rhs_cost:.17g}"


def _vec(v):
    return "[" + ", ".join(f"{c:.6g}" for c in v) + "]"


@dataclass(frozen=True)
class CycleCheck:
    """Outcome of :func:`verify_cyclic_monotonicity`.

    ``exhaustive`` is True when every cycle up to the requested length was
    examined; otherwise a pass only means no sampled cycle failed.
    """

    violation: Optional[CycleViolation]
    exhaustive: bool
    cycles_checked: int

    @property
    def ok(self):
        return self.violation is None

    @property
    def label(self):
        if self.violation is not None:
            return "violation"
        return "pass" if self.exhaustive else "sampled-pass"


def _check_dims(mu, nu):
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if mu.is_empty or nu.is_empty:
        raise ValueError("cannot transport an empty measure")


def solve_exact(mu: DiscreteMeasure, nu: DiscreteMeasure, pivot="block", max_iter=None) -> Coupling:
    """Optimal coupling for the cost ``|x - y|^2`` by network simplex.

    The result is a basic solution (at most m + n - 1 pairs) and is
    deterministic for a given input and pivot rule. ``pivot`` is ``"block"``
    (block search, the default) or ``"bland"`` (first eligible arc).
    """
    _check_dims(mu, nu)
    ma, mb = mu.total_mass, nu.total_mass
    if abs(ma - mb) > BALANCE_RTOL * max(ma, mb):
        raise UnbalancedMassError(ma, mb)
    rule = {"block": _simplex.PIVOT_BLOCK, "bland": _simplex.PIVOT_BLAND}[pivot]
    xs = np.ascontiguousarray(mu.points)
    ys = np.ascontiguousarray(nu.points)
    a = np.ascontiguousarray(mu.masses)
    # absorb the admissible imbalance so the artificial arcs can drain fully
    b = np.ascontiguousarray(nu.masses * (ma / mb))
    m, n = len(a), len(b)
    # arcs are priced by -<x, y>; this bounds its magnitude
    cost_scale = max(np.abs(xs).max() * np.abs(ys).max() * xs.shape[1], 1.0)
    snap = 1e-14 * ma
    if max_iter is None:
        max_iter = 50 * (m + n) * max(int(math.log2(m + n)), 1) + 10_000
    arcs, flow, status, _, pk, pf = _simplex.network_simplex(xs, ys, a, b, rule, PRICING_RTOL, snap, max_iter)
    if status == 1:
        raise SolverAuditError(f"network simplex hit the iteration limit ({max_iter})")
    if status == 2:
        raise SolverAuditError("network simplex found no blocking arc")

    real = (arcs < m * n) & (flow > 0)
    art_flow = flow[arcs >= m * n].sum()
    if art_flow > 1e-9 * ma:
        raise SolverAuditError(f"artificial arcs still carry mass {art_flow:.3e}")
    src = arcs[real] // n
    tgt = arcs[real] % n
    mass = flow[real]
    order = np.lexsort((tgt, src))
    src, tgt, mass = src[order], tgt[order], mass[order]

    worst = _simplex.min_reduced_cost(xs, ys, pk, pf)
    if worst < -AUDIT_RTOL * cost_scale:
        raise SolverAuditError(f"complementary slackness audit failed: reduced cost {worst:.3e}")
    try:
        return Coupling(src, tgt, mass, mu, nu)
    except ValueError as exc:
        raise SolverAuditError(f"solver output violates the marginals: {exc}") from exc


def brute_force_assignment(mu: DiscreteMeasure, nu: DiscreteMeasure) -> Coupling:
    """Optimal matching by trying every permutation. Test oracle only:
    needs equal-size uniform measures with at most 9 atoms."""
    _check_dims(mu, nu)
    n = len(mu)
    if n != len(nu):
        raise ValueError("brute force needs equally many atoms on both sides")
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is limited to {BRUTE_FORCE_LIMIT} atoms, got {n}")
    w = mu.masses[0]
    if not (np.allclose(mu.masses, w, rtol=1e-12, atol=0) and np.allclose(nu.masses, w, rtol=1e-12, atol=0)):
        raise ValueError("brute force needs all masses equal")
    cost = ((mu.points[:, None, :] - nu.points[None, :, :]) ** 2).sum(axis=2)
    best, best_perm = np.inf, None
    rows = np.arange(n)
    for perm in itertools.permutations(range(n)):
        c = cost[rows, perm].sum()
        if c < best:
            best, best_perm = c, perm
    return Coupling(rows, np.array(best_perm), mu.masses.copy(), mu, nu)


def transport_cost(pi: Coupling) -> float:
    """``sum mass * |x - y|^2``."""
    return float(np.dot(pi.mass, ((pi.x - pi.y) ** 2).sum(axis=1)))


def _cycle_costs(xs, ys, idx):
    cx = xs[list(idx)]
    cy = ys[list(idx)]
    own = ((cx - cy) ** 2).sum(axis=1)
    shifted = ((cx - np.roll(cy, -1, axis=0)) ** 2).sum(axis=1)
    return own, shifted


def _support_pairs(pi):
    pts = np.hstack([pi.x, pi.y])
    uniq = np.unique(pts, axis=0)
    d = pi.dim
    return uniq[:, :d], uniq[:, d:]


def check_cycles(xs, ys, max_cycle_len=4, tol=1e-9, budget=10_000, seed=0) -> CycleCheck:
    """Cyclic monotonicity of the pair set {(xs[k], ys[k])}; see
    :func:`verify_cyclic_monotonicity`."""
    if max_cycle_len < 2:
        raise ValueError("max_cycle_len must be at least 2")
    if not tol > 0:
        raise ValueError("tol must be positive")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    k = len(xs)
    top = min(max_cycle_len, k)

    def test(idx):
        own, shifted = _cycle_costs(xs, ys, idx)
        lhs, rhs = float(own.sum()), float(shifted.sum())
        scale = max(float(own.max()), float(shifted.max()), 1.0)
        if lhs > rhs + tol * scale:
            cyc = tuple((tuple(xs[i]), tuple(ys[i])) for i in idx)
            return CycleViolation(cyc, lhs, rhs)
        return None

    checked = 0
    if k <= EXHAUSTIVE_LIMIT:
        for length in range(2, top + 1):
            for combo in itertools.combinations(range(k), length):
                # fix the smallest index first to skip rotations
                for rest in itertools.permutations(combo[1:]):
                    checked += 1
                    v = test((combo[0],) + rest)
                    if v is not None:
                        return CycleCheck(v, True, checked)
        return CycleCheck(None, True, checked)

    gen = np.random.Generator(np.random.Philox(seed))
    for _ in range(budget):
        length = int(gen.integers(2, top + 1))
        idx = gen.choice(k, size=length, replace=False)
        checked += 1
        v = test(tuple(int(i) for i in idx))
        if v is not None:
            return CycleCheck(v, False, checked)
    return CycleCheck(None, False, checked)


def verify_cyclic_monotonicity(pi: Coupling, max_cycle_len=4, tol=1e-9, budget=10_000, seed=0) -> CycleCheck:
    """Search the support of ``pi`` for a cycle that violates cyclic monotonicity.

    A cycle (x_1, y_1), ..., (x_L, y_L) violates the property when
    ``sum |x_i - y_i|^2 > sum |x_i - y_{i+1}|^2 + tol * scale`` where scale is
    the largest single pair cost in the cycle (at least 1). Supports of at
    most 12 distinct pairs are checked exhaustively for all cycle lengths up
    to ``max_cycle_len``; larger ones get ``budget`` random cycles.
    """
    xs, ys = _support_pairs(pi)
    return check_cycles(xs, ys, max_cycle_len, tol, budget, seed)


def longest_path_potentials(W, tol, init=None):
    """Longest-path labels h with h[j] >= h[i] + W[i, j] for all arcs.

    ``W`` is a dense weight matrix with -inf for missing arcs. Jacobi
    Bellman-Ford sweeps (at most n - 1 of them) followed by one audit sweep;
    improvements below ``tol`` are ignored. Returns ``(h, None)`` or
    ``(None, cycle)`` when a positive cycle exists.
    """
    n = W.shape[0]
    h = np.zeros(n) if init is None else np.array(init, dtype=float)
    pred = np.full(n, -1)
    last = None
    for sweep in range(n):
        cand = h[:, None] + W
        arg = np.argmax(cand, axis=0)
        best = cand[arg, np.arange(n)]
        improve = best > h + tol
        if not improve.any():
            return h, None
        h = np.where(improve, best, h)
        pred = np.where(improve, arg, pred)
        last = int(np.flatnonzero(improve)[0])
    # still improving after n sweeps: the predecessor graph holds a cycle
    return None, _pred_cycle(pred, last)


def _pred_cycle(pred, start):
    n = len(pred)
    for s in [start] + list(range(n)):
        seen = {}
        v = s
        while v >= 0 and v not in seen:
            seen[v] = len(seen)
            v = int(pred[v])
        if v >= 0:
            cycle = [v]
            u = int(pred[v])
            while u != v:
                cycle.append(u)
                u = int(pred[u])
            cycle.reverse()
            return cycle
    return []


def dual_potentials(mu: DiscreteMeasure, nu: DiscreteMeasure, pi: Coupling, tol=None) -> np.ndarray:
    """Offsets g_j with every support pair (x_i, y_j) satisfying
    ``j in argmax_k <x_i, y_k> - g_k``; normalised to ``min g = 0``.

    The offsets are the smallest solution of the difference constraints
    ``g_k >= g_j + <x_i, y_k - y_j>``, found by longest-path relaxation.
    Raises :class:`SlacknessError` when no solution exists, i.e. when the
    coupling is not optimal. Builds a dense support-by-n gain matrix, so
    keep it to audit-size problems.
    """
    _check_dims(mu, nu)
    ys = nu.points
    n = len(nu)
    xs = pi.x
    # W[j, k] = max over sources x paired with y_j of <x, y_k - y_j>
    gains = xs @ ys.T - np.einsum("kd,kd->k", xs, ys[pi.tgt])[:, None]
    W = np.full((n, n), -np.inf)
    np.maximum.at(W, pi.tgt, gains)
    np.fill_diagonal(W, -np.inf)
    scale = max(1.0, float(np.abs(xs).max() * np.abs(ys).max() * mu.dim))
    if tol is None:
        tol = 1e-10 * scale
    g, cycle = longest_path_potentials(W, tol)
    if g is None:
        raise SlacknessError("support is not cyclically monotone: no dual potential exists", cycle)
    g = g - g.min()
    vals = xs @ ys.T - g[None, :]
    slack = vals.max(axis=1) - vals[np.arange(len(xs)), pi.tgt]
    if np.any(slack > 1e3 * tol):
        raise SlacknessError(f"complementary slackness violated by {slack.max():.3e}")
    return g
