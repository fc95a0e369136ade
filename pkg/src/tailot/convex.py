"""
Polyhedral convex potentials, sampled graphs of set-valued maps, and the
distances used to compare such graphs.
"""

import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from ._fmt import fmt, json_array
from .transport import check_cycles, longest_path_potentials

SUBDIFFERENTIAL = "subdifferential-sample"
COUPLING_SUPPORT = "coupling-support"
ROLES = (SUBDIFFERENTIAL, COUPLING_SUPPORT)

PROBES_PER_AXIS = 64


class NotCyclicallyMonotoneError(ValueError):
    """Raised by :func:`rockafellar_potential` with the offending cycle (pair indices)."""

    def __init__(self, cycle, weight):
        self.cycle = cycle
        self.weight = weight
        super().__init__(f"graph is not cyclically monotone: cycle {cycle} has weight {weight:.6g} > 0")


class PolyhedralPotential:
    """``psi(x) = max_j <x, y_j> - g_j``: finite, closed and convex.

    Parameters
    ----------
    slopes : array-like, shape (k, d)
    offsets : array-like, shape (k,)
    """

    __slots__ = ("slopes", "offsets")

    def __init__(self, slopes, offsets):
        slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
        if len(offsets) == 0:
            raise ValueError("a potential needs at least one affine piece")
        if slopes.shape[0] != len(offsets):
            raise ValueError(f"{slopes.shape[0]} slopes but {len(offsets)} offsets")
        slopes.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "offsets", offsets)

    def __setattr__(self, name, value):
        raise AttributeError("PolyhedralPotential is immutable")

    def __repr__(self):
        return f"PolyhedralPotential(pieces={len(self.offsets)}, dim={self.dim})"

    @property
    def dim(self):
        return self.slopes.shape[1]

    def pieces(self, x):
        """Values of every affine piece, shape (m, k) for m points."""
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return x @ self.slopes.T - self.offsets

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        vals = self.pieces(x).max(axis=1)
        if x.ndim <= 1 and x.size == self.dim:
            return float(vals[0])
        return vals

    def active(self, x, tol=0.0):
        """Indices of the pieces within ``tol`` of the maximum at one point."""
        vals = self.pieces(x)[0]
        return np.flatnonzero(vals >= vals.max() - tol)

    def dominated(self, probes=None):
        """Mask of pieces never active on ``probes``. Without probes the grid
        spans the box of +-slopes, which is a guess: pass the abscissae of
        interest when they are known."""
        if probes is None:
            probes = probe_grid(np.vstack([self.slopes, -self.slopes]))
        winners = np.unique(self.pieces(probes).argmax(axis=1))
        mask = np.ones(len(self.offsets), bool)
        mask[winners] = False
        return mask

    def shifted(self, c):
        """``psi + c``."""
        return PolyhedralPotential(self.slopes, self.offsets - c)

    def to_json(self):
        return '{"slopes": %s, "offsets": %s}' % (json_array(self.slopes), json_array(self.offsets))

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return potential_from_duals(data["slopes"], data["offsets"])


@dataclass(frozen=True, eq=False)
class MultiMapGraph:
    """Finite set of pairs (x, y) read as the graph of a set-valued map."""

    x: np.ndarray
    y: np.ndarray
    role: str = SUBDIFFERENTIAL
    masses: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        if x.shape != y.shape:
            raise ValueError(f"abscissae {x.shape} and ordinates {y.shape} differ in shape")
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if len(x) > 1 and len(np.unique(np.hstack([x, y]), axis=0)) < len(x):
            raise ValueError("graph pairs must be pairwise distinct")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.masses is not None:
            object.__setattr__(self, "masses", np.asarray(self.masses, dtype=float))

    @classmethod
    def from_pairs(cls, pairs, role=SUBDIFFERENTIAL):
        """Build from (x, y) pairs, dropping repeated pairs."""
        pairs = np.asarray(pairs, dtype=float)
        if pairs.ndim == 2:
            pairs = pairs[:, :, None]
        d = pairs.shape[2]
        flat = np.unique(pairs.reshape(len(pairs), 2 * d), axis=0)
        return cls(flat[:, :d], flat[:, d:], role)

    @classmethod
    def from_coupling(cls, pi):
        return cls(pi.x, pi.y, COUPLING_SUPPORT, pi.mass)

    @classmethod
    def of_map(cls, f, xs, role=SUBDIFFERENTIAL):
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        return cls(xs, np.asarray([np.atleast_1d(f(x)) for x in xs], dtype=float), role)

    def __len__(self):
        return len(self.x)

    @property
    def dim(self):
        return self.x.shape[1]

    @property
    def is_empty(self):
        return len(self.x) == 0

    def subset(self, mask):
        return MultiMapGraph(self.x[mask], self.y[mask], self.role,
                             None if self.masses is None else self.masses[mask])

    def is_monotone(self, tol=1e-9):
        """Pairwise monotonicity ``<x_i - x_j, y_i - y_j> >= 0`` (cycles of length 2)."""
        dx = self.x[:, None, :] - self.x[None, :, :]
        dy = self.y[:, None, :] - self.y[None, :, :]
        inner = np.einsum("ijk,ijk->ij", dx, dy)
        scale = np.maximum(1.0, np.linalg.norm(dx, axis=2) * np.linalg.norm(dy, axis=2))
        return bool(np.all(inner >= -tol * scale))

    def check_cyclic(self, max_cycle_len=4, tol=1e-9, budget=10_000, seed=0):
        return check_cycles(self.x, self.y, max_cycle_len, tol, budget, seed)

    def to_csv(self):
        d = self.dim
        out = io.StringIO()
        cols = [f"x{k}" for k in range(d)] + [f"y{k}" for k in range(d)]
        if self.masses is not None:
            cols.append("mass")
        out.write(",".join(cols) + "\n")
        for k in range(len(self)):
            row = [fmt(v) for v in self.x[k]] + [fmt(v) for v in self.y[k]]
            if self.masses is not None:
                row.append(fmt(self.masses[k]))
            out.write(",".join(row) + "\n")
        return out.getvalue()


def probe_grid(points, per_axis=PROBES_PER_AXIS, inflate=0.1):
    """Regular grid over the bounding box of ``points`` inflated by 10%."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lo, hi = points.min(axis=0), points.max(axis=0)
    pad = inflate * np.maximum(hi - lo, 1e-12)
    axes = [np.linspace(l - p, h + p, per_axis) for l, h, p in zip(lo, hi, pad)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def potential_from_duals(slopes, offsets) -> PolyhedralPotential:
    """Package slopes y_j and offsets g_j as ``max_j <x, y_j> - g_j``.

    Repeated slopes collapse to the piece with the smaller offset, which
    leaves the pointwise maximum unchanged.
    """
    slopes = np.asarray(slopes, dtype=float)
    offsets = np.asarray(offsets, dtype=float).ravel()
    if len(offsets) == 0:
        raise ValueError("empty input: at least one affine piece is required")
    if slopes.ndim == 1:
        slopes = slopes.reshape(len(offsets), -1)
    if len(slopes) != len(offsets):
        raise ValueError(f"{len(slopes)} slopes but {len(offsets)} offsets")
    uniq, inverse = np.unique(slopes, axis=0, return_inverse=True)
    if len(uniq) == len(slopes):
        return PolyhedralPotential(slopes, offsets)
    best = np.full(len(uniq), np.inf)
    np.minimum.at(best, inverse.ravel(), offsets)
    return PolyhedralPotential(uniq, best)


def rockafellar_potential(graph: MultiMapGraph, base_index=0, tol=None) -> PolyhedralPotential:
    """Convex potential whose subdifferential contains every pair of ``graph``.

    ``psi(x) = sup over chains base = i_0, ..., i_k of
    sum_l <y_{i_l}, x_{i_(l+1)} - x_{i_l}> + <y_{i_k}, x - x_{i_k}>``.
    The chain sums ``h_i`` are longest-path labels on the complete digraph
    with arc weights ``<y_i, x_j - x_i>``; psi has one affine piece per pair,
    slope y_i and offset ``<y_i, x_i> - h_i``, and ``psi(x_base) = 0``.

    Raises :class:`NotCyclicallyMonotoneError` if the relaxation finds a
    positive cycle.
    """
    if graph.role != SUBDIFFERENTIAL:
        raise ValueError("rockafellar_potential needs a graph tagged as a subdifferential sample")
    n = len(graph)
    if n == 0:
        raise ValueError("empty graph")
    if not 0 <= base_index < n:
        raise IndexError("base_index out of range")
    x, y = graph.x, graph.y
    xy = np.einsum("kd,kd->k", x, y)
    W = y @ x.T - xy[:, None]          # W[i, j] = <y_i, x_j - x_i>
    np.fill_diagonal(W, -np.inf)
    if tol is None:
        tol = 1e-12 * max(1.0, float(np.abs(x).max() * np.abs(y).max() * graph.dim))
    init = np.full(n, -np.inf)
    init[base_index] = 0.0
    h, cycle = longest_path_potentials(W, tol, init)
    if h is None:
        weight = sum(W[cycle[k], cycle[(k + 1) % len(cycle)]] for k in range(len(cycle)))
        raise NotCyclicallyMonotoneError(cycle, float(weight))
    return PolyhedralPotential(y.copy(), xy - h)


def subdiff_eval(psi: PolyhedralPotential, x, tol=0.0) -> np.ndarray:
    """Active slopes at ``x`` (pieces within ``tol`` of the max). The
    subdifferential is the convex hull of the returned rows."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return psi.slopes[psi.active(x, tol)]


def scale_potential(psi: PolyhedralPotential, b1, b2) -> PolyhedralPotential:
    """Max-affine form of ``(b1 b2)^-1 psi(b1 x)``: slopes y/b2, offsets g/(b1 b2)."""
    if not (b1 > 0 and b2 > 0):
        raise ValueError("b1 and b2 must be positive")
    return PolyhedralPotential(psi.slopes / b2, psi.offsets / (b1 * b2))


def scale_graph(graph: MultiMapGraph, b1, b2) -> MultiMapGraph:
    """Pairs (x, y) -> (x / b1, y / b2)."""
    if not (b1 > 0 and b2 > 0):
        raise ValueError("b1 and b2 must be positive")
    return MultiMapGraph(graph.x / b1, graph.y / b2, graph.role, graph.masses)


def _as_points(P):
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    return P


def directed_hausdorff(K, L):
    """``sup_{k in K} min_{l in L} |k - l|``."""
    K, L = _as_points(K), _as_points(L)
    dist, _ = cKDTree(L).query(K)
    return float(dist.max())


def hausdorff_distance(K, L) -> float:
    """Hausdorff distance between two finite, non-empty point sets."""
    K, L = _as_points(K), _as_points(L)
    if len(K) == 0 or len(L) == 0:
        raise ValueError("Hausdorff distance needs two non-empty sets")
    if K.shape[1] != L.shape[1]:
        raise ValueError("point sets live in different dimensions")
    return max(directed_hausdorff(K, L), directed_hausdorff(L, K))


def _ball_slack(graph, eps):
    scale = max(1.0, float(np.abs(graph.x).max())) if len(graph) else 1.0
    return eps + 1e-12 * scale


def image_of_set(graph: MultiMapGraph, A, eps=0.0) -> np.ndarray:
    """Ordinates whose abscissa lies within ``eps`` of some point of A,
    i.e. the sampled image T(A + eps B)."""
    if graph.is_empty:
        raise ValueError("graph is empty")
    A = _as_points(A)
    if len(A) == 0:
        return np.empty((0, graph.dim))
    dist, _ = cKDTree(A).query(graph.x)
    return graph.y[dist <= _ball_slack(graph, eps)]


@dataclass(frozen=True)
class InclusionWitness:
    """A point ``a`` of K whose image ``ordinate`` under ``side`` is farther
    than eps from the other map's image of ``a + eps B``."""

    side: str
    point: np.ndarray
    ordinate: np.ndarray
    distance: float


def inclusion_check(limit_graph: MultiMapGraph, approx_graph: MultiMapGraph, K, eps):
    """Check, for every a in K,
    ``T(a) in T_n(a + eps B) + eps B`` and ``T_n(a) in T(a + eps B) + eps B``.

    Returns None when both inclusions hold, otherwise the first
    :class:`InclusionWitness`.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    K = _as_points(K)
    sides = (("limit", limit_graph, approx_graph), ("approx", approx_graph, limit_graph))
    for a in K:
        for side, g, other in sides:
            here = image_of_set(g, a[None, :], 0.0)
            if len(here) == 0:
                continue
            there = image_of_set(other, a[None, :], eps)
            if len(there) == 0:
                return InclusionWitness(side, a, here[0], np.inf)
            dist, _ = cKDTree(there).query(here)
            bad = np.flatnonzero(dist > eps * (1 + 1e-12))
            if len(bad):
                k = bad[0]
                return InclusionWitness(side, a, here[k], float(dist[k]))
    return None


@dataclass
class DiagnosticRow:
    n: int
    eps: float
    hausdorff: float
    passed: bool
    note: str = ""


@dataclass
class DiagnosticTable:
    """Hausdorff distances ``d_H(T_n(K + eps B), T(K))`` per (n, eps)."""

    rows: list
    pass_eps: dict
    spacing: float
    monotone_in_n: dict

    def to_csv(self):
        out = io.StringIO()
        out.write("n,eps,hausdorff,pass_eps\n")
        for r in self.rows:
            pe = self.pass_eps.get(r.n)
            out.write(f"{r.n},{fmt(r.eps)},{fmt(r.hausdorff)},{'' if pe is None else fmt(pe)}\n")
        return out.getvalue()

    def value(self, n, eps):
        for r in self.rows:
            if r.n == n and r.eps == eps:
                return r.hausdorff
        raise KeyError((n, eps))


def coverage_spacing(graph: MultiMapGraph, K):
    """Largest distance from a point of K to the nearest abscissa of ``graph``."""
    return directed_hausdorff(K, graph.x)


def graphical_convergence_diagnostic(graphs, limit: MultiMapGraph, K, eps_grid, labels=None) -> DiagnosticTable:
    """Tabulate ``d_H(T_n(K + eps B), T(K))`` for each graph T_n and each eps,
    with the smallest eps in the grid at which :func:`inclusion_check` passes.

    ``labels`` names the graphs (default 1, 2, ...). Cells whose image is
    empty get ``inf`` and a note. Monotonicity in n is reported per eps,
    not assumed.
    """
    K = _as_points(K)
    eps_grid = [float(e) for e in eps_grid]
    labels = list(labels) if labels is not None else list(range(1, len(graphs) + 1))
    target = image_of_set(limit, K, 0.0)
    spacing = max([coverage_spacing(limit, K)] + [coverage_spacing(g, K) for g in graphs])
    rows, pass_eps = [], {}
    for n, g in zip(labels, graphs):
        passing = None
        for eps in eps_grid:
            img = image_of_set(g, K, eps)
            if len(img) == 0 or len(target) == 0:
                rows.append(DiagnosticRow(n, eps, np.inf, False, "empty image"))
                continue
            ok = inclusion_check(limit, g, K, eps) is None
            if ok and (passing is None or eps < passing):
                passing = eps
            rows.append(DiagnosticRow(n, eps, hausdorff_distance(img, target), ok))
        pass_eps[n] = passing
    monotone = {}
    for eps in eps_grid:
        seq = [r.hausdorff for r in rows if r.eps == eps]
        monotone[eps] = bool(np.all(np.diff(seq) <= 0))
    return DiagnosticTable(rows, pass_eps, spacing, monotone)
