"""
Tail rescaling of optimal couplings and the homogeneity diagnostics of their
limits.

A study samples two regularly varying empirical measures, quantizes them,
solves the exact transport problem once, and then looks at the coupling
through the normalisation ``B(t)`` for every t on a grid.
"""

import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from ._fmt import fmt
from .convex import COUPLING_SUPPORT, MultiMapGraph, PolyhedralPotential
from .measures import (
    ANGULAR_SPECS,
    DiscreteMeasure,
    TailScaling,
    m0_distance,
    rescale_measure,
    sample_regularly_varying,
)
from .transport import Coupling, solve_exact, transport_cost

RESIDUAL_FLOOR = 1e-12
MIN_FIT_PAIRS = 20
SMOOTH = "smooth-limit regime"
NON_SMOOTH = "non-smooth-limit regime"


class InsufficientPairsError(ValueError):
    pass


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- rescaling

def rescale_coupling(pi: Coupling, t, scaling: TailScaling) -> Coupling:
    """``t * pi(B(t) .)``: pairs move to (x / b1(t), y / b2(t)), masses scale by t."""
    if not t > 0:
        raise ValueError("t must be positive")
    b1, b2 = scaling.b1(t), scaling.b2(t)
    left = rescale_measure(pi.left, t, b1)
    right = rescale_measure(pi.right, t, b2)
    return Coupling(pi.src, pi.tgt, pi.mass * t, left, right)


def truncate_to_annulus(graph: MultiMapGraph, r_in, r_out) -> MultiMapGraph:
    """Pairs with ``r_in <= |x| <= r_out``. An empty window comes back as an
    empty graph; check ``.is_empty``."""
    if not 0 < r_in < r_out:
        raise ValueError("need 0 < r_in < r_out")
    r = np.linalg.norm(graph.x, axis=1)
    return graph.subset((r >= r_in) & (r <= r_out))


# ---------------------------------------------------------------- residuals

@dataclass
class ResidualStats:
    lam: float
    matched: int
    unmatched: int
    median: float
    p90: float
    tol_match: float = float("nan")
    residuals: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @property
    def empty(self):
        return self.matched == 0


def _summarise(lam, res, unmatched, tol=float("nan")):
    res = np.asarray(res, dtype=float)
    if len(res) == 0:
        return ResidualStats(lam, 0, unmatched, float("nan"), float("nan"), tol, res)
    return ResidualStats(lam, len(res), unmatched, float(np.median(res)),
                         float(np.quantile(res, 0.9)), tol, res)


def default_tol_match(graph: MultiMapGraph, window=None):
    """Twice the median nearest-neighbour spacing of the abscissae in the window."""
    g = graph if window is None else truncate_to_annulus(graph, *window)
    xs = np.unique(g.x, axis=0)
    if len(xs) < 2:
        return 0.0
    dist, _ = cKDTree(xs).query(xs, k=2)
    return 2.0 * float(np.median(dist[:, 1]))


def map_homogeneity_residual(graph: MultiMapGraph, lambdas, gamma, tol_match=None, window=None):
    """For each pair (x, y), with x in ``window`` when one is given, and each
    lambda: the nearest pair (x', y') to ``lambda x`` counts as a match when
    ``|x' - lambda x| <= tol_match``, and contributes the residual
    ``|y' - lambda^gamma y| / (1 + lambda^gamma |y|)``.

    Returns one :class:`ResidualStats` per lambda. A lambda without matches
    gives ``matched == 0`` and NaN quantiles.
    """
    if graph.is_empty:
        raise ValueError("graph is empty")
    base = graph if window is None else truncate_to_annulus(graph, *window)
    if tol_match is None:
        tol_match = default_tol_match(graph, window)
    tree = cKDTree(graph.x)
    out = []
    for lam in lambdas:
        if not lam > 0:
            raise ValueError("lambda must be positive")
        if base.is_empty:
            out.append(_summarise(lam, [], 0, tol_match))
            continue
        scale = lam ** gamma
        dist, idx = tree.query(lam * base.x)
        hit = dist <= tol_match * (1 + 1e-12)
        y_match = graph.y[idx[hit]]
        y_here = base.y[hit]
        num = np.linalg.norm(y_match - scale * y_here, axis=1)
        den = 1.0 + scale * np.linalg.norm(y_here, axis=1)
        out.append(_summarise(lam, num / den, int((~hit).sum()), tol_match))
    return out


@dataclass
class CouplingResidual:
    window: tuple
    lam: float
    mass_window: float
    mass_scaled: float
    residual: float

    @property
    def empty(self):
        return self.mass_window == 0


def _window_mass(x, y, mass, r_in, r_out):
    rx = np.linalg.norm(x, axis=1)
    ry = np.linalg.norm(y, axis=1)
    keep = (rx >= r_in) & (rx <= r_out) & (ry >= r_in) & (ry <= r_out)
    return float(mass[keep].sum())


def coupling_homogeneity_residual(pi: Coupling, lambdas, scaling: TailScaling, windows):
    """Compare ``pi(lambda^-E A)`` with ``lambda pi(A)`` for each window A.

    A window ``(r_in, r_out)`` is the set of pairs with both norms in
    ``[r_in, r_out]``. A pair (x, y) lies in ``lambda^-E A`` exactly when
    ``(lambda^(1/alpha1) x, lambda^(1/alpha2) y)`` lies in A.
    """
    x, y, mass = pi.x, pi.y, pi.mass
    rows = []
    for w in windows:
        r_in, r_out = w
        if not 0 < r_in < r_out:
            raise ValueError("windows must satisfy 0 < r_in < r_out")
        base = _window_mass(x, y, mass, r_in, r_out)
        for lam in lambdas:
            if lam == 1:
                scaled = base
            else:
                sx = lam ** (1.0 / scaling.alpha1)
                sy = lam ** (1.0 / scaling.alpha2)
                scaled = _window_mass(sx * x, sy * y, mass, r_in, r_out)
            res = abs(scaled - lam * base) / (lam * base + RESIDUAL_FLOOR)
            rows.append(CouplingResidual((r_in, r_out), float(lam), base, scaled, res))
    return rows


def potential_homogeneity_residual(psi: PolyhedralPotential, lambdas, gamma_plus_one, probes):
    """``|psi(lambda x) - lambda^(gamma+1) psi(x)| / (1 + lambda^(gamma+1) |psi(x)|)``
    per probe, after shifting psi so that psi(0) = 0."""
    probes = np.asarray(probes, dtype=float).reshape(-1, psi.dim)
    psi0 = psi.shifted(-psi(np.zeros(psi.dim)))
    base = psi0(probes)
    out = []
    for lam in lambdas:
        s = lam ** gamma_plus_one
        res = np.abs(psi0(lam * probes) - s * base) / (1.0 + s * np.abs(base))
        out.append(_summarise(lam, res, 0))
    return out


@dataclass
class ExponentEstimate:
    gamma_hat: float
    stderr: float
    n_pairs: int


def estimate_exponent(graph: MultiMapGraph, window=None) -> ExponentEstimate:
    """Least-squares slope of log|y| on log|x| over the pairs in ``window``.

    ``graph`` may also be a mapping t -> graph, in which case the graph at
    the largest t is used.
    """
    if isinstance(graph, dict):
        graph = graph[max(graph)]
    g = graph if window is None else truncate_to_annulus(graph, *window)
    rx = np.linalg.norm(g.x, axis=1)
    ry = np.linalg.norm(g.y, axis=1)
    keep = (rx > 0) & (ry > 0)
    if keep.sum() < MIN_FIT_PAIRS:
        raise InsufficientPairsError(f"{int(keep.sum())} usable pairs, need at least {MIN_FIT_PAIRS}")
    lx, ly = np.log(rx[keep]), np.log(ry[keep])
    if np.ptp(lx) == 0:
        raise InsufficientPairsError("all abscissae share one norm; slope undefined")
    fit = stats.linregress(lx, ly)
    return ExponentEstimate(float(fit.slope), float(fit.stderr), int(keep.sum()))


# ---------------------------------------------------------------- oracles

@dataclass(frozen=True)
class MonotoneMap1D:
    """Increasing rearrangement of Pareto(alpha1) onto Pareto(alpha2)."""

    alpha1: float
    alpha2: float

    @property
    def gamma(self):
        return self.alpha1 / self.alpha2

    def survival_source(self, x):
        """``1 - F_mu(x)``; working with survivals avoids cancellation in the tail."""
        x = np.asarray(x, dtype=float)
        return np.where(x >= 1, np.maximum(x, 1.0) ** (-self.alpha1), 1.0)

    def cdf_source(self, x):
        return 1.0 - self.survival_source(x)

    def quantile_target(self, p):
        return (1.0 - np.asarray(p, dtype=float)) ** (-1.0 / self.alpha2)

    def __call__(self, x):
        # Q_nu(F_mu(x)) with 1 - F_mu(x) carried exactly
        return self.survival_source(x) ** (-1.0 / self.alpha2)

    def rescaled(self, t):
        """``x -> T(b1(t) x) / b2(t)`` with ``b_i(t) = t^(1/alpha_i)``."""
        b1, b2 = t ** (1.0 / self.alpha1), t ** (1.0 / self.alpha2)
        return lambda x: self(b1 * np.asarray(x, dtype=float)) / b2

    def limit(self, x):
        return np.asarray(x, dtype=float) ** self.gamma


def monotone_map_1d(alpha1, alpha2) -> MonotoneMap1D:
    if not (alpha1 > 0 and alpha2 > 0):
        raise ValueError("alpha1 and alpha2 must be positive")
    return MonotoneMap1D(float(alpha1), float(alpha2))


def diagonal_pareto_limit(alpha=1.0, n_grid=1000, r_min=0.1, r_max=10.0, dim=1) -> Coupling:
    """The homogeneous coupling ``alpha r^(-alpha-1) dr`` on the diagonal
    ``{(r e1, r e1)}``, discretised on a geometric radial grid.

    Each atom sits at the geometric midpoint of its cell and carries the
    exact cell mass ``a^-alpha - b^-alpha``.
    """
    edges = np.geomspace(r_min, r_max, n_grid + 1)
    mid = np.sqrt(edges[:-1] * edges[1:])
    mass = edges[:-1] ** (-alpha) - edges[1:] ** (-alpha)
    pts = np.zeros((n_grid, dim))
    pts[:, 0] = mid
    m = DiscreteMeasure(pts, mass, dim)
    idx = np.arange(n_grid)
    return Coupling(idx, idx, mass, m, m)


# ---------------------------------------------------------------- quantization

def quantize_radial(mu: DiscreteMeasure, k, seed) -> DiscreteMeasure:
    """Reduce ``mu`` to ``k`` atoms, keeping the tail intact.

    Atoms are ranked by radius. The ``k // 2`` largest survive untouched;
    the rest are cut into ``k - k // 2`` runs of (nearly) equal count and each
    run is represented by one atom picked uniformly within it, carrying the
    run's mass. Two measures of the same size quantized with the same seed
    keep the same ranks.
    """
    n = len(mu)
    if k < 2:
        raise ValueError("k must be at least 2")
    if k >= n:
        return mu
    order = np.argsort(mu.radii, kind="stable")
    head = k // 2
    body, tail = order[: n - head], order[n - head:]
    runs = np.array_split(body, k - head)
    gen = np.random.Generator(np.random.Philox(seed))
    picks = np.array([run[gen.integers(len(run))] for run in runs])
    run_mass = np.array([mu.masses[run].sum() for run in runs])
    idx = np.r_[picks, tail]
    masses = np.r_[run_mass, mu.masses[tail]]
    pts = mu.points[idx]
    lex = np.lexsort(pts.T[::-1])
    return DiscreteMeasure(pts[lex], masses[lex], mu.dim)


# ---------------------------------------------------------------- study

CONFIG_FIELDS = {
    "schema": 1,
    "alpha1": None,
    "alpha2": None,
    "dim": 1,
    "angular": "uniform-on-sphere",
    "n": None,
    "k": None,
    "t_grid": None,
    "lambdas": [1.5, 2.0],
    "windows": [[1.0, 4.0]],
    "seed": 0,
    "b_mode": "analytic",
    "pairing": "common",
}
REQUIRED = ("alpha1", "alpha2", "n", "k", "t_grid")


@dataclass(frozen=True)
class TailStudyConfig:
    alpha1: float
    alpha2: float
    n: int
    k: int
    t_grid: tuple
    dim: int = 1
    angular: str = "uniform-on-sphere"
    lambdas: tuple = (1.5, 2.0)
    windows: tuple = ((1.0, 4.0),)
    seed: int = 0
    b_mode: str = "analytic"
    pairing: str = "common"
    schema: int = 1

    def __post_init__(self):
        if self.schema != 1:
            raise ConfigError(f"unsupported schema {self.schema!r}; this version reads schema 1")
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ConfigError("alpha1 and alpha2 must be positive")
        if not (isinstance(self.n, int) and isinstance(self.k, int)):
            raise ConfigError("n and k must be integers")
        if not self.n >= self.k >= 2:
            raise ConfigError(f"need n >= k >= 2, got n={self.n}, k={self.k}")
        if self.dim < 1:
            raise ConfigError("dim must be positive")
        if self.angular not in ANGULAR_SPECS:
            raise ConfigError(f"angular must be one of {ANGULAR_SPECS}")
        if self.b_mode not in ("analytic", "empirical"):
            raise ConfigError("b_mode must be 'analytic' or 'empirical'")
        if self.pairing not in ("common", "independent"):
            raise ConfigError("pairing must be 'common' or 'independent'")
        t = np.asarray(self.t_grid, dtype=float)
        if len(t) == 0 or np.any(t <= 1) or np.any(np.diff(t) <= 0):
            raise ConfigError("t_grid must be non-empty, strictly increasing, with every t > 1")
        if t[-1] > self.n / 10:
            raise ConfigError(f"max t = {t[-1]:g} exceeds n/10 = {self.n / 10:g}")
        if len(self.lambdas) == 0 or any(not lam > 0 for lam in self.lambdas):
            raise ConfigError("lambdas must be positive")
        for w in self.windows:
            if len(w) != 2 or not 0 < w[0] < w[1]:
                raise ConfigError(f"window {list(w)} must be [r_in, r_out] with 0 < r_in < r_out")

    @classmethod
    def from_dict(cls, data, strict=False):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - set(CONFIG_FIELDS))
        if unknown and strict:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        missing = [f for f in REQUIRED if f not in data]
        if missing:
            raise ConfigError(f"missing config fields: {', '.join(missing)}")
        vals = {f: data.get(f, default) for f, default in CONFIG_FIELDS.items()}
        try:
            vals["t_grid"] = tuple(float(t) for t in vals["t_grid"])
            vals["lambdas"] = tuple(float(v) for v in vals["lambdas"])
            vals["windows"] = tuple(tuple(float(r) for r in w) for w in vals["windows"])
            for f in ("alpha1", "alpha2"):
                vals[f] = float(vals[f])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config value: {exc}") from None
        return cls(**vals)

    @classmethod
    def from_json(cls, text, strict=False):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data, strict)

    def to_dict(self):
        d = asdict(self)
        d["t_grid"] = list(self.t_grid)
        d["lambdas"] = list(self.lambdas)
        d["windows"] = [list(w) for w in self.windows]
        return d

    def digest(self):
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def seeds(self):
        """Seeds for (mu, nu, quantization)."""
        nu_seed = self.seed if self.pairing == "common" else self.seed + 1
        return self.seed, nu_seed, self.seed + 2

    @property
    def regime(self):
        if self.angular == "fixed-direction" and self.dim >= 2:
            return NON_SMOOTH
        return SMOOTH


@dataclass
class TCell:
    t: float
    graph: MultiMapGraph
    joint: DiscreteMeasure
    map_rows: list
    coupling_rows: list
    oracle_rows: list
    empty_windows: list


@dataclass
class TailStudyResult:
    config: TailStudyConfig
    b_mode: str
    regime: str
    cost: float
    pairs: int
    cells: list
    m0_rows: list
    exponents: list
    empty_cells: list

    @property
    def t_grid(self):
        return [c.t for c in self.cells]

    @property
    def final(self) -> TCell:
        return self.cells[-1]

    def graphs(self):
        return {c.t: c.graph for c in self.cells}

    def map_residuals(self, t=None):
        cell = self.final if t is None else next(c for c in self.cells if c.t == t)
        return cell.map_rows

    # ---- CSV tables, keyed by file name
    def tables(self):
        d = self.config.dim
        out = {}

        buf = io.StringIO()
        buf.write("t," + ",".join([f"x{i}" for i in range(d)] + [f"y{i}" for i in range(d)]) + ",mass\n")
        for c in self.cells:
            for x, y, m in zip(c.graph.x, c.graph.y, c.graph.masses):
                buf.write(",".join([fmt(c.t)] + [fmt(v) for v in x] + [fmt(v) for v in y] + [fmt(m)]) + "\n")
        out["rescaled_pairs.csv"] = buf.getvalue()

        buf = io.StringIO()
        buf.write("t,m0_to_final,m0_to_previous\n")
        for t, to_final, to_prev in self.m0_rows:
            buf.write(f"{fmt(t)},{fmt(to_final)},{fmt(to_prev)}\n")
        out["m0_discrepancy.csv"] = buf.getvalue()

        buf = io.StringIO()
        buf.write("t,r_in,r_out,lambda,matched,unmatched,tol_match,median,p90\n")
        for c in self.cells:
            for w, s in c.map_rows:
                buf.write(f"{fmt(c.t)},{fmt(w[0])},{fmt(w[1])},{fmt(s.lam)},{s.matched},{s.unmatched},"
                          f"{fmt(s.tol_match)},{fmt(s.median)},{fmt(s.p90)}\n")
        out["map_residuals.csv"] = buf.getvalue()

        buf = io.StringIO()
        buf.write("t,r_in,r_out,lambda,mass_window,mass_scaled,residual\n")
        for c in self.cells:
            for r in c.coupling_rows:
                buf.write(f"{fmt(c.t)},{fmt(r.window[0])},{fmt(r.window[1])},{fmt(r.lam)},"
                          f"{fmt(r.mass_window)},{fmt(r.mass_scaled)},{fmt(r.residual)}\n")
        out["coupling_residuals.csv"] = buf.getvalue()

        buf = io.StringIO()
        buf.write("r_in,r_out,gamma_target,gamma_hat,stderr,n_pairs,status\n")
        for w, est, status in self.exponents:
            g = est.gamma_hat if est else float("nan")
            se = est.stderr if est else float("nan")
            npairs = est.n_pairs if est else 0
            buf.write(f"{fmt(w[0])},{fmt(w[1])},{fmt(self.config.alpha1 / self.config.alpha2)},"
                      f"{fmt(g)},{fmt(se)},{npairs},{status}\n")
        out["exponent.csv"] = buf.getvalue()

        buf = io.StringIO()
        buf.write("t,r_in,r_out,pairs,median_rel_error,p90_rel_error\n")
        for c in self.cells:
            for w, n, med, p90 in c.oracle_rows:
                buf.write(f"{fmt(c.t)},{fmt(w[0])},{fmt(w[1])},{n},{fmt(med)},{fmt(p90)}\n")
        out["oracle_error.csv"] = buf.getvalue()

        # plot-ready data
        buf = io.StringIO()
        buf.write("log_t,r_in,r_out,lambda,median_residual\n")
        for c in self.cells:
            for w, s in c.map_rows:
                buf.write(f"{fmt(math.log(c.t))},{fmt(w[0])},{fmt(w[1])},{fmt(s.lam)},{fmt(s.median)}\n")
        out["plot_residual_vs_log_t.csv"] = buf.getvalue()

        buf = io.StringIO()
        buf.write("log_norm_x,log_norm_y\n")
        g = self.final.graph
        rx, ry = np.linalg.norm(g.x, axis=1), np.linalg.norm(g.y, axis=1)
        for a, b in zip(rx, ry):
            if a > 0 and b > 0:
                buf.write(f"{fmt(math.log(a))},{fmt(math.log(b))}\n")
        out["plot_loglog_scatter.csv"] = buf.getvalue()
        return out


def oracle_error(graph: MultiMapGraph, gamma, window):
    """Median and p90 of ``| |y| - |x|^gamma | / |x|^gamma`` over the window."""
    g = truncate_to_annulus(graph, *window)
    if g.is_empty:
        return 0, float("nan"), float("nan")
    rx = np.linalg.norm(g.x, axis=1)
    ry = np.linalg.norm(g.y, axis=1)
    target = rx ** gamma
    err = np.abs(ry - target) / target
    return len(err), float(np.median(err)), float(np.quantile(err, 0.9))


def _study_cell(pi, t, scaling, cfg, use_oracle):
    r = rescale_coupling(pi, t, scaling)
    graph = MultiMapGraph.from_coupling(r)
    map_rows, oracle_rows, empty = [], [], []
    for w in cfg.windows:
        if truncate_to_annulus(graph, *w).is_empty:
            empty.append(w)
        for s in map_homogeneity_residual(graph, cfg.lambdas, scaling.gamma, window=w):
            map_rows.append((w, s))
        if use_oracle:
            oracle_rows.append((w,) + oracle_error(graph, scaling.gamma, w))
    coupling_rows = coupling_homogeneity_residual(r, cfg.lambdas, scaling, cfg.windows)
    return TCell(float(t), graph, r.as_joint_measure(), map_rows, coupling_rows, oracle_rows, empty)


def build_scaling(cfg: TailStudyConfig, mu, nu) -> TailScaling:
    if cfg.b_mode == "analytic":
        if cfg.angular == "iid-componentwise-pareto" and cfg.dim > 1:
            # the norm of d iid Pareto coordinates has tail ~ d * r^-alpha
            b1 = lambda t, a=cfg.alpha1, d=cfg.dim: (d * t) ** (1.0 / a)
            b2 = lambda t, a=cfg.alpha2, d=cfg.dim: (d * t) ** (1.0 / a)
            return TailScaling(cfg.alpha1, cfg.alpha2, b1, b2, cfg.t_grid, "analytic")
        return TailScaling.analytic(cfg.alpha1, cfg.alpha2, cfg.t_grid)
    return TailScaling.empirical(mu, nu, cfg.alpha1, cfg.alpha2, cfg.t_grid)


def run_tail_study(config: TailStudyConfig, threads=1) -> TailStudyResult:
    """Sample, quantize, solve once, then evaluate every t of the grid.

    Per-t cells run on a thread pool of size ``threads``; results are
    assembled in t order, so output does not depend on the pool size.
    """
    cfg = config
    s_mu, s_nu, s_q = cfg.seeds()
    mu = sample_regularly_varying(cfg.alpha1, cfg.angular, cfg.n, s_mu, cfg.dim)
    nu = sample_regularly_varying(cfg.alpha2, cfg.angular, cfg.n, s_nu, cfg.dim)
    scaling = build_scaling(cfg, mu, nu)
    mu_q = quantize_radial(mu, cfg.k, s_q)
    nu_q = quantize_radial(nu, cfg.k, s_q)
    pi = solve_exact(mu_q, nu_q)

    use_oracle = cfg.dim == 1 or cfg.angular != "iid-componentwise-pareto"
    ts = list(cfg.t_grid)
    if threads > 1 and len(ts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(lambda t: _study_cell(pi, t, scaling, cfg, use_oracle), ts))
    else:
        cells = [_study_cell(pi, t, scaling, cfg, use_oracle) for t in ts]

    final = cells[-1].joint
    m0_rows = []
    for i, c in enumerate(cells):
        prev = m0_distance(c.joint, cells[i - 1].joint) if i else float("nan")
        m0_rows.append((c.t, m0_distance(c.joint, final), prev))

    exponents = []
    for w in cfg.windows:
        try:
            exponents.append((w, estimate_exponent(cells[-1].graph, w), "ok"))
        except InsufficientPairsError:
            exponents.append((w, None, "insufficient-pairs"))

    empty = [(c.t, w) for c in cells for w in c.empty_windows]

    return TailStudyResult(cfg, scaling.mode, cfg.regime, transport_cost(pi), len(pi),
                           cells, m0_rows, exponents, empty)
