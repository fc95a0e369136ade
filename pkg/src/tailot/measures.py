"""
Finitely supported measures on R^d: construction, heavy-tailed sampling,
restriction, rescaling and a finite test-functional distance that only
looks at mass away from the origin.
"""

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._fmt import json_array

ANGULAR_SPECS = ("uniform-on-sphere", "fixed-direction", "iid-componentwise-pareto")

# radii of the default ramp family and the ramp width
DEFAULT_RADII = (0.5, 1.0, 2.0, 4.0)
DEFAULT_WIDTH = 0.1


class DiscreteMeasure:
    """Nonnegative measure with finitely many atoms.

    Use :func:`make_discrete` to build one from raw input; the constructor
    only checks shapes and signs and assumes the atoms are already in
    canonical (merged, lexicographically sorted) form.

    Parameters
    ----------
    points : array-like, shape (n, d)
    masses : array-like, shape (n,)
    dim : int, optional
        Needed when ``n == 0`` (the zero measure).
    """

    __slots__ = ("points", "masses", "dim")

    def __init__(self, points, masses, dim=None):
        points = np.asarray(points, dtype=float)
        masses = np.asarray(masses, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1 if dim is None else dim)
        if dim is None:
            dim = points.shape[1]
        if points.shape != (len(masses), dim):
            raise ValueError(
                f"points of shape {points.shape} do not match {len(masses)} masses in dimension {dim}")
        if np.any(masses < 0):
            raise ValueError("masses must be nonnegative")
        points.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "dim", int(dim))

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteMeasure is immutable")

    @classmethod
    def zero(cls, dim):
        return cls(np.empty((0, dim)), np.empty(0), dim)

    def __len__(self):
        return len(self.masses)

    def __repr__(self):
        return f"DiscreteMeasure(atoms={len(self)}, dim={self.dim}, total_mass={self.total_mass:.6g})"

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (self.dim == other.dim and np.array_equal(self.points, other.points)
                and np.array_equal(self.masses, other.masses))

    __hash__ = None

    @property
    def total_mass(self):
        return float(self.masses.sum())

    @property
    def is_empty(self):
        return len(self.masses) == 0

    @property
    def radii(self):
        return np.linalg.norm(self.points, axis=1)

    def integrate(self, f):
        """Integral of a vectorised function ``f(points) -> values``."""
        if self.is_empty:
            return 0.0
        return float(np.dot(f(self.points), self.masses))

    def to_json(self):
        return ('{"dim": %d, "points": %s, "masses": %s}'
                % (self.dim, json_array(self.points.reshape(-1, self.dim)), json_array(self.masses)))

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        try:
            dim = int(data["dim"])
            points = data["points"]
            masses = [float(m) for m in data["masses"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed measure file: {exc}") from exc
        if any(len(p) != dim for p in points):
            raise ValueError("point dimension disagrees with 'dim'")
        return make_discrete(points, masses, dim=dim)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def make_discrete(points, masses, dim=None) -> DiscreteMeasure:
    """Canonical measure from atoms: duplicates merged, zero masses dropped,
    points sorted lexicographically.
    """
    masses = np.asarray(masses, dtype=float).ravel()
    if len(masses) == 0:
        raise ValueError("empty input: at least one atom is required")
    try:
        pts = np.asarray(points, dtype=float)
    except ValueError as exc:
        raise ValueError("points do not share a dimension") from exc
    if pts.ndim == 1:
        # a flat list of scalars is a list of 1-d points
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[0] != len(masses):
        raise ValueError(f"{pts.shape[0]} points but {len(masses)} masses")
    if dim is not None and pts.shape[1] != dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(masses)):
        raise ValueError("non-finite coordinates or masses")
    if np.any(masses < 0):
        raise ValueError("negative mass")
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=masses, minlength=len(uniq))
    keep = merged > 0
    return DiscreteMeasure(uniq[keep], merged[keep], pts.shape[1])


def sample_regularly_varying(alpha, angular, n, seed, dim=1, direction=None) -> DiscreteMeasure:
    """Empirical measure of ``n`` draws from a regularly varying law.

    The radius is standard Pareto(alpha) for the two radial specs; the
    componentwise spec draws every coordinate as an independent Pareto(alpha).
    Randomness comes from a Philox generator keyed by ``seed`` and is drawn
    in a fixed order (radius uniforms first, then directions), so two calls
    with the same seed and angular spec but different ``alpha`` share their
    uniforms: the radii are then comonotone.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    if angular not in ANGULAR_SPECS:
        raise ValueError(f"unknown angular spec {angular!r}; expected one of {ANGULAR_SPECS}")
    gen = np.random.Generator(np.random.Philox(seed))
    if angular == "iid-componentwise-pareto":
        u = gen.random((n, dim))
        pts = (1.0 - u) ** (-1.0 / alpha)
    else:
        u = gen.random(n)
        radius = (1.0 - u) ** (-1.0 / alpha)
        if angular == "fixed-direction":
            e = np.zeros(dim) if direction is None else np.asarray(direction, dtype=float)
            if direction is None:
                e[0] = 1.0
            norm = np.linalg.norm(e)
            if e.shape != (dim,) or norm == 0:
                raise ValueError("direction must be a nonzero vector of length dim")
            dirs = np.broadcast_to(e / norm, (n, dim))
        else:
            g = gen.standard_normal((n, dim))
            dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
        pts = radius[:, None] * dirs
    return make_discrete(pts, np.full(n, 1.0 / n))


def restrict_outside_ball(mu: DiscreteMeasure, r) -> DiscreteMeasure:
    """Drop atoms with norm <= r. An empty result is returned as the zero
    measure (check ``.is_empty``) rather than raised."""
    if not r > 0:
        raise ValueError("r must be positive")
    keep = mu.radii > r
    return DiscreteMeasure(mu.points[keep], mu.masses[keep], mu.dim)


def rescale_measure(mu: DiscreteMeasure, t, b) -> DiscreteMeasure:
    """The measure ``A -> t * mu(b A)``: atoms move to x / b, masses scale by t."""
    if not (t > 0 and b > 0):
        raise ValueError("t and b must be positive")
    # positive scaling keeps the lexicographic order, so no re-canonicalisation
    return DiscreteMeasure(mu.points / b, mu.masses * t, mu.dim)


def empirical_quantile_b(mu: DiscreteMeasure, t, mass_tol=1e-9) -> float:
    """Empirical ``Q(1 - 1/t)`` of the radius under ``mu``.

    Uses the left-continuous inverse ``Q(p) = inf{r : F(r) >= p}``.
    """
    if not t > 1:
        raise ValueError("t must exceed 1")
    if mu.is_empty or abs(mu.total_mass - 1.0) > mass_tol:
        raise ValueError(f"expected a probability measure, got total mass {mu.total_mass!r}")
    radii = mu.radii
    order = np.argsort(radii, kind="stable")
    cdf = np.cumsum(mu.masses[order]) / mu.total_mass
    p = 1.0 - 1.0 / t
    idx = int(np.searchsorted(cdf, p - 1e-12, side="left"))
    return float(radii[order[min(idx, len(order) - 1)]])


@dataclass(frozen=True)
class TestFunctional:
    """Radial ramp ``clip((|x| - r) / width, 0, 1)``, optionally weighted by
    ``max(<x/|x|, u>, 0)`` for a unit direction ``u``.

    Vanishes on the closed ball of radius ``inner_radius`` and is bounded by 1.
    """

    __test__ = False  # not a pytest class

    inner_radius: float
    width: float = DEFAULT_WIDTH
    direction: Optional[tuple] = None

    def __post_init__(self):
        if not self.inner_radius > 0:
            raise ValueError("inner_radius must be positive")
        if not self.width > 0:
            raise ValueError("width must be positive")

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(points, axis=1)
        val = np.clip((r - self.inner_radius) / self.width, 0.0, 1.0)
        if self.direction is not None:
            u = np.asarray(self.direction, dtype=float)
            u = u / np.linalg.norm(u)
            with np.errstate(invalid="ignore", divide="ignore"):
                cos = np.where(r > 0, points @ u / np.where(r > 0, r, 1.0), 0.0)
            val = val * np.maximum(cos, 0.0)
        return val


def default_family(radii=DEFAULT_RADII, width=DEFAULT_WIDTH):
    return [TestFunctional(r, width) for r in radii]


def m0_distance(mu: DiscreteMeasure, nu: DiscreteMeasure, family: Sequence[TestFunctional] = None) -> float:
    """``max_i |int f_i dmu - int f_i dnu|`` over a finite family of test functionals."""
    if family is None:
        family = default_family()
    if len(family) == 0:
        raise ValueError("test-functional family is empty")
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    return max(abs(mu.integrate(f) - nu.integrate(f)) for f in family)


def pareto_b(alpha) -> Callable[[float], float]:
    """Analytic auxiliary function ``t -> t**(1/alpha)`` of a standard Pareto law."""
    return lambda t: float(t) ** (1.0 / alpha)


@dataclass(frozen=True)
class TailScaling:
    """Normalisation ``B(t) = diag(b1(t) 1_d, b2(t) 1_d)`` with indices alpha1, alpha2."""

    alpha1: float
    alpha2: float
    b1: Callable[[float], float]
    b2: Callable[[float], float]
    t_grid: tuple = field(default=())
    mode: str = "analytic"

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError("alpha1 and alpha2 must be positive")
        t = np.asarray(self.t_grid, dtype=float)
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("t_grid must be positive and strictly increasing")
        for b in (self.b1, self.b2):
            vals = np.array([b(s) for s in t])
            if np.any(vals <= 0) or np.any(np.diff(vals) < 0):
                raise ValueError("b1, b2 must be positive and nondecreasing on t_grid")

    @classmethod
    def analytic(cls, alpha1, alpha2, t_grid=()):
        return cls(alpha1, alpha2, pareto_b(alpha1), pareto_b(alpha2), tuple(t_grid), "analytic")

    @classmethod
    def empirical(cls, mu, nu, alpha1, alpha2, t_grid):
        """b_i read off the radius quantiles of the probability measures mu, nu."""
        t_grid = tuple(float(t) for t in t_grid)
        table1 = {t: empirical_quantile_b(mu, t) for t in t_grid}
        table2 = {t: empirical_quantile_b(nu, t) for t in t_grid}
        return cls(alpha1, alpha2, table1.__getitem__, table2.__getitem__, t_grid, "empirical")

    @property
    def gamma(self):
        return self.alpha1 / self.alpha2

    def exponent_matrix(self, dim):
        return np.diag(np.r_[np.full(dim, 1.0 / self.alpha1), np.full(dim, 1.0 / self.alpha2)])

    def B(self, t, dim):
        return np.diag(np.r_[np.full(dim, self.b1(t)), np.full(dim, self.b2(t))])

    def lambda_power(self, lam, dim, sign=-1):
        """``lam ** (sign * E)`` as a diagonal matrix."""
        return np.diag(float(lam) ** (sign * np.diag(self.exponent_matrix(dim))))
