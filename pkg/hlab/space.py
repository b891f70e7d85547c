"""Finite metric measure spaces: balls, volumes, annuli and doubling fits"""

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from hlab.config import SETTINGS
from hlab.errors import SpaceError

DIST_TOL = 1e-9
EXPONENT_STEP = 0.05
EXPONENT_MAX = 8.0
# A fitted exponent is the smallest grid value whose sup-constant is within
# this factor of the best constant reachable on the grid.
FIT_TOLERANCE = 2.5
TRIANGLE_EXHAUSTIVE_LIMIT = 128
TRIANGLE_SAMPLES = 64
MAX_GROWTH_CENTERS = 128


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """Finite point set 0..n_pts-1 with a distance matrix and a positive measure.

    Lattice builders also record integer coordinates, the lattice shape and a
    designated origin (used by power weights).
    """

    dist: np.ndarray
    mu: np.ndarray
    origin: Optional[int] = None
    coords: Optional[np.ndarray] = None
    lattice_shape: Optional[tuple] = None
    periodic: bool = False
    label: str = "space"
    max_points: Optional[int] = None

    def __post_init__(self):
        dist = np.array(self.dist, dtype=float)
        mu = np.array(self.mu, dtype=float).ravel()
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise SpaceError(f"distance matrix must be square, got shape {dist.shape}")
        n = dist.shape[0]
        if n == 0:
            raise SpaceError("space must contain at least one point")
        cap = self.max_points if self.max_points is not None else SETTINGS.max_points
        if n > cap:
            raise SpaceError(f"space has {n} points, cap is {cap}")
        if mu.shape != (n,):
            raise SpaceError(f"measure has {mu.size} entries for {n} points")
        if not np.all(np.isfinite(dist)) or not np.all(np.isfinite(mu)):
            raise SpaceError("distances and measure must be finite")
        if np.any(mu <= 0):
            raise SpaceError("measure must be strictly positive at every point")
        scale = max(1.0, float(dist.max()))
        if np.any(dist < 0):
            raise SpaceError("distances must be non-negative")
        if np.any(np.abs(np.diag(dist)) > DIST_TOL * scale):
            raise SpaceError("dist(x, x) must be 0")
        if np.any(np.abs(dist - dist.T) > DIST_TOL * scale):
            raise SpaceError("distance matrix must be symmetric")
        np.fill_diagonal(dist, 0.0)
        dist = 0.5 * (dist + dist.T)
        _check_triangle(dist, DIST_TOL * scale)
        if self.origin is not None and not 0 <= int(self.origin) < n:
            raise SpaceError(f"origin {self.origin} is not a point of the space")
        dist.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "mu", mu)
        if self.coords is not None:
            coords = np.array(self.coords, dtype=int)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != n:
                raise SpaceError("coords must have one row per point")
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)

    @property
    def n_pts(self) -> int:
        """Number of points."""
        return self.dist.shape[0]

    @property
    def points(self) -> np.ndarray:
        """Point indices."""
        return np.arange(self.n_pts)

    @property
    def diameter(self) -> float:
        """Largest distance."""
        return float(self.dist.max())

    @property
    def total_measure(self) -> float:
        """mu(X)."""
        return float(self.mu.sum())

    @property
    def lattice_dim(self) -> Optional[int]:
        """Lattice dimension for builder outputs, None for abstract spaces."""
        if self.coords is None:
            return None
        return int(self.coords.shape[1])

    @cached_property
    def radii(self) -> np.ndarray:
        """Canonical radius set: realized distances, their midpoints and diameter + 1.

        V(x, .) is a step function of r, so balls at these radii are all the
        balls the space has.
        """
        values = np.unique(self.dist)
        mids = 0.5 * (values[1:] + values[:-1])
        radii = np.concatenate([values[values > 0], mids, [values[-1] + 1.0]])
        return np.unique(radii)

    @cached_property
    def balls(self) -> "BallTable":
        """Prefix table enumerating every distinct nonempty ball."""
        return BallTable(self.dist)

    def to_json(self) -> dict:
        """Serializable form: point count, row-major distances, measure."""
        payload = {
            "points": self.n_pts,
            "dist": self.dist.ravel().tolist(),
            "mu": self.mu.tolist(),
            "label": self.label,
        }
        if self.origin is not None:
            payload["origin"] = int(self.origin)
        if self.coords is not None:
            payload["coords"] = self.coords.tolist()
        if self.lattice_shape is not None:
            payload["lattice_shape"] = list(self.lattice_shape)
            payload["periodic"] = bool(self.periodic)
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "MetricMeasureSpace":
        """Inverse of to_json."""
        try:
            n = int(payload["points"])
            dist = np.asarray(payload["dist"], dtype=float).reshape(n, n)
            mu = np.asarray(payload["mu"], dtype=float)
        except (KeyError, ValueError, TypeError) as exc:
            raise SpaceError(f"malformed space JSON: {exc}") from exc
        shape = payload.get("lattice_shape")
        return cls(
            dist=dist,
            mu=mu,
            origin=payload.get("origin"),
            coords=payload.get("coords"),
            lattice_shape=tuple(shape) if shape is not None else None,
            periodic=bool(payload.get("periodic", False)),
            label=payload.get("label", "space"),
        )

    def save(self, path: str) -> None:
        """Write the JSON form to disk."""
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path: str) -> "MetricMeasureSpace":
        """Read a space written by save."""
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


class BallTable:
    """All balls of a finite space as prefixes of distance-sorted rows.

    Row x lists the points by distance from x; a ball centered at x is a
    prefix that ends where the distance strictly increases (a boundary).
    """

    def __init__(self, dist: np.ndarray):
        n = dist.shape[0]
        self.order = np.argsort(dist, axis=1, kind="stable")
        self.sorted_dist = np.take_along_axis(dist, self.order, axis=1)
        gaps = np.diff(self.sorted_dist, axis=1) > DIST_TOL * max(1.0, float(dist.max()))
        self.boundary = np.concatenate([gaps, np.ones((n, 1), dtype=bool)], axis=1)
        self.rank = np.empty_like(self.order)
        rows = np.arange(n)[:, None]
        self.rank[rows, self.order] = np.arange(n)[None, :]

    @property
    def count(self) -> int:
        """Number of (center, radius) balls enumerated, duplicates included."""
        return int(self.boundary.sum())

    def prefix_sums(self, values: np.ndarray) -> np.ndarray:
        """Cumulative sums of values along each distance-sorted row."""
        return np.cumsum(np.asarray(values)[self.order], axis=1)

    def averages(self, values: np.ndarray, mu: np.ndarray) -> np.ndarray:
        """mu-averages over every ball; -inf where the prefix is not a ball."""
        num = self.prefix_sums(np.asarray(values) * mu)
        den = self.prefix_sums(mu)
        avg = num / den
        return np.where(self.boundary, avg, -np.inf)

    def prefix_max(self, values: np.ndarray) -> np.ndarray:
        """max of values over every ball; -inf off boundaries."""
        run = np.maximum.accumulate(np.asarray(values)[self.order], axis=1)
        return np.where(self.boundary, run, -np.inf)

    def sup_containing(self, table: np.ndarray) -> np.ndarray:
        """For each point x, the max of a per-ball table over balls that contain x."""
        suffix = np.maximum.accumulate(table[:, ::-1], axis=1)[:, ::-1]
        n = table.shape[0]
        picked = suffix[np.arange(n)[:, None], self.rank]
        return picked.max(axis=0)

    def ball_radius(self, center: int, k: int) -> float:
        """A canonical radius realizing the prefix of length k + 1 at center."""
        row = self.sorted_dist[center]
        if k + 1 < row.size:
            return float(0.5 * (row[k] + row[k + 1]))
        return float(row[-1] + 1.0)


@dataclass(frozen=True)
class DoublingFit:
    """Fitted doubling (n, C_n) and growth (D, C_D) exponents with their witnesses"""

    exponent_n: float
    constant_Cn: float
    exponent_D: float
    constant_CD: float
    worst_triple: Optional[tuple] = None
    worst_growth_triple: Optional[tuple] = None
    tolerance: float = FIT_TOLERANCE


def _check_triangle(dist: np.ndarray, tol: float) -> None:
    n = dist.shape[0]
    if n <= TRIANGLE_EXHAUSTIVE_LIMIT:
        middles = range(n)
    else:
        rng = np.random.default_rng(0)
        middles = rng.choice(n, size=TRIANGLE_SAMPLES, replace=False)
    for k in middles:
        through = dist[:, k, None] + dist[None, k, :]
        if np.any(dist > through + tol):
            i, j = np.argwhere(dist > through + tol)[0]
            raise SpaceError(f"triangle inequality fails for ({i}, {k}, {j})")


def _check_point(space: MetricMeasureSpace, x) -> int:
    try:
        idx = int(x)
    except (TypeError, ValueError) as exc:
        raise SpaceError(f"invalid point {x!r}") from exc
    if idx != x or not 0 <= idx < space.n_pts:
        raise SpaceError(f"invalid point {x!r} for a space of {space.n_pts} points")
    return idx


def ball(space: MetricMeasureSpace, x: int, r: float) -> np.ndarray:
    """Points y with d(x, y) < r (strict)."""
    idx = _check_point(space, x)
    if r < 0:
        raise SpaceError(f"radius must be non-negative, got {r}")
    return np.flatnonzero(space.dist[idx] < r)


def volume(space: MetricMeasureSpace, x: int, r: float) -> float:
    """V(x, r) = mu(B(x, r))."""
    return float(space.mu[ball(space, x, r)].sum())


def volumes(space: MetricMeasureSpace, radii: Union[float, Sequence[float]]) -> np.ndarray:
    """V(x, r) for every point x (rows) and every radius r (columns)."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii < 0):
        raise SpaceError("radii must be non-negative")
    table = space.balls
    cum_mu = np.concatenate(
        [np.zeros((space.n_pts, 1)), table.prefix_sums(space.mu)], axis=1
    )
    out = np.empty((space.n_pts, radii.size))
    for x in range(space.n_pts):
        counts = np.searchsorted(table.sorted_dist[x], radii, side="left")
        out[x] = cum_mu[x, counts]
    return out


def annulus(space: MetricMeasureSpace, center: int, radius: float, j: int) -> np.ndarray:
    """U_j(B): B itself for j = 0, else 2^j B minus 2^(j-1) B."""
    if j < 0:
        raise SpaceError(f"annulus index must be >= 0, got {j}")
    if radius <= 0:
        raise SpaceError(f"ball radius must be positive, got {radius}")
    if j == 0:
        return ball(space, center, radius)
    outer = ball(space, center, (2.0**j) * radius)
    inner = ball(space, center, (2.0 ** (j - 1)) * radius)
    return np.setdiff1d(outer, inner, assume_unique=True)


def fit_doubling(
    space: MetricMeasureSpace,
    radius_samples: Optional[Sequence[float]] = None,
    exponent_step: float = EXPONENT_STEP,
    exponent_max: float = EXPONENT_MAX,
    tolerance: float = FIT_TOLERANCE,
) -> DoublingFit:
    """Fit the doubling exponent n and the growth exponent D.

    For each grid exponent the constant is the exact sup of the defining ratio
    over the sampled (x, r, s) or (x, y, r). Constants only shrink as the
    exponent grows, so the reported exponent is the smallest one whose
    constant is within `tolerance` of the best constant on the grid.
    """
    if space.n_pts == 1:
        return DoublingFit(0.0, 1.0, 0.0, 1.0, None, None, tolerance)
    radii = space.radii if radius_samples is None else np.asarray(radius_samples, float)
    radii = np.unique(radii[radii > 0])
    if radii.size == 0:
        raise SpaceError("radius_samples must contain a positive radius")
    grid = np.round(np.arange(0.0, exponent_max + exponent_step / 2, exponent_step), 10)
    log_vol = np.log(volumes(space, radii))
    log_r = np.log(radii)

    # doubling: pairs r_i >= r_j
    pair_best, pair_dlr, pair_witness = [], [], []
    for i in range(radii.size):
        diff = log_vol[:, i : i + 1] - log_vol[:, : i + 1]
        arg = diff.argmax(axis=0)
        pair_best.append(diff[arg, np.arange(i + 1)])
        pair_dlr.append(log_r[i] - log_r[: i + 1])
        pair_witness.extend((int(x), float(radii[i]), float(radii[j])) for j, x in enumerate(arg))
    pair_best = np.concatenate(pair_best)
    pair_dlr = np.concatenate(pair_dlr)
    log_cn = (pair_best[None, :] - grid[:, None] * pair_dlr[None, :]).max(axis=1)
    pick_n = int(np.flatnonzero(log_cn <= log_cn.min() + np.log(tolerance))[0])
    worst = (pair_best - grid[pick_n] * pair_dlr).argmax()

    # growth: V(y, r) against V(x, r) over sampled centers x; pairs at equal
    # distance share a slope, so only the largest volume ratio per distance matters
    step = max(1, space.n_pts // MAX_GROWTH_CENTERS)
    centers = np.arange(0, space.n_pts, step)
    sep, inv = np.unique(space.dist[centers].ravel(), return_inverse=True)
    best_ratio = np.full((radii.size, sep.size), -np.inf)
    for k in range(radii.size):
        lhs = (log_vol[None, :, k] - log_vol[centers, None, k]).ravel()
        np.maximum.at(best_ratio[k], inv, lhs)
    slopes = np.log1p(sep[None, :] / radii[:, None])
    lines = best_ratio.ravel()[None, :] - grid[:, None] * slopes.ravel()[None, :]
    log_cd = lines.max(axis=1)
    pick_d = int(np.flatnonzero(log_cd <= log_cd.min() + np.log(tolerance))[0])
    k, u = divmod(int(lines[pick_d].argmax()), sep.size)
    lhs = (log_vol[None, :, k] - log_vol[centers, None, k]).ravel()
    pair = int(np.flatnonzero(inv == u)[lhs[inv == u].argmax()])
    cx, y = divmod(pair, space.n_pts)
    growth_witness = (int(centers[cx]), int(y), float(radii[k]))

    return DoublingFit(
        exponent_n=float(grid[pick_n]),
        constant_Cn=float(np.exp(log_cn[pick_n])),
        exponent_D=float(grid[pick_d]),
        constant_CD=float(np.exp(log_cd[pick_d])),
        worst_triple=pair_witness[worst],
        worst_growth_triple=growth_witness,
        tolerance=tolerance,
    )


def build_torus(N: int, d: int, max_points: Optional[int] = None) -> MetricMeasureSpace:
    """Z_N^d with the graph (geodesic) metric and counting measure."""
    if N < 2:
        raise SpaceError(f"torus side must be >= 2, got {N}")
    if d not in (1, 2, 3):
        raise SpaceError(f"torus dimension must be 1, 2 or 3, got {d}")
    cap = max_points if max_points is not None else SETTINGS.max_points
    if N**d > cap:
        raise SpaceError(f"torus Z_{N}^{d} has {N**d} points, cap is {cap}")
    coords = np.array(list(np.ndindex(*((N,) * d))), dtype=int)
    delta = np.abs(coords[:, None, :] - coords[None, :, :])
    dist = np.minimum(delta, N - delta).sum(axis=2).astype(float)
    return MetricMeasureSpace(
        dist=dist,
        mu=np.ones(coords.shape[0]),
        origin=0,
        coords=coords,
        lattice_shape=(N,) * d,
        periodic=True,
        label=f"Z_{N}^{d}",
        max_points=cap,
    )


def build_segment(half_length: int, max_points: Optional[int] = None) -> MetricMeasureSpace:
    """The centered lattice segment {-R, ..., R} with origin at 0."""
    if half_length < 0:
        raise SpaceError(f"half length must be >= 0, got {half_length}")
    coords = np.arange(-half_length, half_length + 1)
    dist = np.abs(coords[:, None] - coords[None, :]).astype(float)
    return MetricMeasureSpace(
        dist=dist,
        mu=np.ones(coords.size),
        origin=half_length,
        coords=coords[:, None],
        lattice_shape=(coords.size,),
        periodic=False,
        label=f"segment_{half_length}",
        max_points=max_points,
    )


def parse_mask(text: str) -> np.ndarray:
    """Read a '#'/'.' text grid into a boolean array (rows top to bottom)."""
    rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not rows:
        raise SpaceError("mask text is empty")
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise SpaceError("mask rows must all have the same length")
    bad = set("".join(rows)) - {"#", "."}
    if bad:
        raise SpaceError(f"mask may only contain '#' and '.', found {sorted(bad)}")
    return np.array([[ch == "#" for ch in row] for row in rows], dtype=bool)


def build_masked_grid(
    width: int,
    height: int,
    mask: Union[np.ndarray, str, None] = None,
    max_points: Optional[int] = None,
) -> MetricMeasureSpace:
    """Masked cells of a width x height grid with the ambient taxicab metric.

    The ambient metric is kept even when the mask is disconnected, so the
    result can fail doubling.
    """
    if width < 1 or height < 1:
        raise SpaceError(f"grid must be at least 1x1, got {width}x{height}")
    if mask is None:
        cells = np.ones((height, width), dtype=bool)
    elif isinstance(mask, str):
        cells = parse_mask(mask)
    else:
        cells = np.asarray(mask, dtype=bool)
    if cells.shape != (height, width):
        raise SpaceError(f"mask shape {cells.shape} does not match {height}x{width}")
    if not cells.any():
        raise SpaceError("mask has no true cells")
    coords = np.argwhere(cells)
    dist = np.abs(coords[:, None, :] - coords[None, :, :]).sum(axis=2).astype(float)
    return MetricMeasureSpace(
        dist=dist,
        mu=np.ones(coords.shape[0]),
        coords=coords,
        lattice_shape=(height, width),
        periodic=False,
        label=f"mask_{height}x{width}",
        max_points=max_points,
    )
