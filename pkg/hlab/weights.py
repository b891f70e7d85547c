"""Muckenhoupt A_p and reverse Hölder RH_q weights, the maximal operator, power weights"""

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from hlab.errors import WeightError
from hlab.progress import warn
from hlab.space import MetricMeasureSpace

DEFAULT_THRESHOLD = 1e3


@dataclass(frozen=True, eq=False)
class Weight:
    """Strictly positive function aligned with a space's point order"""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size == 0:
            raise WeightError("weight has no values")
        if not np.all(np.isfinite(values)):
            raise WeightError("weight values must be finite")
        if np.any(values <= 0):
            raise WeightError("weight values must be strictly positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def power(self, exponent: float) -> "Weight":
        """Pointwise w^exponent."""
        return Weight(self.values**exponent)

    def times(self, other: "Weight") -> "Weight":
        """Pointwise product."""
        return Weight(self.values * other.values)

    def to_json(self) -> list:
        """JSON array in point order."""
        return self.values.tolist()

    @classmethod
    def from_json(cls, payload: Sequence[float]) -> "Weight":
        """Inverse of to_json."""
        return cls(np.asarray(payload, dtype=float))

    @classmethod
    def load(cls, path: str) -> "Weight":
        """Read a JSON array from disk."""
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def unit_weight(space: MetricMeasureSpace) -> Weight:
    """w = 1."""
    return Weight(np.ones(space.n_pts))


def conjugate(p: float) -> float:
    """Hölder conjugate p' with 1/p + 1/p' = 1 (1 <-> inf)."""
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _aligned(space: MetricMeasureSpace, w: Weight) -> np.ndarray:
    if len(w) != space.n_pts:
        raise WeightError(f"weight has {len(w)} values for {space.n_pts} points")
    return w.values


def maximal(space: MetricMeasureSpace, f: Sequence[float]) -> np.ndarray:
    """Uncentered maximal function: sup of mu-averages of |f| over balls containing x."""
    f = np.abs(np.asarray(f))
    if f.shape != (space.n_pts,):
        raise WeightError(f"function has shape {f.shape}, expected ({space.n_pts},)")
    table = space.balls
    return table.sup_containing(table.averages(f, space.mu))


def ap_constant(space: MetricMeasureSpace, w: Weight, p: float) -> float:
    """A_p constant: sup over balls of (avg w)(avg w^(1-p'))^(p-1); p = 1 uses max Mw/w."""
    if p < 1:
        raise WeightError(f"A_p needs p >= 1, got {p}")
    values = _aligned(space, w)
    if p == 1:
        return float(np.max(maximal(space, values) / values))
    table = space.balls
    avg_w = table.averages(values, space.mu)
    avg_dual = table.averages(values ** (1.0 - conjugate(p)), space.mu)
    product = np.where(table.boundary, avg_w * avg_dual ** (p - 1.0), -np.inf)
    return float(product.max())


def rh_constant(space: MetricMeasureSpace, w: Weight, q: float) -> float:
    """RH_q constant: sup over balls of (avg w^q)^(1/q) / avg w; q = inf uses max_B w."""
    if q <= 1:
        warn(f"RH_{q} contains every weight; returning 1 by convention")
        return 1.0
    values = _aligned(space, w)
    table = space.balls
    avg_w = table.averages(values, space.mu)
    if np.isinf(q):
        top = table.prefix_max(values)
    else:
        # scale first so w^q cannot overflow
        scale = values.max()
        top = scale * table.averages((values / scale) ** q, space.mu) ** (1.0 / q)
    ratio = np.where(table.boundary, top / avg_w, -np.inf)
    return float(ratio.max())


def dual_weight(w: Weight, p: float) -> Weight:
    """w^(1-p'); maps A_p onto A_p'."""
    if p <= 1:
        raise WeightError(f"dual weight needs p > 1, got {p}")
    return w.power(1.0 - conjugate(p))


def power_weight(space: MetricMeasureSpace, beta: float) -> Weight:
    """max(|x|, 1/2)^beta with |x| the distance to the space's origin."""
    if space.origin is None:
        raise WeightError(f"space {space.label} has no designated origin")
    radius = np.maximum(space.dist[space.origin], 0.5)
    return Weight(radius**beta)


def ap_power_range(n: float, p: float) -> tuple:
    """Open beta-interval where |x|^beta is in A_p on an n-dimensional space."""
    if p < 1:
        raise WeightError(f"A_p needs p >= 1, got {p}")
    return (-n, n * (p - 1.0))


def power_weight_admissible(n: float, p: float, s: float) -> tuple:
    """Open beta-interval where a smoothness-s multiplier is bounded on L^p(|x|^beta).

    (max{-n, -sp}, min{n(p-1), sp}); needs s > n/2.
    """
    if s <= n / 2:
        raise WeightError(f"power-weight range needs s > n/2, got s={s}, n={n}")
    if p <= 1:
        raise WeightError(f"power-weight range needs p > 1, got {p}")
    return (max(-n, -s * p), min(n * (p - 1.0), s * p))


def ainf_profile(space: MetricMeasureSpace, w: Weight, p_grid: Sequence[float]) -> dict:
    """ap_constant across a p-grid; records the openness trend without asserting it."""
    return {float(p): ap_constant(space, w, float(p)) for p in p_grid}


@dataclass(frozen=True)
class DualClassCheck:
    """Both sides of the A_p-RH / dual-A equivalence on one weight"""

    ap: float
    rh: float
    dual_ap: float
    rh_exponent: float
    dual_exponent: float
    threshold: float
    consistent: bool


def ap_rh_duality_check(
    space: MetricMeasureSpace,
    w: Weight,
    p: float,
    r: float,
    threshold: float = DEFAULT_THRESHOLD,
) -> DualClassCheck:
    """w in A_p ∩ RH_((r'/p)')  iff  w^(1-p') in A_(p'/r), judged by a threshold.

    On a finite space every constant is finite, so "membership" means the
    constant stays below `threshold`; the check reports whether both sides
    agree on that judgement.
    """
    r_dual = conjugate(r)
    if not (r >= 1 and 1 < p < r_dual):
        raise WeightError(f"needs 1 < p < r' (p={p}, r={r}, r'={r_dual})")
    rh_exponent = conjugate(r_dual / p)
    dual_exponent = conjugate(p) / r
    ap = ap_constant(space, w, p)
    rh = rh_constant(space, w, rh_exponent)
    dual_ap = ap_constant(space, dual_weight(w, p), dual_exponent)
    left = max(ap, rh) <= threshold
    right = dual_ap <= threshold
    return DualClassCheck(
        ap=ap,
        rh=rh,
        dual_ap=dual_ap,
        rh_exponent=float(rh_exponent),
        dual_exponent=float(dual_exponent),
        threshold=threshold,
        consistent=left == right,
    )


def power_class_check(
    space: MetricMeasureSpace,
    w: Weight,
    q: float,
    s: float,
    threshold: float = DEFAULT_THRESHOLD,
    power_threshold: Optional[float] = None,
) -> tuple:
    """(w in A_q and w in RH_s) against w^s in A_(s(q-1)+1), each side by threshold.

    Returns (left, right, constants). power_threshold defaults to threshold^s.
    """
    if q < 1 or s <= 1:
        raise WeightError(f"needs q >= 1 and s > 1, got q={q}, s={s}")
    if power_threshold is None:
        power_threshold = threshold**s
    ap = ap_constant(space, w, q)
    rh = rh_constant(space, w, s)
    powered = ap_constant(space, w.power(s), s * (q - 1.0) + 1.0)
    left = ap <= threshold and rh <= threshold
    right = powered <= power_threshold
    return left, right, {"ap": ap, "rh": rh, "powered_ap": powered}
