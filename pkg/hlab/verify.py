"""Quantitative checks of the multiplier estimates on finite spaces.

Every sup over a continuous parameter runs over a declared finite grid that
is written into the result. Operator norms are always brackets.
"""

from dataclasses import asdict, dataclass, field
from math import factorial
from typing import Callable, Optional, Sequence

import numpy as np

from hlab import calculus, norms
from hlab.calculus import MultiplierFunction, SpectralDecomposition
from hlab.config import SETTINGS
from hlab.errors import VerificationError
from hlab.progress import parallel_map, warn
from hlab.space import DoublingFit, MetricMeasureSpace, ball, fit_doubling, volumes
from hlab.weights import DEFAULT_THRESHOLD, Weight, ap_constant, conjugate, dual_weight, maximal

C_GRID = 2.0 ** np.arange(-4, 4)
GAUSSIAN_SPEED_CAP = 4.0
POWER_STARTS = 64
POWER_MAX_ITER = 100
POWER_TOL = 1e-10
STRUCTURED_CENTERS = 32
STRUCTURED_RADII = 6
EIGEN_TESTS = 64
PLANCHEREL_KNOTS = 8
KNOT_RESOLUTION = 64
DECAY_EPS = 0.1
HOLOMORPHIC_EPS = 0.5
NEGATIVE_KERNEL_TOL = 1e-12
RATIO_VARIANTS = ("global", "compact")


@dataclass(frozen=True)
class GaussianFit:
    """Best (C, c) for the Gaussian upper bound over the tested times.

    max_violation is 0 because C is the sup of the ratio. speed_cap None
    means every pair entered the sup.
    """

    C: float
    c: float
    m: float
    max_violation: float
    t_range: tuple
    per_c: dict = field(default_factory=dict)
    speed_cap: Optional[float] = GAUSSIAN_SPEED_CAP
    min_kernel: float = 0.0


@dataclass(frozen=True, eq=False)
class NormBracket:
    """Certified [lower, upper] for an operator norm on L^p(w mu).

    witness is the test function that achieves lower.
    """

    lower: float
    upper: float
    method_lower: str
    method_upper: str
    p: float
    witness: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.lower > self.upper * (1.0 + 1e-9) + 1e-12:
            raise VerificationError(
                f"bracket inverted: lower {self.lower:.12g} > upper {self.upper:.12g}"
            )

    @property
    def width(self) -> float:
        """upper - lower."""
        return self.upper - self.lower

    def to_json(self) -> dict:
        """Bounds and methods; the witness is kept in memory only."""
        return {
            "lower": self.lower,
            "upper": self.upper,
            "method_lower": self.method_lower,
            "method_upper": self.method_upper,
            "p": self.p,
        }


@dataclass
class VerificationReport:
    """One check's measured constants, pass flags and witnesses"""

    scenario: str
    parameters: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    seed: Optional[int] = None
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """Every flag holds."""
        return all(bool(v) for v in self.flags.values())

    def to_json(self) -> dict:
        """Plain-JSON form."""
        payload = asdict(self)
        payload["passed"] = self.passed
        return _jsonable(payload)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def _order(dec: SpectralDecomposition, m: Optional[float]) -> float:
    return dec.order_m if m is None else float(m)


# Gaussian bounds


def fit_gaussian_bound(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    m: Optional[float] = None,
    t_set: Sequence[float] = (0.25, 0.5, 1, 2, 4, 8, 16, 32, 64),
    c_grid: Sequence[float] = C_GRID,
    speed_cap: Optional[float] = GAUSSIAN_SPEED_CAP,
) -> GaussianFit:
    """Fit p_t(x, y) <= C / V(x, t^(1/m)) exp(-d^(m/(m-1)) / (c t^(1/(m-1)))).

    For each c the constant is the exact sup of the ratio. Lattice heat
    kernels decay like exp(-d log(d/t)) once d >> t, which no Gaussian
    dominates for small c with a finite C; speed_cap drops pairs with
    d > speed_cap * max(t^(1/(m-1)), t^(1/m)) from the sup.
    """
    m = _order(dec, m)
    if m < 2:
        raise VerificationError(f"Gaussian order m must be >= 2, got {m}")
    t_set = np.asarray(sorted(t_set), dtype=float)
    if t_set.size == 0 or np.any(t_set <= 0):
        raise VerificationError("t_set must be a nonempty set of positive times")
    c_grid = np.asarray(c_grid, dtype=float)
    dist = space.dist
    vols = volumes(space, t_set ** (1.0 / m))

    def one(k: int) -> tuple:
        t = t_set[k]
        kernel = calculus.heat_kernel(dec, t)
        scale = max(1.0, float(np.abs(kernel).max()))
        valid = kernel > NEGATIVE_KERNEL_TOL * scale * 1e-3
        if speed_cap is not None:
            reach = speed_cap * max(t ** (1.0 / (m - 1.0)), t ** (1.0 / m))
            valid &= dist <= reach
        log_p = np.log(np.where(valid, kernel, 1.0)) + np.log(vols[:, k])[:, None]
        spread = dist ** (m / (m - 1.0)) / t ** (1.0 / (m - 1.0))
        best = np.array(
            [np.max(np.where(valid, log_p + spread / c, -np.inf)) for c in c_grid]
        )
        return best, float(kernel.min() / scale)

    results = parallel_map(one, range(t_set.size), desc="gaussian fit")
    log_c = np.max(np.array([r[0] for r in results]), axis=0)
    min_kernel = min(r[1] for r in results)
    if min_kernel < -NEGATIVE_KERNEL_TOL:
        warn(f"heat kernel has negative entries (relative min {min_kernel:.3e})")
    pick = int(np.argmin(log_c))
    return GaussianFit(
        C=float(np.exp(log_c[pick])),
        c=float(c_grid[pick]),
        m=m,
        max_violation=0.0,
        t_range=tuple(float(t) for t in t_set),
        per_c={float(c): float(np.exp(v)) for c, v in zip(c_grid, log_c)},
        speed_cap=speed_cap,
        min_kernel=min_kernel,
    )


# Plancherel-type estimates


@dataclass(frozen=True)
class PlancherelResult:
    """Sup ratio over the tested multipliers and where it was attained"""

    constant: float
    witness: dict
    q: float
    scales: tuple
    trials: int
    seed: int


def column_mass(dec: SpectralDecomposition, values: np.ndarray) -> np.ndarray:
    """sum_x |K(x, y)|^2 mu(x) = sum_i |values_i|^2 phi_i(y)^2, for every y."""
    return (dec.eigenvectors**2) @ (np.abs(values) ** 2)


def _random_piecewise_linear(rng: np.random.Generator, hi: float, knots: int) -> MultiplierFunction:
    x = np.linspace(0.0, hi, knots + 1)
    y = rng.uniform(0.0, 1.0, knots + 1)
    return MultiplierFunction.from_samples(x, y, name="random_pl")


def _dilated_lq(F: Callable, R: float, q: float, resolution: int) -> float:
    # cell midpoints of [0, 1]: total mass exactly 1
    grid = (np.arange(resolution) + 0.5) / resolution
    return norms.lq_norm(np.asarray(F(R * grid)), 1.0 / resolution, q)


def plancherel_ratio(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    F: Callable,
    R: float,
    q: float,
    m: Optional[float] = None,
    resolution: int = PLANCHEREL_KNOTS * KNOT_RESOLUTION,
) -> tuple:
    """(sup_y lhs * V(y, 1/R) / ||delta_R F||_q^2, argmax y); 0 when F misses the spectrum."""
    m = _order(dec, m)
    lhs = column_mass(dec, dec.spectral_values(F, root=True, m=m))
    denom = _dilated_lq(F, R, q, resolution) ** 2
    if denom == 0:
        raise VerificationError("multiplier vanishes on [0, R]; ratio undefined")
    ratio = lhs * volumes(space, 1.0 / R)[:, 0] / denom
    y = int(np.argmax(ratio))
    return float(ratio[y]), y


def plancherel_constant(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    m: Optional[float] = None,
    q: float = 2.0,
    R_set: Sequence[float] = (1.0,),
    trials: int = 16,
    seed: int = 0,
) -> PlancherelResult:
    """Sup over R, y and seeded piecewise-linear F supported in [0, R] of the Plancherel ratio."""
    m = _order(dec, m)
    if not (q >= 2):
        raise VerificationError(f"Plancherel exponent q must be in [2, inf], got {q}")
    top = 2.0 * float(dec.eigenvalues.max()) ** (1.0 / m)
    R_set = [float(R) for R in R_set]
    if not R_set or any(R <= 0 or R > top * (1 + 1e-12) for R in R_set):
        raise VerificationError(f"R values must lie in (0, {top:.6g}], got {R_set}")
    rng = np.random.default_rng(seed)
    best, witness = 0.0, {}
    for R in R_set:
        for trial in range(trials):
            F = _random_piecewise_linear(rng, R, PLANCHEREL_KNOTS)
            if _dilated_lq(F, R, q, PLANCHEREL_KNOTS * KNOT_RESOLUTION) == 0:
                continue
            ratio, y = plancherel_ratio(space, dec, F, R, q, m)
            if ratio > best:
                best, witness = ratio, {"R": R, "trial": trial, "y": y}
    return PlancherelResult(best, witness, q, tuple(R_set), trials, seed)


def plancherel_nq_ratio(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    F: Callable,
    N: int,
    q: float,
    m: Optional[float] = None,
) -> tuple:
    """Plancherel ratio with the cellwise ||delta_N F||_{N,q} in the denominator."""
    lhs = column_mass(dec, dec.spectral_values(F, root=True, m=m))
    denom = norms.nq_norm(lambda x: np.asarray(F(N * np.asarray(x))), N, q) ** 2
    if denom == 0:
        raise VerificationError("multiplier vanishes on [0, N]; ratio undefined")
    ratio = lhs * volumes(space, 1.0 / N)[:, 0] / denom
    y = int(np.argmax(ratio))
    return float(ratio[y]), y


def plancherel_nq_constant(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    m: Optional[float] = None,
    q: float = 2.0,
    N_set: Sequence[int] = (1, 2, 4),
    trials: int = 16,
    seed: int = 0,
) -> PlancherelResult:
    """Sup over N, y and seeded F supported in [0, N] of the ||.||_{N,q} ratio."""
    if not (q >= 1):
        raise VerificationError(f"q must be >= 1, got {q}")
    N_set = [int(N) for N in N_set]
    if not N_set or any(N < 1 for N in N_set):
        raise VerificationError(f"N values must be positive integers, got {N_set}")
    rng = np.random.default_rng(seed)
    best, witness = 0.0, {}
    for N in N_set:
        for trial in range(trials):
            F = _random_piecewise_linear(rng, float(N), PLANCHEREL_KNOTS)
            ratio, y = plancherel_nq_ratio(space, dec, F, N, q, m)
            if ratio > best:
                best, witness = ratio, {"N": N, "trial": trial, "y": y}
    return PlancherelResult(best, witness, q, tuple(N_set), trials, seed)


def torus_2_to_inf_check(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    family: Sequence[MultiplierFunction],
    n: Optional[int] = None,
    m: Optional[float] = None,
    resolution: int = 8192,
) -> VerificationReport:
    """||F(L^(1/m))||_{2->inf}^2 against int |F(t)|^2 t^(n-1) dt across a family.

    On a flat space the two agree up to one constant; the report carries the
    min and max ratio so its spread can be read off.
    """
    n = n or space.lattice_dim
    if n is None:
        raise VerificationError("dimension unknown; pass n for non-lattice spaces")
    m = _order(dec, m)
    top = float(dec.eigenvalues.max()) ** (1.0 / m)
    ratios = []
    for F in family:
        hi = top if F.support is None else max(F.support[1], top)
        t = np.linspace(0.0, hi, resolution + 1)
        integral = float(np.trapezoid(np.abs(np.asarray(F(t))) ** 2 * t ** (n - 1), t))
        if integral == 0:
            continue
        lhs = float(column_mass(dec, dec.spectral_values(F, root=True, m=m)).max())
        ratios.append(lhs / integral)
    if not ratios:
        raise VerificationError("every multiplier in the family has zero integral")
    return VerificationReport(
        scenario="torus-2-to-inf",
        parameters={"n": n, "m": m, "family": [F.name for F in family]},
        constants={"max_ratio": max(ratios), "min_ratio": min(ratios)},
        flags={"finite": bool(np.isfinite(max(ratios)))},
        witnesses={"ratios": ratios},
    )


# Weighted operator norms


def _lp_norm(x: np.ndarray, p: float, axis: int = 0) -> np.ndarray:
    return np.linalg.norm(x, ord=p, axis=axis)


def _dual(y: np.ndarray, p: float) -> np.ndarray:
    """Columns with unit l^p' norm attaining <x, y> = ||y||_p."""
    mag = np.abs(y)
    top = mag.max(axis=0)
    top = np.where(top > 0, top, 1.0)
    phase = np.divide(y, mag, out=np.zeros_like(y), where=mag > 0)
    out = (mag / top) ** (p - 1.0) * phase
    size = _lp_norm(out, conjugate(p))
    return out / np.where(size > 0, size, 1.0)


def _power_lower(B: np.ndarray, p: float, starts: int, seed: int) -> tuple:
    """Best ||Bx||_p over seeded starts of the dual-map power iteration."""
    rng = np.random.default_rng(seed)
    n = B.shape[0]
    X = rng.standard_normal((n, starts))
    if np.iscomplexobj(B):
        X = X + 1j * rng.standard_normal((n, starts))
    X = X / _lp_norm(X, p)
    p_dual = conjugate(p)
    best, best_x = 0.0, X[:, 0]
    for _ in range(POWER_MAX_ITER):
        Y = B @ X
        est = _lp_norm(Y, p)
        k = int(np.argmax(est))
        if est[k] > best:
            best, best_x = float(est[k]), X[:, k].copy()
        Z = B.conj().T @ _dual(Y, p)
        inner = np.real(np.sum(np.conj(Z) * X, axis=0))
        done = _lp_norm(Z, p_dual) <= inner * (1.0 + POWER_TOL)
        if np.all(done):
            break
        X = np.where(done[None, :], X, _dual(Z, p_dual))
    return best, best_x


def _structured_tests(space: MetricMeasureSpace, extra: Optional[np.ndarray]) -> np.ndarray:
    """Ball indicators around sampled centers plus the constant, as columns."""
    n = space.n_pts
    table = space.balls
    step = max(1, n // STRUCTURED_CENTERS)
    cols = [np.ones(n)]
    for x in range(0, n, step):
        stops = np.flatnonzero(table.boundary[x])
        for k in stops[np.unique(np.linspace(0, stops.size - 1, STRUCTURED_RADII).astype(int))]:
            f = np.zeros(n)
            f[table.order[x, : k + 1]] = 1.0
            cols.append(f)
    tests = np.array(cols).T
    if extra is not None:
        tests = np.hstack([tests, np.asarray(extra).reshape(n, -1)])
    return tests


def weighted_opnorm(
    space: MetricMeasureSpace,
    op_matrix: np.ndarray,
    p: float,
    w: Optional[Weight] = None,
    starts: int = POWER_STARTS,
    seed: int = 0,
    test_functions: Optional[np.ndarray] = None,
) -> NormBracket:
    """Bracket ||T||_{L^p(w mu) -> L^p(w mu)} for (Tf)(x) = sum_y T[x, y] f(y).

    The norm equals the l^p norm of B = D^(1/p) T D^(-1/p), D = diag(w mu).
    p in {1, 2, inf} is exact; otherwise lower is the best of the p-norm power
    iteration and a structured test set, upper the smaller Riesz-Thorin
    bracket through p = 2.
    """
    if p < 1:
        raise VerificationError(f"operator norms need p >= 1, got {p}")
    T = np.asarray(op_matrix)
    n = space.n_pts
    if T.shape != (n, n):
        raise VerificationError(f"operator shape {T.shape} does not match {n} points")
    nu = space.mu * (1.0 if w is None else w.values)
    if w is not None and len(w) != n:
        raise VerificationError(f"weight has {len(w)} values for {n} points")

    if np.isinf(p):
        rows = np.abs(T).sum(axis=1)
        x = int(np.argmax(rows))
        witness = np.exp(-1j * np.angle(T[x])) if np.iscomplexobj(T) else np.sign(T[x])
        value = float(rows[x])
        return NormBracket(value, value, "row_sum", "row_sum", p, witness)

    # ||T||_{L^1(nu)} is the largest nu-weighted column sum
    col_sums = (nu[:, None] * np.abs(T) / nu[None, :]).sum(axis=0)
    col = float(col_sums.max())
    if p == 1:
        y = int(col_sums.argmax())
        witness = np.zeros(n)
        witness[y] = 1.0 / nu[y]
        return NormBracket(col, col, "point_mass", "column_sum", p, witness)

    half = np.sqrt(nu)
    S = half[:, None] * T / half[None, :]
    _, sing, vh = np.linalg.svd(S)
    two = float(sing[0])
    if p == 2:
        witness = vh[0].conj() / half
        return NormBracket(two, two, "svd", "svd", p, witness)

    row = float(np.abs(T).sum(axis=1).max())
    if p < 2:
        theta = 2.0 * (1.0 - 1.0 / p)
        upper = col ** (1.0 - theta) * two**theta
        method_upper = "riesz_thorin(1,2)"
    else:
        theta = 2.0 / p
        upper = two**theta * row ** (1.0 - theta)
        method_upper = "riesz_thorin(2,inf)"
    alt = col ** (1.0 / p) * row ** (1.0 - 1.0 / p)
    if alt < upper:
        upper, method_upper = alt, "riesz_thorin(1,inf)"

    scale = nu ** (1.0 / p)
    B = scale[:, None] * T / scale[None, :]
    lower, x = _power_lower(B, p, starts, seed)
    witness = x / scale
    method_lower = "power_iteration"
    tests = _structured_tests(space, test_functions)
    test_norms = _lp_norm(tests * scale[:, None], p)
    keep = test_norms > 0
    ratios = _lp_norm((T @ tests[:, keep]) * scale[:, None], p) / test_norms[keep]
    if ratios.size and ratios.max() > lower:
        k = int(ratios.argmax())
        lower, witness, method_lower = float(ratios[k]), tests[:, keep][:, k], "structured"
    if upper < lower <= upper * (1.0 + 1e-9):
        lower = upper
    return NormBracket(lower, upper, method_lower, method_upper, p, witness)


@dataclass(frozen=True)
class DualityResult:
    """Brackets of F(L) on L^p(w) and of conj(F)(L) on L^p'(w^(1-p'))"""

    primal: NormBracket
    dual: NormBracket
    residual: float
    overlap: bool

    @property
    def passed(self) -> bool:
        """Brackets overlap and lower bounds agree within 2%."""
        return self.overlap and self.residual <= 0.02


def duality_check(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    F: MultiplierFunction,
    p: float,
    w: Optional[Weight] = None,
    root: bool = False,
    seed: int = 0,
) -> DualityResult:
    """Compare a multiplier's bracket with its mu-adjoint's bracket on the dual weighted space."""
    if not 1 < p < np.inf:
        raise VerificationError(f"duality needs 1 < p < inf, got {p}")
    w = w or Weight(np.ones(space.n_pts))
    tests = dec.eigenvectors[:, : min(EIGEN_TESTS, dec.n_pts)]
    primal = weighted_opnorm(
        space, calculus.apply_multiplier(dec, F, root).matrix, p, w, seed=seed, test_functions=tests
    )
    dual = weighted_opnorm(
        space,
        calculus.apply_multiplier(dec, F.conjugate(), root).matrix,
        conjugate(p),
        dual_weight(w, p),
        seed=seed,
        test_functions=tests,
    )
    top = max(primal.lower, dual.lower)
    residual = abs(primal.lower - dual.lower) / top if top > 0 else 0.0
    overlap = top <= min(primal.upper, dual.upper) * (1.0 + 1e-9)
    return DualityResult(primal, dual, float(residual), bool(overlap))


# Hypotheses and the multiplier ratio


@dataclass(frozen=True)
class HypothesisCheck:
    """r0 and the weight-class tests for the direct and dual ranges of p"""

    r0: float
    n: float
    D: float
    in_primal: bool
    in_dual: bool
    ap: Optional[float]
    dual_ap: Optional[float]
    threshold: float
    smooth: bool = True

    @property
    def holds(self) -> bool:
        """s > n/2 and either range applies."""
        return self.smooth and (self.in_primal or self.in_dual)


def critical_exponent(n: float, D: float, s: float) -> float:
    """r0 = max(1, 2(n + D) / (2s + D))."""
    if 2 * s + D <= 0:
        raise VerificationError(f"needs 2s + D > 0, got s={s}, D={D}")
    return max(1.0, 2.0 * (n + D) / (2.0 * s + D))


def hypotheses(
    n: float,
    D: float,
    s: float,
    p: float,
    w: Optional[Weight] = None,
    space: Optional[MetricMeasureSpace] = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> HypothesisCheck:
    """Is (s, p, w) inside the direct range r0 < p with w in A_(p/r0), or the dual range?

    The dual range is 1 < p < r0' with w^(1-p') in A_(p'/r0). Both need
    s > n/2; below that neither range is tested and no weight class is
    computed. Class membership is judged against threshold.
    """
    r0 = critical_exponent(n, D, s)
    if w is not None and space is None:
        raise VerificationError("a weight needs its space for the class test")
    smooth = s > n / 2.0
    if not smooth:
        return HypothesisCheck(r0, n, D, False, False, None, None, threshold, smooth=False)
    ap = dual_ap = None
    in_primal = r0 < p < np.inf
    if in_primal and w is not None:
        ap = ap_constant(space, w, p / r0)
        in_primal = ap <= threshold
    r0_dual = conjugate(r0)
    in_dual = 1 < p < r0_dual
    if in_dual and w is not None:
        dual_ap = ap_constant(space, dual_weight(w, p), conjugate(p) / r0)
        in_dual = dual_ap <= threshold
    return HypothesisCheck(r0, n, D, bool(in_primal), bool(in_dual), ap, dual_ap, threshold)


def _spectrum_for_norm(dec: SpectralDecomposition, root: bool) -> np.ndarray:
    lam = np.clip(np.asarray(dec.eigenvalues), 0.0, None)
    return lam ** (1.0 / dec.order_m) if root else lam


def ratio_denominator(
    F: MultiplierFunction,
    s: float,
    q: float,
    t_grid: np.ndarray,
    spectrum: np.ndarray,
    variant: str = "global",
) -> float:
    """Smoothness term plus size term of the multiplier ratio.

    global: sup_t ||eta delta_t F||_{W^q_s} + |F(0)|.
    compact: sup_(t>1) ||eta delta_t F||_{W^q_s} + ||F||_inf, for spaces of
    finite measure; the sup norm runs over [0, 2 max(1, lambda_max)] and the
    spectrum itself.
    """
    if variant not in RATIO_VARIANTS:
        raise VerificationError(f"unknown ratio variant {variant!r}; choose from {RATIO_VARIANTS}")
    if variant == "compact":
        t_grid = t_grid[t_grid > 1.0]
    smooth = norms.hormander_norm(F, s, q, t_grid=t_grid) if t_grid.size else 0.0
    if variant == "global":
        zero = F.value_at_zero if F.value_at_zero is not None else F(np.array([0.0]))[0]
        return smooth + abs(zero)
    top = 2.0 * max(float(spectrum.max()), 1.0)
    lam = np.concatenate([np.linspace(0.0, top, SETTINGS.norm_grid), spectrum])
    return smooth + float(np.abs(np.asarray(F(lam))).max())


def hormander_ratio(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    family: Sequence[MultiplierFunction],
    s: float,
    q: float,
    p: float,
    w: Optional[Weight] = None,
    m: Optional[float] = None,
    root: bool = True,
    doubling: Optional[DoublingFit] = None,
    threshold: float = DEFAULT_THRESHOLD,
    seed: int = 0,
    scenario: str = "hormander-ratio",
    variant: str = "global",
) -> VerificationReport:
    """upper(||F(L^(1/m))||_{L^p(w)}) / (sup_t ||eta delta_t F||_{W^q_s} + |F(0)|) per F.

    variant="compact" swaps the denominator for the finite-measure form
    (see ratio_denominator). Out-of-hypothesis runs still compute; the flag
    records it.
    """
    if not family:
        raise VerificationError("multiplier family is empty")
    if variant not in RATIO_VARIANTS:
        raise VerificationError(f"unknown ratio variant {variant!r}; choose from {RATIO_VARIANTS}")
    m = _order(dec, m)
    fit = doubling or fit_doubling(space)
    check = hypotheses(fit.exponent_n, fit.exponent_D, s, p, w, space, threshold)
    spectrum = _spectrum_for_norm(dec, root)
    t_grid = norms.dyadic_t_grid(spectrum)
    if variant == "compact":
        t_grid = t_grid[t_grid > 1.0]
    rows, ratios = [], []
    for F in family:
        bracket = weighted_opnorm(
            space, calculus.apply_multiplier(dec, F, root).matrix, p, w, seed=seed
        )
        denom = ratio_denominator(F, s, q, t_grid, spectrum, variant)
        if denom == 0:
            raise VerificationError(f"multiplier {F.name} has zero Hörmander norm")
        ratio = bracket.upper / denom
        ratios.append(ratio)
        rows.append(
            {
                "label": F.name,
                "lower": bracket.lower,
                "upper": bracket.upper,
                "constant": ratio,
            }
        )
    k = int(np.argmax(ratios))
    return VerificationReport(
        scenario=scenario,
        parameters={"s": s, "q": q, "p": p, "m": m, "root": root, "n_pts": space.n_pts, "variant": variant},
        constants={"max_ratio": ratios[k], "r0": check.r0, "n": fit.exponent_n, "D": fit.exponent_D},
        flags={"in_hypothesis": check.holds},
        witnesses={"argmax": family[k].name, "ap": check.ap, "dual_ap": check.dual_ap},
        grids={"t": t_grid.tolist()},
        seed=seed,
        rows=rows,
    )


def ratio_growth(values: Sequence[float], sizes: Sequence[float]) -> float:
    """Largest growth factor per doubling of size along a ladder."""
    values = np.asarray(values, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if values.size != sizes.size or values.size < 2:
        raise VerificationError("growth needs matching ladders of at least two sizes")
    if np.any(values <= 0) or np.any(np.diff(sizes) <= 0):
        raise VerificationError("growth needs positive values and increasing sizes")
    doublings = np.log2(sizes[1:] / sizes[:-1])
    return float(np.max((values[1:] / values[:-1]) ** (1.0 / doublings)))


# Criterion hypotheses, off-diagonal decay, spectral windows


@dataclass(frozen=True)
class CriterionConstants:
    """Empirical constants of the two good-lambda hypotheses"""

    C_a: float
    C_b: float
    witness_a: dict
    witness_b: dict
    samples: int
    seed: int


def am_criterion_check(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    F: Callable,
    p0: float,
    M: int,
    ball_sample: int = 16,
    f_sample: int = 4,
    seed: int = 0,
    root: bool = True,
) -> CriterionConstants:
    """Measure the two hypotheses with T = F(L^(1/m)) and A_r = I - (I - e^(-r^m L))^M.

    C_a: (avg_B |T(I - A_r)f|^p0)^(1/p0) against M(|f|^p0)^(1/p0)(x), x in B.
    C_b: ||T A_r f||_{L^inf(B)} against M(|Tf|^p0)^(1/p0)(x), x in B.
    """
    if not 1 <= p0 < 2:
        raise VerificationError(f"p0 must lie in [1, 2), got {p0}")
    if M < 1:
        raise VerificationError(f"M must be >= 1, got {M}")
    rng = np.random.default_rng(seed)
    T = calculus.apply_multiplier(dec, F, root).matrix
    radii = space.radii
    mu = space.mu
    C_a = C_b = 0.0
    witness_a, witness_b = {}, {}
    cache: dict = {}
    for b in range(ball_sample):
        center = int(rng.integers(space.n_pts))
        r = float(rng.choice(radii))
        if r not in cache:
            cache[r] = calculus.smoothing_family(dec, r, M)
        A = cache[r]
        members = ball(space, center, r)
        ident = np.eye(space.n_pts)
        for trial in range(f_sample):
            f = rng.standard_normal(space.n_pts)
            Tf = T @ f
            g = (T @ (ident - A)) @ f
            lhs_a = (np.sum(np.abs(g[members]) ** p0 * mu[members]) / mu[members].sum()) ** (1 / p0)
            rhs_a = maximal(space, np.abs(f) ** p0)[members].min() ** (1 / p0)
            lhs_b = np.abs((T @ A @ f)[members]).max()
            rhs_b = maximal(space, np.abs(Tf) ** p0)[members].min() ** (1 / p0)
            if rhs_a > 0 and lhs_a / rhs_a > C_a:
                C_a = float(lhs_a / rhs_a)
                witness_a = {"center": center, "radius": r, "trial": trial}
            if rhs_b > 0 and lhs_b / rhs_b > C_b:
                C_b = float(lhs_b / rhs_b)
                witness_b = {"center": center, "radius": r, "trial": trial}
    return CriterionConstants(C_a, C_b, witness_a, witness_b, ball_sample * f_sample, seed)


def offdiag_decay_check(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    F: Callable,
    ell: int,
    s: float,
    q: float,
    m: Optional[float] = None,
    eps: float = DECAY_EPS,
) -> float:
    """sup_y V(y, 1/R) sum_x |K(x, y)|^2 (1 + R d(x, y))^s mu(x) / ||delta_R F||^2_{W^q_(s/2+eps)}.

    F must be supported in [R/4, R] with R = 2^ell.
    """
    R = 2.0**ell
    lam = np.linspace(0.0, 4.0 * R, 8193)
    outside = (lam < R / 4) | (lam > R)
    if np.any(np.abs(np.asarray(F(lam[outside]))) > 1e-12):
        raise VerificationError(f"multiplier is not supported in [{R / 4:g}, {R:g}]")
    values = dec.spectral_values(F, root=True, m=_order(dec, m))
    kernel = calculus.kernel_from_values(dec, values)
    decay = (1.0 + R * space.dist) ** s
    lhs = np.sum(np.abs(kernel) ** 2 * decay * space.mu[:, None], axis=0)
    if not np.any(lhs > 0):
        return 0.0
    dilated = norms.GridFunction.from_callable(
        lambda x: np.asarray(F(R * x)), norms.HORMANDER_WINDOW
    )
    denom = norms.sobolev_norm(dilated, s / 2.0 + eps, q) ** 2
    return float(np.max(lhs * volumes(space, 1.0 / R)[:, 0]) / denom)


def spectral_window_mass(
    dec: SpectralDecomposition, lo: float, hi: float, m: Optional[float] = None
) -> float:
    """sup_y sum over lambda_i^(1/m) in [lo, hi] of phi_i(y)^2: ||chi_[lo,hi](L^(1/m))||^2_{1->2}."""
    m = _order(dec, m)
    roots = dec.eigenvalues ** (1.0 / m)
    inside = (roots >= lo) & (roots <= hi)
    if not inside.any():
        return 0.0
    return float((dec.eigenvectors[:, inside] ** 2).sum(axis=1).max())


@dataclass(frozen=True)
class WindowResult:
    """Sup over R of the unit-window mass against R^(n-1)"""

    constant: float
    per_R: dict
    n: int


def avakumovic_check(
    dec: SpectralDecomposition,
    R_set: Sequence[float],
    m: Optional[float] = None,
    n: Optional[int] = None,
) -> WindowResult:
    """sup_R ||chi_[R, R+1](L^(1/m))||^2_{1->2} / R^(n-1) on a lattice space."""
    R_set = [float(R) for R in R_set]
    if not R_set:
        raise VerificationError("R_set is empty")
    if any(R <= 0 for R in R_set):
        raise VerificationError("window positions R must be positive")
    n = n or dec.space.lattice_dim
    if n is None:
        raise VerificationError("dimension unknown; pass n for non-lattice spaces")
    per_R = {R: spectral_window_mass(dec, R, R + 1.0, m) / R ** (n - 1) for R in R_set}
    return WindowResult(max(per_R.values()), per_R, n)


# Holomorphic calculus and interpolation


def log_derivative_sup(tau: float, k: int, lam: Optional[np.ndarray] = None) -> float:
    """sup over a log-grid of |lambda^k d^k/dlambda^k lambda^(i tau)|, by finite differences."""
    lam = np.geomspace(0.5, 2.0, 4001) if lam is None else lam
    values = np.exp(1j * tau * np.log(lam))
    for _ in range(k):
        values = np.gradient(values, lam, edge_order=2)
    interior = slice(8, -8)
    return float(np.abs(lam[interior] ** k * values[interior]).max())


def cauchy_constant(k: int, theta: float) -> float:
    """k! / sin(theta)^k: the derivative bound from the Cauchy formula on the sector."""
    return factorial(k) / np.sin(theta) ** k


def holomorphic_bound_check(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    theta_set: Sequence[float],
    tau_set: Sequence[float],
    p: float,
    w: Optional[Weight] = None,
    n: Optional[float] = None,
    eps: float = HOLOMORPHIC_EPS,
    k_max: int = 3,
    seed: int = 0,
) -> VerificationReport:
    """Derivative and operator bounds for imaginary powers lambda^(i tau).

    The operator side fits alpha in sup_tau ||L^(i tau)|| e^(-|tau| theta) ~ theta^(-alpha)
    and compares it with n/2 + eps.
    """
    theta_set = np.asarray(sorted(theta_set), dtype=float)
    tau_set = [float(t) for t in tau_set]
    if theta_set.size < 2 or np.any(theta_set <= 0) or np.any(theta_set >= np.pi / 2):
        raise VerificationError("theta_set needs at least two angles in (0, pi/2)")
    if not tau_set or not all(np.isfinite(tau_set)):
        raise VerificationError("tau_set must be a nonempty set of finite reals")
    n = n if n is not None else (space.lattice_dim or fit_doubling(space).exponent_n)

    worst = 0.0
    for tau in tau_set:
        for k in range(1, k_max + 1):
            measured = log_derivative_sup(tau, k)
            for theta in theta_set:
                bound = cauchy_constant(k, theta) * np.exp(abs(tau) * theta)
                worst = max(worst, measured / (2.0 * bound))

    uppers = {}
    for tau in tau_set:
        matrix = calculus.apply_multiplier(dec, calculus.imaginary_power(tau)).matrix
        uppers[tau] = weighted_opnorm(space, matrix, p, w, seed=seed).upper
    scaled = np.array(
        [max(uppers[tau] * np.exp(-abs(tau) * theta) for tau in tau_set) for theta in theta_set]
    )
    slope, _ = np.polyfit(np.log(theta_set), np.log(scaled), 1)
    alpha = float(-slope)
    return VerificationReport(
        scenario="holomorphic",
        parameters={"p": p, "n": n, "eps": eps, "k_max": k_max},
        constants={"alpha": alpha, "alpha_limit": n / 2.0 + eps, "derivative_slack": worst},
        flags={"derivative_bound": worst <= 1.0, "alpha_bound": alpha <= n / 2.0 + eps},
        witnesses={"opnorm_by_theta": scaled.tolist(), "upper_by_tau": uppers},
        grids={"theta": theta_set.tolist(), "tau": tau_set},
        seed=seed,
    )


def interpolation_check(
    space: MetricMeasureSpace,
    dec: SpectralDecomposition,
    F: MultiplierFunction,
    w0: Weight,
    w1: Weight,
    r: float,
    q: float,
    p: float,
    root: bool = False,
    slack: float = 0.05,
    seed: int = 0,
) -> VerificationReport:
    """lower on L^p(w0^t w1^(1-t)) against upper(L^r(w0))^a upper(L^q(w1))^(1-a).

    t = (q - p)/(q - r) is the weight exponent; a = r t / p is the matching
    norm exponent of the change-of-measure interpolation.
    """
    if not 1 < r <= p <= q < np.inf:
        raise VerificationError(f"needs 1 < r <= p <= q < inf, got r={r}, p={p}, q={q}")
    t = 1.0 if q == r else (q - p) / (q - r)
    a = r * t / p
    matrix = calculus.apply_multiplier(dec, F, root).matrix
    w = w0.power(t).times(w1.power(1.0 - t))
    middle = weighted_opnorm(space, matrix, p, w, seed=seed)
    left = weighted_opnorm(space, matrix, r, w0, seed=seed)
    right = weighted_opnorm(space, matrix, q, w1, seed=seed)
    bound = left.upper**a * right.upper ** (1.0 - a)
    return VerificationReport(
        scenario="interpolation",
        parameters={"r": r, "q": q, "p": p, "t": t, "norm_exponent": a, "multiplier": F.name},
        constants={"lower": middle.lower, "bound": bound, "slack": bound / middle.lower if middle.lower else np.inf},
        flags={"holds": middle.lower <= (1.0 + slack) * bound},
        witnesses={"middle": middle.to_json(), "left": left.to_json(), "right": right.to_json()},
        seed=seed,
    )
