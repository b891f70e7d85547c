"""Multiplier norms: Bessel-potential Sobolev norms, the dilated Hörmander norm,
the cellwise ||.||_{N,q} norm, and the cutoff/mollifier constructions they use.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from hlab.config import SETTINGS
from hlab.errors import NormError
from hlab.progress import parallel_map, warn

EDGE_TOL = 1e-12
HORMANDER_WINDOW = (0.0, 2.0)
NQ_WINDOW = (-1.0, 2.0)
POINTS_PER_CELL = 8
T_PER_OCTAVE = 4
# fallback t-range when no spectrum is given: 2^-10 .. 2^10
DEFAULT_T_GRID = 2.0 ** (np.arange(-40, 41) / T_PER_OCTAVE)
PARTITION_TOL = 1e-10
MOMENT_TOL = 1e-10
REFINE_TOL = 1e-3


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples on the uniform grid a + k*h, k < n, with h = (b - a)/n.

    The samples must vanish at both ends of the window so the periodic
    discrete Fourier transform sees a compactly supported function.
    """

    window: tuple
    samples: np.ndarray
    support: Optional[tuple] = None

    def __post_init__(self):
        a, b = float(self.window[0]), float(self.window[1])
        if not b > a:
            raise NormError(f"window must satisfy a < b, got {self.window}")
        samples = np.array(self.samples)
        if samples.ndim != 1 or samples.size < 2:
            raise NormError("samples must be a 1-d array with at least 2 entries")
        if not np.all(np.isfinite(samples)):
            raise NormError("samples must be finite")
        peak = max(1.0, float(np.abs(samples).max()))
        if abs(samples[0]) > EDGE_TOL * peak or abs(samples[-1]) > EDGE_TOL * peak:
            raise NormError(f"support touches the window boundary {self.window}")
        samples.setflags(write=False)
        object.__setattr__(self, "window", (a, b))
        object.__setattr__(self, "samples", samples)

    @property
    def spacing(self) -> float:
        """Grid spacing h."""
        return (self.window[1] - self.window[0]) / self.samples.size

    @property
    def grid(self) -> np.ndarray:
        """Sample abscissae."""
        return self.window[0] + self.spacing * np.arange(self.samples.size)

    @classmethod
    def from_callable(
        cls,
        func: Callable,
        window: tuple,
        n_points: Optional[int] = None,
        support: Optional[tuple] = None,
    ) -> "GridFunction":
        """Sample func on the window's grid."""
        n_points = n_points or SETTINGS.norm_grid
        if n_points > SETTINGS.max_grid:
            raise NormError(f"grid of {n_points} points exceeds cap {SETTINGS.max_grid}")
        a, b = window
        x = a + (b - a) / n_points * np.arange(n_points)
        return cls(window=(a, b), samples=np.asarray(func(x)), support=support)

    def scaled(self, c: complex) -> "GridFunction":
        """c * F."""
        return GridFunction(self.window, c * self.samples, self.support)

    def to_json(self) -> dict:
        """{window, spacing, samples}; complex samples carry an imag list."""
        payload = {
            "window": list(self.window),
            "spacing": self.spacing,
            "samples": np.real(self.samples).tolist(),
        }
        if np.iscomplexobj(self.samples):
            payload["samples_imag"] = np.imag(self.samples).tolist()
        return payload

    @classmethod
    def from_json(cls, payload: dict) -> "GridFunction":
        """Inverse of to_json."""
        samples = np.asarray(payload["samples"], dtype=float)
        if "samples_imag" in payload:
            samples = samples + 1j * np.asarray(payload["samples_imag"], dtype=float)
        return cls(window=tuple(payload["window"]), samples=samples)


def eta(lam) -> np.ndarray:
    """Reference cutoff exp(-1/((x - 1/4)(1 - x))) on (1/4, 1), zero elsewhere."""
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    inside = (lam > 0.25) & (lam < 1.0)
    x = lam[inside]
    out[inside] = np.exp(-1.0 / ((x - 0.25) * (1.0 - x)))
    return out


ETA_PEAK = float(np.exp(-64.0 / 9.0))


def bump_eta(n_points: Optional[int] = None) -> tuple:
    """The cutoff on the Hörmander window and its callable."""
    return GridFunction.from_callable(eta, HORMANDER_WINDOW, n_points, (0.25, 1.0)), eta


def _dyadic_sum(lam: np.ndarray) -> np.ndarray:
    k0 = np.floor(np.log2(lam))
    total = np.zeros_like(lam)
    for j in range(-1, 4):
        total += eta(lam * 2.0 ** (-(k0 + j)))
    return total


def phi(lam) -> np.ndarray:
    """Dyadic partition bump: eta(x) / sum_l eta(2^-l x); sum_l phi(2^-l x) = 1 for x > 0."""
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    inside = (lam > 0.25) & (lam < 1.0)
    x = lam[inside]
    out[inside] = eta(x) / _dyadic_sum(x)
    return out


def partition_residual(bump: Callable = phi, lo_exp: int = -20, hi_exp: int = 20) -> float:
    """max |sum_l bump(2^-l x) - 1| on a log-grid over [2^lo, 2^hi]."""
    lam = 2.0 ** np.linspace(lo_exp, hi_exp, 4001)
    total = np.zeros_like(lam)
    for ell in range(lo_exp - 2, hi_exp + 3):
        total += bump(lam * 2.0 ** (-ell))
    return float(np.abs(total - 1.0).max())


def bump_phi(check: bool = True) -> Callable:
    """The partition bump, verified on the standard log-grid."""
    if check:
        residual = partition_residual(phi)
        if residual > PARTITION_TOL:
            raise NormError(f"partition of unity residual {residual:.3e} exceeds tolerance")
    return phi


def lq_norm(values: np.ndarray, spacing: float, q: float) -> float:
    """Rectangle-rule L^q norm; q = inf is the grid max."""
    mag = np.abs(values)
    if np.isinf(q):
        return float(mag.max())
    if q < 1:
        raise NormError(f"L^q needs q >= 1, got {q}")
    return float((spacing * np.sum(mag**q)) ** (1.0 / q))


def bessel_potential(samples: np.ndarray, spacing: float, s: float) -> np.ndarray:
    """(I - d^2/dx^2)^(s/2) through the multiplier (1 + xi^2)^(s/2) on the DFT grid."""
    xi = 2.0 * np.pi * np.fft.fftfreq(samples.size, d=spacing)
    return np.fft.ifft(np.fft.fft(samples) * (1.0 + xi**2) ** (s / 2.0))


def sobolev_norm(F: GridFunction, s: float, q: float) -> float:
    """||(I - d^2/dx^2)^(s/2) F||_{L^q} on the window."""
    if s < 0:
        raise NormError(f"Sobolev order must be >= 0, got {s}")
    if s == 0:
        return lq_norm(F.samples, F.spacing, q)
    return lq_norm(bessel_potential(F.samples, F.spacing, s), F.spacing, q)


def refined(evaluate: Callable[[int], float], n_points: Optional[int] = None, tol: float = REFINE_TOL) -> tuple:
    """(value, samples): double the sample count until two successive values agree to tol.

    Relative agreement; the count never passes SETTINGS.max_grid and hitting
    that cap only warns.
    """
    n = n_points or SETTINGS.norm_grid
    if n > SETTINGS.max_grid:
        raise NormError(f"grid of {n} points exceeds cap {SETTINGS.max_grid}")
    previous = evaluate(n)
    while 2 * n <= SETTINGS.max_grid:
        n *= 2
        current = evaluate(n)
        if abs(current - previous) <= tol * max(abs(current), EDGE_TOL):
            return current, n
        previous = current
    warn(f"norm not settled to {tol:g} at the {n}-point cap; keeping {previous:.6g}")
    return previous, n


def dyadic_t_grid(spectrum: Sequence[float], per_octave: int = T_PER_OCTAVE) -> np.ndarray:
    """Dilations 2^(k/per_octave) covering [lambda_min_pos / 2, 2 lambda_max]."""
    spectrum = np.asarray(spectrum, dtype=float)
    positive = spectrum[spectrum > 0]
    if positive.size == 0:
        return np.array([1.0])
    lo = np.floor(np.log2(positive.min() / 2.0) * per_octave)
    hi = np.ceil(np.log2(2.0 * positive.max()) * per_octave)
    return 2.0 ** (np.arange(lo, hi + 1) / per_octave)


def _cutoff_times(F: Callable, t: float, lam: np.ndarray, cut: np.ndarray) -> np.ndarray:
    inside = cut > 0
    values = np.zeros(lam.size, dtype=complex)
    try:
        values[inside] = cut[inside] * np.asarray(F(t * lam[inside]))
    except (TypeError, ValueError, FloatingPointError, ZeroDivisionError) as exc:
        raise NormError(f"multiplier cannot be evaluated at dilation t={t}: {exc}") from exc
    if not np.all(np.isfinite(values)):
        raise NormError(f"multiplier is not finite on the support at dilation t={t}")
    return values


def hormander_profile(
    F: Callable,
    s: float,
    q: float,
    t_grid: Optional[Sequence[float]] = None,
    spectrum: Optional[Sequence[float]] = None,
    n_points: Optional[int] = None,
    eta_dilation: float = 1.0,
) -> tuple:
    """(t_grid, ||eta delta_t F||_{W^q_s} per t); eta_dilation swaps eta for eta(./a)."""
    if t_grid is None:
        t_grid = dyadic_t_grid(spectrum) if spectrum is not None else DEFAULT_T_GRID
    t_grid = np.asarray(t_grid, dtype=float)
    n_points = n_points or SETTINGS.norm_grid
    a, b = HORMANDER_WINDOW
    lam = a + (b - a) / n_points * np.arange(n_points)
    cut = eta(lam / eta_dilation)

    def one(t: float) -> float:
        values = _cutoff_times(F, t, lam, cut)
        return sobolev_norm(GridFunction(HORMANDER_WINDOW, values), s, q)

    return t_grid, np.array(parallel_map(one, list(t_grid)))


def hormander_norm(
    F: Callable,
    s: float,
    q: float,
    t_grid: Optional[Sequence[float]] = None,
    spectrum: Optional[Sequence[float]] = None,
    n_points: Optional[int] = None,
    eta_dilation: float = 1.0,
    refine: bool = False,
) -> float:
    """sup over the t-grid of ||eta delta_t F||_{W^q_s}.

    With refine the sample count starts at n_points and doubles until the
    value settles (see refined).
    """
    if refine:
        value, _ = refined(lambda n: hormander_norm(F, s, q, t_grid, spectrum, n, eta_dilation), n_points)
        return value
    _, norms = hormander_profile(F, s, q, t_grid, spectrum, n_points, eta_dilation)
    return float(norms.max())


def eta_norm(s: float, q: float, n_points: Optional[int] = None) -> float:
    """||eta||_{W^q_s}: the Hörmander norm of a constant multiplier 1."""
    grid, _ = bump_eta(n_points)
    return sobolev_norm(grid, s, q)


def _cell_sups(x: np.ndarray, values: np.ndarray, N: int) -> np.ndarray:
    cells = np.floor((x - NQ_WINDOW[0]) * N + 1e-9).astype(int)
    sups = np.zeros(3 * N)
    keep = (cells >= 0) & (cells < 3 * N)
    np.maximum.at(sups, cells[keep], np.abs(values[keep]))
    return sups


def nq_norm(
    F: Union[GridFunction, Callable],
    N: int,
    q: float,
    points_per_cell: int = POINTS_PER_CELL,
) -> float:
    """((1/3N) sum over the 3N cells [(l-1)/N, l/N) of [-1, 2] of sup|F|^q)^(1/q).

    q = inf gives ||F||_inf. Callables are sampled at cell-interior points;
    grid functions coarser than points_per_cell per cell are interpolated.
    """
    if N < 1:
        raise NormError(f"N must be a positive integer, got {N}")
    ppc = max(points_per_cell, POINTS_PER_CELL)
    lo, hi = NQ_WINDOW
    fine = lo + (np.arange(3 * N * ppc) + 0.5) / (N * ppc)
    if isinstance(F, GridFunction):
        x, values = F.grid, F.samples
        outside = (x < lo) | (x >= hi)
        peak = max(1.0, float(np.abs(values).max()))
        if np.any(np.abs(values[outside]) > EDGE_TOL * peak):
            raise NormError("function is not supported in [-1, 2]")
        if F.spacing > 1.0 / (N * ppc):
            values = np.interp(fine, x, values.real) + 1j * np.interp(fine, x, values.imag)
            x = fine
    else:
        x = fine
        values = np.asarray(F(fine))
    if np.isinf(q):
        return float(np.abs(values).max())
    if q < 1:
        raise NormError(f"q must be >= 1, got {q}")
    sups = _cell_sups(x, values, N)
    return float(np.mean(sups**q) ** (1.0 / q))


def _base_bump(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def _solve_moments(moments: np.ndarray, order: int) -> np.ndarray:
    # unknown P(u) = sum a_k u^k with u = t^2: sum_k m_{2j+2k} a_k = [j == 0]
    size = order // 2 + 1
    system = np.array([[moments[2 * (j + k)] for k in range(size)] for j in range(size)])
    rhs = np.zeros(size)
    rhs[0] = 1.0
    try:
        coeffs = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise NormError(f"mollifier moment system is singular: {exc}") from exc
    if np.abs(system @ coeffs - rhs).max() > MOMENT_TOL:
        raise NormError("mollifier moment system is ill-conditioned")
    return coeffs


@dataclass(frozen=True, eq=False)
class Mollifier:
    """Even bump on [-1, 1] times a polynomial in t^2.

    Integral 1 and vanishing moments 1..order, order = [s] + 2. The
    polynomial factor makes it change sign.
    """

    s: float
    order: int
    coefficients: np.ndarray = field(repr=False)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return _base_bump(t) * np.polynomial.polynomial.polyval(t**2, self.coefficients)

    def moment(self, k: int) -> float:
        """Quadrature value of the k-th moment."""
        value, _ = integrate.quad(
            lambda t: t**k * float(self(t)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200
        )
        return value

    def discrete_weights(self, spacing: float, N: int) -> np.ndarray:
        """Stencil of xi_N(t) = N xi(N t) on offsets k*spacing, moments exact on the stencil."""
        half = int(np.floor(1.0 / (N * spacing) + 1e-9))
        t = np.arange(-half, half + 1) * spacing * N
        base = _base_bump(t)
        moments = np.array([np.sum(base * t**k) for k in range(2 * (self.order // 2) * 2 + 1)])
        coeffs = _solve_moments(moments, self.order)
        return base * np.polynomial.polynomial.polyval(t**2, coeffs)


def mollifier_xi(s: float, n_points: Optional[int] = None) -> tuple:
    """(grid on [-1.5, 1.5], callable) of the moment-corrected mollifier for smoothness s."""
    if s < 0:
        raise NormError(f"smoothness must be >= 0, got {s}")
    order = int(np.floor(s)) + 2
    moments = np.array(
        [
            integrate.quad(
                lambda t, k=k: t**k * float(_base_bump(t)),
                -1.0,
                1.0,
                epsabs=1e-15,
                epsrel=1e-13,
                limit=200,
            )[0]
            for k in range(2 * (order // 2) * 2 + 1)
        ]
    )
    xi = Mollifier(s=s, order=order, coefficients=_solve_moments(moments, order))
    return GridFunction.from_callable(xi, (-1.5, 1.5), n_points, (-1.0, 1.0)), xi


def mollify(G: GridFunction, xi: Mollifier, N: int) -> GridFunction:
    """G * xi_N on G's grid; the window grows by the stencil half-width (about 1/N)."""
    if N < 1:
        raise NormError(f"N must be a positive integer, got {N}")
    h = G.spacing
    if h > 1.0 / (8 * N) + 1e-15:
        raise NormError(f"grid spacing {h:.3e} too coarse for scale N={N} (needs <= 1/(8N))")
    x = G.grid
    peak = max(1.0, float(np.abs(G.samples).max()))
    off_support = (x < -h / 2) | (x > 1.0 + h / 2)
    if np.any(np.abs(G.samples[off_support]) > EDGE_TOL * peak):
        raise NormError("mollify needs G supported in [0, 1]")
    weights = xi.discrete_weights(h, N)
    half = (weights.size - 1) // 2
    out = np.convolve(G.samples, weights, mode="full")
    a, b = G.window
    return GridFunction((a - half * h, b + half * h), out)


def pad_to(G: GridFunction, window: tuple) -> GridFunction:
    """Zero-extend G onto a larger window sharing its grid."""
    h = G.spacing
    left = int(round((G.window[0] - window[0]) / h))
    right = int(round((window[1] - G.window[1]) / h))
    if left < 0 or right < 0:
        raise NormError(f"window {window} does not contain {G.window}")
    samples = np.concatenate([np.zeros(left), G.samples, np.zeros(right)])
    return GridFunction((G.window[0] - left * h, G.window[1] + right * h), samples)


def mollification_errors(
    G: GridFunction, xi: Mollifier, N_set: Sequence[int], q: float
) -> np.ndarray:
    """||G - G * xi_N||_{N,q} for each N."""
    errors = []
    for N in N_set:
        smooth = mollify(G, xi, int(N))
        diff = smooth.samples - pad_to(G, smooth.window).samples
        errors.append(nq_norm(GridFunction(smooth.window, diff), int(N), q))
    return np.array(errors)


def mollification_rate(
    G: GridFunction, xi: Mollifier, N_set: Sequence[int], q: float
) -> float:
    """Least-squares slope of log error against log N."""
    errors = mollification_errors(G, xi, N_set, q)
    if np.any(errors <= 0):
        raise NormError("mollification error vanished; slope undefined")
    slope, _ = np.polyfit(np.log(np.asarray(N_set, dtype=float)), np.log(errors), 1)
    return float(slope)
