"""Self-adjoint operators on finite spaces and their functional calculus.

Kernels are taken with respect to mu: (F(L)f)(x) = sum_y K(x, y) f(y) mu(y),
so the identity has kernel delta_xy / mu(x).
"""

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import linalg, special

from hlab import norms
from hlab.config import DEFAULT_NORM_GRID
from hlab.errors import OperatorError
from hlab.space import MetricMeasureSpace

SPECTRUM_TOL = 1e-9
SYMMETRY_TOL = 1e-9
CHEBYSHEV_MIN_NODES = 256
POWER_ITERATIONS = 60


@dataclass(frozen=True, eq=False)
class SelfAdjointOperator:
    """Dense matrix acting on functions of a space, self-adjoint in L^2(mu)"""

    action: np.ndarray
    space: MetricMeasureSpace
    order_m: float = 2.0
    label: str = "operator"

    def __post_init__(self):
        action = np.array(self.action, dtype=float)
        n = self.space.n_pts
        if action.shape != (n, n):
            raise OperatorError(f"matrix shape {action.shape} does not match {n} points")
        if not np.all(np.isfinite(action)):
            raise OperatorError("operator matrix must be finite")
        if self.order_m < 2:
            raise OperatorError(f"order m must be >= 2, got {self.order_m}")
        weighted = self.space.mu[:, None] * action
        scale = max(1.0, float(np.abs(weighted).max()))
        if np.abs(weighted - weighted.T).max() > SYMMETRY_TOL * scale:
            raise OperatorError("operator is not self-adjoint with respect to mu")
        action.setflags(write=False)
        object.__setattr__(self, "action", action)

    @property
    def n_pts(self) -> int:
        """Size of the underlying space."""
        return self.action.shape[0]

    def to_json(self) -> dict:
        """Dense matrix plus measure."""
        return {
            "label": self.label,
            "order_m": self.order_m,
            "matrix": self.action.tolist(),
            "mu": self.space.mu.tolist(),
        }

    @classmethod
    def from_json(cls, payload: dict, space: MetricMeasureSpace) -> "SelfAdjointOperator":
        """Rebuild on a given space; the stored measure must agree with it."""
        if not np.allclose(np.asarray(payload["mu"], dtype=float), space.mu):
            raise OperatorError("stored measure does not match the space")
        return cls(
            action=np.asarray(payload["matrix"], dtype=float),
            space=space,
            order_m=float(payload.get("order_m", 2.0)),
            label=payload.get("label", "operator"),
        )

    def save(self, path: str) -> None:
        """Write to_json() to disk."""
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Ascending eigenvalues with mu-orthonormal eigenvectors as columns"""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mu: np.ndarray
    order_m: float
    space: MetricMeasureSpace

    @property
    def n_pts(self) -> int:
        return self.eigenvalues.size

    def reconstruct(self) -> np.ndarray:
        """sum_i lambda_i phi_i (x) phi_i(y) mu(y)."""
        phi = self.eigenvectors
        return (phi * self.eigenvalues) @ phi.T * self.mu[None, :]

    def orthonormality_error(self) -> float:
        """max |<phi_i, phi_j>_mu - delta_ij|."""
        phi = self.eigenvectors
        gram = phi.T @ (phi * self.mu[:, None])
        return float(np.abs(gram - np.eye(self.n_pts)).max())

    def spectral_values(
        self, F: Callable, root: bool = False, m: Optional[float] = None
    ) -> np.ndarray:
        """F(lambda_i), or F(lambda_i^(1/m)) when root is set."""
        order = self.order_m if m is None else m
        lam = self.eigenvalues ** (1.0 / order) if root else self.eigenvalues
        try:
            values = np.asarray(F(lam))
        except (TypeError, ValueError, FloatingPointError, ZeroDivisionError) as exc:
            raise OperatorError(f"multiplier cannot be evaluated on the spectrum: {exc}") from exc
        if values.shape != lam.shape:
            values = np.broadcast_to(values, lam.shape)
        if not np.all(np.isfinite(values)):
            raise OperatorError("multiplier is unbounded on the spectrum")
        return values


@dataclass(frozen=True)
class AppliedMultiplier:
    """F(L) as an operator matrix and as a mu-kernel"""

    matrix: np.ndarray
    kernel: np.ndarray
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class MultiplierFunction:
    """Bounded Borel function on [0, inf) with declared support and value at 0.

    support None means unbounded support.
    """

    func: Callable = field(repr=False)
    name: str = "custom"
    support: Optional[tuple] = None
    value_at_zero: Optional[complex] = None
    sampling_hint: int = DEFAULT_NORM_GRID

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        values = np.asarray(self.func(lam))
        if self.value_at_zero is not None:
            values = np.where(lam == 0, self.value_at_zero, values)
        return values

    def times(self, other: "MultiplierFunction") -> "MultiplierFunction":
        """Pointwise product."""
        zero = None
        if self.value_at_zero is not None and other.value_at_zero is not None:
            zero = self.value_at_zero * other.value_at_zero
        return MultiplierFunction(
            func=lambda lam: self(lam) * other(lam),
            name=f"{self.name}*{other.name}",
            support=_intersect(self.support, other.support),
            value_at_zero=zero,
            sampling_hint=max(self.sampling_hint, other.sampling_hint),
        )

    def conjugate(self) -> "MultiplierFunction":
        """Complex conjugate multiplier."""
        zero = None if self.value_at_zero is None else np.conj(self.value_at_zero)
        return MultiplierFunction(
            func=lambda lam: np.conj(self(lam)),
            name=f"conj({self.name})",
            support=self.support,
            value_at_zero=zero,
            sampling_hint=self.sampling_hint,
        )

    @classmethod
    def from_samples(cls, x: Sequence[float], y: Sequence[float], name: str = "tabulated"):
        """Linear interpolation of tabulated samples, zero outside their range."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise OperatorError("tabulated multiplier needs matching 1-d x and y with >= 2 samples")
        if np.any(np.diff(x) <= 0):
            raise OperatorError("tabulated abscissae must be strictly increasing")
        if np.any(x < 0) or not np.all(np.isfinite(y)):
            raise OperatorError("tabulated multiplier must live on [0, inf) with finite values")

        def func(lam):
            if np.iscomplexobj(y):
                return np.interp(lam, x, y.real, 0.0, 0.0) + 1j * np.interp(
                    lam, x, y.imag, 0.0, 0.0
                )
            return np.interp(lam, x, y, 0.0, 0.0)

        return cls(func=func, name=name, support=(float(x[0]), float(x[-1])))


def _intersect(a: Optional[tuple], b: Optional[tuple]) -> Optional[tuple]:
    if a is None:
        return b
    if b is None:
        return a
    return (max(a[0], b[0]), min(a[1], b[1]))


def heat_multiplier(t: float = 1.0) -> MultiplierFunction:
    """e^(-t lambda)."""
    return MultiplierFunction(lambda lam: np.exp(-t * lam), f"heat:{t:g}", None, 1.0)


def riesz_mean(delta: float) -> MultiplierFunction:
    """Bochner-Riesz mean (1 - lambda)_+^delta."""
    if delta < 0:
        raise OperatorError(f"Riesz mean order must be >= 0, got {delta}")

    def func(lam):
        base = np.clip(1.0 - lam, 0.0, None)
        return np.where(lam < 1.0, base**delta, 0.0)

    return MultiplierFunction(func, f"riesz_mean:{delta:g}", (0.0, 1.0), 1.0, 8192)


def imaginary_power(tau: float) -> MultiplierFunction:
    """lambda^(i tau); zero at lambda = 0 unless tau = 0."""

    def func(lam):
        safe = np.where(lam > 0, lam, 1.0)
        return np.where(lam > 0, np.exp(1j * tau * np.log(safe)), 0.0)

    zero = 1.0 if tau == 0 else 0.0
    return MultiplierFunction(func, f"imaginary_power:{tau:g}", None, zero)


def indicator(a: float, b: float) -> MultiplierFunction:
    """chi_[a, b]."""
    if b < a:
        raise OperatorError(f"indicator needs a <= b, got [{a}, {b}]")
    return MultiplierFunction(
        lambda lam: ((lam >= a) & (lam <= b)).astype(float),
        f"indicator:{a:g},{b:g}",
        (float(a), float(b)),
        1.0 if a <= 0 <= b else 0.0,
    )


def bump_dilate(t: float) -> MultiplierFunction:
    """eta(t lambda), the reference cutoff dilated by t."""
    if t <= 0:
        raise OperatorError(f"dilation must be > 0, got {t}")
    return MultiplierFunction(
        lambda lam: norms.eta(t * lam), f"bump_dilate:{t:g}", (0.25 / t, 1.0 / t), 0.0
    )


PRESETS = {
    "heat": heat_multiplier,
    "riesz_mean": riesz_mean,
    "imaginary_power": imaginary_power,
    "indicator": indicator,
    "bump_dilate": bump_dilate,
}


def parse_multiplier(text: str) -> MultiplierFunction:
    """Build a preset from 'name' or 'name:arg[,arg]'."""
    name, _, raw_args = text.strip().partition(":")
    if name not in PRESETS:
        raise OperatorError(f"unknown multiplier {name!r}; choose from {sorted(PRESETS)}")
    try:
        args = [float(a) for a in raw_args.split(",")] if raw_args else []
        return PRESETS[name](*args)
    except (TypeError, ValueError) as exc:
        raise OperatorError(f"bad arguments for multiplier {text!r}: {exc}") from exc


def decompose(op: SelfAdjointOperator) -> SpectralDecomposition:
    """Full eigendecomposition through the symmetrized matrix D^(1/2) A D^(-1/2)."""
    mu = op.space.mu
    root_mu = np.sqrt(mu)
    sym = root_mu[:, None] * op.action / root_mu[None, :]
    sym = 0.5 * (sym + sym.T)
    try:
        eigenvalues, vectors = linalg.eigh(sym)
    except linalg.LinAlgError as exc:
        raise OperatorError(f"eigensolver failed: {exc}") from exc
    tol = SPECTRUM_TOL * max(1.0, float(np.abs(op.action).max()))
    if eigenvalues[0] < -tol:
        raise OperatorError(f"operator is not non-negative: eigenvalue {eigenvalues[0]:.3e}")
    eigenvalues = np.where(np.abs(eigenvalues) < tol, 0.0, eigenvalues)
    eigenvectors = vectors / root_mu[:, None]
    eigenvalues.setflags(write=False)
    eigenvectors.setflags(write=False)
    return SpectralDecomposition(
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        mu=mu,
        order_m=op.order_m,
        space=op.space,
    )


def kernel_from_values(dec: SpectralDecomposition, values: np.ndarray) -> np.ndarray:
    """sum_i values_i phi_i(x) phi_i(y)."""
    phi = dec.eigenvectors
    return (phi * values) @ phi.T


def apply_multiplier(
    dec: SpectralDecomposition, F: Callable, root: bool = False
) -> AppliedMultiplier:
    """F(L) (or F(L^(1/m)) with root) as matrix and mu-kernel."""
    values = dec.spectral_values(F, root)
    kernel = kernel_from_values(dec, values)
    return AppliedMultiplier(matrix=kernel * dec.mu[None, :], kernel=kernel, values=values)


def compose_kernels(first: np.ndarray, second: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Kernel of the composition: sum_z K1(x, z) K2(z, y) mu(z)."""
    return (first * mu[None, :]) @ second


def heat_kernel(dec: SpectralDecomposition, t: float) -> np.ndarray:
    """Kernel p_t of e^(-tL)."""
    if t <= 0:
        raise OperatorError(f"heat time must be > 0, got {t}")
    return kernel_from_values(dec, np.exp(-t * dec.eigenvalues))


def power_iteration_bound(op: SelfAdjointOperator, iterations: int = POWER_ITERATIONS) -> float:
    """Rayleigh-quotient lower bound for the top of the spectrum."""
    mu = op.space.mu
    rng = np.random.default_rng(0)
    v = rng.standard_normal(op.n_pts)
    estimate = 0.0
    for _ in range(iterations):
        w = op.action @ v
        norm = np.sqrt(np.sum(w * w * mu))
        if norm == 0:
            return 0.0
        v = w / norm
        estimate = float(np.sum(v * (op.action @ v) * mu) / np.sum(v * v * mu))
    return estimate


def chebyshev_coefficients(
    F: Callable, degree: int, interval: tuple, n_nodes: Optional[int] = None
) -> np.ndarray:
    """c_k = 2/K sum_j F(a1 x_j + a2) cos(pi k (j + 1/2)/K) on K Chebyshev nodes."""
    n_nodes = n_nodes or max(4 * degree, CHEBYSHEV_MIN_NODES)
    lo, hi = interval
    a1 = (hi - lo) / 2.0
    a2 = (hi + lo) / 2.0
    theta = np.pi * (np.arange(n_nodes) + 0.5) / n_nodes
    samples = np.asarray(F(a1 * np.cos(theta) + a2))
    orders = np.arange(n_nodes)[:, None]
    return 2.0 / n_nodes * (np.cos(orders * theta[None, :]) @ samples)


def chebyshev_tail(F: Callable, degree: int, interval: tuple) -> float:
    """2 sum_{k > degree} |c_k|: bound on the truncation error per unit ||f||."""
    coeffs = chebyshev_coefficients(F, degree, interval)
    return float(2.0 * np.abs(coeffs[degree + 1 :]).sum())


def chebyshev_apply(
    op: SelfAdjointOperator,
    F: Callable,
    degree: int,
    spectral_interval: tuple,
    f: np.ndarray,
) -> np.ndarray:
    """Truncated Chebyshev expansion of F on [0, Lambda] applied to f by three-term recurrence."""
    if degree < 0:
        raise OperatorError(f"degree must be >= 0, got {degree}")
    lo, hi = float(spectral_interval[0]), float(spectral_interval[1])
    if not hi > lo:
        raise OperatorError(f"spectral interval must satisfy lo < hi, got {spectral_interval}")
    top = power_iteration_bound(op)
    if top > hi * (1.0 + 1e-9) + 1e-12:
        raise OperatorError(f"spectral bound {hi:g} is below the spectrum (found {top:.6g})")
    c = chebyshev_coefficients(F, degree, (lo, hi))[: degree + 1]
    a1 = (hi - lo) / 2.0
    a2 = (hi + lo) / 2.0
    f = np.asarray(f)
    dtype = np.result_type(c, f, float)
    twf_old = f.astype(dtype)
    result = 0.5 * c[0] * twf_old
    if degree == 0:
        return result
    twf_cur = (op.action @ twf_old - a2 * twf_old) / a1
    result = result + c[1] * twf_cur
    for k in range(2, degree + 1):
        twf_new = 2.0 / a1 * (op.action @ twf_cur - a2 * twf_cur) - twf_old
        result = result + c[k] * twf_new
        twf_old, twf_cur = twf_cur, twf_new
    return result


def graph_adjacency(space: MetricMeasureSpace, radius: float = 1.0) -> np.ndarray:
    """Unit edges between distinct points at distance <= radius."""
    return ((space.dist <= radius + 1e-12) & (space.dist > 0)).astype(float)


def build_laplacian(
    space: MetricMeasureSpace,
    edges: Optional[np.ndarray] = None,
    order_m: float = 2.0,
) -> SelfAdjointOperator:
    """(Lf)(x) = (1/mu(x)) sum_y a(x, y)(f(x) - f(y)); defaults to nearest-neighbour edges."""
    a = graph_adjacency(space) if edges is None else np.array(edges, dtype=float)
    if a.shape != (space.n_pts, space.n_pts):
        raise OperatorError(f"adjacency shape {a.shape} does not match {space.n_pts} points")
    if np.any(a < 0):
        raise OperatorError("edge weights must be non-negative")
    if np.abs(a - a.T).max() > SYMMETRY_TOL * max(1.0, float(a.max())):
        raise OperatorError("adjacency must be symmetric")
    a = 0.5 * (a + a.T)
    np.fill_diagonal(a, 0.0)
    action = (np.diag(a.sum(axis=1)) - a) / space.mu[:, None]
    return SelfAdjointOperator(action, space, order_m, f"laplacian({space.label})")


def build_dirichlet_laplacian(space: MetricMeasureSpace, order_m: float = 2.0) -> SelfAdjointOperator:
    """2d f(x) - sum of masked neighbours: the lattice Laplacian killed outside the mask."""
    if space.lattice_dim is None:
        raise OperatorError("Dirichlet Laplacian needs a lattice space with coordinates")
    if space.periodic:
        raise OperatorError("Dirichlet Laplacian needs a non-periodic masked grid")
    a = graph_adjacency(space)
    action = (2 * space.lattice_dim * np.eye(space.n_pts) - a) / space.mu[:, None]
    return SelfAdjointOperator(action, space, order_m, f"dirichlet({space.label})")


def build_schrodinger(
    space: MetricMeasureSpace, V: Sequence[float], order_m: float = 2.0
) -> SelfAdjointOperator:
    """Lattice Laplacian plus the multiplication operator by V >= 0."""
    V = np.asarray(V, dtype=float)
    if V.shape != (space.n_pts,):
        raise OperatorError(f"potential has shape {V.shape}, expected ({space.n_pts},)")
    if not np.all(np.isfinite(V)) or np.any(V < 0):
        raise OperatorError("potential must be finite and non-negative")
    base = build_laplacian(space, order_m=order_m)
    return SelfAdjointOperator(base.action + np.diag(V), space, order_m, f"schrodinger({space.label})")


def grid_index(space: MetricMeasureSpace) -> np.ndarray:
    """Row-major positions of a masked grid's cells inside its full rectangle."""
    if space.coords is None or space.lattice_shape is None or len(space.lattice_shape) != 2:
        raise OperatorError("grid_index needs a 2-d masked grid")
    return space.coords[:, 0] * space.lattice_shape[1] + space.coords[:, 1]


def regularize_multiplier(F: Callable, r: float, M: int, m: float) -> MultiplierFunction:
    """F(lambda)(1 - e^(-(r lambda)^m))^M; vanishes at 0."""
    if M < 1:
        raise OperatorError(f"M must be >= 1, got {M}")
    if r <= 0:
        raise OperatorError(f"r must be > 0, got {r}")
    name = getattr(F, "name", "F")
    support = getattr(F, "support", None)
    return MultiplierFunction(
        func=lambda lam: np.asarray(F(lam)) * (1.0 - np.exp(-((r * lam) ** m))) ** M,
        name=f"{name}_r{r:g}_M{M}",
        support=support,
        value_at_zero=0.0,
        sampling_hint=getattr(F, "sampling_hint", DEFAULT_NORM_GRID),
    )


def piece_range(lo: float, hi: float) -> range:
    """Indices l with phi(2^-l .) possibly nonzero on [lo, hi], lo > 0."""
    if not 0 < lo <= hi:
        raise OperatorError(f"need 0 < lo <= hi, got [{lo}, {hi}]")
    return range(int(np.floor(np.log2(lo))), int(np.ceil(np.log2(hi))) + 3)


def dyadic_pieces(
    F: Callable,
    lam_range: tuple,
    phi: Optional[Callable] = None,
) -> dict:
    """{l: phi(2^-l lambda) F(lambda)} for the pieces that can meet [lo, hi]."""
    if phi is None:
        phi = norms.bump_phi(check=True)
    else:
        residual = norms.partition_residual(phi)
        if residual > norms.PARTITION_TOL:
            raise OperatorError(f"bump is not a dyadic partition of unity (residual {residual:.3e})")
    name = getattr(F, "name", "F")
    pieces = {}
    for ell in piece_range(*lam_range):
        pieces[ell] = MultiplierFunction(
            func=lambda lam, ell=ell: phi(lam * 2.0 ** (-ell)) * np.asarray(F(lam)),
            name=f"{name}^{ell}",
            support=(0.25 * 2.0**ell, 2.0**ell),
            value_at_zero=0.0,
        )
    return pieces


def _as_decomposition(op: Union[SelfAdjointOperator, SpectralDecomposition]) -> SpectralDecomposition:
    return decompose(op) if isinstance(op, SelfAdjointOperator) else op


def smoothing_family(
    op: Union[SelfAdjointOperator, SpectralDecomposition],
    r: float,
    M: int,
    direct: bool = False,
) -> np.ndarray:
    """A_r = I - (I - e^(-r^m L))^M as an operator matrix.

    The default expands into sum_{j=1..M} (-1)^(j+1) C(M, j) e^(-j r^m L);
    direct=True takes the matrix power instead.
    """
    if r <= 0 or M < 1:
        raise OperatorError(f"needs r > 0 and M >= 1, got r={r}, M={M}")
    dec = _as_decomposition(op)
    tau = r**dec.order_m
    ident = np.eye(dec.n_pts)
    if direct:
        heat = apply_multiplier(dec, lambda lam: np.exp(-tau * lam)).matrix
        return ident - np.linalg.matrix_power(ident - heat, M)
    total = np.zeros((dec.n_pts, dec.n_pts))
    for j in range(1, M + 1):
        sign = 1.0 if j % 2 else -1.0
        heat_j = apply_multiplier(dec, lambda lam, j=j: np.exp(-j * tau * lam)).matrix
        total += sign * special.comb(M, j, exact=True) * heat_j
    return total


def root_vs_plain_constant(
    F: Callable,
    s: float,
    q: float,
    m: float,
    t_grid: Optional[Sequence[float]] = None,
    n_points: Optional[int] = None,
) -> dict:
    """Hörmander norms of F and of lambda -> F(lambda^(1/m)), with their ratio.

    These are the norms controlling F(L^(1/m)) and F(L) respectively.
    """
    root = norms.hormander_norm(F, s, q, t_grid=t_grid, n_points=n_points)
    plain = norms.hormander_norm(
        lambda lam: np.asarray(F(np.abs(lam) ** (1.0 / m))), s, q, t_grid=t_grid, n_points=n_points
    )
    return {"root": root, "plain": plain, "ratio": plain / root}


def dilate(F: Callable, t: float) -> MultiplierFunction:
    """delta_t F: lambda -> F(t lambda)."""
    if t <= 0:
        raise OperatorError(f"dilation must be > 0, got {t}")
    support = getattr(F, "support", None)
    if support is not None:
        support = (support[0] / t, support[1] / t)
    return MultiplierFunction(
        func=lambda lam: np.asarray(F(t * np.asarray(lam))),
        name=f"{getattr(F, 'name', 'F')}@{t:g}",
        support=support,
        value_at_zero=getattr(F, "value_at_zero", None),
        sampling_hint=getattr(F, "sampling_hint", DEFAULT_NORM_GRID),
    )


def constant_multiplier(value: complex = 1.0) -> MultiplierFunction:
    """F = value everywhere."""
    return MultiplierFunction(
        lambda lam: np.full(np.shape(lam), value), f"constant:{value:g}", None, value
    )
