"""Scenario configuration and the built-in experiment suites.

A scenario is a flat TOML file with one table per concern:

    [scenario]  name, kind, seed, description
    [space]     builder, N, d, mask, ...
    [operator]  builder, potential, ...
    [multiplier] family, ...
    [norms]     s, q, grid
    [weights]   p, beta, ...
    [grids]     t, R, theta, tau, N, ...
    [output]    dir, stem
"""

import copy
import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from hlab import calculus, norms, verify
from hlab.config import SETTINGS
from hlab.errors import ConfigError, HlabError
from hlab.progress import say
from hlab.reports import write_outputs
from hlab.space import (
    MetricMeasureSpace,
    build_masked_grid,
    build_segment,
    build_torus,
    fit_doubling,
)
from hlab.weights import (
    ap_constant,
    ap_power_range,
    power_weight,
    power_weight_admissible,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SECTIONS = ("space", "operator", "multiplier", "norms", "weights", "grids", "output")
SPACE_BUILDERS = ("torus", "scaled_torus", "segment", "masked_grid")
OPERATOR_BUILDERS = ("laplacian", "dirichlet", "schrodinger")
MAX_SEED = 2**64
# smoothness used for the hypothesis flags of runners without a norms.s
DEFAULT_SMOOTHNESS = 1.5

L_MASK = """
######......
######......
######......
######......
######......
######......
############
############
############
############
############
############
"""


@dataclass
class ScenarioConfig:
    """Everything one scenario run depends on"""

    name: str
    kind: str
    seed: int = 0
    description: str = ""
    space: dict = field(default_factory=dict)
    operator: dict = field(default_factory=dict)
    multiplier: dict = field(default_factory=dict)
    norms: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, payload: dict) -> "ScenarioConfig":
        """Build from parsed TOML tables."""
        header = payload.get("scenario")
        if not isinstance(header, dict):
            raise ConfigError("missing [scenario] table", field="scenario")
        unknown = set(payload) - {"scenario", *SECTIONS}
        if unknown:
            raise ConfigError(f"unknown tables {sorted(unknown)}", field="scenario")
        kind = header.get("kind", header.get("name"))
        if not kind:
            raise ConfigError("scenario needs a name", field="scenario.name")
        tables = {}
        for section in SECTIONS:
            table = payload.get(section, {})
            if not isinstance(table, dict):
                raise ConfigError("must be a table", field=section)
            tables[section] = copy.deepcopy(table)
        return cls(
            name=str(header.get("name", kind)),
            kind=str(kind),
            seed=header.get("seed", 0),
            description=str(header.get("description", "")),
            **tables,
        )

    @classmethod
    def load(cls, path: str) -> "ScenarioConfig":
        """Parse and validate a TOML scenario file."""
        try:
            with open(path, "rb") as fh:
                payload = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path} is not valid TOML: {exc}") from exc
        config = cls.from_dict(payload)
        validate(config)
        return config

    def to_dict(self) -> dict:
        """Tables as written in a scenario file."""
        payload = {
            "scenario": {
                "name": self.name,
                "kind": self.kind,
                "seed": self.seed,
                "description": self.description,
            }
        }
        for section in SECTIONS:
            payload[section] = copy.deepcopy(getattr(self, section))
        return payload

    def get(self, section: str, key: str, default=None):
        """Value of section.key, or default."""
        return getattr(self, section).get(key, default)

    def require(self, section: str, key: str):
        """Value of section.key; missing keys are config errors."""
        table = getattr(self, section)
        if key not in table:
            raise ConfigError("is required", field=f"{section}.{key}")
        return table[key]


@dataclass
class ScenarioOutcome:
    """Reports and CSV rows of one run"""

    reports: list
    rows: list

    @property
    def passed(self) -> bool:
        """All reports pass."""
        return all(r.passed for r in self.reports)


# Validation


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _numbers(config: ScenarioConfig, section: str, key: str) -> list:
    values = _as_list(config.get(section, key, []))
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"expected numbers, got {v!r}", field=f"{section}.{key}")
    return [float(v) for v in values]


def _check_range(config, section, key, lo=None, hi=None, lo_open=False) -> None:
    for v in _numbers(config, section, key):
        if lo is not None and (v < lo or (lo_open and v == lo)):
            bound = ">" if lo_open else ">="
            raise ConfigError(f"must be {bound} {lo:g}, got {v:g}", field=f"{section}.{key}")
        if hi is not None and v > hi:
            raise ConfigError(f"must be <= {hi:g}, got {v:g}", field=f"{section}.{key}")


def _space_size(config: ScenarioConfig) -> list:
    builder = config.get("space", "builder", "torus")
    if builder in ("torus", "scaled_torus"):
        sides = [int(v) for v in _numbers(config, "space", "N")]
        dims = [int(v) for v in _numbers(config, "space", "d")] or [1]
        if len(dims) == 1:
            dims = dims * len(sides)
        if len(dims) != len(sides):
            raise ConfigError("needs one dimension per side length", field="space.d")
        for N, d in zip(sides, dims):
            if N < 2:
                raise ConfigError(f"side length must be >= 2, got {N}", field="space.N")
            if d not in (1, 2, 3):
                raise ConfigError(f"dimension must be 1, 2 or 3, got {d}", field="space.d")
        return [N**d for N, d in zip(sides, dims)]
    if builder == "segment":
        return [2 * int(v) + 1 for v in _numbers(config, "space", "half_length")]
    if builder == "masked_grid":
        return [int(config.get("space", "width", 1)) * int(config.get("space", "height", 1))]
    raise ConfigError(f"unknown builder {builder!r}; choose from {SPACE_BUILDERS}", field="space.builder")


def validate(config: ScenarioConfig) -> None:
    """Check every referenced builder and parameter range before anything runs."""
    if config.kind not in BUILTIN:
        raise ConfigError(f"unknown scenario {config.kind!r}", field="scenario.kind")
    if isinstance(config.seed, bool) or not isinstance(config.seed, int):
        raise ConfigError(f"seed must be an integer, got {config.seed!r}", field="scenario.seed")
    if not 0 <= config.seed < MAX_SEED:
        raise ConfigError("seed must be a 64-bit unsigned integer", field="scenario.seed")
    if config.space:
        for n_pts in _space_size(config):
            if n_pts > SETTINGS.max_points:
                raise ConfigError(
                    f"space has {n_pts} points, cap is {SETTINGS.max_points}", field="space.N"
                )
    builder = config.get("operator", "builder")
    if builder is not None and builder not in OPERATOR_BUILDERS:
        raise ConfigError(
            f"unknown builder {builder!r}; choose from {OPERATOR_BUILDERS}", field="operator.builder"
        )
    for text in _as_list(config.get("multiplier", "family", [])):
        try:
            calculus.parse_multiplier(str(text))
        except HlabError as exc:
            raise ConfigError(str(exc), field="multiplier.family") from exc
    _check_range(config, "weights", "p", lo=1.0)
    _check_range(config, "norms", "s", lo=0.0)
    _check_range(config, "norms", "q", lo=1.0)
    _check_range(config, "grids", "t", lo=0.0, lo_open=True)
    _check_range(config, "grids", "R", lo=0.0, lo_open=True)
    _check_range(config, "grids", "theta", lo=0.0, hi=np.pi / 2, lo_open=True)
    _check_range(config, "grids", "N", lo=1.0)
    variant = config.get("norms", "variant", "global")
    if variant not in verify.RATIO_VARIANTS:
        raise ConfigError(
            f"unknown variant {variant!r}; choose from {verify.RATIO_VARIANTS}", field="norms.variant"
        )
    grid = int(config.get("norms", "grid", SETTINGS.norm_grid))
    if grid > SETTINGS.max_grid:
        raise ConfigError(f"norm grid {grid} exceeds cap {SETTINGS.max_grid}", field="norms.grid")
    BUILTIN[config.kind].validate(config)


# Shared builders


def scaled_torus(N: int, d: int = 1) -> MetricMeasureSpace:
    """Z_N^d with spacing h = 2 pi / N and measure h^d: the lattice version of the flat torus."""
    base = build_torus(N, d)
    h = 2.0 * np.pi / N
    return dataclasses.replace(
        base, dist=base.dist * h, mu=np.full(base.n_pts, h**d), label=f"T_{N}^{d}"
    )


def build_space(config: ScenarioConfig, index: int = 0) -> MetricMeasureSpace:
    """The index-th space of the configured ladder."""
    builder = config.get("space", "builder", "torus")
    if builder in ("torus", "scaled_torus"):
        sides = [int(v) for v in _numbers(config, "space", "N")]
        dims = [int(v) for v in _numbers(config, "space", "d")] or [1]
        d = dims[index] if len(dims) > 1 else dims[0]
        if builder == "torus":
            return build_torus(sides[index], d)
        return scaled_torus(sides[index], d)
    if builder == "segment":
        return build_segment(int(_numbers(config, "space", "half_length")[index]))
    return build_masked_grid(
        int(config.require("space", "width")),
        int(config.require("space", "height")),
        config.get("space", "mask"),
    )


def ladder(config: ScenarioConfig) -> list:
    """Space sizes along the configured ladder."""
    return _space_size(config)


def build_operator(config: ScenarioConfig, space: MetricMeasureSpace, rng=None):
    """Operator named in [operator] on the given space."""
    builder = config.get("operator", "builder", "laplacian")
    if builder == "dirichlet":
        return calculus.build_dirichlet_laplacian(space)
    if builder == "schrodinger":
        rng = rng or np.random.default_rng(config.seed)
        hi = float(config.get("operator", "potential_max", 1.0))
        return calculus.build_schrodinger(space, rng.uniform(0.0, hi, space.n_pts))
    if config.get("space", "builder") == "scaled_torus":
        h = 2.0 * np.pi / space.lattice_shape[0]
        edges = calculus.graph_adjacency(space, radius=h * (1 + 1e-9)) / h
        return calculus.build_laplacian(space, edges)
    return calculus.build_laplacian(space)


def family(config: ScenarioConfig) -> list:
    """Multipliers of [multiplier] family, each dilated by every grids.dilates entry."""
    base = [calculus.parse_multiplier(str(t)) for t in _as_list(config.get("multiplier", "family", []))]
    dilates = _numbers(config, "grids", "dilates") or [1.0]
    return [F if t == 1.0 else calculus.dilate(F, t) for F in base for t in dilates]


def row(config: ScenarioConfig, **values) -> dict:
    """A CSV row with every fixed column present."""
    out = {"scenario": config.name}
    out.update(values)
    for key in ("pass", "in_hypothesis"):
        if key in out and out[key] != "":
            out[key] = bool(out[key])
    return out


def _q(config: ScenarioConfig, default: float = 2.0) -> float:
    return float(config.get("norms", "q", default))


def _summary(config, rows, **report_fields) -> verify.VerificationReport:
    report = verify.VerificationReport(scenario=config.name, seed=config.seed, **report_fields)
    rows.append(
        row(
            config,
            label="summary",
            constant=next(iter(report.constants.values()), ""),
            **{"pass": report.passed},
        )
    )
    return report


def in_hypothesis(config: ScenarioConfig, space: MetricMeasureSpace, p: float, w=None, fit=None) -> bool:
    """verify.hypotheses at (norms.s, p, w) with the fitted exponents of space."""
    s = float(config.get("norms", "s", DEFAULT_SMOOTHNESS))
    fit = fit or fit_doubling(space)
    return verify.hypotheses(fit.exponent_n, fit.exponent_D, s, p, w, space).holds


# Runners


def _run_torus_hormander(config: ScenarioConfig) -> ScenarioOutcome:
    s, q = float(config.require("norms", "s")), _q(config, np.inf)
    p = float(config.require("weights", "p"))
    beta = float(config.get("weights", "beta", 0.0))
    beta_neg = float(config.get("weights", "negative_beta", 0.0))
    variant = str(config.get("norms", "variant", "global"))
    sizes = ladder(config)
    rows, reports, maxima, neg_ap, neg_flags = [], [], [], [], []
    in_hyp_all = True
    for k, n_pts in enumerate(sizes):
        space = build_space(config, k)
        dec = calculus.decompose(build_operator(config, space))
        fit = fit_doubling(space)
        n = space.lattice_dim or fit.exponent_n
        lo, hi = ap_power_range(n, p)
        report = verify.hormander_ratio(
            space,
            dec,
            family(config),
            s,
            q,
            p,
            power_weight(space, beta),
            doubling=fit,
            seed=config.seed,
            scenario=config.name,
            variant=variant,
        )
        in_hyp = report.flags["in_hypothesis"] and lo < beta < hi
        in_hyp_all &= in_hyp
        maxima.append(report.constants["max_ratio"])
        for r in report.rows:
            rows.append(
                row(config, n_pts=n_pts, p=p, q=q, s=s, beta=beta, in_hypothesis=in_hyp, **r)
            )
        w_neg = power_weight(space, beta_neg)
        neg_ap.append(ap_constant(space, w_neg, p))
        neg_check = verify.hypotheses(fit.exponent_n, fit.exponent_D, s, p, w_neg, space)
        neg_flags.append(neg_check.holds and lo < beta_neg < hi)
        rows.append(
            row(
                config,
                n_pts=n_pts,
                p=p,
                s=s,
                beta=beta_neg,
                constant=neg_ap[-1],
                in_hypothesis=neg_flags[-1],
                label="negative_control_ap",
            )
        )
        reports.append(report)
        say(f"{config.name}: N_pts={n_pts} max ratio {maxima[-1]:.4g}")
    growth = verify.ratio_growth(maxima, sizes)
    neg_growth = verify.ratio_growth(neg_ap, sizes)
    limit = float(config.get("grids", "growth_limit", 1.25))
    neg_limit = float(config.get("grids", "negative_growth", 1.5))
    reports.append(
        _summary(
            config,
            rows,
            constants={"growth": growth, "negative_growth": neg_growth},
            flags={
                "in_hypothesis": in_hyp_all,
                "bounded_growth": growth <= limit,
                "negative_grows": neg_growth >= neg_limit,
                "negative_out_of_hypothesis": not any(neg_flags),
            },
            parameters={
                "ladder": sizes,
                "s": s,
                "q": q,
                "p": p,
                "beta": beta,
                "negative_beta": beta_neg,
                "variant": variant,
            },
        )
    )
    return ScenarioOutcome(reports, rows)


def _run_power_weights(config: ScenarioConfig) -> ScenarioOutcome:
    s = float(config.require("norms", "s"))
    p_values = _numbers(config, "weights", "p")
    betas = _numbers(config, "weights", "beta")
    multipliers = family(config)
    sizes = ladder(config)
    limit = float(config.get("grids", "growth_limit", 1.25))
    uppers = {(p, b, F.name): [] for p in p_values for b in betas for F in multipliers}
    rows = []
    for k, n_pts in enumerate(sizes):
        space = build_space(config, k)
        dec = calculus.decompose(build_operator(config, space))
        n = space.lattice_dim
        for F in multipliers:
            matrix = calculus.apply_multiplier(dec, F, root=True).matrix
            for p in p_values:
                lo, hi = power_weight_admissible(n, p, s)
                for beta in betas:
                    bracket = verify.weighted_opnorm(
                        space, matrix, p, power_weight(space, beta), seed=config.seed
                    )
                    uppers[(p, beta, F.name)].append(bracket.upper)
                    rows.append(
                        row(
                            config,
                            n_pts=n_pts,
                            p=p,
                            s=s,
                            beta=beta,
                            lower=bracket.lower,
                            upper=bracket.upper,
                            in_hypothesis=lo < beta < hi,
                            label=F.name,
                        )
                    )
    growths = {}
    n = build_space(config, 0).lattice_dim
    for (p, beta, name), values in uppers.items():
        lo, hi = power_weight_admissible(n, p, s)
        if lo < beta < hi:
            growths[f"{name} p={p:g} beta={beta:g}"] = verify.ratio_growth(values, sizes)
    worst = max(growths.values()) if growths else 0.0
    report = _summary(
        config,
        rows,
        constants={"worst_in_range_growth": worst},
        flags={"bounded_in_range": worst <= limit},
        witnesses={"growth": growths},
        parameters={"ladder": sizes, "s": s, "p": p_values, "beta": betas},
    )
    return ScenarioOutcome([report], rows)


def _domination(inner: np.ndarray, outer: np.ndarray) -> float:
    return float((inner - outer).max())


def _run_dirichlet_domain(config: ScenarioConfig) -> ScenarioOutcome:
    space = build_space(config)
    full = build_masked_grid(int(config.require("space", "width")), int(config.require("space", "height")))
    dec = calculus.decompose(calculus.build_dirichlet_laplacian(space))
    dec_full = calculus.decompose(calculus.build_laplacian(full))
    index = calculus.grid_index(space)
    rows, gaps, minima = [], [], []
    for t in _numbers(config, "grids", "t"):
        inner = calculus.heat_kernel(dec, t)
        outer = calculus.heat_kernel(dec_full, t)[np.ix_(index, index)]
        gaps.append(_domination(inner, outer))
        minima.append(float(inner.min()))
        rows.append(
            row(config, n_pts=space.n_pts, constant=gaps[-1], label=f"t={t:g}", **{"pass": gaps[-1] <= 1e-12})
        )
    fit = verify.fit_gaussian_bound(space, dec, t_set=_numbers(config, "grids", "gaussian_t") or (0.5, 1, 2, 4))
    rows.append(row(config, n_pts=space.n_pts, constant=fit.C, label=f"gaussian c={fit.c:g}"))
    report = _summary(
        config,
        rows,
        constants={"max_gap": max(gaps), "gaussian_C": fit.C, "gaussian_c": fit.c},
        flags={"dominated": max(gaps) <= 1e-12, "non_negative": min(minima) >= -1e-12},
        grids={"t": _numbers(config, "grids", "t")},
        parameters={"n_pts": space.n_pts, "mask": space.label},
    )
    return ScenarioOutcome([report], rows)


def _run_schrodinger(config: ScenarioConfig) -> ScenarioOutcome:
    space = build_space(config)
    rng = np.random.default_rng(config.seed)
    dec_v = calculus.decompose(build_operator(config, space, rng))
    dec_0 = calculus.decompose(calculus.build_laplacian(space))
    rows, gaps = [], []
    for t in _numbers(config, "grids", "t"):
        gaps.append(_domination(calculus.heat_kernel(dec_v, t), calculus.heat_kernel(dec_0, t)))
        rows.append(
            row(config, n_pts=space.n_pts, constant=gaps[-1], label=f"t={t:g}", **{"pass": gaps[-1] <= 1e-12})
        )
    t_set = _numbers(config, "grids", "gaussian_t") or (0.25, 0.5, 1, 2, 4, 8, 16, 32)
    fit_v = verify.fit_gaussian_bound(space, dec_v, t_set=t_set)
    fit_0 = verify.fit_gaussian_bound(space, dec_0, t_set=t_set)
    per_c = all(fit_v.per_c[c] <= fit_0.per_c[c] * (1 + 1e-12) for c in fit_0.per_c)
    for c in fit_0.per_c:
        rows.append(
            row(config, n_pts=space.n_pts, constant=fit_v.per_c[c], upper=fit_0.per_c[c], label=f"gaussian c={c:g}")
        )
    report = _summary(
        config,
        rows,
        constants={"max_gap": max(gaps), "C_potential": fit_v.C, "C_free": fit_0.C},
        flags={"dominated": max(gaps) <= 1e-12, "gaussian_dominated": per_c},
        grids={"t": _numbers(config, "grids", "t"), "gaussian_t": list(t_set)},
        parameters={"n_pts": space.n_pts},
    )
    return ScenarioOutcome([report], rows)


def _run_holomorphic(config: ScenarioConfig) -> ScenarioOutcome:
    space = build_space(config)
    dec = calculus.decompose(build_operator(config, space))
    p = float(config.require("weights", "p"))
    report = verify.holomorphic_bound_check(
        space,
        dec,
        _numbers(config, "grids", "theta"),
        _numbers(config, "grids", "tau"),
        p,
        seed=config.seed,
    )
    report.scenario = config.name
    in_hyp = in_hypothesis(config, space, p)
    rows = [
        row(config, n_pts=space.n_pts, p=p, constant=v, in_hypothesis=in_hyp, label=f"theta={th:.6g}")
        for th, v in zip(report.grids["theta"], report.witnesses["opnorm_by_theta"])
    ]
    rows.append(
        row(
            config,
            n_pts=space.n_pts,
            p=p,
            constant=report.constants["alpha"],
            in_hypothesis=in_hyp,
            label="alpha",
            **{"pass": report.passed},
        )
    )
    return ScenarioOutcome([report], rows)


def eigen_count_mass(N: int, d: int, lo: float, hi: float) -> float:
    """Window mass on the scaled 1-d torus from the closed-form spectrum: count / (2 pi)."""
    if d != 1:
        raise ConfigError("closed-form count is implemented for d = 1", field="space.d")
    h = 2.0 * np.pi / N
    roots = np.sqrt(2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(N) / N)) / h
    return float(np.count_nonzero((roots >= lo) & (roots <= hi)) / (2.0 * np.pi))


def _run_avakumovic(config: ScenarioConfig) -> ScenarioOutcome:
    R_set = _numbers(config, "grids", "R")
    sizes = ladder(config)
    sides = [int(v) for v in _numbers(config, "space", "N")]
    d = int((_numbers(config, "space", "d") or [1])[0])
    rows, constants, oracle_gap = [], [], 0.0
    spreads = []
    for k, n_pts in enumerate(sizes):
        space = build_space(config, k)
        dec = calculus.decompose(build_operator(config, space))
        result = verify.avakumovic_check(dec, R_set)
        constants.append(result.constant)
        for R, ratio in result.per_R.items():
            rows.append(row(config, n_pts=n_pts, constant=ratio, label=f"R={R:g}"))
            if d == 1:
                exact = eigen_count_mass(sides[k], d, R, R + 1.0)
                oracle_gap = max(oracle_gap, abs(verify.spectral_window_mass(dec, R, R + 1.0) - exact))
        bumps = [calculus.bump_dilate(1.0 / R) for R in _numbers(config, "grids", "bump_R") or (2.0, 4.0, 8.0)]
        flat = verify.torus_2_to_inf_check(space, dec, bumps)
        spreads.append(flat.constants["max_ratio"] / flat.constants["min_ratio"])
        rows.append(row(config, n_pts=n_pts, constant=flat.constants["max_ratio"], label="2_to_inf_ratio"))
    stability = max(constants) / min(constants)
    report = _summary(
        config,
        rows,
        constants={"stability": stability, "oracle_gap": oracle_gap, "flat_spread": max(spreads)},
        flags={"stable": stability <= 2.0, "oracle": oracle_gap <= 1e-10},
        grids={"R": R_set},
        parameters={"ladder": sizes, "d": d},
    )
    return ScenarioOutcome([report], rows)


def sup_identity_ratio(dec: calculus.SpectralDecomposition, F: Callable) -> float:
    """max_y mu(y) sum_i |F(lambda_i^(1/m))|^2 phi_i(y)^2 / max_i |F(lambda_i^(1/m))|^2 (never above 1)."""
    values = dec.spectral_values(F, root=True)
    top = float(np.max(np.abs(values)) ** 2)
    if top == 0:
        return 0.0
    return float(np.max(verify.column_mass(dec, values) * dec.mu) / top)


def _run_plancherel_sweep(config: ScenarioConfig) -> ScenarioOutcome:
    R_set = _numbers(config, "grids", "R")
    N_set = [int(v) for v in _numbers(config, "grids", "N")]
    q_values = _numbers(config, "norms", "q")
    trials = int(config.get("grids", "trials", 16))
    sizes = ladder(config)
    rows, table = [], {}
    worst_identity, decay = 0.0, []
    rng = np.random.default_rng(config.seed)
    for k, n_pts in enumerate(sizes):
        space = build_space(config, k)
        dec = calculus.decompose(build_operator(config, space))
        for q in q_values:
            plain = verify.plancherel_constant(space, dec, q=q, R_set=R_set, trials=trials, seed=config.seed)
            cells = verify.plancherel_nq_constant(space, dec, q=q, N_set=N_set, trials=trials, seed=config.seed)
            table.setdefault(("plain", q), []).append(plain.constant)
            table.setdefault(("cells", q), []).append(cells.constant)
            rows.append(row(config, n_pts=n_pts, q=q, constant=plain.constant, label="plancherel"))
            rows.append(row(config, n_pts=n_pts, q=q, constant=cells.constant, label="plancherel_nq"))
        for _ in range(trials):
            knots = np.linspace(0.0, max(R_set), verify.PLANCHEREL_KNOTS + 1)
            F = calculus.MultiplierFunction.from_samples(knots, rng.uniform(0, 1, knots.size))
            worst_identity = max(worst_identity, sup_identity_ratio(dec, F))
        top = float(dec.eigenvalues.max()) ** 0.5
        pieces = calculus.dyadic_pieces(calculus.constant_multiplier(1.0), (top / 8, top))
        for ell, piece in pieces.items():
            if 2.0**ell > 2 * top:
                continue
            constant = verify.offdiag_decay_check(space, dec, piece, ell, s=1.0, q=2.0)
            decay.append(constant)
            rows.append(row(config, n_pts=n_pts, s=1.0, q=2.0, constant=constant, label=f"offdiag l={ell}"))
    stability = {
        f"{kind} q={q:g}": max(v) / min(v) for (kind, q), v in table.items() if min(v) > 0 and q == 2.0
    }
    report = _summary(
        config,
        rows,
        constants={"identity_ratio": worst_identity, "max_offdiag": max(decay) if decay else 0.0, **stability},
        flags={
            "identity_bound": worst_identity <= 1.0 + 1e-9,
            "stable": all(v <= 2.0 for v in stability.values()),
            "offdiag_finite": bool(np.all(np.isfinite(decay))),
        },
        grids={"R": R_set, "N": N_set, "q": q_values},
        parameters={"ladder": sizes, "trials": trials},
    )
    return ScenarioOutcome([report], rows)


def smooth_bump(x) -> np.ndarray:
    """sin(pi x)^8 on [0, 1], zero elsewhere."""
    x = np.asarray(x, dtype=float)
    return np.where((x >= 0) & (x <= 1), np.sin(np.pi * x) ** 8, 0.0)


def _run_mollification(config: ScenarioConfig) -> ScenarioOutcome:
    N_set = [int(v) for v in _numbers(config, "grids", "N")]
    n_points = int(config.get("norms", "grid", 8 * max(N_set) * 2))
    G = norms.GridFunction.from_callable(smooth_bump, (-0.5, 1.5), n_points, (0.0, 1.0))
    rows, slopes, flags = [], {}, {}
    for s in _numbers(config, "norms", "s"):
        _, xi = norms.mollifier_xi(s)
        for q in _numbers(config, "norms", "q"):
            errors = norms.mollification_errors(G, xi, N_set, q)
            slope = norms.mollification_rate(G, xi, N_set, q)
            key = f"s={s:g} q={q:g}"
            slopes[key] = slope
            flags[key] = slope <= -s + 0.3
            for N, err in zip(N_set, errors):
                rows.append(row(config, q=q, s=s, constant=err, label=f"N={N}"))
            rows.append(row(config, q=q, s=s, constant=slope, label="slope", **{"pass": flags[key]}))
    report = verify.VerificationReport(
        scenario=config.name,
        constants=slopes,
        flags=flags,
        grids={"N": N_set},
        parameters={"grid": n_points},
        seed=config.seed,
    )
    return ScenarioOutcome([report], rows)


def _run_am_criterion(config: ScenarioConfig) -> ScenarioOutcome:
    space = build_space(config)
    dec = calculus.decompose(build_operator(config, space))
    p0 = float(config.get("weights", "p0", 1.0))
    M = int(config.get("grids", "M", 2))
    rows, worst = [], 0.0
    in_hyp = in_hypothesis(config, space, p0)
    for F in family(config):
        result = verify.am_criterion_check(
            space,
            dec,
            F,
            p0,
            M,
            ball_sample=int(config.get("grids", "balls", 16)),
            f_sample=int(config.get("grids", "functions", 4)),
            seed=config.seed,
        )
        worst = max(worst, result.C_a, result.C_b)
        for side, constant in (("C_a", result.C_a), ("C_b", result.C_b)):
            rows.append(
                row(config, n_pts=space.n_pts, p=p0, constant=constant, in_hypothesis=in_hyp, label=f"{F.name} {side}")
            )
    report = _summary(
        config,
        rows,
        constants={"worst": worst},
        flags={"finite": bool(np.isfinite(worst))},
        parameters={"p0": p0, "M": M, "n_pts": space.n_pts},
    )
    return ScenarioOutcome([report], rows)


def _run_doubling_fit(config: ScenarioConfig) -> ScenarioOutcome:
    sides = [int(v) for v in _numbers(config, "space", "N")]
    dims = [int(v) for v in _numbers(config, "space", "d")]
    tolerance = float(config.get("grids", "exponent_tolerance", 0.2))
    rows, flags = [], {}
    for N, d in zip(sides, dims):
        space = build_torus(N, d)
        fit = fit_doubling(space)
        ok = abs(fit.exponent_n - d) <= tolerance and fit.exponent_D <= tolerance
        flags[space.label] = ok
        rows.append(row(config, n_pts=space.n_pts, constant=fit.exponent_n, label=f"{space.label} n", **{"pass": ok}))
        rows.append(row(config, n_pts=space.n_pts, constant=fit.exponent_D, label=f"{space.label} D", **{"pass": ok}))
    if config.get("space", "mask"):
        masked = build_masked_grid(
            int(config.require("space", "width")), int(config.require("space", "height")), config.get("space", "mask")
        )
        fit = fit_doubling(masked)
        rows.append(row(config, n_pts=masked.n_pts, constant=fit.exponent_n, label=f"{masked.label} n"))
        rows.append(row(config, n_pts=masked.n_pts, constant=fit.exponent_D, label=f"{masked.label} D"))
    report = verify.VerificationReport(
        scenario=config.name, flags=flags, parameters={"tolerance": tolerance}, seed=config.seed
    )
    return ScenarioOutcome([report], rows)


def _run_duality(config: ScenarioConfig) -> ScenarioOutcome:
    space = build_space(config)
    dec = calculus.decompose(build_operator(config, space))
    rng = np.random.default_rng(config.seed)
    pool = family(config)
    p_pool = _numbers(config, "weights", "p")
    lo, hi = (_numbers(config, "weights", "beta_range") or [-0.5, 0.5])[:2]
    fit = fit_doubling(space)
    rows, overlap, exact = [], True, 0.0
    for trial in range(int(config.get("grids", "combinations", 20))):
        F = pool[int(rng.integers(len(pool)))]
        p = p_pool[int(rng.integers(len(p_pool)))]
        beta = float(rng.uniform(lo, hi))
        w = power_weight(space, beta)
        result = verify.duality_check(space, dec, F, p, w, seed=config.seed)
        overlap &= result.overlap
        if p == 2.0:
            exact = max(exact, abs(result.primal.upper - result.dual.upper))
        rows.append(
            row(
                config,
                n_pts=space.n_pts,
                p=p,
                beta=beta,
                lower=result.primal.lower,
                upper=result.primal.upper,
                constant=result.residual,
                in_hypothesis=in_hypothesis(config, space, p, w, fit),
                label=F.name,
                **{"pass": result.overlap},
            )
        )
    report = _summary(
        config,
        rows,
        constants={"p2_gap": exact},
        flags={"overlap": overlap, "p2_exact": exact <= 1e-9},
        parameters={"n_pts": space.n_pts},
    )
    return ScenarioOutcome([report], rows)


def _run_interpolation(config: ScenarioConfig) -> ScenarioOutcome:
    space = build_space(config)
    dec = calculus.decompose(build_operator(config, space))
    r = float(config.require("weights", "r"))
    q = float(config.require("weights", "q"))
    p = float(config.require("weights", "p"))
    w0 = power_weight(space, float(config.get("weights", "beta0", 0.0)))
    w1 = power_weight(space, float(config.get("weights", "beta1", 0.0)))
    rows, reports = [], []
    fit = fit_doubling(space)
    for F in family(config):
        report = verify.interpolation_check(space, dec, F, w0, w1, r, q, p, seed=config.seed)
        report.scenario = config.name
        reports.append(report)
        t = report.parameters["t"]
        middle = w0.power(t).times(w1.power(1.0 - t))
        rows.append(
            row(
                config,
                n_pts=space.n_pts,
                p=p,
                q=q,
                lower=report.constants["lower"],
                upper=report.constants["bound"],
                constant=report.constants["slack"],
                in_hypothesis=in_hypothesis(config, space, p, middle, fit),
                label=F.name,
                **{"pass": report.passed},
            )
        )
    return ScenarioOutcome(reports, rows)


def _run_chebyshev(config: ScenarioConfig) -> ScenarioOutcome:
    space = build_space(config)
    op = build_operator(config, space)
    dec = calculus.decompose(op)
    degree = int(config.get("grids", "degree", 32))
    interval = tuple(_numbers(config, "grids", "interval") or (0.0, 4.0))
    rng = np.random.default_rng(config.seed)
    f = rng.standard_normal(space.n_pts)
    rows, flags, errors = [], {}, {}
    for F in family(config):
        approx = calculus.chebyshev_apply(op, F, degree, interval, f)
        exact = calculus.apply_multiplier(dec, F).matrix @ f
        err_max = float(np.abs(approx - exact).max())
        err_2 = float(np.sqrt(np.sum(np.abs(approx - exact) ** 2 * space.mu)))
        norm_f = float(np.sqrt(np.sum(f**2 * space.mu)))
        tail = calculus.chebyshev_tail(F, degree, interval)
        flags[f"{F.name} accurate"] = err_max <= 1e-6
        flags[f"{F.name} tail_bound"] = err_2 <= (tail + 1e-12) * norm_f
        errors[F.name] = err_max
        rows.append(
            row(config, n_pts=space.n_pts, constant=err_max, upper=tail * norm_f, label=F.name, **{"pass": err_max <= 1e-6})
        )
    report = verify.VerificationReport(
        scenario=config.name,
        constants=errors,
        flags=flags,
        parameters={"degree": degree, "interval": list(interval)},
        seed=config.seed,
    )
    return ScenarioOutcome([report], rows)


@dataclass(frozen=True)
class Scenario:
    """A built-in scenario: runner, one-line summary, help text and default tables"""

    name: str
    summary: str
    help: str
    runner: Callable
    defaults: dict
    requires: tuple = ()

    def validate(self, config: ScenarioConfig) -> None:
        """Runner-specific required keys."""
        for path in self.requires:
            section, key = path.split(".")
            config.require(section, key)

    def default_config(self) -> ScenarioConfig:
        """Default configuration as a ScenarioConfig."""
        payload = copy.deepcopy(self.defaults)
        payload["scenario"] = {"name": self.name, "kind": self.name, "seed": 0, "description": self.summary}
        return ScenarioConfig.from_dict(payload)


def _scenario(name, summary, help_text, runner, defaults, requires=()):
    return Scenario(name, summary, help_text, runner, defaults, tuple(requires))


BUILTIN = {
    s.name: s
    for s in [
        _scenario(
            "torus-hormander",
            "Weighted multiplier ratio for Riesz means on a torus ladder",
            "Computes upper(||F(L^(1/2))||_{L^p(w)}) / (sup_t ||eta delta_t F||_{W^q_s} + |F(0)|) "
            "for dilated Bochner-Riesz means on Z_N, records the hypothesis flags, and checks "
            "that the worst ratio grows by at most 1.25 per doubling of N. A power weight "
            "beyond n(p-1) is the negative control: its A_p constant must grow. With "
            "norms.variant = \"compact\" the denominator is sup_(t>1) ||eta delta_t F||_{W^q_s} "
            "+ ||F||_inf, the form for spaces of finite measure.",
            _run_torus_hormander,
            {
                "space": {"builder": "torus", "N": [32, 64, 128], "d": 1},
                "operator": {"builder": "laplacian"},
                "multiplier": {"family": ["riesz_mean:1"]},
                "norms": {"s": 1.5, "q": float("inf")},
                "weights": {"p": 4.0, "beta": 0.5, "negative_beta": 4.5},
                "grids": {"dilates": [0.5, 1.0, 2.0], "growth_limit": 1.25, "negative_growth": 1.5},
            },
            ["norms.s", "weights.p"],
        ),
        _scenario(
            "power-weights",
            "Power-weight sweep labelled by max{-n,-sp} < beta < min{n(p-1),sp}",
            "Brackets a smooth multiplier on L^p(|x|^beta) across a torus ladder and labels "
            "each beta as inside or outside the admissible power-weight range.",
            _run_power_weights,
            {
                "space": {"builder": "torus", "N": [32, 64, 128], "d": 1},
                "operator": {"builder": "laplacian"},
                "multiplier": {"family": ["riesz_mean:1"]},
                "norms": {"s": 1.5},
                "weights": {"p": [2.0, 3.0], "beta": [-0.5, 0.5, 2.5]},
                "grids": {"growth_limit": 1.25},
            },
            ["norms.s", "weights.p", "weights.beta"],
        ),
        _scenario(
            "dirichlet-domain",
            "Dirichlet heat kernel on an L-shaped mask dominated by the full grid",
            "Builds the lattice Laplacian with absorbing boundary on an L-shaped mask and checks "
            "0 <= p_t^mask <= p_t^grid entrywise, plus a Gaussian fit of the masked kernel.",
            _run_dirichlet_domain,
            {
                "space": {"builder": "masked_grid", "width": 12, "height": 12, "mask": L_MASK},
                "operator": {"builder": "dirichlet"},
                "grids": {"t": [0.5, 1.0, 2.0]},
            },
            ["space.width", "space.height"],
        ),
        _scenario(
            "schrodinger",
            "Schrödinger heat kernel with V >= 0 dominated by the free kernel",
            "Random potential V in [0, 1] on a torus: checks p_t^V <= p_t entrywise and that "
            "the fitted Gaussian constant never exceeds the free one for any c.",
            _run_schrodinger,
            {
                "space": {"builder": "torus", "N": [32], "d": 1},
                "operator": {"builder": "schrodinger", "potential_max": 1.0},
                "grids": {"t": [0.25, 1.0, 4.0]},
            },
        ),
        _scenario(
            "holomorphic",
            "Imaginary powers L^(i tau) against the sector angle",
            "Checks sup |lambda^k F^(k)| <= 2 k!/sin(theta)^k e^(|tau| theta) for F = lambda^(i tau) "
            "and fits the exponent alpha of the operator bound in theta.",
            _run_holomorphic,
            {
                "space": {"builder": "torus", "N": [64], "d": 1},
                "operator": {"builder": "laplacian"},
                "weights": {"p": 3.0},
                "grids": {
                    "theta": [np.pi / 4, np.pi / 8, np.pi / 16],
                    "tau": [0.0, 0.5, 1.0, 2.0, 4.0],
                },
            },
            ["weights.p", "grids.theta", "grids.tau"],
        ),
        _scenario(
            "avakumovic",
            "Unit spectral windows on the flat torus: ||chi_[R,R+1](sqrt L)||^2_{1->2} <= C R^(n-1)",
            "Measures sup_y of the spectral projector mass of each unit window [R, R+1] of "
            "sqrt(L) on the torus of length 2 pi, divided by R^(n-1). The estimate under test is "
            "the Avakumovic-Agmon-Hormander bound ||chi_[R,R+1](sqrt L)||^2_{L^1->L^2} <= C R^(n-1). "
            "Checks stability across the ladder and the closed-form eigenvalue count.",
            _run_avakumovic,
            {
                "space": {"builder": "scaled_torus", "N": [64, 128, 256], "d": 1},
                "operator": {"builder": "laplacian"},
                "grids": {"R": [1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.5], "bump_R": [2.0, 4.0, 8.0]},
            },
            ["grids.R"],
        ),
        _scenario(
            "plancherel-sweep",
            "Plancherel constants with L^q and cellwise ||.||_{N,q} denominators",
            "Sup ratios of the kernel L^2 mass against ||delta_R F||_q^2 / V(y, 1/R) over seeded "
            "piecewise-linear F, the ||.||_{N,q} variant, the q = inf eigenbasis identity and "
            "the off-diagonal weighted estimate for dyadic pieces.",
            _run_plancherel_sweep,
            {
                "space": {"builder": "torus", "N": [32, 64, 128], "d": 1},
                "operator": {"builder": "laplacian"},
                "norms": {"q": [2.0, float("inf")]},
                "grids": {"R": [0.5, 1.0, 2.0, 4.0], "N": [1, 2, 4], "trials": 16},
            },
            ["grids.R", "grids.N", "norms.q"],
        ),
        _scenario(
            "mollification",
            "Decay of ||G - G * xi_N||_{N,q} for moment-corrected mollifiers",
            "Regresses log ||G - G * xi_N||_{N,q} on log N for a smooth bump G and checks the "
            "slope is at most -s + 0.3.",
            _run_mollification,
            {
                "norms": {"s": [1.0, 2.0], "q": [2.0, float("inf")], "grid": 4096},
                "grids": {"N": [8, 16, 32, 64, 128, 256]},
            },
            ["grids.N", "norms.s", "norms.q"],
        ),
        _scenario(
            "am-criterion",
            "Empirical constants of the two good-lambda hypotheses",
            "Samples balls and random functions to measure the constants of the local "
            "off-diagonal hypothesis and the L^inf smoothing hypothesis with "
            "A_r = I - (I - e^(-r^m L))^M.",
            _run_am_criterion,
            {
                "space": {"builder": "torus", "N": [32], "d": 1},
                "operator": {"builder": "laplacian"},
                "multiplier": {"family": ["heat:1", "riesz_mean:1"]},
                "weights": {"p0": 1.0},
                "grids": {"M": 2, "balls": 16, "functions": 4},
            },
        ),
        _scenario(
            "doubling-fit",
            "Doubling and growth exponents of tori and a masked grid",
            "Fits (n, C_n) and (D, C_D) on Z_64 and Z_16^2 and checks n within 0.2 of the "
            "dimension and D <= 0.2.",
            _run_doubling_fit,
            {
                "space": {"builder": "torus", "N": [64, 16], "d": [1, 2]},
                "grids": {"exponent_tolerance": 0.2},
            },
        ),
        _scenario(
            "duality",
            "Brackets on (p, w) against the adjoint on (p', w^(1-p'))",
            "Draws seeded (F, p, beta) combinations and compares the bracket of F(L) on L^p(w) "
            "with that of conj(F)(L) on L^p'(w^(1-p')).",
            _run_duality,
            {
                "space": {"builder": "torus", "N": [32], "d": 1},
                "operator": {"builder": "laplacian"},
                "multiplier": {"family": ["heat:1", "riesz_mean:1", "imaginary_power:1", "bump_dilate:1"]},
                "weights": {"p": [1.5, 2.0, 3.0, 4.0], "beta_range": [-0.5, 0.5]},
                "grids": {"combinations": 20},
            },
            ["weights.p"],
        ),
        _scenario(
            "interpolation",
            "Interpolation with change of weights between L^r(w0) and L^q(w1)",
            "Checks lower(||T||_{L^p(w0^t w1^(1-t))}) <= 1.05 upper(L^r(w0))^a upper(L^q(w1))^(1-a).",
            _run_interpolation,
            {
                "space": {"builder": "torus", "N": [32], "d": 1},
                "operator": {"builder": "laplacian"},
                "multiplier": {"family": ["heat:1"]},
                "weights": {"r": 2.0, "q": 4.0, "p": 3.0, "beta0": 0.2, "beta1": 0.6},
            },
            ["weights.r", "weights.q", "weights.p"],
        ),
        _scenario(
            "chebyshev",
            "Chebyshev filtering against the exact functional calculus",
            "Degree-32 Chebyshev expansion of the heat multiplier on Z_256 compared with the "
            "eigendecomposition path; the coefficient tail must dominate the error.",
            _run_chebyshev,
            {
                "space": {"builder": "torus", "N": [256], "d": 1},
                "operator": {"builder": "laplacian"},
                "multiplier": {"family": ["heat:1"]},
                "grids": {"degree": 32, "interval": [0.0, 4.0]},
            },
        ),
    ]
}


def builtin_scenarios() -> list:
    """(name, one-line summary, default config) for every built-in scenario."""
    return [(s.name, s.summary, s.default_config()) for s in BUILTIN.values()]


def describe(name: str) -> str:
    """Help text of a built-in scenario."""
    if name not in BUILTIN:
        raise ConfigError(f"unknown scenario {name!r}", field="scenario.kind")
    return BUILTIN[name].help


def run_scenario(config: ScenarioConfig) -> ScenarioOutcome:
    """Validate and execute; nothing is written."""
    validate(config)
    say(f"Running {config.name} (seed {config.seed})")
    return BUILTIN[config.kind].runner(config)


def run(config: ScenarioConfig, output_dir: Optional[str] = None) -> tuple:
    """Run end-to-end and write CSV + JSON; returns (outcome, csv_path, json_path)."""
    outcome = run_scenario(config)
    stem = config.get("output", "stem", config.name)
    payload = {
        "scenario": config.name,
        "seed": config.seed,
        "config": verify._jsonable(config.to_dict()),
        "reports": [r.to_json() for r in outcome.reports],
        "passed": outcome.passed,
    }
    csv_path, json_path = write_outputs(stem, outcome.rows, payload, output_dir or config.get("output", "dir"))
    return outcome, csv_path, json_path
