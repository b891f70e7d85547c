"""Command-line entry points: run scenarios, list them, evaluate norms and weights"""

import argparse
import sys
from typing import Optional, Sequence

import numpy as np

from hlab import calculus, norms, scenarios
from hlab.config import SETTINGS
from hlab.errors import HlabError
from hlab.progress import say, warn
from hlab.space import build_torus
from hlab.weights import ap_constant, ap_power_range, power_weight, rh_constant

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2


def _cmd_run(args) -> int:
    config = scenarios.ScenarioConfig.load(args.config)
    if args.dry_run:
        say(f"{args.config}: valid {config.kind} scenario (seed {config.seed})")
        return EXIT_OK
    outcome, _, _ = scenarios.run(config, output_dir=args.output_dir)
    for report in outcome.reports:
        failed = sorted(k for k, v in report.flags.items() if not v)
        if failed:
            warn(f"{report.scenario}: failed {', '.join(failed)}")
    say(f"{config.name}: {'PASS' if outcome.passed else 'FAIL'}")
    return EXIT_OK if outcome.passed else EXIT_FAILED


def _cmd_scenarios(args) -> int:
    if args.describe:
        say(scenarios.describe(args.describe))
        return EXIT_OK
    for name, summary, _ in scenarios.builtin_scenarios():
        say(f"{name:<18} {summary}")
    return EXIT_OK


def _restricted(F: calculus.MultiplierFunction):
    # multipliers live on [0, inf); the ||.||_{N,q} window starts at -1
    def func(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, F(np.maximum(x, 0.0)), 0.0)

    return func


def _cmd_norms(args) -> int:
    F = calculus.parse_multiplier(args.multiplier)
    grid = args.grid or SETTINGS.norm_grid
    if args.which == "sobolev":

        def evaluate(n: int) -> float:
            piece = norms.GridFunction.from_callable(lambda x: norms.eta(x) * F(x), norms.HORMANDER_WINDOW, n)
            return norms.sobolev_norm(piece, args.s, args.q)

        value = norms.refined(evaluate, grid)[0] if args.refine else evaluate(grid)
        say(f"||eta {F.name}||_(W^{args.q:g}_{args.s:g}) = {value:.10g}")
    elif args.which == "hormander":
        value = norms.hormander_norm(F, args.s, args.q, n_points=grid, refine=args.refine)
        say(f"sup_t ||eta delta_t {F.name}||_(W^{args.q:g}_{args.s:g}) = {value:.10g}")
    else:
        value = norms.nq_norm(_restricted(F), args.N, args.q)
        say(f"||{F.name}||_({args.N},{args.q:g}) = {value:.10g}")
    return EXIT_OK


def _cmd_weights(args) -> int:
    space = build_torus(args.N, args.d)
    w = power_weight(space, args.beta)
    lo, hi = ap_power_range(args.d, args.p)
    ap = ap_constant(space, w, args.p)
    say(f"w = |x|^{args.beta:g} on {space.label} ({space.n_pts} points)")
    say(f"A_{args.p:g} constant: {ap:.10g}")
    if lo < args.beta < hi:
        say(f"beta inside ({lo:g}, {hi:g}): A_{args.p:g} on R^{args.d}")
    else:
        warn(f"beta={args.beta:g} outside ({lo:g}, {hi:g}); the constant grows with N")
    if args.rh is not None:
        say(f"RH_{args.rh:g} constant: {rh_constant(space, w, args.rh):.10g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per entry point."""
    parser = argparse.ArgumentParser(
        prog="hlab", description="Weighted spectral multiplier lab on finite spaces"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a scenario file and write CSV + JSON")
    run.add_argument("config", help="Path to a TOML scenario file")
    run.add_argument(
        "--output-dir",
        default=None,
        help=f"Where results go (default: [output] dir or HLAB_OUTPUT_DIR={SETTINGS.output_dir})",
    )
    run.add_argument("--dry-run", action="store_true", help="Validate the file and stop")
    run.set_defaults(handler=_cmd_run)

    listing = commands.add_parser("scenarios", help="List the built-in scenarios")
    listing.add_argument(
        "--describe",
        choices=sorted(scenarios.BUILTIN),
        default=None,
        help="Print the full description of one scenario",
    )
    listing.set_defaults(handler=_cmd_scenarios)

    norm = commands.add_parser("norms", help="Evaluate multiplier norms")
    norm_commands = norm.add_subparsers(dest="norms_command", required=True)
    evaluate = norm_commands.add_parser("eval", help="Evaluate one norm of a preset multiplier")
    evaluate.add_argument(
        "--which",
        choices=["sobolev", "hormander", "nq"],
        default="hormander",
        help="Which norm to evaluate",
    )
    evaluate.add_argument(
        "--multiplier", required=True, help="Preset such as riesz_mean:1 or heat:0.5"
    )
    evaluate.add_argument("--s", type=float, default=1.0, help="Smoothness order")
    evaluate.add_argument("--q", type=float, default=2.0, help="Integrability exponent (inf allowed)")
    evaluate.add_argument("--N", type=int, default=8, help="Cell count parameter of ||.||_{N,q}")
    evaluate.add_argument("--grid", type=int, default=None, help="Sample count of the norm grid")
    evaluate.add_argument(
        "--refine", action="store_true", help="Double the grid until the value settles to 0.1%%"
    )
    evaluate.set_defaults(handler=_cmd_norms)

    weight = commands.add_parser("weights", help="Inspect power weights")
    weight_commands = weight.add_subparsers(dest="weights_command", required=True)
    check = weight_commands.add_parser("check", help="A_p / RH_q constants of |x|^beta on a torus")
    check.add_argument("--N", type=int, default=64, help="Torus side length")
    check.add_argument("--d", type=int, default=1, choices=[1, 2, 3], help="Torus dimension")
    check.add_argument("--beta", type=float, required=True, help="Power of the weight")
    check.add_argument("--p", type=float, required=True, help="Muckenhoupt exponent")
    check.add_argument("--rh", type=float, default=None, help="Also report the RH_q constant")
    check.set_defaults(handler=_cmd_weights)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Parse arguments, dispatch, and exit with 0 (pass), 1 (check failed) or 2 (invalid input)."""
    args = build_parser().parse_args(argv)
    try:
        code = args.handler(args)
    except HlabError as e:
        print(f"Error: {e}")
        sys.exit(EXIT_INVALID)
    sys.exit(code)


if __name__ == "__main__":
    main()
