import argparse
import sys
from typing import List, Optional

import pandas as pd

from ..config import (
    INTEGRALS,
    OPERATORS,
    SCHEMES,
    SPECIAL_CASES,
    ExitCodes,
    SolverConfig,
    SuiteDefaults,
)
from ..entities.grid import GridFunction
from ..entities.kernel import KernelSpec, NormalizationFunction, OrderFunction, WarpFunction
from ..entities.problem import FdeProblem
from ..utils.exceptions import FracvarError, InvalidParam, NumericalError, ValidationError
from ..utils.helpers import grid_frame, load_config_file, summarize, write_frame
from ..utils.logger import CustomFormatter as cf
from ..utils.logger import logger
from .analysis import SuiteConfig, run_suites
from .fde import solve_fde
from .operators import apply_operator, make_special_case

DERIVATIVES = tuple(op for op in OPERATORS if op not in INTEGRALS)
BOOLEAN_FLAGS = {"order-tied", "standard-psi-caputo"}
EXPRESSION_FLAGS = {"--f", "--rhs", "--alpha", "--psi", "--M"}


class _Parser(argparse.ArgumentParser):
    """Argument errors become InvalidParam so they exit with the validation code."""

    def error(self, message):
        raise InvalidParam(message)


def _add_kernel_args(parser: argparse.ArgumentParser):
    parser.add_argument("--alpha", default="0.5", help="Order alpha(t), an expression in t")
    parser.add_argument("--alpha-min", type=float, help="Declared lower bound of alpha(t)")
    parser.add_argument("--alpha-max", type=float, help="Declared upper bound of alpha(t)")
    parser.add_argument("--psi", default="t", help="Warp psi(t), an expression in t")
    parser.add_argument("--M", default="1", help="Normalization M(alpha), an expression in alpha")
    parser.add_argument("--gamma", type=float, default=1.0)
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--order-tied", action="store_true", help="Use beta = gamma = alpha(t)")
    parser.add_argument("--special", choices=SPECIAL_CASES, help="Build a named special case")
    parser.add_argument("--a", type=float, default=0.0)
    parser.add_argument("--b", type=float, default=1.0)
    parser.add_argument("--n", type=int, default=SuiteDefaults.N, help="Number of grid intervals")
    parser.add_argument("--out", help="Write results to this path")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--seed", type=int, default=SuiteDefaults.SEED)
    parser.add_argument("--config", help="File of key=value lines used as flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fracvar",
        description="Variable-order non-singular fractional operators and equations.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    deriv = commands.add_parser("deriv", help="Apply a fractional derivative to f(t)")
    _add_kernel_args(deriv)
    deriv.add_argument("--op", choices=DERIVATIVES, default="caputo_ns")
    deriv.add_argument("--f", required=True, help="Function of t")
    deriv.add_argument("--scheme", choices=SCHEMES, default=SCHEMES[0])
    deriv.add_argument("--standard-psi-caputo", action="store_true")

    integral = commands.add_parser("integral", help="Apply a fractional integral to f(t)")
    _add_kernel_args(integral)
    integral.add_argument("--op", choices=INTEGRALS, default="rl_integral")
    integral.add_argument("--f", required=True, help="Function of t")
    integral.add_argument("--scheme", choices=SCHEMES, default=SCHEMES[0])
    integral.add_argument("--exponent-at", choices=("t", "tau"), default="t")

    solve = commands.add_parser("solve", help="Solve D u = f(t, u), u(a) = u0")
    _add_kernel_args(solve)
    solve.add_argument("--rhs", required=True, help="Right-hand side f(t, u)")
    solve.add_argument("--u0", type=float, required=True)
    solve.add_argument(
        "--compat", choices=SolverConfig.COMPATIBILITY_MODES, default="relax"
    )

    verify = commands.add_parser("verify", help="Run the verification suites")
    _add_kernel_args(verify)
    verify.add_argument("--suite", choices=SuiteDefaults.NAMES + ("all",), default="all")
    return parser


def _with_config(argv: List[str]) -> List[str]:
    """Insert flags read from --config right after the subcommand; later flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    extra = []
    for key, value in load_config_file(known.config).items():
        if key in BOOLEAN_FLAGS:
            if value.lower() in ("1", "true", "yes"):
                extra.append(f"--{key}")
        elif key != "config":
            extra.append(f"--{key}={value}")
    logger.debug(f"Flags from {known.config}: {' '.join(extra)}")
    return argv[:1] + extra + argv[1:]


def _join_expressions(argv: List[str]) -> List[str]:
    """Glue expression flags to their value so "--rhs -u" is not read as an option."""
    joined = []
    tokens = iter(argv)
    for token in tokens:
        if token in EXPRESSION_FLAGS:
            value = next(tokens, None)
            joined.append(token if value is None else f"{token}={value}")
        else:
            joined.append(token)
    return joined


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    argv = _join_expressions(list(sys.argv[1:] if argv is None else argv))
    return build_parser().parse_args(_with_config(argv))


def _flag(name: str, build, *args, **kwargs):
    try:
        return build(*args, **kwargs)
    except ValidationError as e:
        raise InvalidParam(f"{name}: {e}") from e


def build_spec(args: argparse.Namespace) -> KernelSpec:
    order = _flag(
        "--alpha",
        OrderFunction.from_expression,
        args.alpha,
        args.alpha_min,
        args.alpha_max,
        (args.a, args.b),
    )
    norm = _flag("--M", NormalizationFunction.from_expression, args.M)
    if args.special:
        return _flag(
            "--special",
            make_special_case,
            args.special,
            order,
            norm,
            (args.a, args.b),
            args.gamma,
            args.beta,
        )
    warp = _flag("--psi", WarpFunction.from_expression, args.psi)
    return _flag(
        "--psi/--alpha/--gamma/--beta",
        KernelSpec,
        args.gamma,
        args.beta,
        order,
        warp,
        norm,
        args.a,
        args.b,
        args.order_tied,
    )


def _echo(args: argparse.Namespace) -> dict:
    return {key: value for key, value in sorted(vars(args).items()) if key != "config"}


def _apply(args, spec: KernelSpec) -> dict:
    f = _flag("--f", GridFunction.from_expression, args.f, args.a, args.b, args.n)
    result = apply_operator(
        args.op,
        spec,
        f,
        scheme=args.scheme,
        standard_psi_caputo=getattr(args, "standard_psi_caputo", False),
        exponent_at=getattr(args, "exponent_at", "t"),
    )
    frame = grid_frame(result.t, result.values.values, result.quad_error_estimate)
    if args.out:
        write_frame(frame, args.out, args.format, _echo(args))
    return {
        "command": f"{args.command} {args.op}",
        "n": args.n,
        "value_at_b": float(result.values.values[-1]),
        "estimate_error": result.quad_error_estimate,
        "output": args.out,
    }


def _solve(args, spec: KernelSpec) -> dict:
    problem = _flag(
        "--rhs",
        FdeProblem.from_expression,
        spec,
        args.rhs,
        args.u0,
        args.n,
        compatibility=args.compat,
    )
    report = solve_fde(problem)
    for note in report.notes:
        logger.info(note)
    if args.out:
        frame = grid_frame(report.solution.t, report.solution.values)
        write_frame(frame, args.out, args.format, _echo(args))
    return {
        "command": "solve",
        "n": args.n,
        "value_at_b": report.final_value,
        "residual_norm": report.residual_norm,
        "compatibility_gap": report.compatibility_gap,
        "output": args.out,
    }


def _verify(args, spec: KernelSpec) -> dict:
    cfg = SuiteConfig(spec, n=args.n, seed=args.seed)
    names = None if args.suite == "all" else [args.suite]
    reports = run_suites(cfg, names)
    if args.out:
        frame = pd.concat([report.to_frame() for report in reports], ignore_index=True)
        write_frame(frame, args.out, args.format, _echo(args))
    return {
        "command": "verify",
        "n": args.n,
        "suites": {report.suite_name: len(report.failures) for report in reports},
        "output": args.out,
    }


COMMANDS = {"deriv": _apply, "integral": _apply, "solve": _solve, "verify": _verify}


def run(args: argparse.Namespace) -> int:
    """Execute one parsed command and return its exit code."""
    if args.n < 1:
        raise InvalidParam(f"--n must be positive, got {args.n}")
    spec = build_spec(args)
    logger.info(f"{cf.BLUE}{args.command}{cf.RESET} on {spec.describe()}")
    info = COMMANDS[args.command](args, spec)
    print(summarize(info))
    if any(info.get("suites", {}).values()):
        return ExitCodes.SUITE_FAILURE
    return ExitCodes.OK


def main(argv: Optional[List[str]] = None) -> int:
    try:
        return run(parse_args(argv))
    except ValidationError as e:
        logger.error(f"Invalid input: {e}")
        return ExitCodes.VALIDATION
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return ExitCodes.NUMERICAL
    except FracvarError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return ExitCodes.NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
