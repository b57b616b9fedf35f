import logging
import sys
from argparse import ArgumentParser, ArgumentTypeError, Namespace
from collections.abc import Sequence
from pathlib import Path

from .cubature import Integrand, MeshConfig, build_mesh
from .errors import IfsCubError, NumericalError, ValidationError
from .expression_parser import evaluate_number
from .harness.config import Fractal, build_fractal, load_config
from .harness.emit import (
    OutputFormat,
    diagnostics_path,
    emit,
    open_output,
    write_mesh,
    write_moments,
    write_points,
    write_rule,
    write_rule_diagnostics,
)
from .harness.experiments import ReferenceConfig, ReferenceValue, converge_h, converge_p, integrate, reference_value
from .harness.gallery import available, gallery
from .harness.integrands import DEFAULT_KAPPA, DEFAULT_X0, helmholtz_integrand
from .ifs_core import chaos_sample
from .interpolation import TensorGrid
from .moments import compute_moments
from .weights import build_rule

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_OUTPUT = 4


def number(text: str) -> float:
    """Argument type accepting expressions such as "1/3" or "45 deg"."""
    try:
        return evaluate_number(text)
    except ValidationError as e:
        raise ArgumentTypeError(str(e)) from e


def non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def load_fractal(args: Namespace) -> Fractal:
    if args.config is not None:
        return load_config(args.config)
    if args.gallery is not None:
        return build_fractal(gallery(args.gallery, args.external_constants))
    raise ValidationError("Choose a fractal with --config PATH or --gallery NAME")


def integrand(args: Namespace, fractal: Fractal) -> Integrand:
    """The Helmholtz kernel; the default source point only fits fractals in the plane."""
    x0 = args.x0
    if x0 is None:
        if fractal.ifs.dim != len(DEFAULT_X0):
            raise ValidationError(
                f"--x0 is required for a fractal in R^{fractal.ifs.dim}, the default lies in the plane"
            )
        x0 = DEFAULT_X0
    return helmholtz_integrand(args.kappa, x0)


def run_moments(args: Namespace):
    fractal = load_fractal(args)
    write_moments(compute_moments(fractal.ifs, fractal.measure, args.degree), args.out, args.format)


def run_weights(args: Namespace):
    fractal = load_fractal(args)
    rule = build_rule(fractal.ifs, fractal.measure, TensorGrid.chebyshev(fractal.box, args.degree))
    logger.info("rule %s: residual %.3e, gap %.4f, |w|_1 = %.6g", rule.space, rule.residual, rule.gap, rule.l1_norm)
    write_rule(rule, args.out, args.format)
    if args.format == OutputFormat.CSV:
        write_rule_diagnostics(rule, diagnostics_path(args.out))


def run_mesh(args: Namespace):
    fractal = load_fractal(args)
    mesh = build_mesh(fractal.ifs, fractal.measure, args.h, fractal.diameter, MeshConfig(args.max_words))
    write_mesh(mesh, args.out, args.format)


def run_integrate(args: Namespace):
    fractal = load_fractal(args)
    result = integrate(fractal, integrand(args, fractal), args.degree, args.h, MeshConfig(args.max_words))
    emit(result, args.format, args.out, timings=not args.no_timings)


def _reference(args: Namespace, fractal: Fractal, f: Integrand) -> complex | ReferenceValue:
    if args.reference is not None:
        return args.reference
    return reference_value(fractal, f, ReferenceConfig(h=args.reference_h), MeshConfig(args.max_words))


def run_converge_p(args: Namespace):
    fractal = load_fractal(args)
    f = integrand(args, fractal)
    result = converge_p(fractal, f, args.degree, _reference(args, fractal, f))
    emit(result, args.format, args.out, timings=not args.no_timings)


def run_converge_h(args: Namespace):
    fractal = load_fractal(args)
    f = integrand(args, fractal)
    result = converge_h(
        fractal, f, args.degree, args.h, _reference(args, fractal, f), MeshConfig(args.max_words)
    )
    emit(result, args.format, args.out, timings=not args.no_timings)


def run_gallery(args: Namespace):
    with open_output(args.out) as stream:
        if args.gallery is None:
            stream.write("\n".join(available(args.external_constants)) + "\n")
        else:
            stream.write(gallery(args.gallery, args.external_constants).to_json() + "\n")


def run_sample(args: Namespace):
    fractal = load_fractal(args)
    write_points(chaos_sample(fractal.ifs, fractal.measure, args.count, args.seed), args.out, args.format)


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--config", type=Path, help="fractal configuration JSON file")
    source.add_argument("--gallery", help="named fractal, e.g. cantor or 'vicsek(0.4)'")
    common.add_argument("--external-constants", action="store_true", help="enable koch and barnsley-fern")
    common.add_argument("--out", default="-", help="output file, '-' for stdout")
    common.add_argument("--format", type=OutputFormat, choices=list(OutputFormat), default=OutputFormat.CSV)
    common.add_argument("-v", "--verbose", action="count", default=0)

    evaluation = ArgumentParser(add_help=False)
    evaluation.add_argument("--kappa", type=number, default=DEFAULT_KAPPA)
    evaluation.add_argument(
        "--x0", type=number, nargs="+", help="source point of the kernel, default 0.1 -2 for fractals in the plane"
    )
    evaluation.add_argument("--max-words", type=int, default=MeshConfig().max_words)
    evaluation.add_argument("--no-timings", action="store_true", help="leave the runtime column empty")

    reference = ArgumentParser(add_help=False)
    reference.add_argument("--reference", type=complex, help="known value of the integral")
    reference.add_argument("--reference-h", type=number, help="mesh width of the reference computation")

    parser = ArgumentParser(prog="ifscub", description="Interpolatory cubature on IFS attractors")
    commands = parser.add_subparsers(dest="command", required=True)

    moments = commands.add_parser("moments", parents=[common], help="moments up to a total degree")
    moments.add_argument("--degree", type=non_negative_int, required=True)
    moments.set_defaults(handler=run_moments)

    weights = commands.add_parser("weights", parents=[common], help="points and weights of Q_N")
    weights.add_argument("--degree", type=non_negative_int, required=True)
    weights.set_defaults(handler=run_weights)

    mesh = commands.add_parser("mesh", parents=[common], help="the word mesh L_h")
    mesh.add_argument("--h", type=number, required=True)
    mesh.add_argument("--max-words", type=int, default=MeshConfig().max_words)
    mesh.set_defaults(handler=run_mesh)

    single = commands.add_parser("integrate", parents=[common, evaluation], help="integrate the Helmholtz kernel")
    single.add_argument("--degree", type=non_negative_int, required=True)
    single.add_argument("--h", type=number, help="use the h-version with this mesh width")
    single.set_defaults(handler=run_integrate)

    p_study = commands.add_parser("converge-p", parents=[common, evaluation, reference], help="p-version study")
    p_study.add_argument("--degree", type=non_negative_int, nargs="+", required=True)
    p_study.set_defaults(handler=run_converge_p)

    h_study = commands.add_parser("converge-h", parents=[common, evaluation, reference], help="h-version study")
    h_study.add_argument("--degree", type=non_negative_int, required=True, help="rule degree k")
    h_study.add_argument("--h", type=number, nargs="+", required=True)
    h_study.set_defaults(handler=run_converge_h)

    listing = commands.add_parser("gallery", parents=[common], help="list entries or print one as JSON")
    listing.set_defaults(handler=run_gallery)

    sample = commands.add_parser("sample", parents=[common], help="chaos-game points of the attractor")
    sample.add_argument("--count", type=non_negative_int, default=10_000)
    sample.add_argument("--seed", type=int, default=0)
    sample.set_defaults(handler=run_sample)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Command line entry point; returns the exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        args.handler(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_OUTPUT
    except IfsCubError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
