"""
Command line front end:

    tailcore analyze INPUT            analyse a map given as a json file or bundled example
    tailcore paper-example            reproduce the worked stochastic example
    tailcore verify SUITE             run the property checks on seeded random instances

Exit codes: 0 ok, 1 property failure or golden mismatch, 2 input error,
3 numerical tolerance error.
"""
__all__ = ['main', 'build_parser', 'cmd_analyze', 'cmd_paper_example', 'cmd_verify',
           'compare_golden']

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import span_coords
from .datasets import (SUITES, example_names, load_example, worked_example,
                       worked_example_golden)
from .errors import GoldenMismatchError, InputError, NumericalToleranceError
from .explainers import Tolerances, make_explainer
from .upmap import map_from_document
from .verification import run_suite

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3
GOLDEN_TOL = 1e-9


def _common_flags():
    parent = argparse.ArgumentParser(add_help=False)
    fmt = parent.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json",
                     help="write the report as json (default)")
    fmt.add_argument("--text", dest="fmt", action="store_const", const="text",
                     help="write a markdown summary")
    parent.set_defaults(fmt="json")
    parent.add_argument("--out", type=Path, help="write the report here instead of stdout")
    parent.add_argument("--seed", type=int, default=None, help="seed for sampled checks")
    defaults = Tolerances()
    parent.add_argument("--tol", type=float, default=defaults.tol,
                        help="rank and subspace tolerance")
    parent.add_argument("--eps-per", type=float, default=defaults.eps_per,
                        help="width of the peripheral band")
    parent.add_argument("--nmax", type=int, default=defaults.n_max,
                        help="length of the trace norm sequences")
    parent.add_argument("--check-tol", type=float, default=defaults.check_tol,
                        help="residual tolerance of the checks")
    parent.add_argument("--samples", type=int, default=defaults.samples,
                        help="random samples per sampled check")
    parent.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parent


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tailcore",
        description="Asymptotic structure of unital positive maps on finite-dimensional "
                    "*-algebras")
    parser.add_argument("--version", action="version", version=f"tailcore {__version__}")
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", parents=[common], help="analyse a single map")
    analyze.add_argument("input", help=f"json input file or one of {example_names()}")
    analyze.add_argument("--decay-csv", type=Path,
                         help="write the trace norm sequences as csv")

    sub.add_parser("paper-example", parents=[common],
                   help="check the worked stochastic example against its known values")

    verify = sub.add_parser("verify", parents=[common],
                            help="property checks on seeded random instances")
    verify.add_argument("suite", choices=SUITES + ["all"])
    verify.add_argument("--count", type=int, default=10, help="instances per suite")
    verify.add_argument("--max-dim", type=int, default=None,
                        help="largest ambient size of the generated instances")
    verify.add_argument("--workers", type=int, default=1, help="size of the process pool")
    return parser


def _tolerances(args):
    if args.tol <= 0 or args.eps_per <= 0 or args.check_tol <= 0:
        raise InputError("tolerances should be positive")
    if args.nmax < 1 or args.samples < 1:
        raise InputError("--nmax and --samples should be positive")
    return Tolerances(tol=args.tol, eps_per=args.eps_per, n_max=args.nmax,
                      check_tol=args.check_tol, samples=args.samples)


def _emit(text, out=None):
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
        log.info(f"Report written to {out}")


def _load_input(source):
    path = Path(source)
    if path.exists():
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise InputError(f"{path} is not valid json: {e}", pointer="")
        return map_from_document(doc), path.stem
    if source in example_names():
        phi, seed = load_example(source)
        return (phi, seed), source
    raise InputError(f"{source} is neither a file nor a bundled example {example_names()}")


def cmd_analyze(args):
    (phi, file_seed), name = _load_input(args.input)
    seed = args.seed if args.seed is not None else (file_seed or 0)
    ex = make_explainer(phi, _tolerances(args), seed=seed, name=name)
    ex.calculate_properties()
    if args.decay_csv is not None:
        ex.decay_df().to_csv(args.decay_csv, index=False)
    _emit(ex.to_json() if args.fmt == "json" else ex.verdicts_markdown(), args.out)
    return EXIT_OK if ex.properties.passed.all() else EXIT_FAILURE


def compare_golden(ex, golden=None, tol=GOLDEN_TOL):
    """Field by field comparison of an analysis of the worked example with its
    known values.

    Returns:
        list of (field, expected, got) for every mismatch
    """
    golden = worked_example_golden() if golden is None else golden
    diffs = []
    E = ex.idempotent.sa_matrix
    if not np.allclose(E, golden["E"], atol=tol, rtol=0):
        diffs.append(("E", golden["E"].tolist(), E.tolist()))
    for key, computed in (("M_inf", ex.tail), ("core", ex.core)):
        expected = span_coords(ex.shape, golden[key])
        if not computed.equals(expected, tol):
            diffs.append((key, expected.coords.tolist(), computed.coords.tolist()))
    rho = ex.invariant_state.coords
    if not np.allclose(rho, golden["invariant_state"], atol=tol, rtol=0):
        diffs.append(("invariant_state", golden["invariant_state"].tolist(), rho.tolist()))
    flags = (("m_inf_jordan_closed", ex.core_report.m_inf_jordan_closed),
             ("faithful_invariant_state", ex.state_report.faithful_exists),
             ("restricted_period", ex.restricted.period))
    for key, got in flags:
        if got != golden[key]:
            diffs.append((key, golden[key], got))
    return diffs


def cmd_paper_example(args):
    ex = make_explainer(worked_example(), _tolerances(args),
                        seed=0 if args.seed is None else args.seed, name="worked_example")
    ex.calculate_properties()
    _emit(ex.to_json() if args.fmt == "json" else ex.verdicts_markdown(), args.out)
    diffs = compare_golden(ex)
    if diffs:
        raise GoldenMismatchError(diffs)
    log.info("All golden values reproduced")
    return EXIT_OK if ex.properties.passed.all() else EXIT_FAILURE


def cmd_verify(args):
    if args.count < 1:
        raise InputError("--count should be positive")
    if args.max_dim is not None and args.max_dim < 2:
        raise InputError("--max-dim should be at least 2")
    result = run_suite(args.suite, count=args.count, seed=0 if args.seed is None else args.seed,
                       max_dim=args.max_dim, tolerances=_tolerances(args),
                       workers=max(1, args.workers))
    if args.fmt == "json":
        _emit(json.dumps(result.to_json(), indent=2), args.out)
    else:
        text = result.summary_df().to_string(index=False)
        if result.skipped:
            text += (f"\n\n{len(result.skipped)} instance(s) skipped on an ambiguous tolerance "
                     f"decision:\n" + result.skipped_df().to_string(index=False))
        if not result.passed:
            text += "\n\nfailures:\n" + result.failures.to_string(index=False)
        if result.errors:
            text += "\n\nanalysis errors:\n" + result.errors_df().to_string(index=False)
        _emit(text, args.out)
    return EXIT_OK if result.passed else EXIT_FAILURE


COMMANDS = {
    "analyze": cmd_analyze,
    "paper-example": cmd_paper_example,
    "verify": cmd_verify,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        return COMMANDS[args.command](args)
    except InputError as e:
        log.error(str(e))
        return EXIT_INPUT
    except NumericalToleranceError as e:
        log.error(str(e))
        return EXIT_NUMERICAL
    except GoldenMismatchError as e:
        log.error(str(e))
        return EXIT_FAILURE
