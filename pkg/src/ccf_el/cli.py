import argparse
import logging
import os
import sys
import time
from typing import List, Optional, Sequence

from . import print_output  # noqa - To load the print and markdown outputs
from . import __version__, render
from .config import ESTIMATORS, StudyConfig
from .errors import CcfElError
from .outputs import OutputBase, Report
from .study import COMMAND_RUNNERS, prepare_output_dir, write_manifest

__author__ = "Guillermo M. Narvaja"
__copyright__ = "Guillermo M. Narvaja"
__license__ = "MIT"

_logger = logging.getLogger(__name__)

CONFIG_KEYS = (
    "model",
    "null_model",
    "theta",
    "n",
    "delta",
    "reps",
    "bootstrap",
    "alpha",
    "bandwidths",
    "seed",
    "input",
    "out",
    "estimator",
    "baseline",
    "force",
    "threads",
)


def _env_int(env_var, default=None) -> Optional[int]:
    value = os.environ.get(env_var)
    if value is not None:
        return int(value)
    return default


def _env_list(env_var) -> Optional[Sequence[str]]:
    value = os.environ.get(env_var)
    if value is not None:
        return value.split()
    return None


def _study_options() -> argparse.ArgumentParser:
    """Options shared by every sub-command; ``None`` defaults leave the config file values alone"""
    options = argparse.ArgumentParser(add_help=False)
    options.add_argument("--config", type=str, help="YAML file with the study configuration", default=None)
    options.add_argument("--model", type=str, help="Model kind: VSK, CIR, VSK_MJ, IG_OU or BI_OU")
    options.add_argument("--null-model", type=str, help="Model kind of the null hypothesis")
    options.add_argument("--theta", type=str, help="Parameters as name=value,... (missing ones take table values)")
    options.add_argument("--n", type=int, help="Observations per simulated path")
    options.add_argument("--delta", type=float, help="Sampling interval in years (default 1/12)")
    options.add_argument("--reps", type=int, help="Monte-Carlo replicates")
    options.add_argument("--bootstrap", type=int, help="Bootstrap replicates B (at least 99)")
    options.add_argument("--alpha", type=float, help="Test level")
    options.add_argument("--bandwidths", type=str, help="'auto' or a comma separated bandwidth list")
    options.add_argument("--seed", type=int, help="Master seed", default=_env_int("CCF_EL_SEED"))
    options.add_argument("--in", dest="input", type=str, help="CSV file with header t,x or t,x1,x2")
    options.add_argument("--out", type=str, help="Directory for the result files and the manifest")
    options.add_argument("--estimator", type=str, choices=ESTIMATORS, help="Estimator for the estimate command")
    options.add_argument(
        "--baseline", action="store_const", const=True, help="Add likelihood estimates to the Monte-Carlo study"
    )
    options.add_argument(
        "--force", action="store_const", const=True, help="Overwrite results of a different configuration"
    )
    options.add_argument(
        "--threads",
        type=int,
        help="Parallel workers, -1 for all cores",
        default=_env_int("CCF_EL_THREADS", -1),
    )
    options.add_argument(
        "--template-paths",
        type=str,
        nargs="+",
        help="search path to load report templates",
        default=_env_list("CCF_EL_TEMPLATE_PATHS"),
    )
    options.add_argument(
        "--output",
        dest="outputs",
        type=str,
        action="append",
        help="Output url (json://, csv://, markdown://, print://), repeatable",
    )
    return options


def parse_args(args):
    """Parse command line parameters

    Args:
      args (List[str]): command line parameters as list of strings
          (for example  ``["--help"]``).

    Returns:
      :obj:`argparse.Namespace`: command line parameters namespace
    """
    parser = argparse.ArgumentParser(
        description="Empirical likelihood estimation and specification tests of Markov models through their CCF"
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"ccf-el {__version__}",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        dest="loglevel",
        help="set loglevel to INFO",
        action="store_const",
        const=logging.INFO,
    )
    parser.add_argument(
        "-vv",
        "--very-verbose",
        dest="loglevel",
        help="set loglevel to DEBUG",
        action="store_const",
        const=logging.DEBUG,
    )

    subparsers = parser.add_subparsers(dest="command", required=True, help="sub-command to run")
    options = _study_options()

    simulate = subparsers.add_parser("simulate", parents=[options], help="Simulate a sample path")
    simulate.add_argument(
        "--tbill", action="store_true", help="Simulate the synthetic stand-in for the monthly T-bill series"
    )
    subparsers.add_parser("estimate", parents=[options], help="Estimate a model on a CSV path")
    subparsers.add_parser("test", parents=[options], help="Bootstrap specification test of a null model")
    subparsers.add_parser("mc-study", parents=[options], help="Monte-Carlo study of the estimators and the test")
    subparsers.add_parser("case-study", parents=[options], help="Estimate and test the four univariate models")

    return parser.parse_args(args)


def setup_logging(loglevel):
    """Setup basic logging

    Args:
      loglevel (int): minimum loglevel for emitting messages
    """
    logformat = "[%(asctime)s] %(levelname)s:%(name)s:%(message)s"
    logging.basicConfig(level=loglevel, stream=sys.stdout, format=logformat, datefmt="%Y-%m-%d %H:%M:%S")


def load_config(args) -> StudyConfig:
    overrides = {key: getattr(args, key, None) for key in CONFIG_KEYS}
    if args.command == "simulate" and args.tbill:
        overrides["model"] = overrides["model"] or "IG_OU"
    return StudyConfig.load(args.command, args.config, **overrides)


def default_outputs(config: StudyConfig) -> List[str]:
    if config.out is None:
        return ["print://"]
    return [f"{scheme}://?dir={config.out}" for scheme in ("json", "csv", "markdown")]


def run_command(args, config: StudyConfig) -> Report:
    if config.out is not None:
        prepare_output_dir(config.out, config.config_hash(), config.force)
    start = time.perf_counter()
    if config.command == "simulate":
        report = COMMAND_RUNNERS["simulate"](config, tbill=args.tbill)
    else:
        report = COMMAND_RUNNERS[config.command](config)

    renv = render.init_environment(args.template_paths)
    written = []
    for url in args.outputs or default_outputs(config):
        output = OutputBase.build_output(url, renv)
        output.write(report)
        written.extend(output.written)
    if config.out is not None:
        files = [os.path.relpath(f, config.out) for f in written]
        write_manifest(config.out, config, time.perf_counter() - start, files)
    return report


def main(args):
    """Runs the command and returns the exit code: 0 on success, the ``exit_code`` of the error otherwise"""
    args = parse_args(args)
    setup_logging(args.loglevel)
    try:
        config = load_config(args)
        run_command(args, config)
    except CcfElError as err:
        _logger.error(f"{type(err).__name__}: {err}")
        return err.exit_code
    return 0


def run():
    """Calls :func:`main` passing the CLI arguments extracted from :obj:`sys.argv`

    This function can be used as entry point to create console scripts with setuptools.
    """
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    # ^  This is a guard statement that will prevent the following code from
    #    being executed in the case someone imports this file instead of
    #    executing it as a script.
    #    https://docs.python.org/3/library/__main__.html

    # After installing your project with pip, users can also run your Python
    # modules as scripts via the ``-m`` flag, as defined in PEP 338::
    #
    #     python -m ccf_el.cli ...
    #
    run()
