# Copyright 2026 The robust-replay Authors

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#     http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""
Command line interface of robust-replay.

.. code-block:: console

    $ robust-replay run --config desk.toml --out results/
    $ robust-replay sweep-alpha --config desk.toml --alphas 0.1,0.3,0.5,0.6,1.0
    $ robust-replay sweep-noise --config desk.toml --ratios 0.2,0.4,0.6
    $ robust-replay gen-data --spec blobs.toml --out blobs.csv

Exit codes: ``0`` on success, ``2`` for configuration errors and ``3`` for numeric
failures during a run.
"""
import argparse
import logging
import os
import sys

from ._version import __version__
from .config import load_config, load_synthetic_spec
from .data import generate_synthetic, write_dataset_csv
from .exceptions import ConfigError, InputError, RunError
from .runner import RunTracker, run_experiment, sweep_alpha, sweep_noise, write_results

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN = 3


def _split_list(text):
    return [item.strip() for item in text.split(",") if item.strip()]


def build_parser():
    """argparse.ArgumentParser: the parser of the ``robust-replay`` command"""
    parser = argparse.ArgumentParser(
        prog="robust-replay",
        description="Online continual learning on noisy blurry streams.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug output"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--config", required=True, help="TOML configuration file")
    run.add_argument("--seed", type=int, default=None, help="run a single seed")
    run.add_argument("--out", default=None, help="output directory")

    alpha = sub.add_parser("sweep-alpha", help="sweep static balancing coefficients")
    alpha.add_argument("--config", required=True)
    alpha.add_argument("--alphas", required=True, type=_split_list, help="comma separated, e.g. 0.1,0.5,adaptive")
    alpha.add_argument("--out", default=None)

    noise = sub.add_parser("sweep-noise", help="sweep label noise ratios")
    noise.add_argument("--config", required=True)
    noise.add_argument("--ratios", required=True, type=_split_list, help="comma separated, e.g. 0.2,0.4,0.6")
    noise.add_argument("--out", default=None)

    gen = sub.add_parser("gen-data", help="write a synthetic dataset as CSV")
    gen.add_argument("--spec", required=True, help="TOML file with the synthetic dataset settings")
    gen.add_argument("--out", required=True, help="train CSV; the test part goes to <stem>_test.csv")
    gen.add_argument("--seed", type=int, default=0)

    return parser


def _configure_logging(verbosity):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s: %(message)s")


def _run(args):
    config = load_config(args.config)
    changes = {}
    if args.out:
        changes["output_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        changes["seeds"] = (args.seed,)
    if changes:
        config = config.replace(**changes)

    tracker = RunTracker()
    out = config.output_dir
    if args.command == "run":
        records = run_experiment(config, tracker=tracker, cache_dir=out)
    elif args.command == "sweep-alpha":
        records = sweep_alpha(config, args.alphas, tracker=tracker, cache_dir=out)
    else:
        try:
            ratios = [float(r) for r in args.ratios]
        except ValueError:
            raise ConfigError(f"Cannot parse noise ratios {args.ratios}.") from None
        records = sweep_noise(config, ratios, tracker=tracker, cache_dir=out)

    write_results(records, out, config=config, tracker=tracker, sweep=args.command != "run")
    log.info("wrote %d records to %s", len(records), out)


def _gen_data(args):
    spec = load_synthetic_spec(args.spec)
    dataset = generate_synthetic(spec, args.seed)
    stem, ext = os.path.splitext(args.out)
    directory = os.path.dirname(args.out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    write_dataset_csv(dataset.train, args.out)
    write_dataset_csv(dataset.test, f"{stem}_test{ext or '.csv'}")
    log.info("wrote %d train and %d test examples", len(dataset.train), len(dataset.test))


def main(argv=None):
    """Entry point of the ``robust-replay`` command; returns the exit code."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)

    try:
        if args.command == "gen-data":
            _gen_data(args)
        else:
            _run(args)
    except (ConfigError, InputError) as e:
        log.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (RunError, ArithmeticError) as e:
        log.error("%s", e)
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK
