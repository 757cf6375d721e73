import argparse
import logging
import os
import sys

import src.common.constants as const
from src.common.data import SynthSpec
from src.common.exceptions import InputError, UndefinedPriceError, UndefinedMetricError, InvariantViolation, \
    CapacityError
from src.common.tracking import setup, log_run
from src.experiments.runner import run, write_characterization, write_json
from src.experiments.scenario import ScenarioSpec, load_inputs
from src.experiments.studies import sweep_flex, shortage_experiment, supply_mix_report
from src.market.reliability import assess_target

logger = logging.getLogger("run_experiment")

EXIT_OK, EXIT_INVARIANT, EXIT_INPUT = 0, 1, 2


def get_parser():
    parser = argparse.ArgumentParser(description='Simulate a local flexible-energy market and its experiments.',
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None,
                        help='Scenario JSON document; a default synthetic scenario when omitted')
    common.add_argument('--seed', type=int, default=None,
                        help='Seed of every stochastic decision (overrides the document)')
    common.add_argument('--out-dir', type=str, default="output",
                        help='Directory the result files are written to')
    common.add_argument('--approach', type=str, default=None, choices=const.APPROACHES,
                        help='Allocation approach (overrides the document)')
    common.add_argument('--pricing-mode', type=str, default=None, choices=const.PRICING_MODES,
                        help='How a slot is costed (overrides the document)')
    common.add_argument('--heuristic', action='store_true',
                        help='Let the benchmark solvers fall back to a heuristic on large instances')
    common.add_argument('--track', action='store_true',
                        help='Log parameters, metrics and outputs to MLflow')
    common.add_argument('--tracking-uri', type=str, default="http://localhost:5000/",
                        help='MLflow tracking server')
    common.add_argument('--experiment', type=str, default="flex-market",
                        help='MLflow experiment name')
    common.add_argument('--verbose', action='store_true',
                        help='Debug logging')
    common.add_argument('--quiet', action='store_true',
                        help='No progress bars')

    subparsers = parser.add_subparsers(dest='command', required=True)
    subparsers.add_parser('characterize', parents=[common], formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                          help='Split consumption into essential series and flexible requests')
    subparsers.add_parser('run', parents=[common], formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                          help='Clear every market instance of one scenario')

    sweep = subparsers.add_parser('sweep-flex', parents=[common],
                                  formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                                  help='Unit cost of flexible energy against request flexibility')
    sweep.add_argument('--sigmas', type=float, nargs='+', default=list(const.SIGMAS),
                       help='Flexibility levels [h]')

    shortage = subparsers.add_parser('shortage-exp', parents=[common],
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                                     help='Energy share of two groups under supply shortage')
    shortage.add_argument('--seeds', type=int, nargs='+', default=None,
                          help='Seeds to average over; the scenario seed when omitted')
    shortage.add_argument('--approaches', type=str, nargs='+', default=list(const.APPROACHES),
                          choices=const.APPROACHES, help='Approaches to compare')
    shortage.add_argument('--upsilon', type=float, default=const.UPSILON_SHORTAGE,
                          help='Supply divisor for CSV inputs; synthetic supply keeps its own')

    mix = subparsers.add_parser('supply-mix', parents=[common],
                                formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                                help='Excess energy and supplier cut-off price against the supply mix')
    mix.add_argument('--mixes', type=float, nargs='+', default=list(const.SUPPLY_MIXES),
                     help='Share of essential energy covered by uncontrollable supply')

    reliability = subparsers.add_parser('reliability', parents=[common],
                                        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                                        help='Check whether the target reliability is achievable')
    reliability.add_argument('--gamma-target', type=float, default=None,
                             help='Target reliability (overrides the document)')
    reliability.add_argument('--resimulate', action='store_true',
                             help='Re-run with each lever when the target is missed')
    return parser


def load_spec(args):
    if args.config is None:
        spec = ScenarioSpec(synth=SynthSpec())
    elif not os.path.exists(args.config):
        raise FileNotFoundError(f"Config file {args.config} does not exist")
    else:
        spec = ScenarioSpec.from_json(args.config)
    overrides = dict(seed=args.seed, approach=args.approach, pricing_mode=args.pricing_mode,
                     gamma_target=getattr(args, "gamma_target", None))
    if args.heuristic:
        overrides["heuristic"] = True
    return spec.replace(**overrides)


def execute(args, spec):
    """Runs one subcommand; returns (summary, invariants ok)."""
    progress = not args.quiet
    out_dir = args.out_dir

    if args.command == 'characterize':
        inputs = load_inputs(spec)
        return write_characterization(inputs, spec, out_dir), True

    if args.command == 'run':
        summary, _ = run(spec, out_dir=out_dir, progress=progress)
        return summary, all(summary["invariants"].values())

    if args.command == 'sweep-flex':
        table = sweep_flex(spec, sigmas=args.sigmas, out_dir=out_dir, progress=progress)
        return dict(medians=dict(zip(table["sigma_h"], table["median"]))), bool(table["invariants_ok"].all())

    if args.command == 'shortage-exp':
        if spec.synth is None:
            spec = spec.replace(upsilon=args.upsilon)
        _, summary = shortage_experiment(spec, approaches=args.approaches, seeds=args.seeds, out_dir=out_dir,
                                         progress=progress)
        return summary, all(summary["invariants"].values())

    if args.command == 'supply-mix':
        table = supply_mix_report(spec, mixes=args.mixes, out_dir=out_dir)
        return dict(mixes=len(table)), True

    data_rng, market_rng = spec.generators()
    inputs = load_inputs(spec, data_rng)
    report = assess_target(spec.market, inputs.supply, inputs.series, spec.sigma, market_rng,
                           approach=spec.approach, params=spec.characterizer, offers=spec.offers,
                           resimulate=args.resimulate, heuristic=True, bp_h_max=spec.bp_h_max)
    os.makedirs(out_dir, exist_ok=True)
    summary = report.to_dict()
    write_json(os.path.join(out_dir, "reliability.json"), summary)
    return summary, True


def main(argv=None):
    parser = get_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        spec = load_spec(args)
        summary, ok = execute(args, spec)
    except (InvariantViolation, CapacityError) as err:
        logger.error("Invariant violated: %s", err)
        return EXIT_INVARIANT
    except (InputError, UndefinedPriceError, UndefinedMetricError, FileNotFoundError) as err:
        logger.error("%s: %s", type(err).__name__, err)
        return EXIT_INPUT

    if args.track and setup(args.tracking_uri, args.experiment):
        log_run(dict(command=args.command, **spec.to_dict()), summary, out_dir=args.out_dir, run_name=args.command)

    if not ok:
        logger.error("Invariant checks failed, see %s", args.out_dir)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
