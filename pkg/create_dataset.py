import argparse
import logging

from src.common.data import make_dataset, inspect_dataset, SynthSpec
import src.common.constants as const


def get_parser():
    parser = argparse.ArgumentParser(description='Create a synthetic scenario: household consumption, national '
                                                 'supply and a dynamic tariff as CSV files.',
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument('--out_dir', type=str, default=const.DATA_ROOT,
                        help='Output directory')
    parser.add_argument('--n_households', type=int, default=const.N_HOUSEHOLDS,
                        help='Number of households')
    parser.add_argument('--start', type=str, default=const.SYNTH_KWARGS["start"],
                        help='First day (UTC midnight)')
    parser.add_argument('--days', type=int, default=1,
                        help='Number of days')
    parser.add_argument('--cases', type=str, nargs='+', default=["variable"], choices=const.SYNTH_CASES,
                        help='Supply archetype per day, repeated cyclically')
    parser.add_argument('--upsilon', type=float, default=const.UPSILON,
                        help='National-to-cohort supply scaling factor')
    parser.add_argument('--seed', type=int, default=0,
                        help='Random seed')
    parser.add_argument('--overwrite', action='store_true',
                        help='Replace an existing dataset')

    return parser


if __name__ == "__main__":
    parser = get_parser()
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    spec = SynthSpec(
        n_households=args.n_households,
        start=args.start,
        days=args.days,
        cases=tuple(args.cases),
        upsilon=args.upsilon
    )

    make_dataset(
        args.out_dir,
        spec=spec,
        seed=args.seed,
        overwrite=args.overwrite
    )
    inspect_dataset(args.out_dir)
