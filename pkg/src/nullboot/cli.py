"""
Command-line interface for nullboot.
"""

import argparse
import sys

from .config import DATA_KINDS
from .core import run_nullboot
from .families import FAMILY_NAMES
from .pipeline import AGGREGATE_MODES, INDEXES, METHODS


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the validation exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f'{self.prog}: error: {message}\n')


class NullbootArgumentParser:
    """Custom argument parser for nullboot."""

    def __init__(self):
        self.parser = _ArgumentParser(
            prog='nullboot',
            description='Test data for homogeneity against clustering and calibrate cluster '
                        'validation indexes by parametric bootstrap from fitted null models',
            epilog='File formats and the result JSON schema are documented in README.md.'
        )
        self._setup_arguments()

    def _setup_arguments(self):
        """Configure all subcommands and their arguments."""

        # Shared by the commands that read a run configuration
        common = _ArgumentParser(add_help=False)
        config_group = common.add_argument_group('configuration')
        config_group.add_argument(
            '--config',
            metavar='<path>',
            help='YAML run configuration (command-line flags override its values)'
        )
        config_group.add_argument(
            '--seed',
            type=int,
            metavar='<int>',
            help='Master seed (default: 0)'
        )
        config_group.add_argument(
            '--workers',
            type=int,
            metavar='<int>',
            help='Worker threads; never changes results (default: 1)'
        )
        config_group.add_argument(
            '--out-dir',
            metavar='<path>',
            help='Output directory (default: nullboot-out)'
        )

        data_group = common.add_argument_group('data')
        data_group.add_argument('--data', metavar='<path>', help='Main data file')
        data_group.add_argument('--data-kind', choices=DATA_KINDS, help='Shape of the data file')
        data_group.add_argument('--schema', metavar='<path>', help='Variable schema YAML (mixed data)')
        data_group.add_argument('--neighbors', metavar='<path>', help='Region neighbor file (presence-absence data)')

        pipeline_group = common.add_argument_group('pipeline')
        pipeline_group.add_argument('--family', choices=FAMILY_NAMES, help='Null model family')
        pipeline_group.add_argument('--method', choices=METHODS, help='Clustering method')
        pipeline_group.add_argument('--index', choices=INDEXES, help='Validation index')
        pipeline_group.add_argument('--ks', metavar='<set>', help='Candidate cluster counts, e.g. 2..10 or 2,3,4')
        pipeline_group.add_argument('--m', type=int, metavar='<int>', help='Number of bootstrap replicates')
        pipeline_group.add_argument('--aggregate', choices=AGGREGATE_MODES, help='Aggregation mode for the overall p-value')
        pipeline_group.add_argument('--b', type=int, metavar='<int>', help='Prediction strength half-splits')
        pipeline_group.add_argument('--mds-dim', type=int, metavar='<int>', help='MDS dimension for mixture clustering')

        subparsers = self.parser.add_subparsers(dest='command', metavar='<command>')
        subparsers.required = True

        estimate = subparsers.add_parser(
            'estimate-null',
            parents=[common],
            help='Fit the null model and write its parameters'
        )
        estimate.add_argument('--out', metavar='<path>', help='Parameter file (default: <out-dir>/params.json)')

        sample = subparsers.add_parser('sample', help='Draw one synthetic dataset from a parameter file')
        sample.add_argument('--params', required=True, metavar='<path>', help='Parameter file from estimate-null')
        sample.add_argument('--n', type=int, required=True, metavar='<int>', help='Number of observations')
        sample.add_argument('--seed', type=int, default=0, metavar='<int>', help='Seed (default: 0)')
        sample.add_argument('--out', required=True, metavar='<path>', help='Output data file')
        sample.add_argument(
            '--neighbors-out',
            metavar='<path>',
            help='Neighbor file for presence-absence samples (default: <out>_neighbors.csv)'
        )

        run = subparsers.add_parser('run', parents=[common], help='Run the parametric bootstrap')
        run.add_argument('--params', metavar='<path>', help='Reuse parameters from estimate-null')

        report = subparsers.add_parser('report', help='Summarize a result file and redraw its validity plot')
        report.add_argument('result', metavar='<result.json>', help='Result file written by run')
        report.add_argument('--svg', metavar='<path>', help='Plot path (default: next to the result file)')

    def parse_args(self, args=None):
        """Parse command-line arguments and validate."""
        parsed = self.parser.parse_args(args)
        self._validate_args(parsed)
        return parsed

    def _validate_args(self, args):
        """Validate argument values argparse cannot check on its own."""
        if getattr(args, 'workers', None) is not None and args.workers < 1:
            self.parser.error('--workers must be a positive integer')
        if getattr(args, 'seed', None) is not None and args.seed < 0:
            self.parser.error('--seed must be >= 0')
        if args.command == 'sample' and args.n < 1:
            self.parser.error('--n must be a positive integer')


def main(argv=None):
    """Main entry point for nullboot CLI."""
    parser = NullbootArgumentParser()
    args = parser.parse_args(argv)
    return run_nullboot(args)


if __name__ == '__main__':
    sys.exit(main())
