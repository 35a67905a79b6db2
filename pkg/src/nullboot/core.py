"""
Core orchestration for nullboot.
"""

import json
import os
import sys
import warnings
from typing import Callable, Optional

from .config import RunConfig, load_data, load_run_config
from .data import (
    CategoricalSeriesDataset,
    MixedDataset,
    NullbootError,
    NullbootWarning,
    NumericalError,
    PointCloud,
    PresenceAbsenceData,
    ReplicateError,
    ValidationError,
    write_mixed_csv,
    write_points_csv,
    write_presence_absence,
    write_series_csv,
)
from .engine import estimate_null, run_bootstrap
from .families import resolve_family
from .output import (
    export_result,
    format_summary_table,
    read_params_json,
    read_result_json,
    write_params_json,
    write_validity_svg,
)


# Exit codes
EXIT_SUCCESS = 0
EXIT_VALIDATION_ERROR = 1
EXIT_RUNTIME_ERROR = 2


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f'Warning: {message}', file=sys.stderr)


def run_command(command: Callable, args) -> int:
    """
    Run one subcommand, mapping failures to exit codes.

    Library warnings are printed to stderr with a ``Warning:`` prefix.

    Returns:
        EXIT_SUCCESS, EXIT_VALIDATION_ERROR (invalid input, missing file) or
        EXIT_RUNTIME_ERROR (numerical breakdown, any other failure)
    """
    with warnings.catch_warnings():
        warnings.simplefilter('default', NullbootWarning)
        warnings.showwarning = _show_warning
        try:
            command(args)
            return EXIT_SUCCESS
        except KeyboardInterrupt:
            print('\n\nInterrupted by user', file=sys.stderr)
            return EXIT_RUNTIME_ERROR
        except ValidationError as e:
            print(f'Error: {e}', file=sys.stderr)
            return EXIT_VALIDATION_ERROR
        except FileNotFoundError as e:
            print(f'Error: File not found: {e.filename}', file=sys.stderr)
            return EXIT_VALIDATION_ERROR
        except ReplicateError as e:
            print(f'Error: {e}', file=sys.stderr)
            print(f'       Reproduce with replicate {e.replicate}, seed {e.seed}', file=sys.stderr)
            return EXIT_RUNTIME_ERROR
        except (NumericalError, NullbootError) as e:
            print(f'Error: {e}', file=sys.stderr)
            return EXIT_RUNTIME_ERROR
        except Exception as e:
            print(f'Internal error: {e}', file=sys.stderr)
            import traceback
            traceback.print_exc(file=sys.stderr)
            return EXIT_RUNTIME_ERROR


def config_from_args(args) -> RunConfig:
    """Load ``--config`` and apply the command-line overrides."""
    overrides = {
        'data': getattr(args, 'data', None),
        'data_kind': getattr(args, 'data_kind', None),
        'schema': getattr(args, 'schema', None),
        'neighbors': getattr(args, 'neighbors', None),
        'family': getattr(args, 'family', None),
        'method': getattr(args, 'method', None),
        'index': getattr(args, 'index', None),
        'ks': getattr(args, 'ks', None),
        'm': getattr(args, 'm', None),
        'aggregate': getattr(args, 'aggregate', None),
        'b': getattr(args, 'b', None),
        'mds_dim': getattr(args, 'mds_dim', None),
        'seed': getattr(args, 'seed', None),
        'workers': getattr(args, 'workers', None),
        'params': getattr(args, 'params', None),
        'out_dir': getattr(args, 'out_dir', None),
    }
    return load_run_config(getattr(args, 'config', None), overrides)


def cmd_estimate_null(args):
    """Fit the configured null family and write its parameters plus an estimation report."""
    config = config_from_args(args)
    data, distance = load_data(config)
    spec = config.pipeline_spec(distance)
    params = estimate_null(data, spec)
    family = resolve_family(spec.family)
    report = family.report(params)

    out = args.out or os.path.join(config.out_dir, 'params.json')
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    write_params_json(out, family.name, params, report)
    print(json.dumps({'family': family.name, 'params': out, 'report': report}, indent=2, ensure_ascii=False))


def write_dataset(dataset, out: str, neighbors_out: Optional[str] = None):
    """Write a dataset in the input format matching its type."""
    if isinstance(dataset, MixedDataset):
        write_mixed_csv(out, dataset)
    elif isinstance(dataset, CategoricalSeriesDataset):
        write_series_csv(out, dataset)
    elif isinstance(dataset, PresenceAbsenceData):
        write_presence_absence(out, neighbors_out or f'{os.path.splitext(out)[0]}_neighbors.csv', dataset)
    elif isinstance(dataset, PointCloud):
        write_points_csv(out, dataset)
    else:
        raise ValidationError(f'Cannot write {type(dataset).__name__}')


def cmd_sample(args):
    """Draw one synthetic dataset from a parameter file."""
    family_name, params = read_params_json(args.params)
    family = resolve_family(family_name)
    if args.n < 1:
        raise ValidationError('n must be >= 1')
    dataset = family.sample(params, args.n, args.seed)
    write_dataset(dataset, args.out, getattr(args, 'neighbors_out', None))
    print(f'Wrote {family_name} sample of size {args.n} to {args.out}', file=sys.stderr)


def _progress(done: int, total: int):
    print(f'Replicates: {done}/{total}', file=sys.stderr)


def cmd_run(args):
    """Run the bootstrap and write result JSON, replicate CSV and validity SVG."""
    config = config_from_args(args)
    data, distance = load_data(config)
    spec = config.pipeline_spec(distance)

    params = None
    if config.params:
        family_name, params = read_params_json(config.params)
        if family_name != spec.family:
            raise ValidationError(f'Parameter file holds a {family_name} model, config asks for {spec.family}')

    result = run_bootstrap(data, spec, progress=_progress, params=params)
    result.config['run'] = config.to_dict()
    paths = export_result(result, config.out_dir)
    print(format_summary_table(result))
    for kind, path in paths.items():
        print(f'Wrote {kind}: {path}', file=sys.stderr)


def cmd_report(args):
    """Regenerate the validity plot and summary from a result file."""
    result = read_result_json(args.result)
    svg = args.svg or f'{os.path.splitext(args.result)[0]}_validity.svg'
    write_validity_svg(svg, result)
    print(format_summary_table(result))
    print(f'Wrote svg: {svg}', file=sys.stderr)


COMMANDS = {
    'estimate-null': cmd_estimate_null,
    'sample': cmd_sample,
    'run': cmd_run,
    'report': cmd_report,
}


def run_nullboot(args) -> int:
    """
    Main execution function for nullboot.

    Args:
        args: Parsed command-line arguments

    Returns:
        Exit code
    """
    return run_command(COMMANDS[args.command], args)
