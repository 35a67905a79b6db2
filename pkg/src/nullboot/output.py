"""
Output formatting for nullboot (result JSON, CSV tables, validity plot, summary text).
"""

import csv
import json
import os
from typing import Any, Dict, Optional, Sequence, Tuple

import matplotlib
from matplotlib.figure import Figure

from .data import DissimilarityMatrix, NullbootError, ValidationError
from .engine import SCHEMA_VERSION, BootstrapResult
from .families import resolve_family


REPLICATE_COLOR = '#9e9e9e'
OBSERVED_COLOR = '#c62828'


def format_result_json(result: BootstrapResult) -> str:
    """
    Format a bootstrap result as JSON.

    The document carries ``schema_version``; infinite calibrated values are
    written as ``Infinity`` / ``-Infinity``.
    """
    return json.dumps(result.to_dict(), indent=2, ensure_ascii=False)


def write_result_json(path: str, result: BootstrapResult):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(format_result_json(result))
        f.write('\n')


def read_result_json(path: str) -> BootstrapResult:
    """
    Load a result written by ``write_result_json``.

    Raises:
        FileNotFoundError: If the file does not exist
        ValidationError: On malformed JSON or a schema version mismatch
    """
    with open(path, 'r', encoding='utf-8') as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f'{path}: not a valid result file ({e})') from None
    try:
        return BootstrapResult.from_dict(document)
    except (KeyError, TypeError) as e:
        raise ValidationError(f'{path}: incomplete result file (missing {e})') from None
    except ValidationError as e:
        raise ValidationError(f'{path}: {e}') from None


def write_replicates_csv(path: str, result: BootstrapResult):
    """Observed profile (first row) and the m x |K| replicate matrix, one row per dataset."""
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['dataset', *(f'k{k}' for k in result.ks)])
        writer.writerow(['observed', *(repr(result.observed[k]) for k in result.ks)])
        for q, row in enumerate(result.replicates, start=1):
            writer.writerow([q, *(repr(float(v)) for v in row)])


def build_validity_figure(result: BootstrapResult, title: Optional[str] = None) -> Figure:
    """
    Bootstrap validity plot: every replicate's index profile against k, observed on top.

    Replicate lines carry the SVG ids ``replicate-1`` .. ``replicate-m``, the
    observed line ``observed``.
    """
    fig = Figure(figsize=(7, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    ks = list(result.ks)
    for q, row in enumerate(result.replicates, start=1):
        line, = ax.plot(ks, row, color=REPLICATE_COLOR, linewidth=0.7, alpha=0.6)
        line.set_gid(f'replicate-{q}')
    line, = ax.plot(ks, [result.observed[k] for k in ks], color=OBSERVED_COLOR, linewidth=2.0,
                    marker='o', label='observed')
    line.set_gid('observed')
    ax.set_xticks(ks)
    ax.set_xlabel('k')
    ax.set_ylabel(result.config.get('index', 'V'))
    ax.set_title(title or f'{result.family} null, m={result.m}, p={result.aggregate_p:.4g}')
    ax.legend(loc='best')
    fig.tight_layout()
    return fig


def write_validity_svg(path: str, result: BootstrapResult):
    fig = build_validity_figure(result)
    with matplotlib.rc_context({'svg.hashsalt': 'nullboot'}):
        fig.savefig(path, format='svg', metadata={'Date': None})


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return '-'
    if value != value or abs(value) == float('inf'):
        return str(value)
    return f'{value:.4f}'


def format_summary_table(result: BootstrapResult) -> str:
    """Human-readable summary: per-k table, aggregated p-values and k-hat."""
    lines = [
        f'Null model: {result.family}   replicates: {result.m}',
        '',
        f'{"k":>4}  {"observed":>10}  {"EV":>10}  {"SV":>10}  {"p_k":>8}  {"calibrated":>10}',
    ]
    for k in result.ks:
        lines.append(
            f'{k:>4}  {_fmt(result.observed[k]):>10}  '
            f'{_fmt(result.ev[k] if result.ev else None):>10}  '
            f'{_fmt(result.sv[k] if result.sv else None):>10}  '
            f'{_fmt(result.per_k_p[k]):>8}  '
            f'{_fmt(result.calibrated[k] if result.calibrated else None):>10}'
        )
    lines.append('')
    for mode, value in result.aggregate_all.items():
        marker = ' (reported)' if mode == result.aggregate_mode else ''
        lines.append(f'Aggregated p-value [{mode}]: {value:.4f}{marker}')
    lines.append(f'Selected k: {result.k_hat if result.k_hat is not None else "- (needs m >= 2)"}')
    return '\n'.join(lines)


def export_result(result: BootstrapResult, out_dir: str, stem: str = 'result') -> Dict[str, str]:
    """
    Write the result JSON, the replicate CSV and the validity SVG.

    Returns:
        Mapping 'json' / 'csv' / 'svg' -> written path

    Raises:
        NullbootError: If a file cannot be written (message names the path)
    """
    paths = {
        'json': os.path.join(out_dir, f'{stem}.json'),
        'csv': os.path.join(out_dir, f'{stem}_replicates.csv'),
        'svg': os.path.join(out_dir, f'{stem}_validity.svg'),
    }
    writers = {'json': write_result_json, 'csv': write_replicates_csv, 'svg': write_validity_svg}
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise NullbootError(f'Cannot create output directory {out_dir}: {e.strerror}') from e
    for kind, path in paths.items():
        try:
            writers[kind](path, result)
        except OSError as e:
            raise NullbootError(f'Cannot write {path}: {e.strerror}') from e
    return paths


def format_params_json(family: str, params: Any, report: Dict[str, Any]) -> str:
    document = {
        'schema_version': SCHEMA_VERSION,
        'family': family,
        'params': params.to_dict(),
        'report': report,
    }
    return json.dumps(document, indent=2, ensure_ascii=False)


def write_params_json(path: str, family: str, params: Any, report: Dict[str, Any]):
    """Write fitted null parameters with their family tag and estimation report."""
    with open(path, 'w', encoding='utf-8') as f:
        f.write(format_params_json(family, params, report))
        f.write('\n')


def read_params_json(path: str) -> Tuple[str, Any]:
    """
    Load null parameters written by ``write_params_json``.

    Returns:
        (family name, params object)

    Raises:
        ValidationError: On a malformed file, unknown family or schema version mismatch
    """
    with open(path, 'r', encoding='utf-8') as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f'{path}: not a valid parameter file ({e})') from None
    version = document.get('schema_version')
    if version != SCHEMA_VERSION:
        raise ValidationError(f'{path}: unsupported schema version {version!r} (expected {SCHEMA_VERSION})')
    family = resolve_family(document.get('family'))
    try:
        return family.name, family.params_from_dict(document['params'])
    except (KeyError, TypeError) as e:
        raise ValidationError(f'{path}: incomplete parameter file (missing {e})') from None


def write_dissimilarity_csv(path: str, D: DissimilarityMatrix, names: Optional[Sequence[str]] = None):
    """Write a dissimilarity matrix with object names as header row and first column."""
    names = list(names) if names is not None else [str(i + 1) for i in range(D.n)]
    if len(names) != D.n:
        raise ValidationError('Object names do not match the matrix size')
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['', *names])
        for name, row in zip(names, D.values):
            writer.writerow([name, *(repr(float(v)) for v in row)])
