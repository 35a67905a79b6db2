"""
Run configuration and variable schema files (YAML) for nullboot.
"""

import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .data import (
    ValidationError,
    VariableSpec,
    read_mixed_csv,
    read_points_csv,
    read_presence_absence,
    read_series_csv,
)
from .dissimilarity import MixedDistanceConfig
from .pipeline import PipelineSpec
from .spatial import DEFAULT_GRID, DEFAULT_REPS


DATA_KINDS = ('mixed', 'series', 'presence-absence', 'points')

# Families each data kind can be bootstrapped under
COMPATIBLE_FAMILIES = {
    'mixed': ('latent-gaussian', 'gaussian'),
    'series': ('markov', 'gaussian'),
    'presence-absence': ('spatial', 'gaussian'),
    'points': ('gaussian',),
}

DEFAULT_FAMILY = {
    'mixed': 'latent-gaussian',
    'series': 'markov',
    'presence-absence': 'spatial',
    'points': 'gaussian',
}


def _load_yaml(path: str) -> Any:
    if not os.path.isfile(path):
        raise ValidationError(f'File not found: {path}')
    with open(path, 'r', encoding='utf-8') as f:
        try:
            return yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ValidationError(f'{path}: invalid YAML ({e})') from None


def load_schema(path: str) -> Tuple[List[VariableSpec], MixedDistanceConfig]:
    """
    Load a variable schema sidecar.

    The file holds either a list of variables or a mapping with ``variables``
    and an optional ``standardize`` flag. Each variable has ``name``, ``kind``,
    ``levels`` (categorical only), ``weight`` and, for nominal variables,
    optional per-level ``dummy_weights``.

    Returns:
        (variable specs, distance config built from them)

    Raises:
        ValidationError: On a malformed schema
    """
    document = _load_yaml(path)
    standardize = False
    if isinstance(document, dict):
        standardize = bool(document.get('standardize', False))
        document = document.get('variables')
    if not isinstance(document, list) or not document:
        raise ValidationError(f'{path}: schema must list at least one variable')

    specs = []
    dummy_weights = {}
    for i, entry in enumerate(document, start=1):
        if not isinstance(entry, dict) or 'name' not in entry or 'kind' not in entry:
            raise ValidationError(f'{path}: variable {i} needs at least name and kind')
        try:
            spec = VariableSpec.from_dict(entry)
        except (TypeError, ValueError) as e:
            raise ValidationError(f'{path}: variable {i}: {e}') from None
        if 'dummy_weights' in entry:
            if spec.kind != 'nominal':
                raise ValidationError(f'{path}: dummy_weights given for non-nominal variable {spec.name!r}')
            dummy_weights[spec.name] = tuple(float(w) for w in entry['dummy_weights'])
        specs.append(spec)
    names = [spec.name for spec in specs]
    if len(set(names)) != len(names):
        raise ValidationError(f'{path}: duplicate variable names')
    cfg = MixedDistanceConfig.from_specs(specs, dummy_weights=dummy_weights, standardize=standardize)
    cfg.check(specs)
    return specs, cfg


def parse_ks(value: Union[str, int, Sequence[int]]) -> Tuple[int, ...]:
    """
    Parse a candidate cluster set: a list, a single integer, ``"2..10"`` or ``"2,3,5"``.

    Raises:
        ValidationError: On an unparsable or empty value
    """
    if isinstance(value, int):
        return (value,)
    if isinstance(value, str):
        text = value.strip()
        try:
            if '..' in text:
                lo, hi = text.split('..', 1)
                ks = tuple(range(int(lo), int(hi) + 1))
            else:
                ks = tuple(int(part) for part in text.split(',') if part.strip())
        except ValueError:
            raise ValidationError(f'Invalid K: {value!r} (use e.g. "2..10" or "2,3,4")') from None
    else:
        try:
            ks = tuple(int(k) for k in value)
        except (TypeError, ValueError):
            raise ValidationError(f'Invalid K: {value!r}') from None
    if not ks:
        raise ValidationError('K must be nonempty')
    return ks


@dataclass
class RunConfig:
    """
    Everything a CLI run needs: inputs, pipeline settings and output location.

    Attributes:
        data: Main data file (mixed CSV, series CSV, presence-absence matrix or points CSV)
        data_kind: One of 'mixed', 'series', 'presence-absence', 'points'
        schema: Variable schema YAML (mixed data)
        neighbors: Region neighbor file (presence-absence data)
        T: Series length (series data; None = from the header)
        h: Number of categories (series data)
        prescription_period: Days between prescription days (series data)
        family: Null model family (default depends on data_kind)
        params: Previously fitted parameter file to reuse
        out_dir: Output directory
    """
    data: str
    data_kind: str
    schema: Optional[str] = None
    neighbors: Optional[str] = None
    T: Optional[int] = None
    h: Optional[int] = None
    prescription_period: int = 7
    family: Optional[str] = None
    method: str = 'pam'
    index: str = 'asw'
    ks: Tuple[int, ...] = tuple(range(2, 11))
    m: int = 99
    seed: int = 0
    aggregate: str = 'mean-rank'
    b: int = 50
    mds_dim: int = 4
    gmm_restarts: int = 10
    signed_bic: bool = False
    cont_bins: int = 10
    disjunction_grid: Tuple[float, ...] = DEFAULT_GRID
    disjunction_reps: int = DEFAULT_REPS
    costs: Optional[List[List[float]]] = None
    workers: int = 1
    params: Optional[str] = None
    out_dir: str = 'nullboot-out'

    def __post_init__(self):
        self.ks = parse_ks(self.ks)
        self.disjunction_grid = tuple(float(g) for g in self.disjunction_grid)
        if self.data_kind not in DATA_KINDS:
            raise ValidationError(f'Invalid data_kind: {self.data_kind} (must be one of {DATA_KINDS})')
        if self.family is None:
            self.family = DEFAULT_FAMILY[self.data_kind]
        if self.family not in COMPATIBLE_FAMILIES[self.data_kind]:
            raise ValidationError(
                f'shape mismatch: {self.data_kind} data cannot be bootstrapped under the {self.family} family '
                f'(use one of {COMPATIBLE_FAMILIES[self.data_kind]})'
            )
        if self.m < 1:
            raise ValidationError('m must be >= 1')
        if any(k < 1 for k in self.ks):
            raise ValidationError('K must contain positive integers only')
        if self.b < 1:
            raise ValidationError('b must be >= 1')
        if self.data_kind == 'mixed' and not self.schema:
            raise ValidationError('Mixed data needs a schema file')
        if self.data_kind == 'presence-absence' and not self.neighbors:
            raise ValidationError('Presence-absence data needs a neighbors file')
        if self.data_kind == 'series' and self.h is None:
            raise ValidationError('Series data needs h (number of categories)')

    def check_paths(self):
        """Raise ValidationError unless every referenced input file exists."""
        for name in ('data', 'schema', 'neighbors', 'params'):
            path = getattr(self, name)
            if path is not None and not os.path.isfile(path):
                raise ValidationError(f'File not found: {path} ({name})')

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d['ks'] = list(self.ks)
        d['disjunction_grid'] = list(self.disjunction_grid)
        return d

    def pipeline_spec(self, distance: Optional[MixedDistanceConfig] = None) -> PipelineSpec:
        return PipelineSpec(
            family=self.family,
            method=self.method,
            index=self.index,
            ks=self.ks,
            m=self.m,
            seed=self.seed,
            aggregate=self.aggregate,
            b=self.b,
            mds_dim=self.mds_dim,
            gmm_restarts=self.gmm_restarts,
            signed_bic=self.signed_bic,
            cont_bins=self.cont_bins,
            disjunction_grid=self.disjunction_grid,
            disjunction_reps=self.disjunction_reps,
            distance=distance,
            costs=None if self.costs is None else np.asarray(self.costs, dtype=float),
            workers=self.workers,
        )


def _resolve_relative(value: Optional[str], base: str) -> Optional[str]:
    if value is None or os.path.isabs(value):
        return value
    return os.path.join(base, value)


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Load a run configuration from YAML and apply overrides.

    Relative file paths in the YAML are resolved against the config file's
    directory. Overrides with value None are ignored.

    Raises:
        ValidationError: On unknown keys, invalid values or missing required fields
    """
    values: Dict[str, Any] = {}
    if path is not None:
        document = _load_yaml(path)
        if document is None:
            document = {}
        if not isinstance(document, dict):
            raise ValidationError(f'{path}: config must be a mapping')
        base = os.path.dirname(os.path.abspath(path))
        for key in ('data', 'schema', 'neighbors', 'params', 'out_dir'):
            if key in document:
                document[key] = _resolve_relative(document[key], base)
        values.update(document)
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValidationError(f'Unknown config keys: {", ".join(unknown)}')
    missing = [key for key in ('data', 'data_kind') if key not in values]
    if missing:
        raise ValidationError(f'Missing config keys: {", ".join(missing)}')
    try:
        return RunConfig(**values)
    except TypeError as e:
        raise ValidationError(f'Invalid config: {e}') from None


def load_data(config: RunConfig):
    """
    Read the dataset a config points at.

    Returns:
        (dataset, MixedDistanceConfig or None)
    """
    config.check_paths()
    if config.data_kind == 'mixed':
        specs, distance = load_schema(config.schema)
        return read_mixed_csv(config.data, specs), distance
    if config.data_kind == 'series':
        return read_series_csv(config.data, config.T, config.h, config.prescription_period), None
    if config.data_kind == 'presence-absence':
        return read_presence_absence(config.data, config.neighbors), None
    return read_points_csv(config.data), None
