"""
Typed datasets, partitions and dissimilarity matrices for nullboot, plus CSV ingestion.
"""

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np


KINDS = ('continuous', 'ordinal', 'nominal', 'binary')
MISSING_TOKEN = 'NA'

# Code stored for a missing day in a CategoricalSeriesDataset
MISSING = 0

# Partition label reserved for noise objects
NOISE = 0


class NullbootError(Exception):
    """Base class for all nullboot errors."""


class ValidationError(NullbootError, ValueError):
    """Input data or configuration violates a documented invariant."""


class NumericalError(NullbootError, RuntimeError):
    """A numerical procedure broke down (degenerate fit, failed search)."""


class ReplicateError(NumericalError):
    """A bootstrap replicate kept failing after all retries."""

    def __init__(self, message: str, replicate: int, seed: int):
        super().__init__(message)
        self.replicate = replicate
        self.seed = seed


class NullbootWarning(UserWarning):
    """Recoverable data condition worth reporting."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class VariableSpec:
    """
    Declared type of one column of a mixed-type dataset.

    Attributes:
        name: Column name as it appears in the CSV header
        kind: One of 'continuous', 'ordinal', 'nominal', 'binary'
        levels: Ordered category labels (empty for continuous)
        weight: Multiplier of the variable's squared distance contribution
    """
    name: str
    kind: str
    levels: Tuple[str, ...] = ()
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'levels', tuple(str(level) for level in self.levels))
        if self.kind not in KINDS:
            raise ValidationError(f'Variable {self.name!r}: invalid kind {self.kind!r} (must be one of {KINDS})')
        if self.kind == 'continuous' and self.levels:
            raise ValidationError(f'Variable {self.name!r}: continuous variables take no levels')
        if self.kind != 'continuous' and not self.levels:
            raise ValidationError(f'Variable {self.name!r}: {self.kind} variables need levels')
        if self.kind == 'binary' and len(self.levels) != 2:
            raise ValidationError(f'Variable {self.name!r}: binary variables need exactly 2 levels')
        if len(set(self.levels)) != len(self.levels):
            raise ValidationError(f'Variable {self.name!r}: duplicate levels')
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise ValidationError(f'Variable {self.name!r}: weight must be a finite number >= 0')

    @property
    def is_categorical(self) -> bool:
        return self.kind != 'continuous'

    def to_dict(self) -> Dict:
        result = {'name': self.name, 'kind': self.kind, 'weight': self.weight}
        if self.levels:
            result['levels'] = list(self.levels)
        return result

    @classmethod
    def from_dict(cls, d: Dict) -> 'VariableSpec':
        return cls(
            name=str(d['name']),
            kind=str(d['kind']),
            levels=tuple(d.get('levels', ())),
            weight=float(d.get('weight', 1.0)),
        )


@dataclass(frozen=True)
class MixedDataset:
    """
    n x p table of mixed-type observations.

    Continuous columns hold reals; categorical columns hold the 0-based index
    of the level in ``specs[j].levels``.
    """
    specs: Tuple[VariableSpec, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'specs', tuple(self.specs))
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.specs):
            raise ValidationError(
                f'Values shape {values.shape} does not match {len(self.specs)} variables'
            )
        if values.shape[0] < 2:
            raise ValidationError('n >= 2 required')
        if not np.all(np.isfinite(values)):
            raise ValidationError('Mixed datasets may not contain missing or infinite values')
        for j, spec in enumerate(self.specs):
            if spec.is_categorical:
                col = values[:, j]
                if np.any(col != np.round(col)) or np.any(col < 0) or np.any(col >= len(spec.levels)):
                    raise ValidationError(f'Variable {spec.name!r}: value outside its {len(spec.levels)} levels')
        object.__setattr__(self, 'values', _frozen(values))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> List[str]:
        return [spec.name for spec in self.specs]

    def column(self, j: int) -> np.ndarray:
        if self.specs[j].is_categorical:
            return self.values[:, j].astype(int)
        return self.values[:, j]


@dataclass(frozen=True)
class CategoricalSeriesDataset:
    """
    n categorical series of common length T over categories 1..h.

    Missing days are stored as ``MISSING`` (0).
    """
    series: np.ndarray
    h: int
    prescription_period: int = 7

    def __post_init__(self):
        series = np.asarray(self.series)
        if series.ndim != 2:
            raise ValidationError('Series must form a 2-D array (n series x T days)')
        if series.shape[0] < 1 or series.shape[1] < 1:
            raise ValidationError('At least one series with at least one day is required')
        if self.h < 1:
            raise ValidationError('h must be >= 1')
        if self.prescription_period < 1:
            raise ValidationError('prescription_period must be >= 1')
        if np.any(series < 0) or np.any(series > self.h):
            raise ValidationError(f'category out of range 1..{self.h}')
        object.__setattr__(self, 'series', _frozen(series.astype(int)))

    @property
    def n(self) -> int:
        return self.series.shape[0]

    @property
    def T(self) -> int:
        return self.series.shape[1]

    @property
    def missing(self) -> np.ndarray:
        return self.series == MISSING


@dataclass(frozen=True)
class PresenceAbsenceData:
    """
    Binary species x regions matrix with a symmetric region adjacency.

    Attributes:
        matrix: Boolean array, True where the species is present in the region
        adjacency: Boolean regions x regions array, symmetric and irreflexive
        regions: Region names
        species: Species names
    """
    matrix: np.ndarray
    adjacency: np.ndarray
    regions: Tuple[str, ...] = ()
    species: Tuple[str, ...] = ()

    def __post_init__(self):
        matrix = np.asarray(self.matrix)
        if matrix.ndim != 2:
            raise ValidationError('Presence-absence matrix must be 2-D')
        if not np.all(np.isin(matrix, (0, 1))):
            raise ValidationError('Presence-absence entries must be 0 or 1')
        matrix = matrix.astype(bool)
        n_species, n_regions = matrix.shape
        empty = np.flatnonzero(~matrix.any(axis=1))
        if empty.size:
            raise ValidationError(f'Species with zero presences are not allowed (rows {list(empty + 1)})')
        adjacency = np.asarray(self.adjacency).astype(bool)
        if adjacency.shape != (n_regions, n_regions):
            raise ValidationError(f'Adjacency must be {n_regions} x {n_regions}')
        if np.any(np.diag(adjacency)):
            raise ValidationError('irreflexive adjacency required')
        if np.any(adjacency != adjacency.T):
            raise ValidationError('Adjacency must be symmetric')
        regions = tuple(self.regions) or tuple(str(r + 1) for r in range(n_regions))
        species = tuple(self.species) or tuple(f'species{i + 1}' for i in range(n_species))
        if len(regions) != n_regions or len(species) != n_species:
            raise ValidationError('Region/species names do not match the matrix shape')
        object.__setattr__(self, 'matrix', _frozen(matrix))
        object.__setattr__(self, 'adjacency', _frozen(adjacency))
        object.__setattr__(self, 'regions', regions)
        object.__setattr__(self, 'species', species)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_species(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_regions(self) -> int:
        return self.matrix.shape[1]

    @property
    def sizes(self) -> np.ndarray:
        return self.matrix.sum(axis=1)


@dataclass(frozen=True)
class PointCloud:
    """n x q real coordinates, compared by Euclidean distance."""
    points: np.ndarray
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[0] < 2:
            raise ValidationError('n >= 2 required')
        if not np.all(np.isfinite(points)):
            raise ValidationError('Point coordinates must be finite')
        names = tuple(self.names) or tuple(f'x{j + 1}' for j in range(points.shape[1]))
        if len(names) != points.shape[1]:
            raise ValidationError('Coordinate names do not match the number of columns')
        object.__setattr__(self, 'points', _frozen(points))
        object.__setattr__(self, 'names', names)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def q(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Symmetric, nonnegative n x n matrix with zero diagonal."""
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValidationError('Dissimilarity matrix must be square')
        if not np.all(np.isfinite(values)):
            raise ValidationError('Dissimilarities must be finite')
        scale = max(1.0, float(np.abs(values).max(initial=0.0)))
        if np.any(np.abs(np.diag(values)) > 1e-12 * scale):
            raise ValidationError('Dissimilarity matrix must have a zero diagonal')
        if np.any(np.abs(values - values.T) > 1e-10 * scale):
            raise ValidationError('Dissimilarity matrix must be symmetric')
        if np.any(values < -1e-12 * scale):
            raise ValidationError('Dissimilarities must be nonnegative')
        values = np.maximum((values + values.T) / 2.0, 0.0)
        np.fill_diagonal(values, 0.0)
        object.__setattr__(self, 'values', _frozen(values))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def subset(self, index: Sequence[int]) -> 'DissimilarityMatrix':
        index = np.asarray(index, dtype=int)
        return DissimilarityMatrix(self.values[np.ix_(index, index)])


@dataclass(frozen=True)
class Partition:
    """
    Assignment of n objects to clusters 1..k, with ``NOISE`` (0) for noise.

    Attributes:
        labels: Length-n integer labels
        k: Number of clusters
        medoids: Optional object indexes, medoids[i] carrying label i + 1
    """
    labels: np.ndarray
    k: int
    medoids: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if labels.ndim != 1:
            raise ValidationError('Partition labels must be 1-D')
        if self.k < 1:
            raise ValidationError('k must be >= 1')
        if np.any(labels < 0) or np.any(labels > self.k):
            raise ValidationError(f'Partition labels must lie in 1..{self.k} or be noise')
        present = set(np.unique(labels[labels != NOISE]).tolist())
        if present != set(range(1, self.k + 1)):
            raise ValidationError('Every cluster 1..k must be nonempty')
        if self.medoids is not None:
            medoids = tuple(int(m) for m in self.medoids)
            if len(medoids) != self.k:
                raise ValidationError('One medoid per cluster required')
            for i, m in enumerate(medoids):
                if labels[m] != i + 1:
                    raise ValidationError(f'Medoid {m} does not carry label {i + 1}')
            object.__setattr__(self, 'medoids', medoids)
        object.__setattr__(self, 'labels', _frozen(labels))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    @classmethod
    def from_labels(cls, labels: Iterable[int]) -> 'Partition':
        """Build a partition from arbitrary cluster ids, numbered by first occurrence."""
        labels = np.asarray(list(labels))
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(first.size, dtype=int)
        rank[np.argsort(first, kind='stable')] = np.arange(1, first.size + 1)
        return cls(labels=rank[inverse.ravel()], k=int(first.size))


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _read_rows(path: str) -> Tuple[List[str], List[List[str]]]:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        rows = [row for row in csv.reader(f) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ValidationError(f'{path}: file is empty')
    header = [cell.strip() for cell in rows[0]]
    return header, [[cell.strip() for cell in row] for row in rows[1:]]


def read_mixed_csv(path: str, schema: Sequence[VariableSpec]) -> MixedDataset:
    """
    Read a mixed-type CSV file against a declared variable schema.

    Args:
        path: CSV file with a header row naming the variables
        schema: Variable specifications, one per column

    Returns:
        MixedDataset with level labels resolved to level indexes

    Raises:
        ValidationError: On header mismatch, unknown level, non-numeric continuous cell,
            row length mismatch or fewer than 2 rows
    """
    schema = tuple(schema)
    header, rows = _read_rows(path)
    names = [spec.name for spec in schema]
    if header != names:
        raise ValidationError(f'{path}: header {header} does not match schema names {names}')
    if len(rows) < 2:
        raise ValidationError(f'{path}: n >= 2 required')

    lookup = [{label: g for g, label in enumerate(spec.levels)} for spec in schema]
    values = np.empty((len(rows), len(schema)))
    for i, row in enumerate(rows):
        line = i + 2
        if len(row) != len(schema):
            raise ValidationError(f'{path}:{line}: row length mismatch ({len(row)} cells, expected {len(schema)})')
        for j, (cell, spec) in enumerate(zip(row, schema)):
            if spec.is_categorical:
                if cell not in lookup[j]:
                    raise ValidationError(f'{path}:{line}: unknown level {cell!r} for variable {spec.name!r}')
                values[i, j] = lookup[j][cell]
            else:
                try:
                    values[i, j] = float(cell)
                except ValueError:
                    raise ValidationError(
                        f'{path}:{line}: non-numeric value {cell!r} for continuous variable {spec.name!r}'
                    ) from None
    return MixedDataset(specs=schema, values=values)


def write_mixed_csv(path: str, data: MixedDataset):
    """Write a mixed dataset in the format read by ``read_mixed_csv``."""
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(data.names)
        for row in data.values:
            writer.writerow([
                spec.levels[int(v)] if spec.is_categorical else repr(float(v))
                for v, spec in zip(row, data.specs)
            ])


def read_series_csv(path: str, T: Optional[int], h: int, prescription_period: int = 7) -> CategoricalSeriesDataset:
    """
    Read categorical series, one per row, with ``NA`` for missing days.

    Args:
        path: CSV file with a header row naming the days
        T: Expected series length (None = take it from the header)
        h: Number of categories
        prescription_period: Days between prescription days

    Returns:
        CategoricalSeriesDataset

    Raises:
        ValidationError: On ragged rows, unparsable cells or categories outside 1..h
    """
    header, rows = _read_rows(path)
    if T is None:
        T = len(header)
    if len(header) != T:
        raise ValidationError(f'{path}: length mismatch (header has {len(header)} days, expected {T})')
    if not rows:
        raise ValidationError(f'{path}: no series found')
    series = np.empty((len(rows), T), dtype=int)
    for i, row in enumerate(rows):
        line = i + 2
        if len(row) != T:
            raise ValidationError(f'{path}:{line}: length mismatch ({len(row)} days, expected {T})')
        for t, cell in enumerate(row):
            if cell == MISSING_TOKEN:
                series[i, t] = MISSING
                continue
            try:
                value = int(cell)
            except ValueError:
                raise ValidationError(f'{path}:{line}: non-integer category {cell!r}') from None
            if not 1 <= value <= h:
                raise ValidationError(f'{path}:{line}: category out of range ({value} not in 1..{h})')
            series[i, t] = value
    return CategoricalSeriesDataset(series=series, h=h, prescription_period=prescription_period)


def write_series_csv(path: str, data: CategoricalSeriesDataset):
    """Write categorical series in the format read by ``read_series_csv``."""
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow([f'day{t + 1}' for t in range(data.T)])
        for row in data.series:
            writer.writerow([MISSING_TOKEN if v == MISSING else str(int(v)) for v in row])


def _region_index(token: str, regions: Sequence[str], path: str, line: int) -> int:
    if token in regions:
        return regions.index(token)
    if token.isdigit() and 1 <= int(token) <= len(regions):
        return int(token) - 1
    raise ValidationError(f'{path}:{line}: unknown region {token!r}')


def read_neighbors(path: str, regions: Sequence[str]) -> np.ndarray:
    """
    Read a region neighborhood file into a symmetric adjacency matrix.

    Each line is ``region,neighbor[,neighbor...]``; a two-field line declares a
    single pair. Regions may be given by name or by 1-based position.

    Raises:
        ValidationError: On unknown regions or a region declared its own neighbor
    """
    regions = list(regions)
    declared = np.zeros((len(regions), len(regions)), dtype=bool)
    has_line = np.zeros(len(regions), dtype=bool)
    with open(path, 'r', encoding='utf-8', newline='') as f:
        for line, row in enumerate(csv.reader(f), start=1):
            row = [cell.strip() for cell in row if cell.strip()]
            if not row or row[0].startswith('#'):
                continue
            a = _region_index(row[0], regions, path, line)
            has_line[a] = True
            for token in row[1:]:
                b = _region_index(token, regions, path, line)
                if a == b:
                    raise ValidationError(f'{path}:{line}: irreflexive adjacency required ({row[0]} lists itself)')
                declared[a, b] = True

    one_sided = declared & ~declared.T & has_line[None, :]
    if one_sided.any():
        pairs = [f'{regions[a]}->{regions[b]}' for a, b in zip(*np.nonzero(one_sided))]
        warnings.warn(
            f'{path}: asymmetric neighbor declarations symmetrized: {", ".join(pairs)}',
            NullbootWarning,
            stacklevel=2,
        )
    return declared | declared.T


def read_presence_absence(path_matrix: str, path_neighbors: str) -> PresenceAbsenceData:
    """
    Read a species x regions presence-absence matrix and its neighborhood file.

    The matrix CSV has a header ``species,<region>,...`` and one 0/1 row per species.

    Raises:
        ValidationError: On non-binary entries, all-zero species or invalid adjacency
    """
    header, rows = _read_rows(path_matrix)
    regions = header[1:]
    if not regions:
        raise ValidationError(f'{path_matrix}: no region columns in header')
    species = []
    matrix = np.zeros((len(rows), len(regions)), dtype=int)
    for i, row in enumerate(rows):
        line = i + 2
        if len(row) != len(header):
            raise ValidationError(f'{path_matrix}:{line}: row length mismatch')
        species.append(row[0])
        for r, cell in enumerate(row[1:]):
            if cell not in ('0', '1'):
                raise ValidationError(f'{path_matrix}:{line}: entry {cell!r} is not 0 or 1')
            matrix[i, r] = int(cell)
    adjacency = read_neighbors(path_neighbors, regions)
    return PresenceAbsenceData(matrix=matrix, adjacency=adjacency, regions=tuple(regions), species=tuple(species))


def write_presence_absence(path_matrix: str, path_neighbors: str, data: PresenceAbsenceData):
    """Write presence-absence data in the format read by ``read_presence_absence``."""
    with open(path_matrix, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['species', *data.regions])
        for name, row in zip(data.species, data.matrix):
            writer.writerow([name, *(str(int(v)) for v in row)])
    with open(path_neighbors, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        for a, region in enumerate(data.regions):
            writer.writerow([region, *(data.regions[b] for b in np.flatnonzero(data.adjacency[a]))])


def read_points_csv(path: str) -> PointCloud:
    """Read numeric coordinates, one point per row, under a header of coordinate names."""
    header, rows = _read_rows(path)
    points = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValidationError(f'{path}:{i + 2}: row length mismatch')
        try:
            points[i] = [float(cell) for cell in row]
        except ValueError:
            raise ValidationError(f'{path}:{i + 2}: non-numeric coordinate') from None
    return PointCloud(points=points, names=tuple(header))


def write_points_csv(path: str, data: PointCloud):
    """Write coordinates in the format read by ``read_points_csv``."""
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(data.names)
        for row in data.points:
            writer.writerow([repr(float(v)) for v in row])
