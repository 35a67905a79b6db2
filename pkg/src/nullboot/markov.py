"""
Markov chain null model for categorical dosage series.

Dosages follow a first-order chain whose transition matrix depends on the type
of the target day: the second, third and later prescription days each get their
own matrix, every other day shares a "normal" one. Missing days are drawn as a
whole pattern from the observed patterns, independently of the dosages.
"""

import warnings
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .data import CategoricalSeriesDataset, MISSING, NullbootWarning, ValidationError
from .seeds import derive_rng


REGIMES = ('day2', 'day3', 'later', 'normal')


def day_regime(t: int, period: int) -> str:
    """
    Transition regime for the move into day t (1-based, t >= 2).

    Day t is a prescription day when t = 1 (mod period); the first prescription
    day has no incoming transition.
    """
    if t < 2:
        raise ValidationError('Day 1 has no incoming transition')
    if (t - 1) % period:
        return 'normal'
    event = (t - 1) // period
    if event == 1:
        return 'day2'
    if event == 2:
        return 'day3'
    return 'later'


def _check_stochastic(name: str, matrix: np.ndarray, h: int):
    if matrix.shape != (h, h):
        raise ValidationError(f'{name} must be {h} x {h}')
    if np.any(matrix < 0) or np.any(np.abs(matrix.sum(axis=1) - 1.0) > 1e-10):
        raise ValidationError(f'{name} must be row-stochastic')


@dataclass
class MarkovDosageParams:
    """
    Fitted dosage chain.

    Attributes:
        h: Number of dosage categories
        period: Prescription period in days
        T: Series length the missingness patterns cover
        initial: Distribution of the first dosage over 1..h
        transitions: Regime name -> h x h row-stochastic matrix
        patterns: Observed missingness patterns (rows of a bool array, duplicates kept)
        identity_rows: Regime name -> rows replaced by identity for lack of data
    """
    h: int
    period: int
    T: int
    initial: np.ndarray
    transitions: Dict[str, np.ndarray]
    patterns: np.ndarray
    identity_rows: Optional[Dict[str, list]] = None

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        self.transitions = {name: np.asarray(m, dtype=float) for name, m in self.transitions.items()}
        self.patterns = np.asarray(self.patterns, dtype=bool).reshape(-1, self.T)
        self.identity_rows = self.identity_rows or {}
        if self.initial.shape != (self.h,) or np.any(self.initial < 0) or abs(self.initial.sum() - 1) > 1e-10:
            raise ValidationError('Initial distribution must be a probability vector over h dosages')
        if set(self.transitions) != set(REGIMES):
            raise ValidationError(f'Transition matrices required for {REGIMES}')
        for name, matrix in self.transitions.items():
            _check_stochastic(f'Transition matrix {name!r}', matrix, self.h)
        if self.patterns.shape[0] < 1:
            raise ValidationError('At least one missingness pattern required')

    def to_dict(self) -> Dict:
        return {
            'h': self.h,
            'period': self.period,
            'T': self.T,
            'initial': self.initial.tolist(),
            'transitions': {name: self.transitions[name].tolist() for name in REGIMES},
            'patterns': self.patterns.astype(int).tolist(),
            'identity_rows': self.identity_rows,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> 'MarkovDosageParams':
        return cls(
            h=int(d['h']),
            period=int(d['period']),
            T=int(d['T']),
            initial=np.asarray(d['initial'], dtype=float),
            transitions={name: np.asarray(m, dtype=float) for name, m in d['transitions'].items()},
            patterns=np.asarray(d['patterns'], dtype=bool),
            identity_rows={name: list(rows) for name, rows in d.get('identity_rows', {}).items()},
        )


def estimate_markov(data: CategoricalSeriesDataset) -> MarkovDosageParams:
    """
    Empirical transition matrices, initial distribution and missingness patterns.

    Only pairs of consecutive observed days are counted. A row without any
    observed transition becomes an identity row (with a warning). The initial
    dosage of a series is its day-1 value, or its first observed value when day 1
    is missing.

    Raises:
        ValidationError: If no dosage is observed at all
    """
    h, period = data.h, data.prescription_period
    counts = {name: np.zeros((h, h)) for name in REGIMES}
    series = data.series
    for t in range(2, data.T + 1):
        src, dst = series[:, t - 2], series[:, t - 1]
        observed = (src != MISSING) & (dst != MISSING)
        np.add.at(counts[day_regime(t, period)], (src[observed] - 1, dst[observed] - 1), 1.0)

    observed_any = ~data.missing
    has_value = observed_any.any(axis=1)
    if not has_value.any():
        raise ValidationError('No observed dosage in any series')
    first = np.argmax(observed_any, axis=1)
    starts = series[np.arange(data.n), first][has_value]
    initial = np.bincount(starts - 1, minlength=h) / starts.size

    transitions = {}
    identity_rows = {}
    for name in REGIMES:
        matrix = counts[name]
        totals = matrix.sum(axis=1)
        empty = np.flatnonzero(totals == 0)
        matrix[empty, empty] = 1.0
        totals[empty] = 1.0
        transitions[name] = matrix / totals[:, None]
        if empty.size:
            identity_rows[name] = (empty + 1).tolist()
    if identity_rows:
        detail = '; '.join(f'{name}: dosages {rows}' for name, rows in identity_rows.items())
        warnings.warn(f'Identity rows substituted for unobserved transitions ({detail})',
                      NullbootWarning, stacklevel=2)

    return MarkovDosageParams(h=h, period=period, T=data.T, initial=initial,
                              transitions=transitions, patterns=data.missing,
                              identity_rows=identity_rows)


def sample_markov(params: MarkovDosageParams, n: int, T: Optional[int] = None,
                  seed: int = 0) -> CategoricalSeriesDataset:
    """
    Simulate n dosage series and blank days according to resampled missingness patterns.

    Args:
        params: Fitted chain
        n: Number of series (>= 1)
        T: Series length, at most params.T (default params.T)
        seed: Seed of the draw

    Returns:
        CategoricalSeriesDataset with the fitted h and period
    """
    T = params.T if T is None else T
    if n < 1:
        raise ValidationError('n >= 1 required')
    if not 1 <= T <= params.T:
        raise ValidationError(f'T must satisfy 1 <= T <= {params.T}')
    rng = derive_rng(seed)
    cumulative = {name: np.cumsum(m, axis=1) for name, m in params.transitions.items()}

    states = np.empty((n, T), dtype=int)
    states[:, 0] = rng.choice(params.h, size=n, p=params.initial)
    for t in range(2, T + 1):
        cum = cumulative[day_regime(t, params.period)][states[:, t - 2]]
        u = rng.uniform(size=n)
        states[:, t - 1] = np.minimum((u[:, None] >= cum).sum(axis=1), params.h - 1)

    series = states + 1
    chosen = rng.integers(params.patterns.shape[0], size=n)
    series[params.patterns[chosen, :T]] = MISSING
    return CategoricalSeriesDataset(series=series, h=params.h, prescription_period=params.period)


def summarize_markov(params: MarkovDosageParams) -> Dict:
    """Estimation diagnostics for reports."""
    return {
        'h': params.h,
        'T': params.T,
        'prescription_period': params.period,
        'n_patterns': int(params.patterns.shape[0]),
        'distinct_patterns': int(np.unique(params.patterns, axis=0).shape[0]),
        'missing_fraction': float(params.patterns.mean()),
        'identity_rows': params.identity_rows,
    }
