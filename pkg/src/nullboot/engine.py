"""
Parametric bootstrap engine for nullboot.

Estimates the null model once, evaluates the observed dataset and m replicates
drawn from the fitted null through the same pipeline, and reduces the index
values to per-k p-values, an aggregated p-value and a calibrated index.
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import NumericalError, PointCloud, ReplicateError, ValidationError
from .families import resolve_family
from .pipeline import AGGREGATE_MODES, PipelineSpec, embed_points, evaluate
from .seeds import derive_seed


SCHEMA_VERSION = 1

# Attempts per replicate before the run aborts
MAX_ATTEMPTS = 3

# Seed streams derived from the master seed
_ESTIMATE = 0
_OBSERVED = 1
_REPLICATE_DATA = 2
_REPLICATE_EVAL = 3


def per_k_pvalue(observed_vk: float, replicate_vs: Sequence[float]) -> float:
    """
    Bootstrap p-value at one k: (#{q : V_q >= observed} + 1) / (m + 1).

    Raises:
        ValidationError: Without replicates
    """
    replicate_vs = np.asarray(replicate_vs, dtype=float)
    m = replicate_vs.size
    if m < 1:
        raise ValidationError('m >= 1 required')
    return (int(np.sum(replicate_vs >= observed_vk)) + 1) / (m + 1)


def _pool(observed: Sequence[float], replicates: np.ndarray) -> np.ndarray:
    replicates = np.asarray(replicates, dtype=float)
    if replicates.ndim != 2 or replicates.shape[0] < 1:
        raise ValidationError('Replicates must form an m x |K| array with m >= 1')
    observed = np.asarray(observed, dtype=float)
    if observed.shape != (replicates.shape[1],):
        raise ValidationError('Observed profile and replicate columns differ in length')
    return np.vstack([replicates, observed[None, :]])


def rank_counts(pool: np.ndarray) -> np.ndarray:
    """
    For every dataset i of the pool and every k, #{j != i : V_jk >= V_ik}.

    p~_k(X_i) is this count plus one, divided by m + 1.
    """
    at_least = pool[None, :, :] >= pool[:, None, :]
    return at_least.sum(axis=1) - 1


def aggregate_pvalue(observed: Sequence[float], replicates: np.ndarray, mode: str = 'mean-rank') -> float:
    """
    Aggregate the index profile over all k into one p-value.

    Args:
        observed: Observed V per k
        replicates: m x |K| replicate values
        mode: 'mean-rank' compares the summed per-k p-values of every replicate,
            each computed against the other m datasets of the pool (observed
            included), with the observed sum; 'mean-raw' compares summed V;
            'bonferroni' multiplies the smallest per-k p-value by |K|

    Returns:
        Aggregated p-value in (0, 1]
    """
    if mode not in AGGREGATE_MODES:
        raise ValidationError(f'Invalid aggregate mode: {mode} (must be one of {AGGREGATE_MODES})')
    pool = _pool(observed, replicates)
    m = pool.shape[0] - 1
    if mode == 'bonferroni':
        per_k = [per_k_pvalue(pool[m, c], pool[:m, c]) for c in range(pool.shape[1])]
        return min(1.0, pool.shape[1] * min(per_k))
    if mode == 'mean-raw':
        sums = pool.sum(axis=1)
        return (int(np.sum(sums[:m] >= sums[m])) + 1) / (m + 1)
    sums = rank_counts(pool).sum(axis=1)
    return (int(np.sum(sums[:m] <= sums[m])) + 1) / (m + 1)


def calibrate_and_select(observed: Sequence[float], replicates: np.ndarray,
                         ks: Sequence[int]) -> Tuple[Dict[int, float], int, Dict[int, float], Dict[int, float]]:
    """
    Calibrated index (V_obs(k) - EV_k) / SV_k and the k maximising it.

    SV_k is the sample standard deviation (divisor m - 1). Where SV_k = 0 the
    calibrated value is +inf, -inf or 0 as the observed value lies above, below
    or at EV_k. Ties in the maximum go to the smallest k.

    Returns:
        (calibrated, k_hat, EV, SV), the maps keyed by k

    Raises:
        ValidationError: With fewer than 2 replicates
    """
    pool = _pool(observed, replicates)
    m = pool.shape[0] - 1
    if m < 2:
        raise ValidationError('Calibration needs m >= 2')
    ks = [int(k) for k in ks]
    if len(ks) != pool.shape[1]:
        raise ValidationError('ks and replicate columns differ in length')
    ev = pool[:m].mean(axis=0)
    sv = pool[:m].std(axis=0, ddof=1)
    diff = pool[m] - ev
    calibrated = np.empty(len(ks))
    for c in range(len(ks)):
        if sv[c] > 0:
            calibrated[c] = diff[c] / sv[c]
        else:
            calibrated[c] = np.inf if diff[c] > 0 else (-np.inf if diff[c] < 0 else 0.0)
    order = np.argsort(ks, kind='stable')
    best = order[int(np.argmax(calibrated[order]))]
    return (
        {k: float(v) for k, v in zip(ks, calibrated)},
        ks[best],
        {k: float(v) for k, v in zip(ks, ev)},
        {k: float(v) for k, v in zip(ks, sv)},
    )


@dataclass
class BootstrapResult:
    """
    Outcome of a bootstrap run.

    ``calibrated``, ``k_hat``, ``ev`` and ``sv`` are None when m < 2.
    """
    ks: Tuple[int, ...]
    observed: Dict[int, float]
    replicates: np.ndarray
    per_k_p: Dict[int, float]
    aggregate_mode: str
    aggregate_p: float
    aggregate_all: Dict[str, float]
    calibrated: Optional[Dict[int, float]]
    k_hat: Optional[int]
    ev: Optional[Dict[int, float]]
    sv: Optional[Dict[int, float]]
    family: str
    replicate_seeds: List[int] = field(default_factory=list)
    replicate_attempts: List[int] = field(default_factory=list)
    null_report: Dict[str, Any] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.replicates.shape[0]

    def to_dict(self) -> Dict[str, Any]:
        def keyed(d):
            return None if d is None else {str(k): v for k, v in d.items()}

        return {
            'schema_version': SCHEMA_VERSION,
            'family': self.family,
            'ks': list(self.ks),
            'm': self.m,
            'observed': keyed(self.observed),
            'replicates': self.replicates.tolist(),
            'per_k_p': keyed(self.per_k_p),
            'aggregate_mode': self.aggregate_mode,
            'aggregate_p': self.aggregate_p,
            'aggregate_all': dict(self.aggregate_all),
            'calibrated': keyed(self.calibrated),
            'k_hat': self.k_hat,
            'ev': keyed(self.ev),
            'sv': keyed(self.sv),
            'replicate_seeds': list(self.replicate_seeds),
            'replicate_attempts': list(self.replicate_attempts),
            'null_report': self.null_report,
            'config': self.config,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> 'BootstrapResult':
        version = d.get('schema_version')
        if version != SCHEMA_VERSION:
            raise ValidationError(f'Unsupported result schema version {version!r} (expected {SCHEMA_VERSION})')

        def keyed(values):
            return None if values is None else {int(k): float(v) for k, v in values.items()}

        ks = tuple(int(k) for k in d['ks'])
        return cls(
            ks=ks,
            observed=keyed(d['observed']),
            replicates=np.asarray(d['replicates'], dtype=float).reshape(-1, len(ks)),
            per_k_p=keyed(d['per_k_p']),
            aggregate_mode=d['aggregate_mode'],
            aggregate_p=float(d['aggregate_p']),
            aggregate_all={mode: float(v) for mode, v in d['aggregate_all'].items()},
            calibrated=keyed(d.get('calibrated')),
            k_hat=None if d.get('k_hat') is None else int(d['k_hat']),
            ev=keyed(d.get('ev')),
            sv=keyed(d.get('sv')),
            family=d['family'],
            replicate_seeds=[int(s) for s in d.get('replicate_seeds', [])],
            replicate_attempts=[int(a) for a in d.get('replicate_attempts', [])],
            null_report=d.get('null_report', {}),
            config=d.get('config', {}),
        )


def summarize_replicates(observed: Dict[int, float], replicates: np.ndarray, ks: Sequence[int],
                         mode: str) -> Dict[str, Any]:
    """All p-values and the calibration from an observed profile and a replicate matrix."""
    ks = tuple(ks)
    obs = [observed[k] for k in ks]
    per_k_p = {k: per_k_pvalue(observed[k], replicates[:, c]) for c, k in enumerate(ks)}
    aggregate_all = {name: aggregate_pvalue(obs, replicates, name) for name in AGGREGATE_MODES}
    summary = {
        'per_k_p': per_k_p,
        'aggregate_mode': mode,
        'aggregate_p': aggregate_all[mode],
        'aggregate_all': aggregate_all,
        'calibrated': None,
        'k_hat': None,
        'ev': None,
        'sv': None,
    }
    if replicates.shape[0] >= 2:
        calibrated, k_hat, ev, sv = calibrate_and_select(obs, replicates, ks)
        summary.update(calibrated=calibrated, k_hat=k_hat, ev=ev, sv=sv)
    return summary


def prepare_data(data, spec: PipelineSpec):
    """
    Bring the data into the shape the family expects.

    The gaussian family takes non-point data through MDS first; every other
    family must match the data type exactly.
    """
    family = resolve_family(spec.family)
    if family.data_type is PointCloud:
        return embed_points(data, spec)
    if not isinstance(data, family.data_type):
        raise ValidationError(
            f'shape mismatch: family {family.name} needs {family.data_type.__name__}, got {type(data).__name__}'
        )
    return data


def estimate_null(data, spec: PipelineSpec):
    """Fit the configured null family to (prepared) data."""
    family = resolve_family(spec.family)
    return family.estimate(prepare_data(data, spec), spec, derive_seed(spec.seed, _ESTIMATE))


def _run_replicate(family, params, n: int, spec: PipelineSpec, q: int) -> Tuple[List[float], int, int]:
    failures = []
    for attempt in range(MAX_ATTEMPTS):
        data_seed = derive_seed(spec.seed, _REPLICATE_DATA, q, attempt)
        try:
            replicate = family.sample(params, n, data_seed)
            profile = evaluate(replicate, spec, derive_seed(spec.seed, _REPLICATE_EVAL, q, attempt))
        except (NumericalError, ValidationError, np.linalg.LinAlgError) as e:
            failures.append(f'attempt {attempt + 1} (seed {data_seed}): {e}')
            continue
        return [profile[k] for k in spec.ks], data_seed, attempt + 1
    raise ReplicateError(
        f'Replicate {q} failed {MAX_ATTEMPTS} times: {"; ".join(failures)}',
        replicate=q,
        seed=derive_seed(spec.seed, _REPLICATE_DATA, q, 0),
    )


def run_bootstrap(data, spec: PipelineSpec, workers: Optional[int] = None,
                  progress: Optional[Callable[[int, int], None]] = None,
                  params=None) -> BootstrapResult:
    """
    Run the parametric bootstrap.

    Replicate q draws its data from seed stream (master, q, attempt), so results
    do not depend on the number of workers or on completion order; a failing
    replicate is retried on the next attempt's seed.

    Args:
        data: Observed dataset
        spec: Pipeline definition
        workers: Threads evaluating replicates (default spec.workers)
        progress: Called as progress(done, m) after each completed batch of replicates
        params: Already fitted null parameters (skips estimation)

    Returns:
        BootstrapResult

    Raises:
        ValidationError: If the data do not fit the spec
        ReplicateError: If a replicate fails on every attempt
    """
    family = resolve_family(spec.family)
    data = prepare_data(data, spec)
    if params is None:
        params = family.estimate(data, spec, derive_seed(spec.seed, _ESTIMATE))
    observed = evaluate(data, spec, derive_seed(spec.seed, _OBSERVED))
    n = family.sample_size(data)
    workers = spec.workers if workers is None else workers

    rows: List[Optional[List[float]]] = [None] * spec.m
    seeds = [0] * spec.m
    attempts = [0] * spec.m
    batch = max(1, spec.m // 20)
    done = 0

    def record(q, outcome):
        nonlocal done
        rows[q], seeds[q], attempts[q] = outcome
        done += 1
        if progress is not None and (done % batch == 0 or done == spec.m):
            progress(done, spec.m)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(_run_replicate, family, params, n, spec, q): q for q in range(spec.m)}
            for future in as_completed(futures):
                record(futures[future], future.result())
    else:
        for q in range(spec.m):
            record(q, _run_replicate(family, params, n, spec, q))

    replicates = np.asarray(rows, dtype=float)
    summary = summarize_replicates(observed, replicates, spec.ks, spec.aggregate)
    return BootstrapResult(
        ks=spec.ks,
        observed={k: float(observed[k]) for k in spec.ks},
        replicates=replicates,
        family=family.name,
        replicate_seeds=seeds,
        replicate_attempts=attempts,
        null_report=family.report(params),
        config=spec.to_dict(),
        **summary,
    )
