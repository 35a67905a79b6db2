"""
nullboot - parametric bootstrap tests for clustering against fitted null models.

Licensed under the MIT License.

Programmatic Usage:

    from nullboot import PipelineSpec, load_schema, read_mixed_csv, run_bootstrap

    specs, distance = load_schema('schema.yaml')
    data = read_mixed_csv('survey.csv', specs)

    # PAM + average silhouette width against a latent Gaussian null
    spec = PipelineSpec(family='latent-gaussian', method='pam', index='asw',
                        ks=range(2, 11), m=99, seed=1, distance=distance)
    result = run_bootstrap(data, spec, workers=4)
    print(result.aggregate_p, result.k_hat)

    # Species ranges: Kulczynski -> MDS -> Gaussian mixture with noise -> adjusted BIC
    from nullboot import read_presence_absence
    ranges = read_presence_absence('ranges.csv', 'neighbors.csv')
    spec = PipelineSpec(family='spatial', method='gmm-noise', index='adjusted-bic',
                        ks=range(1, 11), m=200)
    result = run_bootstrap(ranges, spec)
"""

__version__ = "0.1.0"

from nullboot.config import RunConfig, load_run_config, load_schema
from nullboot.data import (
    CategoricalSeriesDataset,
    DissimilarityMatrix,
    MixedDataset,
    NullbootError,
    NullbootWarning,
    NumericalError,
    Partition,
    PointCloud,
    PresenceAbsenceData,
    ReplicateError,
    ValidationError,
    VariableSpec,
    read_mixed_csv,
    read_points_csv,
    read_presence_absence,
    read_series_csv,
)
from nullboot.engine import (
    BootstrapResult,
    aggregate_pvalue,
    calibrate_and_select,
    estimate_null,
    per_k_pvalue,
    run_bootstrap,
)
from nullboot.families import resolve_family
from nullboot.output import export_result, format_summary_table, read_result_json
from nullboot.pipeline import PipelineSpec, evaluate

__all__ = [
    # Bootstrap
    'PipelineSpec',
    'BootstrapResult',
    'run_bootstrap',
    'estimate_null',
    'evaluate',
    'per_k_pvalue',
    'aggregate_pvalue',
    'calibrate_and_select',
    'resolve_family',
    # Data
    'VariableSpec',
    'MixedDataset',
    'CategoricalSeriesDataset',
    'PresenceAbsenceData',
    'PointCloud',
    'DissimilarityMatrix',
    'Partition',
    'read_mixed_csv',
    'read_series_csv',
    'read_presence_absence',
    'read_points_csv',
    'load_schema',
    # Configuration and output
    'RunConfig',
    'load_run_config',
    'export_result',
    'read_result_json',
    'format_summary_table',
    # Errors
    'NullbootError',
    'ValidationError',
    'NumericalError',
    'ReplicateError',
    'NullbootWarning',
]
