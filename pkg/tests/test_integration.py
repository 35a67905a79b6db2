"""
Integration tests for nullboot - full runs over the bundled demo data.
"""

import json
import os
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from nullboot.cli import main
from nullboot.config import load_schema
from nullboot.data import PointCloud, read_mixed_csv, read_presence_absence, write_points_csv
from nullboot.engine import estimate_null, run_bootstrap
from nullboot.families import estimate_gaussian, sample_gaussian
from nullboot.latent import sample_latent_gaussian
from nullboot.pipeline import PipelineSpec
from nullboot.spatial import observed_qd


DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'data')


def demo(name):
    return os.path.join(DATA_DIR, name)


def run_cli(*args):
    return subprocess.run([sys.executable, '-m', 'nullboot', *args], capture_output=True, text=True, timeout=600)


class TestCommandLine:
    """Test the installed module entry point."""

    def test_help(self):
        result = run_cli('--help')
        assert result.returncode == 0
        assert 'estimate-null' in result.stdout

    def test_run_is_reproducible(self, tmp_path):
        out_dir = str(tmp_path / 'survey')
        args = ('run', '--config', demo('run_survey.yaml'), '--m', '5', '--ks', '2..4', '--out-dir', out_dir)
        first = run_cli(*args)
        assert first.returncode == 0, first.stderr
        assert 'Selected k:' in first.stdout
        with open(os.path.join(out_dir, 'result.json'), 'rb') as f:
            first_json = f.read()

        second = run_cli(*args)
        assert second.returncode == 0, second.stderr
        with open(os.path.join(out_dir, 'result.json'), 'rb') as f:
            assert f.read() == first_json

    def test_shape_mismatch(self, tmp_path):
        result = run_cli('estimate-null', '--data', demo('islands.csv'), '--data-kind', 'presence-absence',
                         '--neighbors', demo('islands_neighbors.csv'), '--family', 'markov',
                         '--out-dir', str(tmp_path))
        assert result.returncode == 1
        assert 'shape mismatch' in result.stderr


class TestEstimateNull:
    """Test fitting each family to its demo data."""

    def test_latent_gaussian(self, tmp_path, capsys):
        out = tmp_path / 'params.json'
        assert main(['estimate-null', '--config', demo('run_survey.yaml'), '--out', str(out)]) == 0
        document = json.loads(out.read_text(encoding='utf-8'))
        assert document['family'] == 'latent-gaussian'
        assert np.asarray(document['params']['sigma']).shape == (4, 4)
        assert 'sigma_condition_number' in json.loads(capsys.readouterr().out)['report']

    def test_spatial_reports_observed_qd(self, tmp_path, capsys):
        out = tmp_path / 'params.json'
        assert main(['estimate-null', '--config', demo('run_islands.yaml'), '--out', str(out)]) == 0
        report = json.loads(capsys.readouterr().out)['report']
        data = read_presence_absence(demo('islands.csv'), demo('islands_neighbors.csv'))
        assert report['q_d'] == pytest.approx(observed_qd(data))
        assert 0.0 <= report['p_d'] <= 1.0

    def test_markov(self, tmp_path, capsys):
        out = tmp_path / 'params.json'
        assert main(['estimate-null', '--config', demo('run_dosage.yaml'), '--out', str(out)]) == 0
        assert json.loads(capsys.readouterr().out)['report']['T'] == 28


class TestSample:
    """Test drawing synthetic datasets from fitted parameters."""

    @pytest.fixture(scope='class')
    def params_file(self, tmp_path_factory):
        out = tmp_path_factory.mktemp('params') / 'params.json'
        assert main(['estimate-null', '--config', demo('run_survey.yaml'), '--out', str(out)]) == 0
        return str(out)

    def sample(self, params_file, path, seed):
        assert main(['sample', '--params', params_file, '--n', '30', '--seed', str(seed), '--out', str(path)]) == 0
        return path.read_bytes()

    def test_reingests(self, params_file, tmp_path):
        path = tmp_path / 'sample.csv'
        self.sample(params_file, path, 1)
        specs, _ = load_schema(demo('survey_schema.yaml'))
        data = read_mixed_csv(str(path), specs)
        assert data.n == 30

    def test_seeded(self, params_file, tmp_path):
        first = self.sample(params_file, tmp_path / 'a.csv', 1)
        second = self.sample(params_file, tmp_path / 'b.csv', 1)
        third = self.sample(params_file, tmp_path / 'c.csv', 2)
        assert first == second
        assert first != third

    def test_presence_absence_sample(self, tmp_path):
        params = tmp_path / 'params.json'
        assert main(['estimate-null', '--config', demo('run_islands.yaml'), '--out', str(params)]) == 0
        out = tmp_path / 'species.csv'
        assert main(['sample', '--params', str(params), '--n', '25', '--out', str(out)]) == 0
        data = read_presence_absence(str(out), str(tmp_path / 'species_neighbors.csv'))
        assert data.n_species == 25
        assert data.regions[0] == 'Andros'


class TestRuns:
    """Test full runs for each data shape."""

    def test_dosage_prediction_strength(self, tmp_path):
        out_dir = tmp_path / 'dosage'
        assert main(['run', '--config', demo('run_dosage.yaml'), '--m', '4', '--out-dir', str(out_dir)]) == 0
        document = json.loads((out_dir / 'result.json').read_text(encoding='utf-8'))
        assert document['family'] == 'markov'
        assert document['ks'] == [2, 3, 4]
        assert all(0.0 <= v <= 1.0 for v in document['observed'].values())

    def test_islands_bic(self, tmp_path):
        out_dir = tmp_path / 'islands'
        assert main(['run', '--config', demo('run_islands.yaml'), '--m', '3', '--out-dir', str(out_dir)]) == 0
        document = json.loads((out_dir / 'result.json').read_text(encoding='utf-8'))
        assert document['config']['index'] == 'bic'
        assert len(document['replicates']) == 3

    def test_reused_params(self, tmp_path):
        params = tmp_path / 'params.json'
        assert main(['estimate-null', '--config', demo('run_survey.yaml'), '--out', str(params)]) == 0
        out_dir = tmp_path / 'run'
        assert main(['run', '--config', demo('run_survey.yaml'), '--params', str(params), '--m', '3',
                     '--ks', '2,3', '--out-dir', str(out_dir)]) == 0
        assert (out_dir / 'result_validity.svg').exists()

    def test_params_family_mismatch(self, tmp_path, capsys):
        params = tmp_path / 'params.json'
        assert main(['estimate-null', '--config', demo('run_survey.yaml'), '--family', 'gaussian',
                     '--out', str(params)]) == 0
        code = main(['run', '--config', demo('run_survey.yaml'), '--params', str(params), '--m', '3',
                     '--out-dir', str(tmp_path / 'run')])
        assert code == 1
        assert 'holds a gaussian model' in capsys.readouterr().err


@pytest.mark.slow
class TestAcceptance:
    """Acceptance-scale simulations."""

    def test_strong_clustering_detected_with_three_clusters(self):
        centers = np.array([[0.0, 0.0], [30.0, 0.0], [15.0, 26.0]])
        spec = PipelineSpec(family='gaussian', method='pam', index='asw', ks=tuple(range(2, 8)), m=99, workers=4)
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            data = PointCloud(np.vstack([c + rng.normal(size=(50, 2)) for c in centers]))
            result = run_bootstrap(data, replace(spec, seed=seed))
            hits += result.aggregate_p == pytest.approx(1 / 100) and result.k_hat == 3
        assert hits >= 18

    def test_level_under_the_null(self):
        truth = estimate_gaussian(PointCloud(np.random.default_rng(2).normal(size=(40, 2)) * [3.0, 1.0]))
        spec = PipelineSpec(family='gaussian', method='pam', index='asw', ks=(2, 3, 4), m=19)
        pvalues = []
        for run in range(40):
            data = sample_gaussian(truth, 40, seed=1000 + run)
            pvalues.append(run_bootstrap(data, replace(spec, seed=run)).aggregate_p)
        pvalues = np.asarray(pvalues)
        assert 0.35 <= pvalues.mean() <= 0.7
        assert np.mean(pvalues <= 0.05) <= 0.2

    def test_type_one_error_latent_gaussian(self):
        specs, distance = load_schema(demo('survey_schema.yaml'))
        observed = read_mixed_csv(demo('survey.csv'), specs)
        spec = PipelineSpec(family='latent-gaussian', ks=(2, 3, 4, 5, 6), m=99, distance=distance, workers=4)
        truth = estimate_null(observed, spec)
        rejections = 0
        for run in range(50):
            data = sample_latent_gaussian(truth, observed.n, seed=500 + run)
            rejections += run_bootstrap(data, replace(spec, seed=run)).aggregate_p <= 0.05
        assert rejections / 50 <= 0.15


@pytest.mark.slow
@pytest.mark.skipif(not os.path.exists(demo('kykladspecreg.csv')), reason='kykladspecreg export not present in data/')
class TestKyklades:
    """End-to-end run on the Aegean land snail data (see README.md for the export)."""

    def test_adjusted_bic_run(self, tmp_path, capsys):
        out_dir = tmp_path / 'kyklades'
        assert main(['run', '--config', demo('run_kyklades.yaml'), '--workers', '4', '--out-dir', str(out_dir)]) == 0
        assert 'Selected k:' in capsys.readouterr().out
        document = json.loads((out_dir / 'result.json').read_text(encoding='utf-8'))
        assert np.asarray(document['replicates']).shape == (200, 9)
        assert document['config']['run']['mds_dim'] == 4
        assert document['aggregate_p'] > 0.01
        assert document['k_hat'] in document['ks']


class TestPointsFile:
    """Test a run from a points CSV written on the fly."""

    def test_gmm_adjusted_bic(self, tmp_path):
        rng = np.random.default_rng(4)
        path = str(tmp_path / 'points.csv')
        write_points_csv(path, PointCloud(np.vstack([rng.normal(size=(25, 2)), rng.normal(size=(25, 2)) + 8.0])))
        out_dir = tmp_path / 'out'
        code = main(['run', '--data', path, '--data-kind', 'points', '--method', 'gmm', '--index', 'adjusted-bic',
                     '--ks', '2..3', '--m', '3', '--out-dir', str(out_dir)])
        assert code == 0
        document = json.loads((out_dir / 'result.json').read_text(encoding='utf-8'))
        assert document['k_hat'] in (2, 3)
