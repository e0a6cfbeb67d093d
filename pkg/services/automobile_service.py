# services/automobile_service.py
"""
Auto MPG data example: ordinal car attributes against weight.

The data file is the UCI `auto-mpg.data` layout (whitespace separated, car
name in quotes, `?` for missing horsepower) or a CSV with the same columns.
"""
import logging
import os

import pandas as pd
import requests

import config
from exceptions import MissingDataError, OrdcopError, SampleValidationError
from services.copulas import default_ladder
from services.diagnose_service import DiagnoseService
from services.fit_service import FitService
from services.report_service import ReportService
from services.sample_service import SampleService

logger = logging.getLogger(__name__)

COLUMNS = ('mpg', 'cylinders', 'displacement', 'horsepower', 'weight', 'acceleration', 'model_year', 'origin',
           'car_name')
PREDICTORS = ('cylinders', 'horsepower', 'weight', 'acceleration', 'model_year', 'origin')
CATEGORY_MERGES = {'cylinders': {3: 4, 5: 6}}
# Ordinal variable -> (flip the ordinal, flip weight) so that both move with mpg
ORIENTATION = {'cylinders': (True, True), 'origin': (False, True)}


class AutomobileService:

    def __init__(self):
        self.samples = SampleService()
        self.fits = FitService()
        self.diagnostics = DiagnoseService()
        self.reports = ReportService()

    def download(self, path=None, url=None):
        """Fetch the UCI file into `path`"""
        path = path or config.AUTO_MPG_PATH
        url = url or config.AUTO_MPG_URL
        logger.info(f"Downloading Auto MPG data from {url}")
        try:
            response = requests.get(url, timeout=config.DOWNLOAD_TIMEOUT)
            response.raise_for_status()
        except requests.RequestException as e:
            raise MissingDataError(f"Auto MPG data not found at {path} and the download from {url} failed: {str(e)}")
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'wb') as f:
            f.write(response.content)
        logger.info(f"Saved Auto MPG data to {path}")
        return path

    def load(self, path=None):
        path = path or config.AUTO_MPG_PATH
        if not os.path.exists(path):
            if not config.AUTO_MPG_DOWNLOAD:
                raise MissingDataError(
                    f"Auto MPG data not found at {path}; download auto-mpg.data from the UCI repository "
                    f"and point ORDCOP_AUTO_MPG_PATH (or --input) at it"
                )
            self.download(path)
        with open(path, encoding='utf-8') as f:
            first = f.readline()
        if ',' in first:
            frame = pd.read_csv(path, na_values='?')
            frame.columns = [c.strip().lower().replace(' ', '_') for c in frame.columns]
        else:
            frame = pd.read_csv(path, sep=r'\s+', header=None, names=list(COLUMNS), na_values='?', quotechar='"')
        missing = [c for c in COLUMNS[:-1] if c not in frame.columns]
        if missing:
            raise SampleValidationError(f"{path}: missing column(s) {missing}")
        logger.info(f"Loaded {len(frame)} Auto MPG records ({int(frame['horsepower'].isna().sum())} without horsepower)")
        return frame

    def spearman_table(self, frame):
        """Spearman's rho (and Pearson's r) of each attribute with mpg; negative ones get a sign change"""
        rows = []
        for column in PREDICTORS:
            pair = frame[[column, 'mpg']].dropna()
            rho = pair[column].corr(pair['mpg'], method='spearman')
            pearson = pair[column].corr(pair['mpg'])
            rows.append({'variable': column, 'n': len(pair), 'rho': rho, 'pearson': pearson,
                         'sign_change': bool(rho < 0)})
        return pd.DataFrame(rows)

    def build_pair(self, frame, ordinal, continuous='weight', oriented=True):
        """Sample of (ordinal, continuous) with category merges and the mpg-based sign changes"""
        sample = self.samples.build_sample(frame[ordinal].astype(int).tolist(), frame[continuous].to_numpy(float),
                                           merges=CATEGORY_MERGES.get(ordinal))
        if oriented:
            flip_x, flip_y = ORIENTATION.get(ordinal, (False, False))
            if flip_x:
                sample = self.samples.flip_x(sample)
            if flip_y:
                sample = self.samples.flip_y(sample)
        return sample

    def weight_summaries(self, frame):
        """Distribution of weight overall and within cylinder and origin groups"""
        parts = []
        for ordinal in ('cylinders', 'origin'):
            summary = self.samples.conditional_summary(self.build_pair(frame, ordinal, oriented=False), 'weight')
            summary['subset'] = ['overall' if s == 'overall' else f'{ordinal} = {s}' for s in summary['subset']]
            parts.append(summary if not parts else summary.iloc[1:])
        return pd.concat(parts, ignore_index=True)

    def run_demo(self, output_dir, path=None, families=None, criterion='aic', emit='csv'):
        """Spearman table, weight summaries, copula fits and Q-Q panels for both pairs"""
        frame = self.load(path)
        os.makedirs(output_dir, exist_ok=True)
        families = families or [f.name for f in default_ladder()]

        # Step 1: association with mpg
        spearman = self.spearman_table(frame)
        self.reports.write_frame(spearman, os.path.join(output_dir, 'spearman.csv'))

        # Step 2: conditional summaries of weight
        summaries = self.weight_summaries(frame)
        self.reports.write_frame(summaries, os.path.join(output_dir, 'weight_summaries.csv'))

        # Step 3: fits and diagnostics per pair
        pairs = {}
        for ordinal in ('cylinders', 'origin'):
            try:
                sample = self.build_pair(frame, ordinal)
                pseudo = self.samples.pseudo_observations(sample)
                ranked = self.fits.select_model(families, pseudo, criterion)
                by_loglik = sorted(ranked, key=lambda r: -r.loglik)
                table = pd.DataFrame([{**r.to_dict(), 'theta': ' '.join(f'{t:.4f}' for t in r.spec.theta)}
                                      for r in ranked])
                self.reports.write_frame(table, os.path.join(output_dir, f'fit_weight_{ordinal}.{emit if emit == "json" else "csv"}'), emit)

                best = ranked[0]
                panels = self.diagnostics.qq_panels(best.spec, sample, pseudo)
                for panel in panels:
                    name = os.path.join(output_dir, f'qq_weight_{ordinal}_{panel.category}')
                    if emit == 'svg':
                        self.reports.write_scatter_svg(panel.model_q, panel.empirical_q, f'{name}.svg',
                                                       'model quantile', 'sorted weight',
                                                       f'{ordinal} category {panel.label}', diagonal=True)
                    else:
                        self.reports.write_frame(panel.to_frame(), f'{name}.csv')
                pairs[ordinal] = {
                    'success': True,
                    'best_by_criterion': best.spec.family.name,
                    'theta': list(best.spec.theta),
                    'best_by_loglik': by_loglik[0].spec.family.name,
                    'discrepancy': [p.discrepancy for p in panels],
                }
                logger.info(f"weight/{ordinal}: best {best.spec.family.name} theta={best.spec.theta}")
            except OrdcopError as e:
                logger.error(f"weight/{ordinal} workflow failed: {str(e)}")
                pairs[ordinal] = {'success': False, 'error': str(e)}

        return {
            'success': all(p['success'] for p in pairs.values()),
            'n': len(frame),
            'spearman': spearman,
            'summaries': summaries,
            'pairs': pairs,
        }
