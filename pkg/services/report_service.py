# services/report_service.py
import json
import logging
import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

import config
from exceptions import MissingDataError, SampleValidationError

logger = logging.getLogger(__name__)

plt.rcParams['svg.hashsalt'] = 'ordcop'
plt.rcParams['svg.fonttype'] = 'none'


class ReportService:
    """Reads pair files and writes CSV, JSON and SVG outputs"""

    def read_pairs(self, path, x_col='x', y_col='y'):
        """Ordinal labels and continuous values from a headed CSV; errors name file rows"""
        if not os.path.exists(path):
            raise MissingDataError(f"Input file not found: {path}")
        try:
            frame = pd.read_csv(path, dtype={x_col: object}, skipinitialspace=True)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise SampleValidationError(f"Cannot parse {path}: {str(e)}")
        missing = [c for c in (x_col, y_col) if c not in frame.columns]
        if missing:
            raise SampleValidationError(f"{path}: missing column(s) {missing}; found {list(frame.columns)}")

        y = pd.to_numeric(frame[y_col], errors='coerce')
        bad_y = frame.index[y.isna()]
        if len(bad_y):
            rows = (bad_y + 2).tolist()[:10]
            raise SampleValidationError(f"{path}: non-numeric {y_col!r} at row(s) {rows}")
        bad_x = frame.index[frame[x_col].isna()]
        if len(bad_x):
            raise SampleValidationError(f"{path}: missing {x_col!r} at row(s) {(bad_x + 2).tolist()[:10]}")

        labels = frame[x_col].astype(str).str.strip()
        numeric = pd.to_numeric(labels, errors='coerce')
        if numeric.notna().all():
            as_int = numeric.round()
            labels = as_int.astype(int) if np.allclose(numeric, as_int) else numeric
        logger.info(f"Read {len(frame)} rows from {path}")
        return labels.tolist(), y.to_numpy(dtype=float)

    def _prepare(self, path):
        folder = os.path.dirname(os.path.abspath(path))
        os.makedirs(folder, exist_ok=True)
        return path

    def write_frame(self, frame, path, emit='csv'):
        self._prepare(path)
        if emit == 'json':
            self.write_json(frame.to_dict(orient='records'), path)
        else:
            frame.to_csv(path, index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator='\n')
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return path

    def write_pairs(self, sample, path):
        """Simulated sample as x,y"""
        labels = [sample.labels[j - 1] for j in sample.x]
        return self.write_frame(pd.DataFrame({'x': labels, 'y': sample.y}), path)

    def write_json(self, data, path):
        self._prepare(path)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, sort_keys=True, default=_to_builtin)
            f.write('\n')
        return path

    def write_text(self, text, path):
        self._prepare(path)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text.rstrip('\n') + '\n')
        return path

    def text_table(self, frame):
        """Aligned plain-text rendering of a report frame"""
        return frame.to_string(index=False, float_format=lambda v: f'{v:.6g}', na_rep='')

    def write_scatter_svg(self, x, y, path, xlabel='', ylabel='', title='', diagonal=False, seed=None):
        """Square scatter plot with unit aspect; the seed goes into the SVG metadata"""
        self._prepare(path)
        size = config.SVG_SIZE_PX / 100.0
        fig, ax = plt.subplots(figsize=(size, size), dpi=100)
        ax.scatter(x, y, s=6, color='black', alpha=0.6, linewidths=0)
        if diagonal and len(x):
            lo = float(min(np.min(x), np.min(y)))
            hi = float(max(np.max(x), np.max(y)))
            ax.plot([lo, hi], [lo, hi], color='red', linewidth=1)
        ax.set_aspect('equal', adjustable='datalim')
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        fig.savefig(path, format='svg', metadata={'Date': None, 'Description': f'seed={seed}'})
        plt.close(fig)
        logger.info(f"Wrote scatter plot to {path}")
        return path

    def sibling(self, path, suffix, extension=None):
        """path with a suffix before the extension, e.g. out.csv -> out_2.csv"""
        base, ext = os.path.splitext(path)
        return f"{base}{suffix}{extension if extension is not None else ext}"


def _to_builtin(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
