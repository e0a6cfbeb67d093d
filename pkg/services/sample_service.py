# services/sample_service.py
import logging

import numpy as np
import pandas as pd
from scipy import special, stats

import config
from exceptions import SampleValidationError
from models import ContinuousMargin, MixedPairSample, PseudoObs

logger = logging.getLogger(__name__)


class SampleService:
    """Builds and validates mixed ordinal/continuous samples"""

    def build_sample(self, x_raw, y_raw, merges=None, order=None, min_size=None):
        """
        Recode ordinal labels to 1..k (after merging) and pair them with y.
        `order` lists the labels from lowest to highest when their natural
        sort order is not the category order.
        """
        min_size = config.MIN_SAMPLE_SIZE if min_size is None else min_size
        x_raw = list(x_raw)
        y = np.asarray(y_raw, dtype=float)

        # Step 1: shape checks
        if len(x_raw) == 0:
            raise SampleValidationError("Empty input: no observations")
        if len(x_raw) != y.size:
            raise SampleValidationError(f"Length mismatch: {len(x_raw)} ordinal vs {y.size} continuous values")
        if len(x_raw) < min_size:
            raise SampleValidationError(f"Sample size {len(x_raw)} is below the minimum of {min_size}")
        bad = np.flatnonzero(~np.isfinite(y))
        if bad.size:
            raise SampleValidationError(f"Non-finite continuous value at row(s) {(bad + 1).tolist()[:10]}")
        missing = [i + 1 for i, label in enumerate(x_raw) if label is None or (isinstance(label, float) and np.isnan(label))]
        if missing:
            raise SampleValidationError(f"Missing ordinal label at row(s) {missing[:10]}")

        # Step 2: merge labels
        if merges:
            x_raw = self._apply_merges(x_raw, merges)

        # Step 3: fix the category order
        present = set(x_raw)
        if order is not None:
            labels = self._match_order(order, present)
            empty = [label for label in labels if label not in present]
            if empty:
                raise SampleValidationError(f"Categories with no observations: {empty}")
        else:
            labels = self._natural_order(present)
        if len(labels) < 2:
            raise SampleValidationError(f"At least 2 ordinal categories are required, found {len(labels)}")

        # Step 4: recode
        code = {label: j + 1 for j, label in enumerate(labels)}
        x = np.array([code[label] for label in x_raw], dtype=int)
        counts = np.bincount(x, minlength=len(labels) + 1)[1:]
        logger.debug(f"Built sample n={x.size}, k={len(labels)}, counts={counts.tolist()}")
        return MixedPairSample(x=x, y=y, labels=tuple(labels), counts=counts)

    def _apply_merges(self, x_raw, merges):
        """Map labels through the merge table; keys match labels by value or by text"""
        by_text = {str(k): v for k, v in merges.items()}
        merged = []
        for label in x_raw:
            target = label
            for _ in range(len(by_text) + 1):
                nxt = merges.get(target, by_text.get(str(target), target))
                if nxt == target or str(nxt) == str(target):
                    break
                target = nxt
            merged.append(self._like(target, x_raw))
        return merged

    @staticmethod
    def _like(value, reference):
        """Cast a merge target to the type of the existing labels"""
        for label in reference:
            if str(label) == str(value):
                return label
        return value

    @staticmethod
    def _match_order(order, present):
        text = {str(label): label for label in present}
        labels = [text.get(str(label), label) for label in order]
        unknown = [label for label in present if label not in labels]
        if unknown:
            raise SampleValidationError(f"Labels {sorted(map(str, unknown))} are missing from the category order")
        return labels

    @staticmethod
    def _natural_order(present):
        try:
            return sorted(present, key=float)
        except (TypeError, ValueError):
            return sorted(present, key=str)

    def pseudo_observations(self, sample, y_cdf=None, jitter_seed=None):
        """
        Empirical CDF values of both margins. `y_cdf` replaces the rank PIT with
        a parametric margin; `jitter_seed` breaks ties in y at random instead of
        using midranks.
        """
        n, k = sample.n, sample.k
        cum_x = np.cumsum(sample.counts) / n
        cum_x[-1] = 1.0
        prev = np.concatenate(([0.0], cum_x[:-1]))

        if y_cdf is not None:
            u_y = np.asarray(y_cdf(sample.y), dtype=float)
            if np.any((u_y <= 0.0) | (u_y >= 1.0)) or np.any(np.isnan(u_y)):
                raise SampleValidationError("Continuous margin CDF must map every y strictly inside (0, 1)")
        elif jitter_seed is not None:
            rng = np.random.Generator(np.random.Philox(jitter_seed))
            ranks = np.empty(n)
            ranks[np.lexsort((rng.random(n), sample.y))] = np.arange(1, n + 1)
            u_y = ranks / (n + 1)
        else:
            u_y = stats.rankdata(sample.y, method='average') / (n + 1)

        cutpoints = np.concatenate(([-np.inf], special.ndtri(cum_x[:-1]), [np.inf]))
        return PseudoObs(
            u_plus=cum_x[sample.x - 1],
            u_minus=prev[sample.x - 1],
            u_y=u_y,
            cutpoints=cutpoints,
            cum_x=cum_x,
            x=sample.x,
            counts=sample.counts,
            margin=ContinuousMargin.from_values(sample.y, u_y),
        )

    def spearman_rho(self, sample):
        """Pearson correlation of midranks"""
        if sample.n < 3:
            raise SampleValidationError("Spearman's rho needs at least 3 observations")
        rx = stats.rankdata(sample.x)
        ry = stats.rankdata(sample.y)
        if np.ptp(rx) == 0 or np.ptp(ry) == 0:
            raise SampleValidationError("Spearman's rho is undefined for a constant column")
        return float(np.corrcoef(rx, ry)[0, 1])

    def flip_x(self, sample):
        """Reverse the category order (x -> -x)"""
        k = sample.k
        return MixedPairSample(x=k + 1 - sample.x, y=sample.y, labels=tuple(reversed(sample.labels)),
                               counts=sample.counts[::-1].copy())

    def flip_y(self, sample):
        """Change the sign of the continuous variable"""
        return MixedPairSample(x=sample.x, y=-sample.y, labels=sample.labels, counts=sample.counts)

    def orient_positive(self, sample, flip='x'):
        """Return (sample, flipped_x, flipped_y) with nonnegative Spearman's rho"""
        rho = self.spearman_rho(sample)
        if rho >= 0:
            return sample, False, False
        logger.info(f"Spearman's rho {rho:.3f} < 0: flipping {flip}")
        if flip == 'y':
            return self.flip_y(sample), False, True
        return self.flip_x(sample), True, False

    def conditional_summary(self, sample, y_name='y'):
        """Per-category n, min, quartiles, mean, max and SD of y, with an overall row first"""
        frame = pd.DataFrame({'category': [sample.labels[j - 1] for j in sample.x], y_name: sample.y})

        def _row(values, subset):
            return {
                'subset': subset,
                'n': int(values.size),
                'min': values.min(),
                'q1': values.quantile(0.25),
                'median': values.median(),
                'mean': values.mean(),
                'q3': values.quantile(0.75),
                'max': values.max(),
                'sd': values.std(),
            }

        rows = [_row(frame[y_name], 'overall')]
        for label, group in frame.groupby('category', sort=False):
            rows.append(_row(group[y_name], label))
        summary = pd.DataFrame(rows)
        order = ['overall'] + list(sample.labels)
        summary['_pos'] = [order.index(s) for s in summary['subset']]
        return summary.sort_values('_pos').drop(columns='_pos').reset_index(drop=True)
