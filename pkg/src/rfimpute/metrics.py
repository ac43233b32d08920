"""Score imputations against ground truth.

Numeric columns are scored by standardized root-mean-squared error over
the artificially blanked cells: the MSE between imputed and true values
divided by the variance of the true values over those same cells, then
square-rooted. Factor columns are scored by misclassification fraction.
The aggregate error is the mean numeric term plus the mean factor term;
relative error rescales it by the strawman baseline so that 100 means
"no better than a median/mode fill".
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBaselineError
from .table import FACTOR, NUMERIC

_MIN_MASKED = 2  # columns need more than one blanked cell to be scored


@dataclass
class ImputationScore:
    e_nominal: float
    e_categorical: float
    e_total: float
    e_relative: float | None
    per_variable: dict
    excluded: list = field(default_factory=list)

    def to_json_dict(self):
        return {
            "e_nominal": self.e_nominal,
            "e_categorical": self.e_categorical,
            "e_total": self.e_total,
            "e_relative": self.e_relative,
            "per_variable": [
                {"name": k, **v} for k, v in self.per_variable.items()
            ],
            "excluded": [
                {"name": name, "reason": reason} for name, reason in self.excluded
            ],
        }


def _indicator(mask):
    ind = getattr(mask, "indicator", mask)
    return np.asarray(ind, dtype=bool)


def _factor_strings(col, idx):
    return [col.levels[int(c)] for c in col.values[idx]]


def score(truth, imputed, mask):
    """Elementwise imputation error over the masked cells.

    ``truth`` must be observed at every masked cell and ``imputed``
    complete there. Numeric variance is taken over the masked cells
    around the masked-cell mean; columns whose truth is constant over
    the masked cells (or with fewer than two masked cells) are excluded
    with a warning rather than failing the whole score.
    """
    ind = _indicator(mask)
    if truth.shape != imputed.shape or ind.shape != (truth.n_rows, truth.n_cols):
        raise ValueError("truth, imputed, and mask shapes disagree")

    per_variable = {}
    excluded = []
    num_terms = []
    fac_terms = []
    for j, (tcol, icol) in enumerate(zip(truth.columns, imputed.columns)):
        hit = ind[:, j]
        n_j = int(hit.sum())
        if n_j == 0:
            continue
        if n_j < _MIN_MASKED:
            excluded.append((tcol.name, "fewer than two masked cells"))
            continue
        if tcol.mask[hit].any():
            raise ValueError(f"truth is missing at masked cells of {tcol.name!r}")
        if icol.mask[hit].any():
            raise ValueError(f"imputed is missing at masked cells of {tcol.name!r}")
        if tcol.kind == NUMERIC:
            x = tcol.values[hit]
            x_star = icol.values[hit]
            xbar = x.mean()
            den = ((x - xbar) ** 2).sum() / n_j
            if den == 0.0:
                warnings.warn(
                    f"column {tcol.name!r} constant over masked cells; excluded",
                    stacklevel=2,
                )
                excluded.append((tcol.name, "zero variance over masked cells"))
                continue
            num = ((x_star - x) ** 2).sum() / n_j
            term = float(np.sqrt(num / den))
            num_terms.append(term)
            per_variable[tcol.name] = {"kind": NUMERIC, "error": term, "n_masked": n_j}
        else:
            t_lv = _factor_strings(tcol, hit)
            i_lv = _factor_strings(icol, hit)
            term = float(np.mean([a != b for a, b in zip(t_lv, i_lv)]))
            fac_terms.append(term)
            per_variable[tcol.name] = {"kind": FACTOR, "error": term, "n_masked": n_j}

    e_nominal = float(np.mean(num_terms)) if num_terms else 0.0
    e_categorical = float(np.mean(fac_terms)) if fac_terms else 0.0
    return ImputationScore(
        e_nominal=e_nominal,
        e_categorical=e_categorical,
        e_total=e_nominal + e_categorical,
        e_relative=None,
        per_variable=per_variable,
        excluded=excluded,
    )


def relative_error(score_i, score_s):
    """100 * E(I) / E(S); below 100 beats the strawman baseline."""
    e_i = score_i.e_total if isinstance(score_i, ImputationScore) else float(score_i)
    e_s = score_s.e_total if isinstance(score_s, ImputationScore) else float(score_s)
    if e_s == 0.0:
        raise DegenerateBaselineError("strawman baseline error is zero")
    return 100.0 * e_i / e_s


def table_change(old, new, mask):
    """Distance between successive imputations over the masked cells.

    Same functional shape as :func:`score` but normalized by the raw
    second moment of the new values, which stays defined when an
    iteration starts from a constant (median) fill: per numeric column
    ``sqrt(sum (new-old)^2 / sum new^2)``, per factor column the
    disagreement fraction; the total is the mean numeric term plus the
    mean factor term. Returns ``(total, per_column)``.
    """
    ind = _indicator(mask)
    per_column = {}
    num_terms = []
    fac_terms = []
    for j, (ocol, ncol) in enumerate(zip(old.columns, new.columns)):
        hit = ind[:, j]
        if not hit.any():
            continue
        if ocol.kind == NUMERIC:
            o = ocol.values[hit]
            nv = ncol.values[hit]
            num = ((nv - o) ** 2).sum()
            den = (nv**2).sum()
            if den == 0.0:
                stat = 0.0 if num == 0.0 else float(np.sqrt(num))
            else:
                stat = float(np.sqrt(num / den))
            num_terms.append(stat)
        else:
            o_lv = _factor_strings(ocol, hit)
            n_lv = _factor_strings(ncol, hit)
            stat = float(np.mean([a != b for a, b in zip(o_lv, n_lv)]))
            fac_terms.append(stat)
        per_column[ocol.name] = stat
    total = 0.0
    if num_terms:
        total += float(np.mean(num_terms))
    if fac_terms:
        total += float(np.mean(fac_terms))
    return total, per_column
