"""Prediction and classification with fitted banded precision matrices, plus loaders."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cv import lpd_cv
from .model import CholeskyModel, DataMatrix, Hyperparameters, mcd_from_precision
from .posterior import select_bandwidths

__all__ = [
    "DataFormatError",
    "EmptyFileError",
    "RaggedRowError",
    "NonNumericError",
    "LabelError",
    "best_linear_predict",
    "predict_columns",
    "PredictionErrors",
    "prediction_error_table",
    "fit_lance",
    "QdaModel",
    "fit_qda",
    "qda_scores",
    "qda_classify",
    "ingest_csv",
    "ingest_ucr_timeseries",
]


class DataFormatError(ValueError):
    """Malformed input file."""


class EmptyFileError(DataFormatError):
    pass


class RaggedRowError(DataFormatError):
    def __init__(self, path, line, got, expected):
        self.line = line
        super().__init__(f"{path}: line {line} has {got} fields, expected {expected}")


class NonNumericError(DataFormatError):
    def __init__(self, path, line, column, cell):
        self.line = line
        self.column = column
        super().__init__(f"{path}: line {line}, field {column}: not a number: {cell!r}")


class LabelError(DataFormatError):
    pass


def _as_model(precision) -> CholeskyModel:
    if isinstance(precision, CholeskyModel):
        return precision
    return mcd_from_precision(np.asarray(precision, dtype=float))


def best_linear_predict(precision, mu, x_prefix, j: int):
    """Best linear predictor of variable ``j`` from variables ``0..j-1``.

    Under ``Omega = (I - A)^T D^{-1} (I - A)`` the conditional mean of ``x_j``
    given its predecessors is ``mu_j + sum_l a_{jl} (x_l - mu_l)``, which is
    exactly ``Sigma_{j,<j} Sigma_{<j,<j}^{-1}`` applied to the centered prefix,
    so no covariance block is ever inverted.  ``precision`` is a
    ``CholeskyModel`` or a dense SPD matrix.  ``x_prefix`` may hold several
    rows.
    """
    model = _as_model(precision)
    mu = np.asarray(mu, dtype=float)
    x_prefix = np.asarray(x_prefix, dtype=float)
    if x_prefix.shape[-1] != j:
        raise ValueError(f"prefix for variable {j} must have length {j}")
    b = model.bands[j]
    k = b.shape[0]
    out = mu[j] + (x_prefix[..., j - k : j] - mu[j - k : j]) @ b
    return float(out) if np.ndim(out) == 0 else out


def predict_columns(precision, mu, X, start: int) -> np.ndarray:
    """Predictions of columns ``start..p-1`` of every row of ``X``."""
    model = _as_model(precision)
    X = np.asarray(X, dtype=float)
    if start < 1:
        raise ValueError("start column must be >= 1 (column 0 has no predecessors)")
    return np.column_stack([
        best_linear_predict(model, mu, X[:, :j], j) for j in range(start, X.shape[1])
    ])


@dataclass
class PredictionErrors:
    columns: np.ndarray
    pe: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.pe))


def prediction_error_table(precision, mu, X_test, start: int) -> PredictionErrors:
    """Mean absolute prediction error of each column ``j >= start``."""
    X_test = np.asarray(X_test, dtype=float)
    pred = predict_columns(precision, mu, X_test, start)
    pe = np.mean(np.abs(X_test[:, start:] - pred), axis=0)
    return PredictionErrors(np.arange(start, X_test.shape[1]), pe)


def fit_lance(X, hyper: Hyperparameters | None = None, c2: float | None = None,
              c2_grid=None, n_cv: int = 5, seed: int = 0, threads: int = 1):
    """Fit with a given ``c2`` or, when ``c2`` is None, the CV-selected one.

    Returns ``(fit, cv_result_or_None)``.
    """
    hyper = Hyperparameters() if hyper is None else hyper
    cv = None
    if c2 is None:
        cv = lpd_cv(X, c2_grid, hyper, n_cv=n_cv, seed=seed, threads=threads)
        c2 = cv.c2_best
    fit = select_bandwidths(X, hyper.replace(c2=float(c2)), threads=threads)
    fit.seed = seed
    return fit, cv


@dataclass
class QdaModel:
    """Per-class means, banded precision models and training counts."""

    classes: np.ndarray
    means: np.ndarray
    models: list
    counts: np.ndarray

    def __post_init__(self):
        if np.any(self.counts <= 0):
            raise ValueError("class counts must be positive")
        p = self.means.shape[1]
        if any(m.p != p for m in self.models):
            raise ValueError("class models disagree on dimension")

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def fit_qda(X, labels, hyper: Hyperparameters | None = None, c2: float | None = None,
            c2_grid=None, n_cv: int = 5, seed: int = 0, threads: int = 1) -> QdaModel:
    """Estimate each class's mean and LANCE precision from centered class data."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    means, models, counts = [], [], []
    for cls in classes:
        Xc = X[labels == cls]
        mu = Xc.mean(axis=0)
        fit, _ = fit_lance(Xc - mu, hyper, c2, c2_grid, n_cv, seed, threads)
        means.append(mu)
        models.append(fit.model)
        counts.append(Xc.shape[0])
    return QdaModel(classes, np.array(means), models, np.array(counts))


def qda_scores(model: QdaModel, X) -> np.ndarray:
    """Discriminant scores ``(rows, classes)``:
    ``0.5 log det Omega_k - 0.5 (x - mu_k)^T Omega_k (x - mu_k) + log(n_k / n)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.means.shape[1]:
        raise ValueError(f"expected {model.means.shape[1]} features, got {X.shape[1]}")
    prior = np.log(model.counts / model.n)
    cols = [
        0.5 * m.logdet() - 0.5 * m.quad_form(X - mu) + lp
        for mu, m, lp in zip(model.means, model.models, prior)
    ]
    return np.column_stack(cols)


def qda_classify(model: QdaModel, X):
    """Class labels (ties go to the earlier class) and the score matrix."""
    scores = qda_scores(model, X)
    return model.classes[np.argmax(scores, axis=1)], scores


def _read_rows(path, delimiter):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not text.strip():
        raise EmptyFileError(f"{path}: file is empty")
    if delimiter is None:
        first = text.lstrip().splitlines()[0]
        delimiter = "\t" if "\t" in first else "," if "," in first else None
    if delimiter is None:
        rows = [(i + 1, line.split()) for i, line in enumerate(text.splitlines())]
    else:
        reader = csv.reader(io.StringIO(text), delimiter=delimiter)
        rows = [(reader.line_num, row) for row in reader]
    return [(ln, [c.strip() for c in row]) for ln, row in rows if any(c.strip() for c in row)]


def _parse_float(path, line, col, cell):
    try:
        return float(cell)
    except ValueError:
        raise NonNumericError(path, line, col + 1, cell) from None


def ingest_csv(path, header: bool = False, delimiter: str = ",",
               center: bool = False) -> DataMatrix:
    """Numeric CSV: rows are observations, columns ordered variables."""
    rows = _read_rows(path, delimiter)
    if header:
        rows = rows[1:]
    if not rows:
        raise EmptyFileError(f"{path}: no data rows")
    width = len(rows[0][1])
    values = []
    for line, row in rows:
        if len(row) != width:
            raise RaggedRowError(path, line, len(row), width)
        values.append([_parse_float(path, line, c, cell) for c, cell in enumerate(row)])
    data = DataMatrix(np.array(values))
    return data.center() if center else data


def ingest_ucr_timeseries(path, labels=None):
    """UCR-style file: class label then the series values on each row.

    Comma, tab and whitespace separation are detected from the first line.
    ``labels`` restricts the accepted class labels.  Returns
    ``(labels, DataMatrix)``.
    """
    rows = _read_rows(path, None)
    width = len(rows[0][1])
    if width < 2:
        raise DataFormatError(f"{path}: need a label and at least one value per row")
    ys, values = [], []
    for line, row in rows:
        if len(row) != width:
            raise RaggedRowError(path, line, len(row), width)
        lab = _parse_float(path, line, 0, row[0])
        if lab != int(lab):
            raise LabelError(f"{path}: line {line}: label {row[0]!r} is not an integer "
                             "(is the label column missing?)")
        lab = int(lab)
        if labels is not None and lab not in labels:
            raise LabelError(f"{path}: line {line}: unknown label {lab}")
        ys.append(lab)
        values.append([_parse_float(path, line, c + 1, cell) for c, cell in enumerate(row[1:])])
    return np.array(ys, dtype=int), DataMatrix(np.array(values))
