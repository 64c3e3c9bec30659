"""Preprocessing transforms for detector windows.

Standardization (per-position z-scoring over the training split),
autocorrelation for periodicity analysis, an orthonormal Haar wavelet
transform for transient structure, and PCA for dimensionality reduction.
Detectors consume standardized raw sequences by default; the other
transforms are available as optional feature channels and for
analyst-side diagnostics.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AnalysisError, ParameterError, ShapeError, StateError


# ---------------------------------------------------------------------------
# Standardization


@dataclass(frozen=True)
class Scaler:
    """Per-position mean/std fitted on training windows.

    Positions with zero variance get std 1 and are flagged in
    ``constant``; standardizing a training value there yields 0.
    """

    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray  # bool mask of zero-variance positions

    @property
    def n_features(self):
        return len(self.means)


def fit_scaler(train_windows):
    """Fit per-position statistics (population variance convention)."""
    x = np.asarray(train_windows, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ParameterError("fit_scaler needs at least 2 training windows")
    means = x.mean(axis=0)
    stds = x.std(axis=0)  # population (ddof=0)
    constant = stds == 0.0
    stds = np.where(constant, 1.0, stds)
    return Scaler(means, stds, constant)


def apply_scaler(scaler, window):
    """Standardize one window or a batch of windows."""
    x = np.asarray(window, dtype=np.float64)
    if x.shape[-1] != scaler.n_features:
        raise ShapeError(f"window length {x.shape[-1]} != scaler length "
                         f"{scaler.n_features}")
    return (x - scaler.means) / scaler.stds


# ---------------------------------------------------------------------------
# Autocorrelation


def acf(series, max_lag):
    """Sample autocorrelation at lags 0..max_lag.

    acf[l] = sum_t (x_t - mean)(x_{t+l} - mean) / sum_t (x_t - mean)^2
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("acf expects a one-dimensional series")
    if max_lag < 0 or max_lag >= len(x):
        raise ParameterError("max_lag must satisfy 0 <= max_lag < len(series)")
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0.0:
        raise AnalysisError("ACF undefined for a constant series")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for lag in range(1, max_lag + 1):
        out[lag] = float(d[:-lag] @ d[lag:]) / denom
    return out


# ---------------------------------------------------------------------------
# Haar wavelet transform


@dataclass(frozen=True)
class HaarCoeffs:
    """Result of a multi-level orthonormal Haar DWT.

    ``details[i]`` holds the level-(i+1) detail coefficients; ``approx``
    the final approximation.  ``length`` is the pre-padding signal length
    so the inverse can truncate back.
    """

    approx: np.ndarray
    details: list
    length: int

    @property
    def levels(self):
        return len(self.details)


_SQRT2 = np.sqrt(2.0)


def haar_dwt(series, levels, pad=True):
    """Orthonormal Haar DWT: per pair, approx=(a+b)/sqrt(2),
    detail=(a-b)/sqrt(2), recursed on the approximation.

    With ``pad`` (the default) the input is zero-padded to the next power
    of two, so any length is accepted; otherwise the length must be
    divisible by 2**levels.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("haar_dwt expects a one-dimensional series")
    n = len(x)
    if levels < 1:
        raise ParameterError("levels must be >= 1")
    if pad:
        target = 1 << max(int(np.ceil(np.log2(max(n, 1)))), levels)
        if target != n:
            x = np.concatenate([x, np.zeros(target - n)])
    if len(x) % (1 << levels) != 0:
        raise ShapeError(f"length {len(x)} not divisible by 2^{levels}")
    details = []
    approx = x
    for _ in range(levels):
        a, b = approx[0::2], approx[1::2]
        details.append((a - b) / _SQRT2)
        approx = (a + b) / _SQRT2
    return HaarCoeffs(approx, details, n)


def haar_idwt(coeffs):
    """Inverse of :func:`haar_dwt`; returns the original-length signal."""
    approx = coeffs.approx
    for detail in reversed(coeffs.details):
        if len(detail) != len(approx):
            raise ShapeError("inconsistent Haar coefficient lengths")
        out = np.empty(2 * len(approx))
        out[0::2] = (approx + detail) / _SQRT2
        out[1::2] = (approx - detail) / _SQRT2
        approx = out
    return approx[:coeffs.length]


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaModel:
    """Top-k eigenvectors of the sample covariance of training vectors."""

    mean: np.ndarray
    components: np.ndarray   # (k, d), rows orthonormal
    eigenvalues: np.ndarray  # (k,), nonincreasing, >= 0

    @property
    def k(self):
        return self.components.shape[0]


def fit_pca(train_vectors, k):
    """Fit a PCA model with ``k`` components (k <= dimension, and at
    least k+1 training vectors)."""
    x = np.asarray(train_vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("fit_pca expects a 2-D array of row vectors")
    n, d = x.shape
    if not 1 <= k <= d:
        raise ParameterError(f"k must be in [1, {d}], got {k}")
    if n < k + 1:
        raise ParameterError(f"need at least k+1={k + 1} training vectors, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = eigvecs[:, order].T
    return PcaModel(mean, components, eigvals)


def pca_project(model, vector):
    """Project one vector (or a batch) onto the principal components."""
    x = np.asarray(vector, dtype=np.float64)
    if x.shape[-1] != model.mean.shape[0]:
        raise ShapeError("vector dimension does not match the PCA model")
    return (x - model.mean) @ model.components.T


def pca_reconstruct(model, projected):
    """Map projections back to the input space (lossy for k < d)."""
    z = np.asarray(projected, dtype=np.float64)
    return z @ model.components + model.mean


# ---------------------------------------------------------------------------
# Pipeline


@dataclass(frozen=True)
class FeatureOptions:
    """Optional feature channels appended to the standardized window.

    ``pca_components > 0`` requests a PCA projection and requires a
    fitted ``pca_model`` with at least that many components.
    """

    acf_lags: int = 0
    dwt_levels: int = 0
    pca_components: int = 0
    pca_model: PcaModel = None


DEFAULT_OPTIONS = FeatureOptions()


def feature_pipeline(window, scaler, options=DEFAULT_OPTIONS):
    """Standardize a window and append the requested feature channels.

    The default is standardization only (length 150); ``acf_lags=L``
    appends the ACF at lags 1..L, ``dwt_levels`` the Haar coefficients,
    and ``pca_components=k`` the projection onto a fitted PcaModel.
    """
    if scaler is None:
        raise StateError("feature_pipeline requires a fitted Scaler")
    z = apply_scaler(scaler, np.asarray(window, dtype=np.float64))
    parts = [z]
    if options.acf_lags:
        parts.append(acf(z, options.acf_lags)[1:])
    if options.dwt_levels:
        coeffs = haar_dwt(z, options.dwt_levels)
        parts.extend(coeffs.details)
        parts.append(coeffs.approx)
    if options.pca_components:
        if options.pca_model is None:
            raise StateError("PCA features requested without a fitted PcaModel")
        if options.pca_model.k < options.pca_components:
            raise ParameterError(
                f"PcaModel has {options.pca_model.k} components, "
                f"{options.pca_components} requested")
        parts.append(pca_project(options.pca_model, z)[:options.pca_components])
    return np.concatenate(parts)
