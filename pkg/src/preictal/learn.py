"""Feature selection and classification: threshold rankings, Relief, TH, LS-SVM.

Two selection routes: a threshold-based one (per-feature training mean,
two rankings by in-interval hits and out-of-interval quietness) and the
original Relief weighting.  Two classifiers: the linear TH rule over a pair
of ranked features, and a least-squares SVM with RBF kernel solved as one
dual linear system.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

TH_MODES = ("str.r1", "str.lc", "maacd.r1", "maacd.lc")


class LearnError(Exception):
    pass


class EmptyTrainingError(LearnError):
    """No training values supplied."""


class MisalignmentError(LearnError):
    """Feature timelines and labels have inconsistent lengths."""


class SingleClassError(LearnError):
    """Training data contains only one class."""


class TooShortError(LearnError):
    """Timeline shorter than the record lag window."""


class TooFewRecordsError(LearnError):
    """Not enough records to tune hyperparameters."""


class SingularSystemError(LearnError):
    """The LS-SVM dual system could not be solved to tolerance."""


class DimensionMismatchError(LearnError):
    """Prediction record dimension differs from the training dimension."""


class UnknownFeatureError(LearnError):
    """Classifier references a feature id absent from the inputs."""


class FewerThanFourFeaturesError(LearnError):
    """Linear-combination modes need at least four ranked features."""


# --- threshold-based selection ----------------------------------------------


def compute_thresholds(training_values: dict[str, np.ndarray]) -> dict[str, float]:
    """Per-feature threshold = mean over the whole training timeline (both classes)."""
    if not training_values:
        raise EmptyTrainingError("no training features")
    out = {}
    for fid, values in training_values.items():
        v = np.asarray(values, dtype=np.float64)
        if len(v) == 0:
            raise EmptyTrainingError(f"{fid}: empty training series")
        out[fid] = float(v.mean())
    return out


@dataclass(frozen=True)
class FeatureRankings:
    """Two permutations of the feature ids (ties broken by feature id).

    ranking_pos: descending count of training windows inside the prediction
    interval where the feature exceeds its threshold (true-positive ability).
    ranking_neg: descending count of windows outside the interval where it
    stays at or below the threshold (equivalently, ascending false positives).
    """

    ranking_pos: tuple[str, ...]
    ranking_neg: tuple[str, ...]


def rank_features_threshold(
    values: dict[str, np.ndarray],
    labels: np.ndarray,
    thresholds: dict[str, float],
) -> FeatureRankings:
    labels = np.asarray(labels, dtype=bool)
    pos_counts, neg_counts = {}, {}
    for fid, raw in values.items():
        v = np.asarray(raw, dtype=np.float64)
        if v.shape != labels.shape:
            raise MisalignmentError(
                f"{fid}: {v.shape} values vs {labels.shape} labels"
            )
        above = v > thresholds[fid]
        pos_counts[fid] = int(np.count_nonzero(above & labels))
        neg_counts[fid] = int(np.count_nonzero(~above & ~labels))
    ids = sorted(values)
    return FeatureRankings(
        ranking_pos=tuple(sorted(ids, key=lambda f: (-pos_counts[f], f))),
        ranking_neg=tuple(sorted(ids, key=lambda f: (-neg_counts[f], f))),
    )


# --- Relief -----------------------------------------------------------------


def relief_rank(
    records: np.ndarray,
    labels: np.ndarray,
    n_iterations: int | None = None,
    feature_ids: list[str] | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, list]:
    """Original Relief: contrast each record's nearest miss against its nearest hit.

    Features are min-max normalized to [0, 1] internally; each sampled record
    adds (diff to nearest miss)^2 - (diff to nearest hit)^2, averaged over the
    iterations.  With ``n_iterations=None`` every record is visited once in
    order, which makes the result deterministic.

    Returns (weights, ranking) with the ranking sorted by descending weight,
    ties broken by feature id.
    """
    x = np.asarray(records, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels)
    n, d = x.shape
    if y.shape != (n,):
        raise MisalignmentError(f"{n} records vs {y.shape} labels")
    if len(np.unique(y)) != 2:
        raise SingleClassError("Relief needs records of both classes")

    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    span[span == 0] = 1.0  # constant features contribute zero differences
    norm = (x - lo) / span

    if n_iterations is None or n_iterations >= n:
        visit = np.arange(n)
    else:
        visit = np.random.default_rng(seed).choice(n, size=n_iterations, replace=False)

    weights = np.zeros(d)
    for i in visit:
        diff = norm - norm[i]
        dist = np.einsum("ij,ij->i", diff, diff)
        same = y == y[i]
        same_idx = np.flatnonzero(same)
        same_idx = same_idx[same_idx != i]
        opp_idx = np.flatnonzero(~same)
        if len(same_idx) > 0:
            hit = same_idx[np.argmin(dist[same_idx])]
            weights -= diff[hit] ** 2
        miss = opp_idx[np.argmin(dist[opp_idx])]
        weights += diff[miss] ** 2
    weights /= len(visit)

    ids = list(feature_ids) if feature_ids is not None else list(range(d))
    if len(ids) != d:
        raise MisalignmentError(f"{d} features vs {len(ids)} feature ids")
    order = sorted(range(d), key=lambda j: (-weights[j], ids[j]))
    return weights, [ids[j] for j in order]


# --- record construction ----------------------------------------------------


def build_records(values: np.ndarray, n_points: int) -> np.ndarray:
    """Sliding lag records: row t holds the values at windows t-n_points+1 .. t.

    For multi-feature input (n, d) the lags are concatenated time-major, so
    each record has n_points * d entries.  The first record corresponds to
    window index n_points - 1.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n_points < 1:
        raise ValueError(f"record window must be >= 1, got {n_points}")
    if n < n_points:
        raise TooShortError(f"timeline of {n} windows, record window {n_points}")
    out = np.empty((n - n_points + 1, n_points * d))
    for j in range(n_points):
        out[:, j * d : (j + 1) * d] = x[j : j + n - n_points + 1]
    return out


# --- TH classifier ----------------------------------------------------------


@dataclass(frozen=True)
class THClassifier:
    """Linear rule: fire when a1*f_h + a2*f_k exceeds a_th*(a1*th_h + a2*th_k)."""

    feature_h: str  # head of ranking_neg: fewest false positives
    feature_k: str  # head of ranking_pos: most true positives
    a1: float
    a2: float
    a_th: float
    th_h: float
    th_k: float

    def __post_init__(self):
        if self.a1 < 0 or self.a2 < 0:
            raise ValueError(f"coefficients must be >= 0, got {self.a1}, {self.a2}")

    @property
    def threshold(self) -> float:
        return self.a_th * (self.a1 * self.th_h + self.a2 * self.th_k)

    def decide(self, values_h: np.ndarray, values_k: np.ndarray) -> np.ndarray:
        combined = self.a1 * np.asarray(values_h) + self.a2 * np.asarray(values_k)
        return combined > self.threshold

    def to_dict(self) -> dict:
        return {
            "feature_h": self.feature_h,
            "feature_k": self.feature_k,
            "a1": self.a1,
            "a2": self.a2,
            "a_th": self.a_th,
            "th_h": self.th_h,
            "th_k": self.th_k,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "THClassifier":
        return cls(**payload)


def fit_th(
    values: dict[str, np.ndarray],
    labels: np.ndarray,
    a1: float,
    a2: float,
    a_th: float,
    thresholds: dict[str, float] | None = None,
) -> THClassifier:
    """Pick the feature pair from the two rankings and freeze their thresholds.

    h is the head of ranking_neg, k the head of ranking_pos; when both point
    at the same feature, k falls back to the runner-up of ranking_pos.
    """
    if thresholds is None:
        thresholds = compute_thresholds(values)
    rankings = rank_features_threshold(values, labels, thresholds)
    h = rankings.ranking_neg[0]
    k = rankings.ranking_pos[0]
    if k == h and len(rankings.ranking_pos) > 1:
        k = rankings.ranking_pos[1]
    return THClassifier(
        feature_h=h, feature_k=k, a1=a1, a2=a2, a_th=a_th,
        th_h=thresholds[h], th_k=thresholds[k],
    )


def th_classify(values: dict[str, np.ndarray], classifier: THClassifier) -> np.ndarray:
    for fid in (classifier.feature_h, classifier.feature_k):
        if fid not in values:
            raise UnknownFeatureError(f"feature {fid!r} missing from input")
    return classifier.decide(
        values[classifier.feature_h], values[classifier.feature_k]
    )


# --- LS-SVM -----------------------------------------------------------------


def rbf_kernel(a: np.ndarray, b: np.ndarray, sigma2: float) -> np.ndarray:
    """K(x, y) = exp(-||x - y||^2 / sigma2)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-np.maximum(sq, 0.0) / sigma2)


@dataclass
class LSSVMModel:
    support: np.ndarray  # training records (n, d)
    labels: np.ndarray   # +-1 per record
    alpha: np.ndarray
    bias: float
    gamma: float
    sigma2: float

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    def to_dict(self) -> dict:
        return {
            "support": self.support.tolist(),
            "labels": self.labels.tolist(),
            "alpha": self.alpha.tolist(),
            "bias": self.bias,
            "gamma": self.gamma,
            "sigma2": self.sigma2,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LSSVMModel":
        return cls(
            support=np.asarray(payload["support"], dtype=np.float64),
            labels=np.asarray(payload["labels"], dtype=np.float64),
            alpha=np.asarray(payload["alpha"], dtype=np.float64),
            bias=float(payload["bias"]),
            gamma=float(payload["gamma"]),
            sigma2=float(payload["sigma2"]),
        )


def _check_binary_pm1(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    classes = np.unique(y)
    if not np.array_equal(classes, [-1.0, 1.0]):
        if len(classes) < 2:
            raise SingleClassError(f"need both classes, got {classes}")
        raise ValueError(f"labels must be -1/+1, got {classes}")
    return y


def lssvm_train(
    records: np.ndarray, labels: np.ndarray, gamma: float, sigma2: float
) -> LSSVMModel:
    """Solve the dual system [[0, y^T], [y, Omega + I/gamma]] [b; alpha] = [0; 1].

    Omega[i, j] = y_i y_j K(x_i, x_j) with the RBF kernel.  The solution is
    rejected unless the relative residual is at most 1e-8.
    """
    x = np.atleast_2d(np.asarray(records, dtype=np.float64))
    y = _check_binary_pm1(labels)
    n = len(x)
    if n < 2 or y.shape != (n,):
        raise MisalignmentError(f"{n} records vs {y.shape} labels")
    if gamma <= 0 or sigma2 <= 0:
        raise ValueError(f"gamma and sigma2 must be positive, got {gamma}, {sigma2}")

    omega = (y[:, None] * y[None, :]) * rbf_kernel(x, x, sigma2)
    system = np.zeros((n + 1, n + 1))
    system[0, 1:] = y
    system[1:, 0] = y
    system[1:, 1:] = omega + np.eye(n) / gamma
    rhs = np.concatenate([[0.0], np.ones(n)])
    try:
        solution = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    residual = np.linalg.norm(system @ solution - rhs)
    if residual > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        raise SingularSystemError(f"dual residual {residual:.3e} above tolerance")
    return LSSVMModel(
        support=x.copy(), labels=y, alpha=solution[1:], bias=float(solution[0]),
        gamma=gamma, sigma2=sigma2,
    )


def lssvm_decision(model: LSSVMModel, records: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(records, dtype=np.float64))
    if x.shape[1] != model.dim:
        raise DimensionMismatchError(
            f"record dimension {x.shape[1]}, model trained on {model.dim}"
        )
    kernel = rbf_kernel(x, model.support, model.sigma2)
    return kernel @ (model.alpha * model.labels) + model.bias


def lssvm_predict(model: LSSVMModel, records: np.ndarray) -> np.ndarray:
    """Positive (preictal) iff the decision value is strictly above zero."""
    return lssvm_decision(model, records) > 0.0


def _stratified_folds(y: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=int)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        fold[idx] = np.arange(len(idx)) % n_folds
    return fold


def tune_lssvm(
    records: np.ndarray,
    labels: np.ndarray,
    seed: int = 0,
    n_folds: int = 5,
    max_iter: int = 100,
) -> tuple[float, float]:
    """Nelder-Mead over (log gamma, log sigma2) on stratified CV error.

    Deterministic for a fixed seed; exact objective ties lean toward smaller
    gamma via a vanishing penalty.
    """
    x = np.atleast_2d(np.asarray(records, dtype=np.float64))
    y = _check_binary_pm1(labels)
    if len(x) < 10:
        raise TooFewRecordsError(f"need >= 10 records to tune, got {len(x)}")
    folds = _stratified_folds(y, n_folds, seed)

    def objective(params: np.ndarray) -> float:
        log_gamma, log_sigma2 = np.clip(params, -20.0, 20.0)
        gamma, sigma2 = np.exp(log_gamma), np.exp(log_sigma2)
        errors = 0
        for f in range(n_folds):
            train, val = folds != f, folds == f
            if not val.any():
                continue
            if len(np.unique(y[train])) < 2:
                # degenerate fold: predict the only class seen
                errors += int(np.count_nonzero(y[val] != y[train][0]))
                continue
            model = lssvm_train(x[train], y[train], gamma, sigma2)
            predicted = np.where(lssvm_predict(model, x[val]), 1.0, -1.0)
            errors += int(np.count_nonzero(predicted != y[val]))
        return errors / len(y) + 1e-9 * log_gamma

    mean_sq = float(np.mean(
        np.sum(x * x, axis=1)[:, None] + np.sum(x * x, axis=1)[None, :] - 2 * x @ x.T
    ))
    start = np.array([0.0, np.log(mean_sq) if mean_sq > 0 else 0.0])
    result = minimize(
        objective, start, method="Nelder-Mead",
        options={"maxiter": max_iter, "xatol": 1e-3, "fatol": 1e-4},
    )
    log_gamma, log_sigma2 = np.clip(result.x, -20.0, 20.0)
    return float(np.exp(log_gamma)), float(np.exp(log_sigma2))


# --- feature-subset modes ---------------------------------------------------


def select_features_mode(
    mode: str, ranking: list[str], weights: dict[str, float]
) -> tuple[list[str], list[float]]:
    """Resolve a classification mode into (feature ids, combination weights).

    R1 modes use the single top-ranked feature; LC modes linearly combine the
    first four ranked features weighted by their Relief weights.
    """
    mode = mode.lower()
    if mode not in TH_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {TH_MODES}")
    if mode.endswith(".r1"):
        return [ranking[0]], [1.0]
    if len(ranking) < 4:
        raise FewerThanFourFeaturesError(
            f"mode {mode} needs >= 4 features, got {len(ranking)}"
        )
    top = list(ranking[:4])
    return top, [float(weights[fid]) for fid in top]


def combine_features(
    values: dict[str, np.ndarray], ids: list[str], weights: list[float]
) -> np.ndarray:
    for fid in ids:
        if fid not in values:
            raise UnknownFeatureError(f"feature {fid!r} missing from input")
    stacked = np.stack([np.asarray(values[fid], dtype=np.float64) for fid in ids])
    return np.asarray(weights) @ stacked


# --- model persistence ------------------------------------------------------


def dump_model(payload: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
