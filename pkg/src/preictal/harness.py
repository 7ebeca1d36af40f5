"""Experimental protocol: labeling, splits, metrics, sweeps, and the full pipeline.

One dataset = the pre-seizure segment of a single seizure, reduced to feature
series (per-channel node strength and its MAACD).  Training uses the
chronologically earliest ceil(n/2) datasets; the same prediction interval T
labels both phases.  Metrics count positive windows inside/outside the
prediction intervals and the lead time of the earliest true positive.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import braingraph, dsp, learn, sync
from .indicators import (
    DEFAULT_MIN_WINDOW,
    DEFAULT_TREND_SPAN,
    FeatureSeries,
    maacd,
    read_feature_csv,
    write_feature_csv,
)
from .ingest import RawSegment, read_signal_csv, write_signal_csv


class HarnessError(Exception):
    pass


class TooFewDatasetsError(HarnessError):
    """Need at least one training and one test dataset."""


class MisalignmentError(HarnessError):
    """Per-dataset prediction/label/time vectors disagree."""


class PipelineError(HarnessError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


# --- configurations ----------------------------------------------------------


@dataclass(frozen=True)
class FeatureConfig:
    """Feature-extraction settings (filter, windowing, measure, indicators)."""

    measure: str = "pli"
    band: tuple[float, float] = (2.0, 20.0)
    n_taps: int = 257
    window_s: float = 6.0
    overlap_s: float = 1.0
    wpli_variant: str = "sign_average"
    use_derivative: bool | None = None  # None: on for pli/wpli, off for plv
    edge_threshold: float = 0.0
    trend_span: int = DEFAULT_TREND_SPAN
    min_window: int = DEFAULT_MIN_WINDOW

    @property
    def derivative_enabled(self) -> bool:
        if self.use_derivative is None:
            return self.measure in ("pli", "wpli")
        return self.use_derivative


@dataclass(frozen=True)
class THConfig:
    a1: float = 0.5
    a2: float = 0.5
    a_th: float = 1.5
    T: float = 300.0


@dataclass(frozen=True)
class RSVMConfig:
    n_points: int = 2
    mode: str = "maacd.r1"
    T: float = 300.0


TH_GRID = tuple(
    THConfig(a1=a1, a2=a2, a_th=a_th, T=T)
    for T in (150.0, 200.0, 300.0)
    for (a1, a2) in ((1.0, 0.0), (0.0, 1.0), (0.5, 0.5), (0.25, 0.75), (0.75, 0.25))
    for a_th in (1.1, 1.25, 1.5, 1.75, 2.0, 2.25)
)

RSVM_GRID = tuple(
    RSVMConfig(n_points=n_points, mode=mode, T=T)
    for T in (150.0, 200.0, 300.0)
    for n_points in (2, 5, 10)
    for mode in ("str.r1", "str.lc", "maacd.r1", "maacd.lc")
)


# --- datasets ----------------------------------------------------------------


@dataclass
class SeizureDataset:
    """Feature series of one pre-seizure segment, on a common window grid."""

    patient_id: str
    seizure_index: int
    onset_s: float
    features: dict[str, FeatureSeries]

    @property
    def end_times(self) -> np.ndarray:
        return next(iter(self.features.values())).times

    def values(self, prefix: str | None = None) -> dict[str, np.ndarray]:
        return {
            fid: series.values
            for fid, series in sorted(self.features.items())
            if prefix is None or fid.startswith(prefix)
        }


def extract_features(segment: RawSegment, config: FeatureConfig) -> SeizureDataset:
    """Run filter -> (derivative) -> windows -> phases -> sync -> strength -> MAACD."""
    fs = segment.channels[0].fs
    kernel = dsp.design_bandpass_fir(fs, *config.band, n_taps=config.n_taps)
    plan = dsp.WindowPlan(window_s=config.window_s, overlap_s=config.overlap_s)
    phase_windows = dsp.preprocess(
        segment.channels, kernel, plan, use_derivative=config.derivative_enabled
    )
    matrices = sync.sync_matrix(
        phase_windows, measure=config.measure, wpli_variant=config.wpli_variant
    )

    labels = [ch.label for ch in segment.channels]
    times = np.array([w.end_s for w in phase_windows])
    strengths = np.empty((len(matrices), len(labels)))
    for i, m in enumerate(matrices):
        graph = braingraph.build_graph(m, edge_threshold=config.edge_threshold)
        strengths[i] = braingraph.node_strength(graph)

    features: dict[str, FeatureSeries] = {}
    for j, label in enumerate(labels):
        series = FeatureSeries(f"strength:{label}", times, strengths[:, j])
        features[series.feature_id] = series
        derived = maacd(series, w=config.trend_span, p=config.min_window)
        features[derived.feature_id] = derived
    return SeizureDataset(
        patient_id=segment.patient_id,
        seizure_index=segment.seizure_index,
        onset_s=segment.seizure_onset,
        features=features,
    )


# --- labeling, split, metrics -------------------------------------------------


def label_windows(end_times: np.ndarray, onset_s: float, T: float) -> np.ndarray:
    """Preictal iff the window ends in [onset - T, onset); the onset itself is excluded."""
    t = np.asarray(end_times, dtype=np.float64)
    return (t >= onset_s - T) & (t < onset_s)


@dataclass(frozen=True)
class SplitPlan:
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]


def split(n_datasets: int) -> SplitPlan:
    """Chronological split: the earliest ceil(n/2) datasets train, the rest test."""
    if n_datasets < 2:
        raise TooFewDatasetsError(f"need >= 2 datasets, got {n_datasets}")
    n_train = math.ceil(n_datasets / 2)
    return SplitPlan(
        train_indices=tuple(range(n_train)),
        test_indices=tuple(range(n_train, n_datasets)),
    )


@dataclass(frozen=True)
class Metrics:
    """FP/TP window counts, missed seizures, and per-seizure lead times."""

    fp: int
    tp: int
    miss: int
    n_seizures: int
    deltas: tuple[float, ...]  # one per test seizure; 0.0 when missed

    @property
    def detected(self) -> int:
        return self.n_seizures - self.miss

    @property
    def all_detected(self) -> bool:
        return self.miss == 0

    @property
    def delta(self) -> float:
        """Mean lead time with missed seizures contributing 0."""
        return float(np.mean(self.deltas)) if self.deltas else 0.0

    @property
    def delta_reported(self) -> float:
        """Mean lead time truncated to one decimal, as reported in the tables."""
        return math.floor(self.delta * 10.0 + 1e-9) / 10.0


def evaluate(
    predictions: list[np.ndarray],
    labels: list[np.ndarray],
    end_times: list[np.ndarray],
    onsets: list[float],
    T: float,
) -> Metrics:
    """Score positive windows against the prediction intervals of the test seizures.

    TP/FP are window counts summed over datasets; a seizure is missed when no
    positive window falls in its interval; delta_i is the distance from onset
    to the earliest true positive (0 when missed).
    """
    if not len(predictions) == len(labels) == len(end_times) == len(onsets):
        raise MisalignmentError("per-dataset argument lists differ in length")
    fp = tp = miss = 0
    deltas = []
    for pred, lab, times, onset in zip(predictions, labels, end_times, onsets):
        pred = np.asarray(pred, dtype=bool)
        lab = np.asarray(lab, dtype=bool)
        times = np.asarray(times, dtype=np.float64)
        if pred.shape != lab.shape or pred.shape != times.shape:
            raise MisalignmentError(
                f"shapes differ: {pred.shape}, {lab.shape}, {times.shape}"
            )
        tp += int(np.count_nonzero(pred & lab))
        fp += int(np.count_nonzero(pred & ~lab))
        hits = np.flatnonzero(pred & lab)
        if len(hits) == 0:
            miss += 1
            deltas.append(0.0)
        else:
            deltas.append(float(onset - times[hits[0]]))
    return Metrics(fp=fp, tp=tp, miss=miss, n_seizures=len(onsets), deltas=tuple(deltas))


def merge_alarm_count(predictions: np.ndarray, labels: np.ndarray) -> int:
    """FP count with runs of consecutive positive windows merged into one alarm."""
    outside = np.asarray(predictions, dtype=bool) & ~np.asarray(labels, dtype=bool)
    return int(np.count_nonzero(outside & ~np.concatenate([[False], outside[:-1]])))


# --- trained models ----------------------------------------------------------


@dataclass
class THModel:
    classifier: learn.THClassifier
    T: float

    def predict(self, dataset: SeizureDataset) -> np.ndarray:
        return learn.th_classify(dataset.values("maacd:"), self.classifier)

    def to_dict(self) -> dict:
        return {"algo": "th", "T": self.T, "classifier": self.classifier.to_dict()}

    @classmethod
    def from_dict(cls, payload: dict) -> "THModel":
        return cls(
            classifier=learn.THClassifier.from_dict(payload["classifier"]),
            T=float(payload["T"]),
        )


@dataclass
class RSVMModel:
    T: float
    n_points: int
    mode: str
    feature_ids: list[str]
    weights: list[float]
    svm: learn.LSSVMModel

    def predict(self, dataset: SeizureDataset) -> np.ndarray:
        combined = learn.combine_features(
            dataset.values(), self.feature_ids, self.weights
        )
        records = learn.build_records(combined, self.n_points)
        positive = learn.lssvm_predict(self.svm, records)
        # the first n_points-1 windows have no complete record: never positive
        return np.concatenate([np.zeros(self.n_points - 1, dtype=bool), positive])

    def to_dict(self) -> dict:
        return {
            "algo": "rsvm",
            "T": self.T,
            "n_points": self.n_points,
            "mode": self.mode,
            "feature_ids": self.feature_ids,
            "weights": self.weights,
            "svm": self.svm.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RSVMModel":
        return cls(
            T=float(payload["T"]),
            n_points=int(payload["n_points"]),
            mode=payload["mode"],
            feature_ids=list(payload["feature_ids"]),
            weights=[float(w) for w in payload["weights"]],
            svm=learn.LSSVMModel.from_dict(payload["svm"]),
        )


def model_from_dict(payload: dict) -> THModel | RSVMModel:
    algo = payload.get("algo")
    if algo == "th":
        return THModel.from_dict(payload)
    if algo == "rsvm":
        return RSVMModel.from_dict(payload)
    raise ValueError(f"unknown model algo {algo!r}")


def _concat_training(
    datasets: list[SeizureDataset], T: float, prefix: str
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    ids = sorted(datasets[0].values(prefix))
    for ds in datasets[1:]:
        if sorted(ds.values(prefix)) != ids:
            raise MisalignmentError("datasets expose different feature ids")
    values = {
        fid: np.concatenate([ds.features[fid].values for ds in datasets])
        for fid in ids
    }
    labels = np.concatenate(
        [label_windows(ds.end_times, ds.onset_s, T) for ds in datasets]
    )
    return values, labels


def train_th(datasets: list[SeizureDataset], config: THConfig) -> THModel:
    """Fit thresholds/rankings on the training datasets' MAACD features."""
    values, labels = _concat_training(datasets, config.T, "maacd:")
    classifier = learn.fit_th(values, labels, config.a1, config.a2, config.a_th)
    return THModel(classifier=classifier, T=config.T)


def train_rsvm(
    datasets: list[SeizureDataset], config: RSVMConfig, seed: int = 0
) -> RSVMModel:
    """Relief selection on the mode's feature pool, then tuned LS-SVM on lag records."""
    prefix = "strength:" if config.mode.startswith("str") else "maacd:"
    values, labels = _concat_training(datasets, config.T, prefix)
    ids = sorted(values)
    stacked = np.column_stack([values[fid] for fid in ids])
    weights, ranking = learn.relief_rank(stacked, labels, feature_ids=ids)
    sel_ids, sel_weights = learn.select_features_mode(
        config.mode, ranking, dict(zip(ids, weights))
    )

    record_blocks, label_blocks = [], []
    for ds in datasets:
        combined = learn.combine_features(ds.values(), sel_ids, sel_weights)
        record_blocks.append(learn.build_records(combined, config.n_points))
        label_blocks.append(
            label_windows(ds.end_times, ds.onset_s, config.T)[config.n_points - 1 :]
        )
    records = np.vstack(record_blocks)
    y = np.where(np.concatenate(label_blocks), 1.0, -1.0)
    gamma, sigma2 = learn.tune_lssvm(records, y, seed=seed)
    svm = learn.lssvm_train(records, y, gamma, sigma2)
    return RSVMModel(
        T=config.T, n_points=config.n_points, mode=config.mode,
        feature_ids=sel_ids, weights=sel_weights, svm=svm,
    )


def evaluate_model(model: THModel | RSVMModel, datasets: list[SeizureDataset]) -> Metrics:
    predictions = [model.predict(ds) for ds in datasets]
    labels = [label_windows(ds.end_times, ds.onset_s, model.T) for ds in datasets]
    return evaluate(
        predictions,
        labels,
        [ds.end_times for ds in datasets],
        [ds.onset_s for ds in datasets],
        model.T,
    )


# --- sweep ---------------------------------------------------------------------


@dataclass
class SweepEntry:
    config_id: int
    algo: str
    config: THConfig | RSVMConfig
    metrics: Metrics


def rank_key(entry: SweepEntry):
    """Fewest false positives, then most predicted seizures, then most true positives."""
    m = entry.metrics
    return (m.fp, -m.detected, -m.tp, entry.config_id)


def sweep(
    datasets: list[SeizureDataset],
    algo: str,
    grid=None,
    seed: int = 0,
) -> list[SweepEntry]:
    """Evaluate every configuration on the chronological split and rank them."""
    plan = split(len(datasets))
    train = [datasets[i] for i in plan.train_indices]
    test = [datasets[i] for i in plan.test_indices]
    if grid is None:
        grid = TH_GRID if algo == "th" else RSVM_GRID
    entries = []
    for config_id, config in enumerate(grid):
        if algo == "th":
            model = train_th(train, config)
        elif algo == "rsvm":
            model = train_rsvm(train, config, seed=seed)
        else:
            raise ValueError(f"unknown algorithm {algo!r}")
        entries.append(
            SweepEntry(
                config_id=config_id,
                algo=algo,
                config=config,
                metrics=evaluate_model(model, test),
            )
        )
    return sorted(entries, key=rank_key)


# --- reports -------------------------------------------------------------------


@dataclass
class PredictionReport:
    patient_id: str
    entries: list[SweepEntry]
    n_train: int
    n_test: int


def _config_cells(entry: SweepEntry) -> dict[str, str]:
    if entry.algo == "th":
        c = entry.config
        return {"a1": f"{c.a1:g}", "a2": f"{c.a2:g}", "a_th": f"{c.a_th:g}",
                "np": "", "mode": "", "T": f"{c.T:g}"}
    c = entry.config
    return {"a1": "", "a2": "", "a_th": "", "np": str(c.n_points),
            "mode": c.mode, "T": f"{c.T:g}"}


def report_rows(report: PredictionReport) -> list[dict[str, str]]:
    rows = []
    for entry in report.entries:
        m = entry.metrics
        row = {"patient": report.patient_id, "algo": entry.algo.upper()}
        row.update(_config_cells(entry))
        row.update(
            FP=str(m.fp), TP=str(m.tp), miss=str(m.miss),
            all_seizures="Yes" if m.all_detected else "Not",
            delta=f"{m.delta_reported:.1f}",
        )
        for i, d in enumerate(m.deltas, start=1):
            row[f"delta_{i}"] = "-" if d == 0.0 else f"{d:g}"
        rows.append(row)
    return rows


def write_report_csv(report: PredictionReport, path) -> None:
    import csv as _csv

    rows = report_rows(report)
    max_deltas = max((e.metrics.n_seizures for e in report.entries), default=0)
    fieldnames = [
        "patient", "algo", "a1", "a2", "a_th", "np", "mode", "T",
        "FP", "TP", "miss", "all_seizures", "delta",
    ] + [f"delta_{i}" for i in range(1, max_deltas + 1)]
    with open(path, "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=fieldnames, restval="",
                                 lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def format_report_table(report: PredictionReport, top: int | None = None) -> str:
    """Aligned text table mirroring the per-patient result tables."""
    entries = report.entries if top is None else report.entries[:top]
    max_deltas = max((e.metrics.n_seizures for e in entries), default=0)
    header = ["Algo", "a1", "a2", "a_TH", "np", "Feat.", "T", "FP", "TP", "# seiz."]
    header += [f"D_{i}" for i in range(1, max_deltas + 1)]
    table = [header]
    for entry in entries:
        m = entry.metrics
        cells = _config_cells(entry)
        row = [
            entry.algo.upper(), cells["a1"], cells["a2"], cells["a_th"],
            cells["np"], cells["mode"], cells["T"], str(m.fp), str(m.tp),
            "Yes" if m.all_detected else "Not",
        ]
        row += ["-" if d == 0.0 else f"{d:g}" for d in m.deltas]
        row += [""] * (max_deltas - len(m.deltas))
        table.append(row)
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in table]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


# --- segment and dataset persistence --------------------------------------------


def save_segment(segment: RawSegment, base: Path) -> None:
    """Write <base>.csv (signal CSV) and <base>.json (onset and provenance)."""
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    base.with_suffix(".csv").write_text(write_signal_csv(segment.channels))
    meta = {
        "patient_id": segment.patient_id,
        "seizure_index": segment.seizure_index,
        "seizure_onset_s": segment.seizure_onset,
        "fs": segment.channels[0].fs,
        "n_channels": len(segment.channels),
        "duration_s": segment.channels[0].duration_s,
    }
    base.with_suffix(".json").write_text(json.dumps(meta, indent=1) + "\n")


def load_segment(base: Path) -> RawSegment:
    base = Path(base)
    meta = json.loads(base.with_suffix(".json").read_text())
    channels = read_signal_csv(base.with_suffix(".csv").read_text(), meta["fs"])
    return RawSegment(
        channels=channels,
        seizure_onset=meta["seizure_onset_s"],
        patient_id=meta.get("patient_id", ""),
        seizure_index=meta.get("seizure_index", 0),
    )


def list_segments(directory: Path) -> list[Path]:
    """Segment bases in a directory, ordered by name (chronological naming)."""
    directory = Path(directory)
    return sorted(
        p.with_suffix("") for p in directory.glob("*.json")
        if p.with_suffix(".csv").exists()
    )


def save_dataset(dataset: SeizureDataset, base: Path) -> None:
    """Write <base>.csv (feature CSV) and <base>.json (onset and provenance)."""
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    write_feature_csv(
        [dataset.features[fid] for fid in sorted(dataset.features)],
        base.with_suffix(".csv"),
    )
    meta = {
        "patient_id": dataset.patient_id,
        "seizure_index": dataset.seizure_index,
        "seizure_onset_s": dataset.onset_s,
    }
    base.with_suffix(".json").write_text(json.dumps(meta, indent=1) + "\n")


def load_dataset(base: Path) -> SeizureDataset:
    base = Path(base)
    meta = json.loads(base.with_suffix(".json").read_text())
    series = read_feature_csv(base.with_suffix(".csv"))
    return SeizureDataset(
        patient_id=meta.get("patient_id", ""),
        seizure_index=meta.get("seizure_index", 0),
        onset_s=meta["seizure_onset_s"],
        features={s.feature_id: s for s in series},
    )


def load_datasets(directory: Path) -> list[SeizureDataset]:
    bases = list_segments(directory)
    if not bases:
        raise HarnessError(f"no datasets found in {directory}")
    return [load_dataset(b) for b in bases]


# --- end-to-end pipeline ---------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    algo: str = "th"
    th: THConfig = field(default_factory=THConfig)
    rsvm: RSVMConfig = field(default_factory=RSVMConfig)
    seed: int = 0
    out_dir: Path | None = None


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def run_pipeline(segments: list[RawSegment], config: RunConfig) -> PredictionReport:
    """Execute features -> split -> train -> evaluate on pre-cut segments.

    Writes feature CSVs, the model dump and CSV/text reports when
    ``config.out_dir`` is set.  Every stage failure is re-raised tagged with
    the stage name.
    """
    datasets = [
        _stage("features", extract_features, seg, config.features)
        for seg in segments
    ]
    plan = _stage("split", split, len(datasets))
    train = [datasets[i] for i in plan.train_indices]
    test = [datasets[i] for i in plan.test_indices]

    if config.algo == "th":
        model = _stage("train", train_th, train, config.th)
        cfg = config.th
    elif config.algo == "rsvm":
        model = _stage("train", train_rsvm, train, config.rsvm, seed=config.seed)
        cfg = config.rsvm
    else:
        raise PipelineError("train", ValueError(f"unknown algorithm {config.algo!r}"))
    metrics = _stage("evaluate", evaluate_model, model, test)

    patient = segments[0].patient_id if segments else ""
    report = PredictionReport(
        patient_id=patient,
        entries=[SweepEntry(config_id=0, algo=config.algo, config=cfg, metrics=metrics)],
        n_train=len(train),
        n_test=len(test),
    )

    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, ds in enumerate(datasets):
            save_dataset(ds, out / f"dataset_{i:03d}")
        learn.dump_model(model.to_dict(), out / "model.json")
        write_report_csv(report, out / "report.csv")
        (out / "report.txt").write_text(format_report_table(report))
    return report
