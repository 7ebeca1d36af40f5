"""Command-line interface.

Subcommands mirror the pipeline stages:

  ingest    EDF (or signal CSV) + annotation CSV -> per-seizure segments
  features  segments -> strength/MAACD feature series
  train     feature datasets -> fitted model (TH or R-SVM)
  evaluate  model + test datasets -> FP/TP/Miss/Delta report
  sweep     full parameter grid on a chronological split, ranked report
  synth     deterministic synthetic patient for tests and demos

A key-value config file (``--config``, lines of ``flag = value``) can supply
any flag; explicit flags override it.  Exit codes: 0 ok, 2 usage, 3 data
error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import dsp, harness, ingest, learn, sync, synth

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_DATA_ERRORS = (
    ingest.IngestError,
    dsp.TooShortError,
    dsp.SampleRateMismatchError,
    sync.LengthMismatchError,
    learn.EmptyTrainingError,
    learn.MisalignmentError,
    learn.TooShortError,
    learn.SingleClassError,
    learn.UnknownFeatureError,
    learn.FewerThanFourFeaturesError,
    harness.TooFewDatasetsError,
    harness.MisalignmentError,
    harness.HarnessError,
    OSError,
    KeyError,
)
_NUMERIC_ERRORS = (
    learn.SingularSystemError,
    learn.TooFewRecordsError,
    sync.AllZeroPhaseDiffError,
    FloatingPointError,
)
_USAGE_ERRORS = (dsp.InvalidBandError, ValueError)


def _band(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'low,high', got {text!r}")
    return float(parts[0]), float(parts[1])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="preictal",
        description="EEG synchronization features and preictal-state classification.",
    )
    parser.add_argument(
        "--config", type=Path, default=None,
        help="key-value file supplying default flag values",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="extract per-seizure segments")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--edf", type=Path, help="EDF recording")
    src.add_argument("--csv", type=Path, help="fallback signal CSV")
    p.add_argument("--fs", type=float, help="sampling rate for --csv input")
    p.add_argument("--annotations", type=Path, required=True,
                   help="CSV of file,onset_s,end_s")
    p.add_argument("--channels", help="comma-separated channel labels (default: all)")
    p.add_argument("--max-lead", type=float, default=3600.0,
                   help="segment length cap in seconds before each onset")
    p.add_argument("--patient", default=None, help="patient id stored in metadata")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("features", help="compute strength and MAACD series")
    p.add_argument("--in", dest="in_dir", type=Path, required=True)
    p.add_argument("--measure", choices=sync.MEASURES, default="pli")
    p.add_argument("--band", type=_band, default=(2.0, 20.0))
    p.add_argument("--taps", type=int, default=257)
    p.add_argument("--window", type=float, default=6.0)
    p.add_argument("--overlap", type=float, default=1.0)
    p.add_argument("--wpli-variant", choices=sync.WPLI_VARIANTS,
                   default="sign_average")
    p.add_argument("--derivative", choices=("auto", "on", "off"), default="auto",
                   help="rectified first difference before the Hilbert step")
    p.add_argument("--edge-threshold", type=float, default=0.0)
    p.add_argument("--trend-span", type=int, default=7, help="EMA span w")
    p.add_argument("--min-window", type=int, default=27, help="lower-limit span p")
    p.add_argument("--dump-pairs", action="store_true",
                   help="also write per-pair synchronization CSVs")
    p.add_argument("--dump-graph", type=float, metavar="THRESHOLD", default=None,
                   help="also write thresholded graph edge CSVs")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", help="fit a classifier on feature datasets")
    p.add_argument("--algo", choices=("th", "rsvm"), required=True)
    p.add_argument("--in", dest="in_dir", type=Path, required=True)
    p.add_argument("--T", type=float, choices=(150.0, 200.0, 300.0), default=300.0)
    p.add_argument("--a1", type=float, default=0.5)
    p.add_argument("--a2", type=float, default=0.5)
    p.add_argument("--ath", type=float, default=1.5)
    p.add_argument("--np", dest="n_points", type=int, default=2)
    p.add_argument("--mode", choices=learn.TH_MODES, default="maacd.r1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("evaluate", help="score a model on test datasets")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--test", type=Path, required=True)
    p.add_argument("--merge-alarms", action="store_true",
                   help="count runs of consecutive false positives as one")
    p.add_argument("--report", type=Path, required=True)

    p = sub.add_parser("sweep", help="grid search on a chronological split")
    p.add_argument("--algo", choices=("th", "rsvm"), required=True)
    p.add_argument("--in", dest="in_dir", type=Path, required=True)
    p.add_argument("--grid", choices=("default",), default="default")
    p.add_argument("--top", type=int, default=3,
                   help="configurations shown in the text table")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", type=Path, required=True)

    p = sub.add_parser("synth", help="generate a synthetic patient")
    p.add_argument("--profile", choices=synth.PROFILES, default="coupled")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--datasets", type=int, default=2)
    p.add_argument("--channels", type=int, default=6)
    p.add_argument("--fs", type=float, default=256.0)
    p.add_argument("--duration", type=float, default=1200.0)
    p.add_argument("--preictal", type=float, default=250.0)
    p.add_argument("--out", type=Path, required=True)

    return parser


def load_config_file(path: Path) -> dict[str, str]:
    """Parse ``flag = value`` lines; '#' starts a comment."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'flag = value'")
        key, _, value = stripped.partition("=")
        values[key.strip().lstrip("-")] = value.strip()
    return values


def _merge_config(argv: list[str]) -> list[str]:
    """Inject config-file values as flags right after the subcommand.

    Explicit flags come later on the command line and win (argparse keeps the
    last occurrence).  Boolean flags are injected only when truthy.
    """
    args = list(argv)
    config_path = None
    if args and args[0] == "--config":
        if len(args) < 2:
            return args
        config_path = Path(args[1])
        args = args[2:]
    elif args and args[0].startswith("--config="):
        config_path = Path(args[0].split("=", 1)[1])
        args = args[1:]
    if config_path is None or not args:
        return args
    injected = []
    for key, value in load_config_file(config_path).items():
        if value.lower() in ("true", "yes"):
            injected.append(f"--{key}")
        elif value.lower() in ("false", "no"):
            continue
        else:
            injected.extend([f"--{key}", value])
    return [args[0], *injected, *args[1:]]


# --- commands ----------------------------------------------------------------


def _cmd_ingest(ns) -> int:
    annotations = ingest.load_annotations(ns.annotations.read_text())
    if ns.edf is not None:
        source = ns.edf
        wanted = ns.channels.split(",") if ns.channels else None
        channels = ingest.read_recording(source.read_bytes(), wanted)
    else:
        if ns.fs is None:
            print("ingest: --fs is required with --csv", file=sys.stderr)
            return EXIT_USAGE
        source = ns.csv
        channels = ingest.read_signal_csv(source.read_text(), ns.fs)
        if ns.channels:
            wanted = ns.channels.split(",")
            by_label = {ch.label: ch for ch in channels}
            missing = [lb for lb in wanted if lb not in by_label]
            if missing:
                raise ingest.ParseError(f"channels not in input: {', '.join(missing)}")
            channels = [by_label[lb] for lb in wanted]
    seizures = annotations.get(source.name)
    if not seizures:
        raise ingest.ParseError(f"no annotations for file {source.name!r}")
    patient = ns.patient if ns.patient is not None else source.stem.split("_")[0]
    ns.out.mkdir(parents=True, exist_ok=True)
    for i in range(len(seizures)):
        segment = ingest.extract_dataset(
            channels, seizures, i, max_lead_s=ns.max_lead, patient_id=patient
        )
        harness.save_segment(segment, ns.out / f"{source.stem}_s{i:02d}")
        print(f"wrote {source.stem}_s{i:02d}: onset {segment.seizure_onset:g}s, "
              f"{len(segment.channels)} channels")
    return EXIT_OK


def _cmd_features(ns) -> int:
    use_derivative = {"auto": None, "on": True, "off": False}[ns.derivative]
    config = harness.FeatureConfig(
        measure=ns.measure, band=ns.band, n_taps=ns.taps,
        window_s=ns.window, overlap_s=ns.overlap,
        wpli_variant=ns.wpli_variant, use_derivative=use_derivative,
        edge_threshold=ns.edge_threshold,
        trend_span=ns.trend_span, min_window=ns.min_window,
    )
    bases = harness.list_segments(ns.in_dir)
    if not bases:
        raise harness.HarnessError(f"no segments found in {ns.in_dir}")
    ns.out.mkdir(parents=True, exist_ok=True)
    for base in bases:
        segment = harness.load_segment(base)
        kernel = dsp.design_bandpass_fir(
            segment.channels[0].fs, *config.band, n_taps=config.n_taps
        )
        plan = dsp.WindowPlan(window_s=config.window_s, overlap_s=config.overlap_s)
        phase_windows = dsp.preprocess(
            segment.channels, kernel, plan,
            use_derivative=config.derivative_enabled,
        )
        matrices = sync.sync_matrix(
            phase_windows, measure=config.measure, wpli_variant=config.wpli_variant
        )
        if ns.dump_pairs:
            sync.write_pair_csv(matrices, ns.out / f"{base.name}.pairs.csv")
        if ns.dump_graph is not None:
            from . import braingraph

            graphs = [
                (m.window_index, braingraph.build_graph(m, ns.dump_graph))
                for m in matrices
            ]
            braingraph.write_graph_csv(graphs, ns.out / f"{base.name}.graph.csv")
        dataset = harness.extract_features(segment, config)
        harness.save_dataset(dataset, ns.out / base.name)
        print(f"wrote {base.name}: {len(dataset.end_times)} windows, "
              f"{len(dataset.features)} features")
    return EXIT_OK


def _cmd_train(ns) -> int:
    datasets = harness.load_datasets(ns.in_dir)
    if ns.algo == "th":
        model = harness.train_th(
            datasets, harness.THConfig(a1=ns.a1, a2=ns.a2, a_th=ns.ath, T=ns.T)
        )
    else:
        model = harness.train_rsvm(
            datasets,
            harness.RSVMConfig(n_points=ns.n_points, mode=ns.mode, T=ns.T),
            seed=ns.seed,
        )
    ns.out.parent.mkdir(parents=True, exist_ok=True)
    learn.dump_model(model.to_dict(), ns.out)
    print(f"wrote {ns.out}")
    return EXIT_OK


def _cmd_evaluate(ns) -> int:
    model = harness.model_from_dict(learn.load_model(ns.model))
    datasets = harness.load_datasets(ns.test)
    metrics = harness.evaluate_model(model, datasets)
    if ns.merge_alarms:
        merged = sum(
            harness.merge_alarm_count(
                model.predict(ds),
                harness.label_windows(ds.end_times, ds.onset_s, model.T),
            )
            for ds in datasets
        )
        metrics = harness.Metrics(
            fp=merged, tp=metrics.tp, miss=metrics.miss,
            n_seizures=metrics.n_seizures, deltas=metrics.deltas,
        )
    algo = "th" if isinstance(model, harness.THModel) else "rsvm"
    if algo == "th":
        config = harness.THConfig(
            a1=model.classifier.a1, a2=model.classifier.a2,
            a_th=model.classifier.a_th, T=model.T,
        )
    else:
        config = harness.RSVMConfig(
            n_points=model.n_points, mode=model.mode, T=model.T
        )
    report = harness.PredictionReport(
        patient_id=datasets[0].patient_id,
        entries=[harness.SweepEntry(0, algo, config, metrics)],
        n_train=0, n_test=len(datasets),
    )
    ns.report.parent.mkdir(parents=True, exist_ok=True)
    harness.write_report_csv(report, ns.report)
    ns.report.with_suffix(".txt").write_text(harness.format_report_table(report))
    print(harness.format_report_table(report), end="")
    return EXIT_OK


def _cmd_sweep(ns) -> int:
    datasets = harness.load_datasets(ns.in_dir)
    entries = harness.sweep(datasets, ns.algo, seed=ns.seed)
    plan = harness.split(len(datasets))
    report = harness.PredictionReport(
        patient_id=datasets[0].patient_id,
        entries=entries,
        n_train=len(plan.train_indices),
        n_test=len(plan.test_indices),
    )
    ns.report.parent.mkdir(parents=True, exist_ok=True)
    harness.write_report_csv(report, ns.report)
    ns.report.with_suffix(".txt").write_text(
        harness.format_report_table(report, top=ns.top)
    )
    print(harness.format_report_table(report, top=ns.top), end="")
    return EXIT_OK


def _cmd_synth(ns) -> int:
    config = synth.SynthConfig(
        profile=ns.profile, seed=ns.seed, n_datasets=ns.datasets,
        n_channels=ns.channels, fs=ns.fs, duration_s=ns.duration,
        preictal_s=ns.preictal,
    )
    segments = synth.synth_patient(config)
    ns.out.mkdir(parents=True, exist_ok=True)
    for i, segment in enumerate(segments):
        harness.save_segment(segment, ns.out / f"synth_s{i:02d}")
    print(f"wrote {len(segments)} segments to {ns.out}")
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "features": _cmd_features,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "synth": _cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        argv = _merge_config(argv)
    except (OSError, ValueError) as exc:
        print(f"preictal: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return _COMMANDS[ns.command](ns)
    except harness.PipelineError as exc:
        kind = EXIT_NUMERIC if isinstance(exc.cause, _NUMERIC_ERRORS) else EXIT_DATA
        print(f"preictal: {exc}", file=sys.stderr)
        return kind
    except _NUMERIC_ERRORS as exc:
        print(f"preictal: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _DATA_ERRORS as exc:
        print(f"preictal: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _USAGE_ERRORS as exc:
        print(f"preictal: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
