"""EEG phase-synchronization features and preictal-state classification toolkit."""

__version__ = "0.1.0"

from .braingraph import (
    InteractionGraph,
    build_graph,
    characteristic_path_length,
    clustering_coefficient,
    node_degree,
    node_strength,
)
from .dsp import (
    FilterKernel,
    PhaseWindow,
    WindowPlan,
    abs_derivative,
    analytic_signal,
    apply_fir,
    design_bandpass_fir,
    preprocess,
    segment,
)
from .harness import (
    FeatureConfig,
    Metrics,
    RSVMConfig,
    SeizureDataset,
    THConfig,
    evaluate,
    extract_features,
    label_windows,
    run_pipeline,
    split,
    sweep,
)
from .indicators import FeatureSeries, ema_trend, maacd, rolling_min
from .ingest import (
    ChannelSignal,
    RawSegment,
    RecordingHeader,
    extract_dataset,
    load_annotations,
    parse_edf_header,
    read_signal,
    write_edf,
)
from .sync import pli, plv, sync_matrix, wpli
from .synth import SynthConfig, synth_patient
