"""Bispectral analysis of multichannel recordings and grasp-type classification.

The pieces chain into one pipeline: ingest (or synthesize) labeled epochs,
preprocess them, estimate bispectra/bicoherence, extract ten features per
channel, and score three classifiers under stratified cross-validation.
The ``graspspec`` command drives the same steps from the shell.
"""

from .features import FEATURE_NAMES, FeatureMatrix, FeatureVector, channel_features, extract_features
from .hos import (
    SegmentPlan,
    SegmentSpectra,
    SpectralGrid,
    bicoherence,
    bin_frequencies,
    bispectrum,
    cross_bispectrum,
    power_spectrum,
    principal_region,
    segment,
)
from .ingest import (
    EVENT_KINDS,
    LABELS,
    Epoch,
    EpochSet,
    Event,
    EventLog,
    ParseError,
    Recording,
    epoch_recording,
    read_epochs,
    read_event_log,
    read_recording,
    write_epochs,
    write_recording,
)
from .ml import (
    CLASSIFIERS,
    TASKS,
    CVReport,
    ForestModel,
    LdaModel,
    Standardizer,
    SvmModel,
    fit_standardizer,
    forest_fit,
    forest_predict,
    lda_fit,
    lda_predict,
    report_csv,
    report_table,
    run_cv,
    stratified_kfold,
    svm_fit,
    svm_predict,
)
from .preprocess import (
    FilterSpec,
    IcaModel,
    apply_filter,
    baseline_correct,
    design_bandpass,
    detrend,
    fit_ica,
    preprocess_epochs,
    remove_components,
    zscore,
)
from .render import DEFAULT_LAYOUT, TopoLayout, idw_interpolate, render_grid, render_topomap, topomap_scalars
from .synth import QpcSpec, SynthClassSpec, default_class_specs, qpc_signal, synth_dataset

__version__ = "0.1.0"
