"""Command-line pipeline: simulate, preprocess, bispec, features, classify, topomap.

Each subcommand reads one input artifact and writes its outputs under
``--out`` with fixed filenames (epochs.csv, features.csv, report.csv/.txt,
grid_<ch>.csv/.svg, topo_<quantity>_<t>s.svg/.csv).  Given the same config
and seed, outputs are byte-identical across runs; writes go through a
temp-file rename so partial files never appear.

Exit codes: 0 success, 2 usage (unknown flag / bad flag syntax), 3 invalid
configuration value, 4 missing input file, 5 data or processing error.
Errors print a single ``graspspec: error: ...`` line to stderr.

A ``--config`` file holds flat ``key=value`` lines mirroring the flag
defaults (e.g. ``nfft=256``); flags given on the command line win.
Electrode positions can be overridden with ``electrode.<Name>=x,y`` lines.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import features as features_mod
from . import ingest, ml, preprocess, render, synth
from .hos import SegmentPlan, bispectrum, cross_bispectrum, segment

EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING = 4
EXIT_RUNTIME = 5


class ConfigError(ValueError):
    """Configuration value outside its documented range."""


@dataclasses.dataclass
class RunConfig:
    """Flat key=value document of every tunable default."""

    fs_hz: float = 250.0
    epoch_seconds: float = 6.0
    trials_per_class: int = 50
    channels: int = 8
    nfft: int = 256
    overlap: float = 0.5
    window: str = "hann"
    band_low_hz: float = 1.0
    band_high_hz: float = 40.0
    low_hz: float = 1.0
    high_hz: float = 40.0
    order: int = 5
    svm_c: float = 1.0
    svm_gamma: float = 0.0  # 0 means auto: 1 / (d * var)
    ridge: float = 1e-4
    n_trees: int = 100
    k: int = 5
    seed: int = 0
    freq_limit_hz: float = 30.0
    f_hz: float = 14.0
    t_centers: str = "2,4"
    quantity: str = "both"
    style: str = "heatmap"
    standardize: str = "train"


def load_config(path) -> tuple[RunConfig, dict[str, tuple[float, float]]]:
    """Parse a flat key=value config file; unknown keys or bad values raise."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    cfg = RunConfig()
    field_types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    electrodes: dict[str, tuple[float, float]] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("electrode."):
            try:
                x, y = (float(v) for v in value.split(","))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: electrode override needs 'x,y'") from None
            electrodes[key[len("electrode.") :]] = (x, y)
            continue
        if key not in field_types:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        kind = field_types[key]
        try:
            if kind in (int, "int"):
                setattr(cfg, key, int(value))
            elif kind in (float, "float"):
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return cfg, electrodes


class _Parser(argparse.ArgumentParser):
    # single-line, machine-parsable usage errors
    def error(self, message):
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _guarded(build, *args, **kwargs):
    """Construct a parameter object, mapping validation errors to ConfigError."""
    try:
        return build(*args, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_epochs(path) -> ingest.EpochSet:
    if not Path(path).exists():
        raise FileNotFoundError(f"epochs file not found: {path}")
    return ingest.read_epochs(path)


def _filter_label(epoch_set, label):
    if label is None:
        return epoch_set
    keep = [e for e in epoch_set.epochs if e.label == label]
    if not keep:
        raise ValueError(f"no epochs with label {label!r}")
    return ingest.EpochSet(keep, list(epoch_set.channel_names), epoch_set.fs_hz)


def _plan(args) -> SegmentPlan:
    return _guarded(SegmentPlan, nfft=args.nfft, overlap_fraction=args.overlap, window=args.window)


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    specs = synth.default_class_specs(args.epoch_seconds, args.fs_hz)
    epoch_set = synth.synth_dataset(
        specs,
        trials_per_class=args.trials_per_class,
        channels=args.channels,
        epoch_seconds=args.epoch_seconds,
        fs_hz=args.fs_hz,
        seed=args.seed,
    )
    ingest.write_epochs(epoch_set, out / "epochs.csv")
    manifest = synth.dataset_manifest(
        specs, args.trials_per_class, args.channels, args.epoch_seconds, args.fs_hz, args.seed
    )
    ingest.write_text_atomic(out / "manifest.json", manifest)
    print(f"wrote {out / 'epochs.csv'} ({len(epoch_set.epochs)} epochs) and manifest.json")
    return 0


def cmd_preprocess(args) -> int:
    out = _out_dir(args)
    epoch_set = _read_epochs(args.epochs)
    spec = _guarded(
        preprocess.FilterSpec,
        low_hz=args.low_hz,
        high_hz=args.high_hz,
        order=args.order,
        zero_phase=not args.no_zero_phase,
    )
    reject = []
    if args.ica_reject:
        try:
            reject = [int(s) for s in args.ica_reject.split(",") if s.strip() != ""]
        except ValueError:
            raise ConfigError(f"--ica-reject expects comma-separated indices, got {args.ica_reject!r}") from None
    if reject:
        model = preprocess.fit_ica(epoch_set, seed=args.seed)
        kurt = ", ".join(f"{i}:{k:.2f}" for i, k in enumerate(model.component_kurtosis))
        print(f"component kurtosis: {kurt}")
    result = preprocess.preprocess_epochs(epoch_set, spec, ica_reject=reject, seed=args.seed)
    ingest.write_epochs(result, out / "epochs.csv")
    print(f"wrote {out / 'epochs.csv'}")
    return 0


def cmd_bispec(args) -> int:
    out = _out_dir(args)
    epoch_set = _filter_label(_read_epochs(args.epochs), args.label)
    plan = _plan(args)
    names = epoch_set.channel_names
    if args.channel not in names:
        raise ValueError(f"unknown channel {args.channel!r}, have {names}")
    ci = names.index(args.channel)
    cj = None
    tag = args.channel
    if args.cross_channel:
        if args.cross_channel not in names:
            raise ValueError(f"unknown channel {args.cross_channel!r}, have {names}")
        cj = names.index(args.cross_channel)
        tag = f"{args.channel}x{args.cross_channel}"

    epochs = epoch_set.epochs if args.average_trials else epoch_set.epochs[:1]
    grids = []
    for e in epochs:
        sx = segment(e.data[ci], plan, epoch_set.fs_hz)
        if cj is None:
            g = bispectrum(sx)
        else:
            g = cross_bispectrum(sx, segment(e.data[cj], plan, epoch_set.fs_hz))
        grids.append(np.abs(g.values) if args.magnitude_average else g.values)
    mean_values = np.mean(grids, axis=0)
    from .hos import SpectralGrid

    grid = SpectralGrid(
        mean_values, epoch_set.fs_hz, plan.nfft, "bispectrum" if cj is None else "cross_bispectrum"
    )
    if args.freq_limit_hz > epoch_set.fs_hz / 2:
        raise ConfigError(f"freq_limit_hz {args.freq_limit_hz} exceeds Nyquist {epoch_set.fs_hz / 2}")
    svg, csv = render.render_grid(grid, style=args.style, freq_limit_hz=args.freq_limit_hz)
    ingest.write_text_atomic(out / f"grid_{tag}.csv", csv)
    ingest.write_text_atomic(out / f"grid_{tag}.svg", svg)
    print(f"wrote grid_{tag}.csv and grid_{tag}.svg ({len(epochs)} trial(s) averaged)")
    return 0


def cmd_features(args) -> int:
    out = _out_dir(args)
    epoch_set = _read_epochs(args.epochs)
    plan = _plan(args)
    if not 0 <= args.band_low_hz < args.band_high_hz:
        raise ConfigError(f"need 0 <= band_low_hz < band_high_hz, got ({args.band_low_hz}, {args.band_high_hz})")
    fm = features_mod.extract_features(epoch_set, plan, band=(args.band_low_hz, args.band_high_hz))
    features_mod.write_features(fm, out / "features.csv")
    print(f"wrote {out / 'features.csv'} ({len(fm.rows)} trials x {len(fm.feature_names)} features)")
    return 0


def cmd_classify(args) -> int:
    out = _out_dir(args)
    if not Path(args.features).exists():
        raise FileNotFoundError(f"features file not found: {args.features}")
    fm = features_mod.read_features(args.features)
    classifiers = tuple(s.strip() for s in args.classifiers.split(",") if s.strip())
    for c in classifiers:
        if c not in ml.CLASSIFIERS:
            raise ConfigError(f"unknown classifier {c!r}, expected subset of {ml.CLASSIFIERS}")
    if args.standardize not in ("train", "literal"):
        raise ConfigError(f"--standardize must be 'train' or 'literal', got {args.standardize!r}")
    report = ml.run_cv(
        fm,
        classifiers=classifiers,
        k=args.k,
        seed=args.seed,
        standardize=args.standardize,
        svm_c=args.svm_c,
        svm_gamma=args.svm_gamma if args.svm_gamma > 0 else None,
        ridge=args.ridge,
        n_trees=args.n_trees,
    )
    ingest.write_text_atomic(out / "report.csv", ml.report_csv(report))
    table = ml.report_table(report)
    ingest.write_text_atomic(out / "report.txt", table)
    print(table, end="")
    return 0


def cmd_topomap(args) -> int:
    out = _out_dir(args)
    epoch_set = _filter_label(_read_epochs(args.epochs), args.label)
    plan = _plan(args)
    layout = render.DEFAULT_LAYOUT
    if args.electrodes:
        merged = {e[0]: (e[1], e[2]) for e in layout.electrodes}
        merged.update(args.electrodes)
        layout = render.TopoLayout([(n, x, y) for n, (x, y) in merged.items()])
    try:
        t_centers = [float(s) for s in args.t_centers.split(",") if s.strip() != ""]
    except ValueError:
        raise ConfigError(f"--t-centers expects comma-separated seconds, got {args.t_centers!r}") from None
    quantities = ["magnitude", "phase"] if args.quantity == "both" else [args.quantity]
    if args.quantity not in ("magnitude", "phase", "both"):
        raise ConfigError(f"--quantity must be magnitude, phase or both, got {args.quantity!r}")
    for t in t_centers:
        for q in quantities:
            scalars = render.topomap_scalars(epoch_set, layout, args.f_hz, t, q, plan)
            svg, csv = render.render_topomap(
                scalars, layout, epoch_set.channel_names, q, title=f"{q} at {args.f_hz:g} Hz, t={t:g} s"
            )
            stem = f"topo_{q}_{t:g}s"
            ingest.write_text_atomic(out / f"{stem}.svg", svg)
            ingest.write_text_atomic(out / f"{stem}.csv", csv)
            print(f"wrote {stem}.svg and {stem}.csv")
    return 0


def _add_common(p, cfg: RunConfig):
    p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
    p.add_argument("--seed", type=int, default=cfg.seed, help="root random seed")
    p.add_argument("--config", default=None, help="flat key=value config file")


def _add_plan(p, cfg: RunConfig):
    p.add_argument("--nfft", type=int, default=cfg.nfft)
    p.add_argument("--overlap", type=float, default=cfg.overlap)
    p.add_argument("--window", default=cfg.window, choices=("hann", "rectangular"))


def build_parser(cfg: RunConfig) -> _Parser:
    parser = _Parser(prog="graspspec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[], help="generate a synthetic labeled dataset")
    _add_common(p, cfg)
    p.add_argument("--trials-per-class", type=int, default=cfg.trials_per_class)
    p.add_argument("--channels", type=int, default=cfg.channels)
    p.add_argument("--epoch-seconds", type=float, default=cfg.epoch_seconds)
    p.add_argument("--fs-hz", type=float, default=cfg.fs_hz)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("preprocess", help="detrend, band-pass, z-score and optional ICA rejection")
    _add_common(p, cfg)
    p.add_argument("--epochs", required=True, help="input epochs CSV")
    p.add_argument("--low-hz", type=float, default=cfg.low_hz)
    p.add_argument("--high-hz", type=float, default=cfg.high_hz)
    p.add_argument("--order", type=int, default=cfg.order)
    p.add_argument("--no-zero-phase", action="store_true", help="single-pass causal filtering")
    p.add_argument("--ica-reject", default="", metavar="i,j", help="component indices to remove")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("bispec", help="bispectrum or cross-bispectrum grid of one channel")
    _add_common(p, cfg)
    _add_plan(p, cfg)
    p.add_argument("--epochs", required=True)
    p.add_argument("--channel", required=True)
    p.add_argument("--cross-channel", default=None, help="second channel for the cross form")
    p.add_argument("--label", default=None, choices=ingest.LABELS, help="restrict to one class")
    p.add_argument("--average-trials", action="store_true", help="average grids across trials")
    p.add_argument(
        "--magnitude-average",
        action="store_true",
        help="average per-trial magnitudes instead of complex grids",
    )
    p.add_argument("--style", default=cfg.style, choices=("heatmap", "contour"))
    p.add_argument("--freq-limit-hz", type=float, default=cfg.freq_limit_hz)
    p.set_defaults(func=cmd_bispec)

    p = sub.add_parser("features", help="extract the per-channel bispectral feature matrix")
    _add_common(p, cfg)
    _add_plan(p, cfg)
    p.add_argument("--epochs", required=True)
    p.add_argument("--band-low-hz", type=float, default=cfg.band_low_hz)
    p.add_argument("--band-high-hz", type=float, default=cfg.band_high_hz)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("classify", help="stratified cross-validation report")
    _add_common(p, cfg)
    p.add_argument("--features", required=True, help="input features CSV")
    p.add_argument("--classifiers", default="rf,svm,lda")
    p.add_argument("--k", type=int, default=cfg.k)
    p.add_argument("--svm-c", type=float, default=cfg.svm_c)
    p.add_argument("--svm-gamma", type=float, default=cfg.svm_gamma, help="0 = 1/(d*var) auto")
    p.add_argument("--ridge", type=float, default=cfg.ridge)
    p.add_argument("--n-trees", type=int, default=cfg.n_trees)
    p.add_argument("--standardize", default=cfg.standardize, choices=("train", "literal"))
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("topomap", help="scalp topography of the diagonal bispectrum at f Hz")
    _add_common(p, cfg)
    _add_plan(p, cfg)
    p.add_argument("--epochs", required=True)
    p.add_argument("--label", default=None, choices=ingest.LABELS)
    p.add_argument("--f-hz", type=float, default=cfg.f_hz)
    p.add_argument("--t-centers", default=cfg.t_centers, metavar="s1,s2")
    p.add_argument("--quantity", default=cfg.quantity, choices=("magnitude", "phase", "both"))
    p.set_defaults(func=cmd_topomap)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # --config changes defaults, so it must be read before the real parse
    cfg = RunConfig()
    electrodes = {}
    try:
        if "--config" in argv:
            cfg_path = argv[argv.index("--config") + 1] if argv.index("--config") + 1 < len(argv) else None
            if cfg_path is None:
                raise _UsageError("--config needs a path")
            cfg, electrodes = load_config(cfg_path)
        parser = build_parser(cfg)
        args = parser.parse_args(argv)
        args.electrodes = electrodes
        return args.func(args)
    except _UsageError as exc:
        print(f"graspspec: error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"graspspec: error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"graspspec: error: missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ValueError, RuntimeError, ingest.ParseError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"graspspec: error: {msg}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
