"""Command-line adapters: ``python -m mccaspeech <subcommand> ...``.

Each subcommand parses its flags into the library's config records and
delegates; no numerics live here. Exit status: 0 success, 2 usage or
configuration error, 3 data/format error, 4 numerical failure. Errors are
reported on stderr as ``mccaspeech <subcommand> [<stage>]: <message>``.

Global flags (accepted before or after the subcommand):

``--seed``
    overrides the fold seed of experiment-style commands, the model seed of
    ``train``/``rank-features`` and the dataset seed of ``synth``;
``--threads``
    fold x seed cells run concurrently; outputs are identical for any value;
``--output-dir``
    where outputs without an explicit ``-o`` are written (default ``.``).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import classify, harness
from .decomp import DEFAULT_EPSILON, reduce_segment
from .dsp import StftConfig, stft
from .errors import ArgumentError, MccaSpeechError, PersistenceError
from .matrixio import (
    FeatureMatrix,
    Kind,
    read_csv_matrix,
    read_fmx,
    read_manifest,
    read_wav,
    write_csv_matrix,
    write_fmx,
    write_wav,
)
from .segmentation import SegmentSpec, segment_utterance
from .synth import SynthConfig, generate_dataset

PROG = "mccaspeech"


class _Stage:
    """Tracks which step a command is in, for error messages."""

    def __init__(self):
        self.name = "arguments"

    def __call__(self, name: str) -> None:
        self.name = name


# --- helpers ------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PersistenceError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _write(path: Path, text: str) -> None:
    harness.write_text(path, text)


def _pipeline(args, stage) -> harness.PipelineConfig:
    stage("config")
    cfg = harness.PipelineConfig.from_json(args.config) if args.config else harness.PipelineConfig()
    if args.seed is not None:
        cfg = harness.PipelineConfig.from_dict({**cfg.to_dict(), "fold_seed": args.seed})
    return cfg


def _dataset(args, stage) -> harness.Dataset:
    stage("manifest")
    manifest = read_manifest(args.manifest)
    stage("load")
    spec = SegmentSpec(args.segment_frames, args.overlap) if getattr(args, "segment_frames", None) else None
    return harness.load_dataset(manifest, spec)


# --- subcommands ------------------------------------------------------------------

def cmd_stft(args, stage):
    stage("read")
    clip = read_wav(args.wav)
    cfg = StftConfig(args.window, args.hop, center_pad=not args.no_center, sample_rate=None)
    stage("stft")
    spec = stft(clip, cfg)
    spec = FeatureMatrix(spec.data, Kind.SPECTROGRAM, Path(args.wav).stem)
    out = Path(args.output) if args.output else _out_dir(args) / (Path(args.wav).stem + ".fmx")
    stage("write")
    write_fmx(spec, out)
    print(f"{out}\t{spec.rows}x{spec.cols}")


def cmd_segment(args, stage):
    src = Path(args.input)
    out_dir = _out_dir(args)
    stage("read")
    if src.suffix.lower() == ".wav":
        clip = read_wav(src)
        spec = SegmentSpec.from_ms(args.len_ms, args.overlap, clip.sample_rate)
        item = clip
    else:
        item = read_fmx(src)
        if args.frames is None:
            raise ArgumentError("matrix inputs need --frames (segment width in columns)")
        spec = SegmentSpec(args.frames, args.overlap)
    stage("segment")
    segs = segment_utterance(item, spec)
    stage("write")
    for k, seg in enumerate(segs):
        if src.suffix.lower() == ".wav" and args.stft:
            m = stft(seg)
            write_fmx(FeatureMatrix(m.data, Kind.SPECTROGRAM, f"{src.stem}#{k}"), out_dir / f"{src.stem}_{k:03d}.fmx")
        elif src.suffix.lower() == ".wav":
            write_wav(seg, out_dir / f"{src.stem}_{k:03d}.wav")
        else:
            write_fmx(seg, out_dir / f"{src.stem}_{k:03d}.fmx")
    print(f"{len(segs)} segments")


def cmd_reduce(args, stage):
    out_dir = _out_dir(args)
    for path in args.inputs:
        stage(f"read {path}")
        seg = read_fmx(path)
        stage(f"reduce {path}")
        out = reduce_segment(seg, args.method, args.chunks, args.components, args.epsilon, args.center)
        target = out_dir / f"{Path(path).stem}.{args.method}.fmx"
        stage(f"write {target}")
        write_fmx(out, target)
        print(f"{target}\t{out.rows}x{out.cols}")


def _fit_scaler(features: np.ndarray):
    mu = features.mean(axis=0)
    sd = features.std(axis=0)
    sd[sd == 0] = 1.0
    return mu, sd


def cmd_train(args, stage):
    cfg = _pipeline(args, stage)
    data = _dataset(args, stage)
    stage("reduce")
    table = harness.reduce_dataset(data, cfg)
    stage("train")
    mu, sd = _fit_scaler(table.features) if cfg.standardize else (np.zeros(table.n_features), np.ones(table.n_features))
    scaled = classify.SampleTable((table.features - mu) / sd, table.labels, table.speaker_ids, table.feature_names)
    entry = cfg.grid[0]
    seed = 0 if args.seed is None else args.seed
    if cfg.classifier == "logreg":
        model = classify.train_logreg(scaled, seed=seed, **entry)
    else:
        model = classify.train_mlp(scaled, classify.MlpConfig(**entry), seed=seed)
    stage("write")
    doc = {"pipeline": cfg.to_dict(), "scaler": {"mean": mu, "scale": sd},
           "model": classify.model_to_dict(model)}
    out = Path(args.output) if args.output else _out_dir(args) / "model.json"
    _write(out, classify._json17(doc) + "\n")
    print(out)


def _load_pipeline_model(path, stage):
    stage("model")
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{path} is not JSON: {exc}") from exc
    cfg = harness.PipelineConfig.from_dict(doc["pipeline"])
    model = classify.model_from_dict(doc["model"])
    mu = np.asarray(doc["scaler"]["mean"], dtype=np.float64)
    sd = np.asarray(doc["scaler"]["scale"], dtype=np.float64)
    return cfg, model, mu, sd


def cmd_evaluate(args, stage):
    cfg, model, mu, sd = _load_pipeline_model(args.model, stage)
    data = _dataset(args, stage)
    stage("reduce")
    table = harness.reduce_dataset(data, cfg)
    stage("predict")
    probs = classify.predict_proba(model, (table.features - mu) / sd)
    labels = data.speaker_labels()
    acc = harness.speaker_accuracy(zip(table.speaker_ids, probs), labels)
    per = {}
    for spk, p in zip(table.speaker_ids, probs):
        per.setdefault(spk, []).append(float(p))
    doc = {
        "speaker_accuracy": acc,
        "segment_accuracy": float(np.mean((probs >= 0.5) == table.labels)),
        "speakers": {s: {"label": labels[s], "mean_probability": float(np.mean(v)), "segments": len(v)}
                     for s, v in sorted(per.items())},
    }
    stage("write")
    out = Path(args.output) if args.output else _out_dir(args) / "evaluation.json"
    _write(out, json.dumps(doc, indent=2) + "\n")
    print(f"speaker accuracy {acc:.4f}")


def cmd_experiment(args, stage):
    cfg = _pipeline(args, stage)
    data = _dataset(args, stage)
    stage("experiment")
    rep = harness.run_experiment(data, cfg, threads=args.threads)
    stage("write")
    out_dir = _out_dir(args)
    _write(out_dir / "report.json", rep.to_json())
    _write(out_dir / "report.csv", "config,mean,std\n" + rep.csv_row() + "\n")
    print(f"{cfg.label()}\tmean {rep.mean:.4f}\tstd {rep.std:.4f}")


def cmd_sweep(args, stage):
    cfg = _pipeline(args, stage)
    data = _dataset(args, stage)
    stage("sweep")
    res = harness.sweep_chunks(data, args.chunks, args.components, cfg, threads=args.threads)
    stage("write")
    out_dir = _out_dir(args)
    _write(out_dir / "sweep.csv", res.to_csv())
    _write(out_dir / "sweep.json", json.dumps([r.to_dict() for _, _, r in res.rows], indent=2) + "\n")
    sys.stdout.write(res.to_csv())


def cmd_rank_features(args, stage):
    cfg = _pipeline(args, stage)
    data = _dataset(args, stage)
    stage("experiment")
    res = harness.feature_selection_experiment(data, cfg, [], repeats=args.repeats, threads=args.threads)
    stage("write")
    rank = res.ranking
    lines = ["rank,index,feature,score"]
    for r, j in enumerate(rank.order):
        lines.append(f"{r + 1},{j},{rank.feature_names[j]},{rank.scores[j]!r}")
    _write(_out_dir(args) / "ranking.csv", "\n".join(lines) + "\n")
    for j in rank.order[:10]:
        print(f"{rank.feature_names[j]}\t{rank.scores[j]:.4f}")


def cmd_select_top(args, stage):
    cfg = _pipeline(args, stage)
    data = _dataset(args, stage)
    stage("experiment")
    res = harness.feature_selection_experiment(data, cfg, args.percent, repeats=args.repeats,
                                               threads=args.threads)
    stage("write")
    out_dir = _out_dir(args)
    _write(out_dir / "selection.json", json.dumps(res.to_dict(), indent=2) + "\n")
    rows = ["percent,n_features,mean,std", f"100,{res.baseline.n_features},{res.baseline.mean!r},{res.baseline.std!r}"]
    rows += [f"{p!r},{r.n_features},{r.mean!r},{r.std!r}" for p, r in zip(res.percents, res.reports)]
    _write(out_dir / "selection.csv", "\n".join(rows) + "\n")
    print("\n".join(rows))


def cmd_synth(args, stage):
    stage("config")
    d = {}
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise PersistenceError(f"cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ArgumentError(f"{args.config} is not JSON: {exc}") from exc
    if args.seed is not None:
        d["seed"] = args.seed
    cfg = SynthConfig.from_dict(d)
    stage("generate")
    out_dir = _out_dir(args)
    manifest = generate_dataset(cfg, out_dir)
    _write(out_dir / "synth_config.json", json.dumps(cfg.to_dict(), indent=2) + "\n")
    print(f"{len(manifest)} segments -> {out_dir / 'manifest.csv'}")


def cmd_convert_csv(args, stage):
    src = Path(args.input)
    stage("read")
    if src.suffix.lower() == ".csv":
        m = read_csv_matrix(src, Kind[args.kind.upper()])
        m = FeatureMatrix(m.data, m.kind, src.stem)
        out = Path(args.output) if args.output else _out_dir(args) / (src.stem + ".fmx")
        stage("write")
        write_fmx(m, out)
    else:
        m = read_fmx(src)
        out = Path(args.output) if args.output else _out_dir(args) / (src.stem + ".csv")
        stage("write")
        write_csv_matrix(m, out)
    print(f"{out}\t{m.rows}x{m.cols}")


# --- parser -------------------------------------------------------------------

def _globals(parser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(None), help="seed override")
    parser.add_argument("--threads", type=int, default=d(1), help="worker threads for fold x seed cells")
    parser.add_argument("--output-dir", default=d("."), help="directory for outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="MAXVAR MCCA speech-segment pipeline")
    _globals(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    def data_flags(p, config=True):
        p.add_argument("--manifest", required=True, help="speaker_id,label,path CSV")
        if config:
            p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--segment-frames", type=int, help="cut .fmx entries into segments of this width")
        p.add_argument("--overlap", type=float, default=0.5)

    p = add("stft", cmd_stft, "magnitude spectrogram of a WAV file")
    p.add_argument("wav")
    p.add_argument("-o", "--output")
    p.add_argument("--window", type=int, default=512)
    p.add_argument("--hop", type=int, default=64)
    p.add_argument("--no-center", action="store_true", help="no zero padding at the edges")

    p = add("segment", cmd_segment, "cut a WAV (or .fmx) into overlapping segments")
    p.add_argument("input")
    p.add_argument("--len-ms", type=float, default=500.0)
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--frames", type=int, help="segment width in columns for .fmx inputs")
    p.add_argument("--stft", action="store_true", help="write each WAV segment's spectrogram")

    p = add("reduce", cmd_reduce, "MCCA or PCA reduction of segment matrices")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--method", choices=("mcca", "pca"), default="mcca")
    p.add_argument("--chunks", type=int, default=8)
    p.add_argument("--components", type=int, default=5)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--center", action="store_true")

    p = add("train", cmd_train, "fit a classifier on every speaker of a manifest")
    data_flags(p)
    p.add_argument("-o", "--output")

    p = add("evaluate", cmd_evaluate, "speaker accuracy of a trained model on a manifest")
    data_flags(p, config=False)
    p.add_argument("--model", required=True)
    p.add_argument("-o", "--output")

    p = add("experiment", cmd_experiment, "cross-validated experiment")
    data_flags(p)

    p = add("sweep", cmd_sweep, "chunk-count x component sweep")
    data_flags(p)
    p.add_argument("--chunks", type=_int_list, default=[4, 8, 12, 24])
    p.add_argument("--components", type=_int_list, default=[5, 10])

    p = add("rank-features", cmd_rank_features, "permutation-importance ranking averaged over folds")
    data_flags(p)
    p.add_argument("--repeats", type=int, default=10)

    p = add("select-top", cmd_select_top, "retrain on the top-ranked features")
    data_flags(p)
    p.add_argument("--percent", type=float, action="append", required=True)
    p.add_argument("--repeats", type=int, default=10)

    p = add("synth", cmd_synth, "write a synthetic dataset and manifest")
    p.add_argument("--config", help="SynthConfig JSON")

    p = add("convert-csv", cmd_convert_csv, "convert between CSV and FMX1 matrices")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--kind", choices=[k.name.lower() for k in Kind], default="spectrogram")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    if args.threads < 1:
        print(f"{PROG} {args.command} [arguments]: --threads must be >= 1", file=sys.stderr)
        return 2
    stage = _Stage()
    try:
        args.func(args, stage)
    except MccaSpeechError as exc:
        print(f"{PROG} {args.command} [{stage.name}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"{PROG} {args.command} [{stage.name}]: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
