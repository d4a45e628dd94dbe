"""``newsseg`` command-line entry point.

Exit codes: 0 success, 1 validation error (bad schema, overlaps, bad
arguments), 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np

from .errors import NewssegError, ValidationError

log = logging.getLogger("newsseg")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")


def _fps(text: str):
    from .timeline import as_fps

    try:
        return as_fps(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# -- config ----------------------------------------------------------------


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from None


def _table(cfg: dict, name: str) -> dict:
    t = cfg.get(name, {})
    if not isinstance(t, dict):
        raise ValidationError(f"config [{name}] must be a table")
    return dict(t)


def _merge(cls, table: dict, overrides: dict, base=None):
    """Build dataclass ``cls`` from config-file values, then non-None flag overrides."""
    names = {f.name for f in fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ValidationError(f"unknown {cls.__name__} key(s) in config: {sorted(unknown)}")
    values = {**table, **{k: v for k, v in overrides.items() if v is not None}}
    return replace(base, **values) if base is not None else cls(**values)


def _run_settings(args, cfg: dict) -> dict:
    run = _table(cfg, "run")
    out = {"seed": run.get("seed", 0), "workers": run.get("workers", 1), "log_level": run.get("log_level")}
    for key in ("seed", "workers", "log_level"):
        if getattr(args, key, None) is not None:
            out[key] = getattr(args, key)
    return out


def _setup_logging(level: str | None) -> None:
    level = (level or os.environ.get("NEWSSEG_LOG") or "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s", force=True)


def _echo_config(name: str, effective: dict) -> None:
    log.info("effective config for %s: %s", name, json.dumps(effective, sort_keys=True, default=str))


# -- subcommands -------------------------------------------------------------


def cmd_stats(args, cfg) -> int:
    from .ingest import class_distribution, load_annotations

    records = load_annotations(args.annotations)
    dist = class_distribution(records)
    text = dist.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    figure = args.figure
    if figure is None and args.out and not args.no_figures:
        from .plotting import figure_path

        figure = figure_path(args.out, "distribution")
    if figure:
        from .plotting import plot_class_distribution

        plot_class_distribution(dist, figure)
    return EXIT_OK


def _detector_config(args, cfg):
    from .shotdetect import DetectorConfig

    return _merge(DetectorConfig, _table(cfg, "detector"), {"threshold": args.threshold, "min_shot_frames": args.min_shot_frames})


def cmd_detect(args, cfg) -> int:
    from .shotdetect import ContentDetector, open_frames

    det_cfg = _detector_config(args, cfg)
    _echo_config("detect", asdict(det_cfg))
    frames = open_frames(args.frames, args.width, args.height)
    det = ContentDetector(det_cfg)
    for frame in frames:
        det.push(frame)
    shots = det.finish(args.fps)
    text = json.dumps(shots.to_json()) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    figure = args.figure
    if figure is None and args.out and not args.no_figures:
        from .plotting import figure_path

        figure = figure_path(args.out, "scores")
    if figure:
        from .plotting import plot_shot_scores

        plot_shot_scores(det.scores, shots.boundaries, det_cfg.threshold, figure)
    return EXIT_OK


def _sampling_spec(args, cfg, mode_default="strict"):
    from .features import SamplingSpec

    table = _table(cfg, "sampling")
    table.setdefault("mode", mode_default)
    return _merge(SamplingSpec, table, {"frame_count": args.frames_per_clip, "pad_frames": args.pad_frames, "mode": args.mode})


def _samples_per_frame(args, cfg) -> int:
    from .features import SAMPLES_PER_VIDEO_FRAME

    v = args.samples_per_frame
    if v is None:
        v = _table(cfg, "features").get("samples_per_frame", SAMPLES_PER_VIDEO_FRAME)
    return int(v)


def cmd_features(args, cfg) -> int:
    from .features import (
        AudioMeta,
        audio_window_for_span,
        extract_window,
        mel_spectrogram,
        read_wav,
        sample_frame_indices,
        save_spectrogram,
    )
    spec = _sampling_spec(args, cfg)
    spf = _samples_per_frame(args, cfg)
    span = (args.start_frame, args.end_frame)
    if not 0 <= span[0] < span[1]:
        raise ValidationError(f"invalid span [{span[0]}, {span[1]})")
    indices = sample_frame_indices(span, spec)
    summary = {"frame_indices": indices}
    if args.audio:
        pcm, sr = read_wav(args.audio)
        window = audio_window_for_span(span, spec, AudioMeta(sr, len(pcm), args.fps), spf)
        mel = mel_spectrogram(extract_window(pcm, window), sr)
        summary["audio_window"] = asdict(window)
        summary["spectrogram_shape"] = list(mel.shape)
        if args.out:
            save_spectrogram(mel, args.out)
    sys.stdout.write(json.dumps(summary) + "\n")
    return EXIT_OK


def _resolve_model_id(model_id: str):
    from .models.config import MODEL_KINDS
    from .timeline import SceneLabel

    if model_id.startswith("binary:"):
        target = SceneLabel.parse(model_id.split(":", 1)[1])
        arch, preset, frames = MODEL_KINDS["fusion-l"]
        return arch, preset, frames, target
    if model_id not in MODEL_KINDS:
        raise ValidationError(f"unknown model {model_id!r}; choose frame, vivit, ast, fusion, fusion-l or binary:<label>")
    arch, preset, frames = MODEL_KINDS[model_id]
    return arch, preset, frames, None


def cmd_train(args, cfg) -> int:
    import torch

    from . import datasets
    from .models import CnnConfig, TrainConfig, TransformerConfig, binary_wrap, build_model, save_parameters, train, train_preset, write_epoch_log
    from .pipeline import spec_frames_for

    run = _run_settings(args, cfg)
    arch, preset, frames, target = _resolve_model_id(args.model)
    spf = _samples_per_frame(args, cfg)
    train_table = _table(cfg, "train")
    base_train = train_preset(train_table.pop("preset", preset))
    tcfg = _merge(
        TrainConfig,
        train_table,
        {
            "learning_rate": args.lr,
            "batch_size": args.batch_size,
            "max_epochs": args.max_epochs,
            "early_stop_patience": args.patience,
            "optimizer": args.optimizer,
        },
        base=base_train,
    )
    synth = _table(cfg, "synthetic")
    if args.data == "synthetic":
        frames = synth.get("num_frames", 4)
        size_default = synth.get("image_size", 32)
    else:
        size_default = 224
    if arch == "frame":
        mcfg = _merge(CnnConfig, _table(cfg, "cnn"), {}, base=CnnConfig(image_size=size_default))
    else:
        table = _table(cfg, "transformer")
        table.setdefault("num_frames", frames)
        table.setdefault("image_size", size_default)
        table.setdefault("spec_frames", spec_frames_for(table["num_frames"], spf))
        mcfg = _merge(TransformerConfig, table, {})
    torch.manual_seed(run["seed"])
    if target is not None:
        model = binary_wrap(arch, mcfg, target)
    else:
        model = build_model(arch, mcfg)
    num_frames = getattr(mcfg, "num_frames", 16) if arch != "frame" else frames

    if args.data == "synthetic":
        train_set, val_set = datasets.synthetic_examples(
            arch,
            n_clips=synth.get("n_clips", 60),
            n_classes=synth.get("n_classes", 3),
            num_frames=num_frames,
            image_size=mcfg.image_size,
            samples_per_frame=spf,
            seed=run["seed"],
            val_fraction=synth.get("val_fraction", 0.25),
            audio_noise=synth.get("audio_noise", 0.001),
        )
    else:
        if not args.annotations or not args.media_dir:
            raise ValidationError("--annotations and --media-dir are required unless --data synthetic")
        from .ingest import load_annotations

        records = load_annotations(args.annotations)
        train_set, val_set = datasets.corpus_examples(
            arch,
            records,
            args.media_dir,
            num_frames=num_frames,
            image_size=mcfg.image_size,
            samples_per_frame=spf,
            seed=run["seed"],
        )
    if target is not None:
        train_set = datasets.relabel_examples(train_set, target)
        val_set = datasets.relabel_examples(val_set, target)
    _echo_config("train", {"model": args.model, "train": asdict(tcfg), "model_config": mcfg.to_dict(), **run})
    result = train(model, train_set, tcfg, seed=run["seed"], val_data=val_set or None)
    out = Path(args.out)
    save_parameters(result.parameters, out)
    log_path = Path(args.log) if args.log else out.with_name(f"{out.stem}_epochs.csv")
    write_epoch_log(result.log, log_path)
    if not args.no_figures:
        from .plotting import figure_path, plot_training

        plot_training(result.log, figure_path(log_path, "curves"))
    last = result.log[-1]
    sys.stdout.write(
        json.dumps(
            {
                "epochs": result.epochs_run,
                "best_epoch": result.best_epoch,
                "stopped_early": result.stopped_early,
                "val_acc": last.val_acc,
                "weights": str(out),
            }
        )
        + "\n"
    )
    return EXIT_OK


def cmd_segment(args, cfg) -> int:
    from .features import read_wav
    from .models import load_parameters, model_from_store
    from .pipeline import ModelClassifier, PipelineConfig, pipeline_config_for, segment_video
    from .shotdetect import open_frames

    run = _run_settings(args, cfg)
    store = load_parameters(args.model)
    model = model_from_store(store)
    classifier = ModelClassifier(model)
    spf = _samples_per_frame(args, cfg)
    base = PipelineConfig(detector=_detector_config(args, cfg), samples_per_frame=spf, workers=run["workers"], weights=args.model, model_id=store.kind)
    pcfg = pipeline_config_for(classifier, base)
    if pcfg.use_audio and not args.audio:
        raise ValidationError(f"model kind {store.kind!r} needs --audio")
    audio = read_wav(args.audio)[0] if args.audio else None
    frames = open_frames(args.frames, args.width, args.height)
    _echo_config("segment", {"pipeline": asdict(pcfg), **run})
    result = segment_video(frames, args.fps, classifier, pcfg, audio=audio, video_id=args.video_id or "")
    text = json.dumps(result.predicted.to_json()) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(args, cfg) -> int:
    from .ingest import load_annotations
    from .pipeline import evaluate_corpus, load_predictions, report_csv

    records = load_annotations(args.annotations)
    if not Path(args.pred_dir).is_dir():
        raise FileNotFoundError(f"prediction directory not found: {args.pred_dir}")
    predictions = load_predictions(args.pred_dir)
    ev = evaluate_corpus(records, predictions)
    text = report_csv(ev.pooled_metrics, args.model_name)
    Path(args.report).write_text(text)
    if not args.no_figures:
        from .plotting import figure_path, plot_confusion

        plot_confusion(ev.pooled, figure_path(args.report, "confusion"), title=args.model_name)
    sys.stdout.write(text)
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common options")
    g.add_argument("--config", metavar="TOML", help="TOML config file; command-line flags override its values")
    g.add_argument("--seed", type=int, help="random seed (default: [run].seed or 0)")
    g.add_argument("--workers", type=int, help="worker threads for per-shot work; 1 is fully deterministic")
    g.add_argument("--log-level", help="logging level (default: $NEWSSEG_LOG or WARNING)")
    g.add_argument("--json-errors", action="store_true", help="report errors on stderr as a JSON object")


def _detector_flags(p) -> None:
    p.add_argument("--threshold", type=float, help="content-score cut threshold (default 27.0)")
    p.add_argument("--min-shot-frames", type=int, help="minimum frames per shot before another cut (default 15)")


def _frame_source_flags(p, required_fps=True) -> None:
    p.add_argument("--frames", required=True, help="raw RGB24 file, '-' for stdin, or a directory of numbered PNGs")
    p.add_argument("--width", type=int, help="frame width in pixels (raw input)")
    p.add_argument("--height", type=int, help="frame height in pixels (raw input)")
    p.add_argument("--fps", type=_fps, required=required_fps, help="frame rate of the stream, e.g. 25 or 30000/1001")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="newsseg", description="News video scene segmentation toolkit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("stats", help="class distribution of an annotation file as CSV")
    p.add_argument("annotations", help="annotation JSON file")
    p.add_argument("--out", help="write the CSV here instead of stdout")
    p.add_argument("--figure", help="write a bar chart PNG here")
    p.add_argument("--no-figures", action="store_true", help="do not render figures next to --out")
    _common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("detect", help="detect hard cuts; emits ShotList JSON")
    _frame_source_flags(p)
    _detector_flags(p)
    p.add_argument("--out", help="write the ShotList JSON here instead of stdout")
    p.add_argument("--figure", help="write a content-score plot PNG here")
    p.add_argument("--no-figures", action="store_true", help="do not render figures next to --out")
    _common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("features", help="frame indices, audio window and mel spectrogram for one span")
    p.add_argument("--audio", help="16-bit mono 44.1 kHz WAV")
    p.add_argument("--fps", type=_fps, required=True, help="video frame rate, e.g. 25 or 30000/1001")
    p.add_argument("--start-frame", type=int, required=True, help="span start frame (inclusive)")
    p.add_argument("--end-frame", type=int, required=True, help="span end frame (exclusive)")
    p.add_argument("--frames-per-clip", type=int, help="frames sampled per clip (default 16)")
    p.add_argument("--pad-frames", type=int, help="frames trimmed at each end before sampling (default 10)")
    p.add_argument("--mode", choices=["strict", "clamp"], help="behaviour for spans below the minimum length")
    p.add_argument("--samples-per-frame", type=int, help="audio samples per video frame (default 1728)")
    p.add_argument("--out", help="write the spectrogram as flat binary here")
    _common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a classifier and write an NSG1 weight file")
    p.add_argument("--model", required=True, help="frame | vivit | ast | fusion | fusion-l | binary:<label>")
    p.add_argument("--data", choices=["corpus", "synthetic"], default="corpus", help="training data source")
    p.add_argument("--annotations", help="annotation JSON (corpus data)")
    p.add_argument("--media-dir", help="directory with <video_id>.rgb and <video_id>.wav (corpus data)")
    p.add_argument("--out", required=True, help="output weight file")
    p.add_argument("--log", help="epoch log CSV (default: <out>_epochs.csv)")
    p.add_argument("--optimizer", choices=["adam", "adamw"], help="override the preset optimizer")
    p.add_argument("--lr", type=float, help="override the preset learning rate")
    p.add_argument("--batch-size", type=int, help="override the preset batch size")
    p.add_argument("--max-epochs", type=int, help="override the preset epoch limit")
    p.add_argument("--patience", type=int, help="early-stopping patience in epochs")
    p.add_argument("--samples-per-frame", type=int, help="audio samples per video frame (default 1728)")
    p.add_argument("--no-figures", action="store_true", help="do not render the training-curve figure")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("segment", help="segment one video into a labelled timeline")
    _frame_source_flags(p)
    p.add_argument("--audio", help="16-bit mono 44.1 kHz WAV aligned with the frames")
    p.add_argument("--model", required=True, help="NSG1 weight file written by 'train'")
    p.add_argument("--out", help="write the timeline JSON here instead of stdout")
    p.add_argument("--video-id", help="identifier recorded in logs")
    p.add_argument("--samples-per-frame", type=int, help="audio samples per video frame (default 1728)")
    _detector_flags(p)
    _common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("evaluate", help="duration-weighted confusion report against annotations")
    p.add_argument("--annotations", required=True, help="annotation JSON file")
    p.add_argument("--pred-dir", required=True, help="directory of <video_id>.json predicted timelines")
    p.add_argument("--report", required=True, help="output report CSV")
    p.add_argument("--model-name", default="model", help="value of the model column")
    p.add_argument("--no-figures", action="store_true", help="do not render the confusion-matrix figure")
    _common(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def _emit_error(exc: BaseException, code: int, as_json: bool) -> None:
    if as_json:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    else:
        sys.stderr.write(f"newsseg: {exc}\n")


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--json-errors" in argv
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError(parser.format_help().rstrip())
        cfg = load_config(args.config)
        _setup_logging(_run_settings(args, cfg)["log_level"])
        return args.func(args, cfg)
    except (ValidationError, NewssegError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        _emit_error(exc, EXIT_VALIDATION, as_json)
        return EXIT_VALIDATION
    except OSError as exc:
        _emit_error(exc, EXIT_IO, as_json)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
