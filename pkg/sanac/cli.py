from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import TYPE_CHECKING

from sanac.config import get_settings
from sanac.errors import ConfigError, SanacError

if TYPE_CHECKING:
    from sanac.services.run_config import RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

SOURCE_NAMES = ("speech", "noise")


class UsageError(SanacError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_epilog() -> str:
    from sanac.services.run_config import describe_keys

    lines = ["run config keys (override with --set key=value):"]
    lines += [f"  {key} = {default!r}" for key, default in describe_keys()]
    return "\n".join(lines)


# --- prepare ---------------------------------------------------------------


def cmd_prepare(args: argparse.Namespace) -> int:
    from sanac.services.dataset import write_synthetic_corpus
    from sanac.services.manifest import SplitSizes, prepare_manifest, write_manifest

    out = Path(args.out) if args.out else get_settings().data_path / "manifest.csv"
    sizes = SplitSizes(train=args.train, val=args.val, test=args.test)
    if args.synthetic:
        speech_dir, noise_dir = write_synthetic_corpus(
            out.parent / "synthetic",
            num_speech=sizes.total,
            num_noise=args.num_noise,
            duration_s=args.duration,
            seed=args.seed,
        )
    elif args.speech_dir and args.noise_dir:
        speech_dir, noise_dir = Path(args.speech_dir), Path(args.noise_dir)
    else:
        raise UsageError("prepare needs --speech-dir and --noise-dir, or --synthetic")

    rows = prepare_manifest(speech_dir, noise_dir, snr_list=args.snr, sizes=sizes, seed=args.seed)
    write_manifest(out, rows)
    print(out)
    return EXIT_OK


# --- train -----------------------------------------------------------------


def _load_config(args: argparse.Namespace) -> RunConfig:
    from sanac.services.run_config import load_run_config

    overrides = list(args.set or [])
    if getattr(args, "system", None):
        overrides.append(f"system={args.system}")
    if getattr(args, "manifest", None):
        overrides.append(f"paths.manifest={args.manifest}")
    if getattr(args, "run_dir", None):
        overrides.append(f"paths.run_dir={args.run_dir}")
    return load_run_config(args.config, overrides)


def cmd_train(args: argparse.Namespace) -> int:
    from sanac.services.dataset import FrameCorpus
    from sanac.services.manifest import Split, hold_out_validation, read_manifest, rows_for
    from sanac.services.training import run_training

    config = _load_config(args)
    settings = get_settings()
    manifest = (
        Path(config.paths.manifest) if config.paths.manifest
        else settings.data_path / "manifest.csv"
    )
    run_dir = (
        Path(config.paths.run_dir) if config.paths.run_dir
        else settings.runs_path / f"{config.system.value}-xi{config.loss.xi:g}-seed{config.seed}"
    )

    rows = read_manifest(manifest)
    train_rows, val_rows = rows_for(rows, Split.train), rows_for(rows, Split.val)
    if not val_rows:
        train_rows, val_rows = hold_out_validation(
            rows, fraction=config.train.val_fraction, seed=config.seed
        )
        logger.info(f"No validation split in {manifest}; held out {len(val_rows)} training rows")

    spec = config.frames.to_spec()
    result = run_training(
        config,
        FrameCorpus.from_rows(train_rows, spec),
        FrameCorpus.from_rows(val_rows, spec),
        run_dir=run_dir,
    )
    print(result.checkpoint_path)
    return EXIT_OK


# --- encode / decode -------------------------------------------------------


def cmd_encode(args: argparse.Namespace) -> int:
    from sanac.dsp.audio import read_wav
    from sanac.services.checkpoint import load_checkpoint
    from sanac.services.codec_io import encode_signal, write_bitstream

    ckpt = load_checkpoint(args.checkpoint)
    stream = encode_signal(ckpt, read_wav(args.input))
    out = Path(args.output) if args.output else Path(args.input).with_suffix(".sanc")
    write_bitstream(out, stream)
    logger.info(
        f"{args.input}: {stream.header.frame_count} frames, "
        f"{stream.measured_bitrate() / 1000:.2f} kbps"
    )
    print(out)
    return EXIT_OK


def source_filenames(count: int) -> list[str]:
    names = list(SOURCE_NAMES[:count])
    names += [f"source{k}" for k in range(len(names), count)]
    return [f"{n}.wav" for n in names]


def cmd_decode(args: argparse.Namespace) -> int:
    from sanac.dsp.audio import write_wav
    from sanac.services.checkpoint import load_checkpoint
    from sanac.services.codec_io import decode_bitstream

    ckpt = load_checkpoint(args.checkpoint)
    decoded = decode_bitstream(ckpt, Path(args.input).read_bytes())
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_wav(out_dir / "mixture.wav", decoded.mixture)
    for name, signal in zip(source_filenames(len(decoded.sources)), decoded.sources):
        write_wav(out_dir / name, signal)
    print(out_dir)
    return EXIT_OK


# --- eval ------------------------------------------------------------------


def cmd_eval(args: argparse.Namespace) -> int:
    from sanac.services.checkpoint import load_checkpoint
    from sanac.services.evaluation import SystemPair, evaluate_corpus
    from sanac.services.manifest import read_manifest, rows_for
    from sanac.services.report import write_report
    from sanac.services.stoi import StoiAdapter

    if len(args.sanac) != len(args.baseline):
        raise UsageError("Pass one --baseline checkpoint per --sanac checkpoint (one per xi)")
    pairs = []
    for sanac_path, baseline_path in zip(args.sanac, args.baseline):
        sanac, baseline = load_checkpoint(sanac_path), load_checkpoint(baseline_path)
        if sanac.loss.xi != baseline.loss.xi:
            logger.warning(
                f"{sanac_path} targets xi={sanac.loss.xi} but {baseline_path} "
                f"targets xi={baseline.loss.xi}; reporting the SANAC value"
            )
        pairs.append(SystemPair(xi=sanac.loss.xi, sanac=sanac, baseline=baseline))

    rows = rows_for(read_manifest(args.manifest), args.split)
    report = evaluate_corpus(
        pairs,
        rows,
        stoi=StoiAdapter(use_default=not args.no_stoi),
        snr_filter=args.snr,
        num_workers=args.workers if args.workers is not None else get_settings().num_workers,
    )
    write_report(args.out, report, plots=not args.no_plots)
    print(args.out)
    return EXIT_OK


# --- config ----------------------------------------------------------------


def cmd_config(args: argparse.Namespace) -> int:
    if args.print_defaults:
        from sanac.services.run_config import describe_keys

        for key, default in describe_keys():
            print(f"{key} = {default!r}")
        return EXIT_OK
    print(_load_config(args).model_dump_json(indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sanac", description="Source-aware neural speech codec")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="Build a train/val/test manifest")
    p.add_argument("--speech-dir")
    p.add_argument("--noise-dir")
    p.add_argument("--synthetic", action="store_true", help="Generate a toy corpus first")
    p.add_argument("--snr", type=float, nargs="+", default=[0.0, 5.0])
    p.add_argument("--train", type=int, default=500)
    p.add_argument("--val", type=int, default=0)
    p.add_argument("--test", type=int, default=50)
    p.add_argument("--num-noise", type=int, default=10)
    p.add_argument("--duration", type=float, default=2.0, help="Synthetic clip length (s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="Manifest path (default: <data_root>/manifest.csv)")
    p.set_defaults(func=cmd_prepare)

    epilog = _config_epilog()
    for name, func, help_ in (
        ("train", cmd_train, "Train a codec (three stages)"),
        ("config", cmd_config, "Show the resolved run config"),
    ):
        p = sub.add_parser(
            name, help=help_, epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter
        )
        p.add_argument("--config", help="Run config file (.toml or .json)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override one key")
        p.add_argument("--system", choices=["sanac", "baseline"])
        p.add_argument("--manifest")
        p.add_argument("--run-dir")
        if name == "config":
            p.add_argument("--print-defaults", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("encode", help="Encode a 16 kHz mono wav into a bitstream")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="Decode a bitstream into mixture and source wavs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="Output directory")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="Compare SANAC and baseline checkpoints on a manifest split")
    p.add_argument("--sanac", nargs="+", required=True, help="One checkpoint per xi setting")
    p.add_argument("--baseline", nargs="+", required=True, help="Matching baseline checkpoints")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--snr", type=float, nargs="+", help="Only evaluate these input SNRs")
    p.add_argument("--workers", type=int)
    p.add_argument("--no-stoi", action="store_true")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--out", required=True, help="Report directory")
    p.set_defaults(func=cmd_eval)
    return parser


def configure_logging() -> None:
    logging.basicConfig(
        level=get_settings().log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging()
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"sanac {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SanacError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"sanac {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception:
        logger.exception(f"{args.command} failed")
        return EXIT_RUNTIME
