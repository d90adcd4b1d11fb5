"""Command-line entry point: prepare, train-vocoder, train-acoustic, synthesize, verify.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numeric failure, 4 data error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import cache
from .autograd import NonFiniteError, no_grad
from .config import load_config, make_run_dir
from .dsp.features import ConfigurationError, InputLengthError
from .dsp.io import Waveform, WavFormatError, write_wav
from .training.acoustic import AcousticTrainer
from .training.checkpoint import CheckpointError
from .training.vocoder import NumericFailure, VocoderTrainer, load_vocoder, mean_nll
from .verify import SUITES, report, run_suite
from .wavenet.dml import classes_to_int16
from .wavenet.generate import generate

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DATA = 0, 1, 2, 3, 4


def _config(args):
    return load_config(args.config, args.set or [])


def _prepared(args, config) -> Path:
    path = args.prepared or config.prepared
    if not path:
        raise ConfigurationError("no prepared corpus: pass --prepared or set prepared = <dir>")
    return Path(path)


def cmd_prepare(args) -> int:
    config = _config(args)
    out = args.out or config.prepared
    if not out:
        raise ConfigurationError("no output directory: pass --out or set prepared = <dir>")
    result = cache.prepare(config, out, force=args.force)
    state = "cache hit, nothing written" if result.cache_hit else "written"
    print(f"prepared {result.n_utterances} utterances in {result.out_dir} ({state})")
    return EXIT_OK


def cmd_train_vocoder(args) -> int:
    config = _config(args)
    train, held = cache.split_heldout(cache.load_items(_prepared(args, config)), config.heldout)
    run = make_run_dir(config, "vocoder", args.run_dir)
    if args.resume:
        trainer = VocoderTrainer.load(args.resume)
        trainer.config.steps = config.voc_steps
    else:
        trainer = VocoderTrainer(config.wavenet(), config.vocoder_training())
    eval_set = held or train
    initial = mean_nll(trainer.model, eval_set) if trainer.step_count == 0 else None
    trainer.train(train)
    summary = {
        "steps": trainer.step_count,
        "heldout_utterances": len(held),
        "heldout_nll_initial": initial,
        "heldout_nll_final": mean_nll(trainer.model, eval_set),
        "heldout_nll_final_ema": mean_nll(trainer.model, eval_set, trainer.ema.shadow),
    }
    trainer.save(run / "vocoder.zip")
    with (run / "vocoder_losses.csv").open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "loss"])
        w.writerows((i + 1, repr(loss)) for i, loss in enumerate(trainer.losses))
    (run / "vocoder_summary.json").write_text(json.dumps(summary, indent=1))
    print(json.dumps(summary))
    print(f"checkpoint: {run / 'vocoder.zip'}")
    return EXIT_OK


def cmd_train_acoustic(args) -> int:
    config = _config(args)
    acfg = config.acoustic()
    items = cache.load_items(_prepared(args, config))
    voc_path = args.vocoder or config.vocoder_checkpoint
    needs_vocoder = acfg.n3 > acfg.n2 and acfg.gamma_w > 0
    wavenet = load_vocoder(voc_path) if voc_path and needs_vocoder else None
    run = make_run_dir(config, "acoustic", args.run_dir)
    if args.resume:
        trainer = AcousticTrainer.load(args.resume, items, wavenet, run, {"n3": acfg.n3})
    else:
        trainer = AcousticTrainer(acfg, items, wavenet, run)
    trainer.train()
    trainer.write_metrics(run / "metrics.csv")
    print(f"trained to epoch {trainer.epoch}; metrics: {run / 'metrics.csv'}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    config = _config(args)
    prepared = _prepared(args, config)
    items = {it.utt_id: it for it in cache.load_items(prepared)}
    missing = [u for u in args.utt if u not in items]
    if missing:
        raise cache.DataError(f"unknown utterance id(s) {missing}; available: {sorted(items)}")
    voc_path = args.vocoder or config.vocoder_checkpoint
    if not voc_path:
        raise ConfigurationError("synthesis needs a vocoder checkpoint (--vocoder)")
    wavenet = load_vocoder(voc_path, use_ema=not args.no_ema)
    generator = None
    if not args.abs:
        ckpt = args.acoustic or config.acoustic_checkpoint
        if not ckpt:
            raise ConfigurationError("synthesis from text needs an acoustic checkpoint (--acoustic), "
                                     "or pass --abs to vocode natural features")
        generator = AcousticTrainer.load(ckpt, list(items.values()), wavenet).generator
    out = Path(args.out) if args.out else make_run_dir(config, "synth", args.run_dir)
    out.mkdir(parents=True, exist_ok=True)
    for n, utt in enumerate(args.utt):
        it = items[utt]
        if generator is None:
            mel = it.mel
        else:
            with no_grad():
                mel = generator(it.bundle).data
        rng = np.random.default_rng([config.seed, 3, n])
        classes = generate(wavenet, mel, it.code, rng)
        path = out / f"{utt}{'_abs' if args.abs else ''}.wav"
        write_wav(path, Waveform(classes_to_int16(classes, wavenet.config.bits)))
        print(f"{path} ({len(classes)} samples)")
    return EXIT_OK


def cmd_verify(args) -> int:
    rep = report(run_suite(args.suite, args.seed))
    text = json.dumps(rep, indent=1)
    if args.report:
        Path(args.report).write_text(text)
    print(text)
    return EXIT_OK if rep["passed"] else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advtts", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
        p.add_argument("--run-dir", help="write here instead of a fresh directory under $ADVTTS_RUN_ROOT")
        return p

    p = common(sub.add_parser("prepare", help="extract features and statistics for a corpus"))
    p.add_argument("--out", help="prepared corpus directory")
    p.add_argument("--force", action="store_true", help="rewrite even if the cache is complete")
    p.set_defaults(func=cmd_prepare)

    p = common(sub.add_parser("train-vocoder", help="teacher-forced WaveNet training"))
    p.add_argument("--prepared")
    p.add_argument("--resume", help="continue from a vocoder checkpoint")
    p.set_defaults(func=cmd_train_vocoder)

    p = common(sub.add_parser("train-acoustic", help="three-stage acoustic model training"))
    p.add_argument("--prepared")
    p.add_argument("--vocoder", help="frozen vocoder checkpoint for the finetune stage")
    p.add_argument("--resume", help="continue from an acoustic checkpoint")
    p.set_defaults(func=cmd_train_acoustic)

    p = common(sub.add_parser("synthesize", help="generate waveforms"))
    p.add_argument("--prepared")
    p.add_argument("--utt", nargs="+", required=True, help="utterance ids")
    p.add_argument("--vocoder")
    p.add_argument("--acoustic")
    p.add_argument("--abs", action="store_true", help="vocode natural mel frames (analysis by synthesis)")
    p.add_argument("--no-ema", action="store_true", help="use live vocoder weights instead of the average")
    p.add_argument("--out", help="output directory for WAV files")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify", help="run property suites and print a JSON report")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="also write the report here")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, CheckpointError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, NonFiniteError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (cache.DataError, WavFormatError, InputLengthError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
