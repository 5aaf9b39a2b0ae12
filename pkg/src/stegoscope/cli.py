"""``stegoscope`` command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import codec, dataset, metrics
from .config import SEED_ENV, parse_float_list, read_config, resolve_seed
from .errors import BadConfig, InsufficientCapacity, MalformedHeader, StegoscopeError
from .image_io import load_pgm, save_pgm
from .model import (ModelConfig, StegModel, TrainConfig, Trainer, evaluate, load_weights, full_profile,
                    save_weights)
from .plotting import CSVError, diff_panel, read_series, series_svg

HELP_WIDTH = 88


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _formatter(prog):
    return argparse.ArgumentDefaultsHelpFormatter(prog, width=HELP_WIDTH)


def _seed_arg(p):
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (falls back to ${SEED_ENV}, then 0)")


def _key_arg(p):
    p.add_argument("--key", type=lambda s: int(s, 0), default=None,
                   help="64-bit traversal key for keyed (shuffled) pair order")


def _config_arg(p):
    p.add_argument("--config", default=None, help="flat key = value file; flags override it")


def build_parser():
    parser = _Parser(prog="stegoscope", formatter_class=_formatter,
                     description="APVD steganography codec, corpus builder and dual-head steganalysis model.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("embed", help="hide a payload in a PGM cover", formatter_class=_formatter)
    p.add_argument("cover", help="cover image (binary PGM)")
    p.add_argument("payload", help="payload file (raw bytes, MSB first)")
    p.add_argument("out", help="output stego PGM")
    p.add_argument("--bits", type=int, default=None,
                   help="payload length in bits (default: PAYLOAD.bits sidecar, else 8 x file size)")
    _key_arg(p)
    _config_arg(p)

    p = sub.add_parser("extract", help="recover a payload from a stego PGM", formatter_class=_formatter)
    p.add_argument("stego", help="stego image (binary PGM)")
    p.add_argument("out", help="output payload file; OUT.bits receives the bit length")
    _key_arg(p)
    _config_arg(p)

    p = sub.add_parser("capacity", help="print payload capacity per threshold index",
                       formatter_class=_formatter)
    p.add_argument("image", help="cover image (binary PGM)")
    _key_arg(p)
    _config_arg(p)

    p = sub.add_parser("gen-dataset", help="build a cover/stego corpus with a split manifest",
                       formatter_class=_formatter)
    p.add_argument("--out", required=True, help="output corpus directory")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--covers", default=None, help="directory of cover PGMs")
    src.add_argument("--synthetic", type=int, default=None, help="generate N synthetic covers")
    p.add_argument("--size", type=int, default=64, help="covers are resized to SIZE x SIZE")
    p.add_argument("--bpp-list", default="0.2,0.5,0.8", help="payload rates, cycled over covers")
    p.add_argument("--on-capacity-error", choices=("skip", "abort"), default="abort",
                   help="what to do when a cover cannot hold its payload")
    _seed_arg(p)
    _key_arg(p)
    _config_arg(p)

    p = sub.add_parser("train", help="train the dual-head model on a manifest's train split",
                       formatter_class=_formatter)
    p.add_argument("--manifest", required=True, help="corpus manifest.csv")
    p.add_argument("--weights", required=True, help="output weight file")
    p.add_argument("--loss-csv", default=None, help="per-epoch loss CSV (default: WEIGHTS.losses.csv)")
    p.add_argument("--profile", choices=("desk", "full"), default="desk",
                   help="desk: depth 3, channels 8,16,32; full: depth 5, channels 8..128")
    p.add_argument("--epochs", type=int, default=50, help="training epochs")
    p.add_argument("--batch", type=int, default=32, help="batch size")
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    p.add_argument("--lambda-recover", type=float, default=1.0, help="weight of the recovery loss")
    p.add_argument("--highpass", choices=("on", "off"), default="on",
                   help="fixed high-pass residual filter in front of the trunk")
    _seed_arg(p)
    _key_arg(p)
    _config_arg(p)

    p = sub.add_parser("eval", help="evaluate a weight file on a manifest split", formatter_class=_formatter)
    p.add_argument("--manifest", required=True, help="corpus manifest.csv")
    p.add_argument("--weights", required=True, help="weight file written by train")
    p.add_argument("--out-dir", required=True, help="directory for the metric CSVs")
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test",
                   help="which split to evaluate")
    p.add_argument("--batch", type=int, default=32, help="inference batch size")
    _key_arg(p)
    _config_arg(p)

    p = sub.add_parser("stats", help="Pearson correlation or paired t-test on two CSV columns",
                       formatter_class=_formatter)
    p.add_argument("--csv", required=True, help="input CSV with a header row")
    p.add_argument("--x", required=True, help="first column")
    p.add_argument("--y", required=True, help="second column")
    p.add_argument("--test", choices=("pearson", "paired-t"), default="pearson", help="statistic")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    _config_arg(p)

    p = sub.add_parser("plot", help="SVG chart from a CSV, or a cover/stego difference panel",
                       formatter_class=_formatter)
    p.add_argument("--csv", default=None, help="input CSV with a header row")
    p.add_argument("--x", default="bpp", help="x column")
    p.add_argument("--y", default="recovery_rate", help="y column")
    p.add_argument("--y-scale", type=float, default=1.0, help="multiply y values (100 for percent)")
    p.add_argument("--kind", choices=("line", "bar"), default="line", help="chart type")
    p.add_argument("--title", default="", help="chart title")
    p.add_argument("--cover", default=None, help="cover PGM for the difference panel")
    p.add_argument("--stego", default=None, help="stego PGM for the difference panel")
    p.add_argument("--amplify", type=int, default=4, help="difference amplification factor")
    p.add_argument("--out", required=True, help="output SVG, or output directory for the panel")
    _config_arg(p)
    return parser


def _known_keys(parser):
    keys = set()
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            keys.update(a.dest for a in sp._actions if a.dest not in ("help", "config"))
    return keys


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            values = read_config(args.config)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except BadConfig as exc:
            parser.error(str(exc))
        unknown = sorted(set(values) - _known_keys(parser))
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        sp = parser._subparsers._group_actions[0].choices[args.command]
        mine = {a.dest for a in sp._actions}
        sp.set_defaults(**{k: v for k, v in values.items() if k in mine})
        args = parser.parse_args(argv)
    return args


# -- commands ------------------------------------------------------------------

def _payload_bits(path, nbits):
    if nbits is None and os.path.exists(str(path) + ".bits"):
        return dataset.read_payload(path)
    raw = np.frombuffer(Path(path).read_bytes(), dtype=np.uint8)
    bits = np.unpackbits(raw)
    if nbits is None:
        return bits
    if nbits > len(bits):
        raise ValueError(f"--bits {nbits} exceeds the {len(bits)} bits in {path}")
    return bits[:nbits]


def cmd_embed(args):
    cover = load_pgm(args.cover)
    bits = _payload_bits(args.payload, args.bits)
    stego, trace = codec.embed(cover, bits, key=args.key)
    save_pgm(args.out, stego)
    print(f"threshold {trace.threshold_index}, embedded {len(bits)} bits")
    return 0


def cmd_extract(args):
    bits = codec.extract(load_pgm(args.stego), key=args.key)
    dataset.write_payload(args.out, bits)
    print(f"extracted {len(bits)} bits")
    return 0


def cmd_capacity(args):
    img = load_pgm(args.image)
    print("threshold,capacity")
    for t in range(codec.NUM_BANDS):
        print(f"{t},{codec.capacity(img, t, key=args.key)}")
    return 0


def cmd_gen_dataset(args):
    seed = resolve_seed(args.seed)
    if args.covers:
        covers = dataset.load_cover_dir(args.covers, args.size)
    elif args.synthetic is not None:
        covers = dataset.synthetic_covers(args.synthetic, args.size, seed)
    else:
        raise UsageError("one of --covers or --synthetic is required")
    rows = dataset.generate_corpus(args.out, covers, parse_float_list(args.bpp_list), seed=seed, key=args.key,
                                   on_capacity_error=args.on_capacity_error,
                                   log=lambda m: print(m, file=sys.stderr))
    counts = {s: sum(r.split == s for r in rows) for s in dataset.SPLITS}
    print(f"wrote {len(rows)} cover/stego pairs (" + ", ".join(f"{k} {v}" for k, v in counts.items()) + ")")
    return 0


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)


def cmd_train(args):
    seed = resolve_seed(args.seed)
    samples = dataset.load_samples(args.manifest, split="train", key=args.key)
    if not samples:
        raise StegoscopeError("manifest has no training samples")
    size = samples[0].image.shape[0]
    extra = dict(lambda_recover=args.lambda_recover, highpass=args.highpass == "on", seed=seed)
    if args.profile == "full":
        mcfg = full_profile(**extra)
        mcfg.input_size = size
    else:
        mcfg = ModelConfig(input_size=size, **extra)
    model = StegModel(mcfg)
    trainer = Trainer(model, TrainConfig(lr=args.lr, batch=args.batch, epochs=args.epochs, seed=seed))
    rows = []

    def report(st):
        rows.append((st.epoch, repr(st.total), repr(st.detection), repr(st.recovery)))
        print(f"epoch {st.epoch}: total {st.total:.5f} detection {st.detection:.5f} recovery {st.recovery:.5f}")

    trainer.fit(samples, callback=report)
    save_weights(model, args.weights)
    _write_csv(args.loss_csv or str(args.weights) + ".losses.csv",
               ("epoch", "total", "detection", "recovery"), rows)
    return 0


def cmd_eval(args):
    split = None if args.split == "all" else args.split
    samples = dataset.load_samples(args.manifest, split=split, key=args.key)
    if not samples:
        raise StegoscopeError(f"no samples in split {args.split!r}")
    model = load_weights(args.weights)
    ev = evaluate(model, samples, args.batch)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    report = metrics.confusion_metrics(ev.scores, ev.labels)
    metrics.write_metric_csv(out / "metrics.csv", report.rows())

    det_rows, rec_rows = [], []
    for bpp in sorted(set(ev.bpp.tolist())):
        sel = ev.bpp == bpp
        r = metrics.confusion_metrics(ev.scores[sel], ev.labels[sel])
        det_rows.append((f"{bpp:g}", repr(r.accuracy), repr(r.precision), repr(r.recall), repr(r.f1)))
        stego = sel & (ev.labels == 1)
        if ev.bit_counts[stego].sum() > 0:
            rec = metrics.recovery_from_counts(int(ev.bit_errors[stego].sum()), int(ev.bit_counts[stego].sum()))
            rec_rows.append((f"{bpp:g}", repr(rec.ber), repr(rec.recovery_rate), rec.bits_compared))
    _write_csv(out / "detection_by_bpp.csv", ("bpp", "accuracy", "precision", "recall", "f1"), det_rows)
    _write_csv(out / "recovery.csv", ("bpp", "ber", "recovery_rate", "bits_compared"), rec_rows)

    stego = (ev.labels == 1) & (ev.bit_counts > 0)
    stat_rows = []
    try:
        per_sample = ev.bit_errors[stego] / ev.bit_counts[stego]
        st = metrics.pearson_r(ev.bpp[stego], per_sample)
        stat_rows.append(("pearson_bpp_ber", repr(st.statistic), st.degrees_of_freedom, repr(st.p_value)))
    except StegoscopeError as exc:
        print(f"pearson skipped: {exc}", file=sys.stderr)
    _write_csv(out / "stats.csv", ("test", "statistic", "df", "p_value"), stat_rows)
    print(f"accuracy {report.accuracy:.4f} precision {report.precision:.4f} "
          f"recall {report.recall:.4f} f1 {report.f1:.4f}")
    return 0


def _read_columns(path, xcol, ycol):
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if not rd.fieldnames or xcol not in rd.fieldnames or ycol not in rd.fieldnames:
            raise CSVError(f"{path}: line 1: columns {xcol!r}/{ycol!r} not in header")
        xs, ys = [], []
        for lineno, row in enumerate(rd, start=2):
            try:
                xs.append(float(row[xcol]))
                ys.append(float(row[ycol]))
            except (TypeError, ValueError):
                raise CSVError(f"{path}: line {lineno}: malformed row") from None
    return xs, ys


def cmd_stats(args):
    xs, ys = _read_columns(args.csv, args.x, args.y)
    st = metrics.pearson_r(xs, ys) if args.test == "pearson" else metrics.paired_t_test(xs, ys)
    rows = [(args.test, repr(st.statistic), st.degrees_of_freedom, repr(st.p_value))]
    header = ("test", "statistic", "df", "p_value")
    if args.out:
        _write_csv(args.out, header, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return 0


def cmd_plot(args):
    if args.cover or args.stego:
        if not (args.cover and args.stego):
            raise UsageError("--cover and --stego must be given together")
        cover, stego = load_pgm(args.cover), load_pgm(args.stego)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_pgm(out / "cover.pgm", cover)
        save_pgm(out / "stego.pgm", stego)
        save_pgm(out / "diff.pgm", diff_panel(cover, stego, args.amplify))
        return 0
    if not args.csv:
        raise UsageError("either --csv or --cover/--stego is required")
    series = read_series(args.csv, args.x, args.y, args.y_scale)
    Path(args.out).write_text(series_svg(series, args.title, args.kind))
    return 0


COMMANDS = {
    "embed": cmd_embed,
    "extract": cmd_extract,
    "capacity": cmd_capacity,
    "gen-dataset": cmd_gen_dataset,
    "train": cmd_train,
    "eval": cmd_eval,
    "stats": cmd_stats,
    "plot": cmd_plot,
}


def main(argv=None):
    args = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"stegoscope {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except InsufficientCapacity as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MalformedHeader as exc:
        print(f"error: malformed header: {exc}", file=sys.stderr)
        return 1
    except (StegoscopeError, CSVError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
