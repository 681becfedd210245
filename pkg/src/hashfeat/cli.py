"""Command line interface: generate / train / predict / evaluate / verify / cf-sweep.

Every subcommand is batch-oriented and deterministic given its flags; seeds
are explicit so reruns reproduce their outputs byte for byte (model files,
reports, corpora).
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import cfsketch, corpus, verify
from .errors import InputError, TrainingDiverged
from .hashcore import HashConfig
from .learner import (
    DEFAULT_FP_RATE,
    DEFAULT_LR0,
    Example,
    TokenHasher,
    calibrate_threshold,
    evaluate_scores,
    load_model,
    prefill_hasher,
    ratio_report,
    save_model,
    score_examples,
    train_counts_of,
    train_model,
)


def _bits(value: str) -> int:
    try:
        b = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bits must be an integer, got {value!r}")
    if not 1 <= b <= 30:
        raise argparse.ArgumentTypeError(f"bits must lie in [1, 30], got {b}")
    return b


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    return n


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hashfeat", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic labeled mail corpus")
    g.add_argument("--out", required=True, help="corpus path (.gz for gzip)")
    g.add_argument("--n-users", type=_positive_int, default=10_000)
    g.add_argument("--n-emails", type=_positive_int, default=50_000)
    g.add_argument("--vocab-size", type=_positive_int, default=50_000)
    g.add_argument("--spam-prior", type=float, default=0.4)
    g.add_argument("--zipf-exponent", type=float, default=1.1)
    g.add_argument("--disagreement-rate", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="train a hashed classifier")
    t.add_argument("--bits", type=_bits, required=True)
    t.add_argument("--input", required=True, help="training corpus")
    t.add_argument("--output", required=True, help="model file to write")
    t.add_argument("--personalized", action="store_true")
    t.add_argument("--lr0", type=float, default=DEFAULT_LR0)
    t.add_argument("--epochs", type=_positive_int, default=1)
    t.add_argument("--seed", type=int, default=None,
                   help="bucket hash seed (default: library constant)")
    t.add_argument("--no-bias", action="store_true", help="drop the implicit bias token")

    pr = sub.add_parser("predict", help="score a corpus with a trained model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--personalized", action="store_true",
                    help="must match how the model was trained")
    pr.add_argument("--no-bias", action="store_true")
    pr.add_argument("--out", default=None, help="TSV score output (default stdout)")

    e = sub.add_parser("evaluate", help="uncaught-spam report at a calibrated threshold")
    e.add_argument("--model", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--fp-rate", type=float, default=DEFAULT_FP_RATE)
    e.add_argument("--train", default=None,
                   help="training corpus, used only to bucket users by activity")
    e.add_argument("--personalized", action="store_true")
    e.add_argument("--no-bias", action="store_true")
    e.add_argument("--buckets", action="store_true", help="print the per-bucket table")
    e.add_argument("--baseline-report", default=None,
                   help="earlier --out JSON to report uncaught-spam ratios against")
    e.add_argument("--out", default=None, help="write the report as JSON")

    v = sub.add_parser("verify", help="run Monte Carlo tail-bound experiments")
    v.add_argument("--suite", default=None, help="suite JSON (default: built-in suite)")
    v.add_argument("--out", default=None, help="report JSON path (default stdout)")
    v.add_argument("--jobs", type=_positive_int, default=1)

    c = sub.add_parser("cf-sweep", help="factor-sketch error vs bucket width")
    c.add_argument("--bits-list", required=True,
                   help="comma-separated bucket widths, e.g. 6,8,10")
    c.add_argument("--trials", type=_positive_int, default=50)
    c.add_argument("--u", dest="u_path", default=None, help="U factor TSV triples")
    c.add_argument("--w", dest="w_path", default=None, help="W factor TSV triples")
    c.add_argument("--random", nargs=2, type=_positive_int, default=None,
                   metavar=("INNER", "COLS"), help="random factors of this shape")
    c.add_argument("--seed", type=int, default=0, help="seed for --random factors")
    c.add_argument("--out", default=None, help="CSV output (default stdout)")
    return p


def _load_examples(path: str) -> list[Example]:
    return [Example.from_line(l) for l in corpus.read_corpus(path)]


def _cmd_generate(args) -> int:
    cfg = corpus.GeneratorConfig(
        n_users=args.n_users,
        n_emails=args.n_emails,
        vocab_size=args.vocab_size,
        spam_prior=args.spam_prior,
        zipf_exponent=args.zipf_exponent,
        disagreement_rate=args.disagreement_rate,
        seed=args.seed,
    )
    lines = corpus.generate(cfg)
    corpus.write_corpus(lines, args.out)
    print(f"wrote {len(lines)} lines to {args.out}")
    return 0


def _cmd_train(args) -> int:
    t0 = time.monotonic()
    examples = _load_examples(args.input)
    cfg = HashConfig(args.bits) if args.seed is None else HashConfig(args.bits, bucket_seed=args.seed)
    model = train_model(
        examples,
        cfg,
        personalized=args.personalized,
        lr0=args.lr0,
        epochs=args.epochs,
        include_bias=not args.no_bias,
    )
    save_model(model, args.output)
    print(f"examples seen: {model.examples_seen}")
    print(f"nonzero buckets: {model.nonzero_buckets} of {model.cfg.m}")
    print(f"wall time: {time.monotonic() - t0:.2f}s")
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    examples = _load_examples(args.input)
    scores = score_examples(
        model, examples, personalized=args.personalized, include_bias=not args.no_bias
    )
    out = sys.stdout if args.out is None else open(args.out, "w", encoding="utf-8")
    try:
        for e, s in zip(examples, scores):
            out.write(f"{float(s)!r}\t{e.label}\t{e.user.decode('utf-8')}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    test = _load_examples(args.test)
    counts = train_counts_of(_load_examples(args.train)) if args.train else {}
    hasher = TokenHasher(model.cfg)
    prefill_hasher(hasher, test, args.personalized, include_bias=not args.no_bias)
    scores = score_examples(
        model, test, personalized=args.personalized,
        include_bias=not args.no_bias, hasher=hasher,
    )
    labels = np.array([e.label for e in test])
    ham_scores = scores[labels == -1]
    if ham_scores.size == 0:
        raise InputError("test corpus holds no ham; cannot calibrate a threshold")
    theta = calibrate_threshold(ham_scores, args.fp_rate)
    report = evaluate_scores(
        labels, [e.user for e in test], scores, theta, counts,
        fp_rate_target=args.fp_rate,
    )
    payload = report.to_dict()
    if args.baseline_report:
        with open(args.baseline_report, encoding="utf-8") as f:
            payload["vs_baseline"] = _ratios_against(report, json.load(f))
    print(f"uncaught spam: {report.n_uncaught}/{report.n_spam} = {report.uncaught_rate:.4f} "
          f"(threshold {report.threshold:.6g}, realized fp {report.fp_rate_realized:.4f})")
    if args.buckets:
        print(f"{'bucket':>14} {'users':>7} {'spam':>7} {'uncaught':>9} {'rate':>7}")
        for b in report.buckets:
            print(f"{b.label:>14} {b.n_users:>7} {b.n_spam:>7} {b.n_uncaught:>9} {b.rate:>7.4f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    return 0


def _ratios_against(report, baseline_payload: dict) -> dict:
    """Rebuild enough of the baseline report to reuse ratio_report."""
    from .learner import BucketStat, EvalReport

    try:
        base = EvalReport(
            threshold=baseline_payload["threshold"],
            fp_rate_target=baseline_payload["fp_rate_target"],
            fp_rate_realized=baseline_payload["fp_rate_realized"],
            n_ham=baseline_payload["n_ham"],
            n_spam=baseline_payload["n_spam"],
            n_uncaught=baseline_payload["n_uncaught"],
            buckets=[
                BucketStat(
                    index=_bucket_index_of_label(b["bucket"]),
                    label=b["bucket"],
                    n_users=b["n_users"],
                    n_spam=b["n_spam"],
                    n_uncaught=b["n_uncaught"],
                )
                for b in baseline_payload["buckets"]
            ],
        )
    except (KeyError, TypeError) as err:
        raise InputError(f"baseline report is malformed: {err}") from None
    return ratio_report(report, base)


def _bucket_index_of_label(label: str) -> int:
    lo = int(label.strip("[]").split(",")[0])
    return 0 if lo == 0 else lo.bit_length()


def _cmd_verify(args) -> int:
    if args.suite:
        with open(args.suite, encoding="utf-8") as f:
            suite = json.load(f)
    else:
        suite = verify.DEFAULT_SUITE
    report = verify.run_suite(suite, jobs=args.jobs)
    text = verify.dump_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    counts = report["counts"]
    print(
        f"pass={counts['pass']} fail={counts['fail']} "
        f"precondition_error={counts['precondition_error']} "
        f"not_judged={counts['not_judged']}",
        file=sys.stderr,
    )
    return verify.report_exit_code(report)


def _cmd_cf_sweep(args) -> int:
    try:
        bits_list = [_bits(b) for b in args.bits_list.split(",")]
    except argparse.ArgumentTypeError as err:
        raise InputError(str(err)) from None
    if args.random is not None:
        inner, cols = args.random
        rng = np.random.default_rng(args.seed)
        u = cfsketch.FactorMatrix(rng.normal(size=(inner, cols)))
        w = cfsketch.FactorMatrix(rng.normal(size=(inner, cols)))
    elif args.u_path and args.w_path:
        u = cfsketch.read_triples(args.u_path)
        w = cfsketch.read_triples(args.w_path)
    else:
        raise InputError("pass either --u and --w triple files, or --random INNER COLS")
    rows = cfsketch.frobenius_error_sweep(u, w, bits_list, args.trials)
    text = cfsketch.sweep_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "verify": _cmd_verify,
    "cf-sweep": _cmd_cf_sweep,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, TrainingDiverged) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
