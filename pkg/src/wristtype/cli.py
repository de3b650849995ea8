"""Command line entry point.

Experiment commands write CSV reports plus PNG figures into ``--out``.
Report files depend only on the inputs and seeds; wall-clock timings go to
the log (stderr), never into the files.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import signal
import sys
import threading
import time
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .attacks import AttackConfig, ImitationSpec, imitation_attack, statistical_attack
from .decision import BOUNDS, METRICS, MetricSpec, THRESHOLDS, dissimilarity_matrix, eer, evaluate
from .errors import WristTypeError
from .features import FeatureSet, PeakParams, fit_normalizer, normalize, read_features, write_features
from .identify import TrainConfig, run_scenario
from .ingest import chunk, parse_recording
from .synth import POPULATION_FILE, PopulationSpec, generate_population, read_manifest, read_population_spec, \
    sample_user_spec, user_id_for

log = logging.getLogger("wristtype")

DEFAULT_SIZES = (300, 500, 1000, 1500, 2000, 3000)


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    log.info("wrote %s", path)
    return path


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _peaks(args) -> PeakParams:
    return PeakParams(args.peak_separation, args.peak_k)


def _manifest_windows(manifest, sample_size):
    windows = []
    for uid, _session, path, _seed in read_manifest(manifest):
        windows.extend(chunk(parse_recording(path, uid), sample_size))
    return windows


def _features_from_manifest(manifest, sample_size, maf, peaks) -> FeatureSet:
    t0 = time.perf_counter()
    fs = FeatureSet.from_windows(_manifest_windows(manifest, sample_size), maf, peaks)
    log.info("extracted %d feature vectors at sample size %d in %.2f s", len(fs), sample_size,
             time.perf_counter() - t0)
    return fs


def _load_features(args, sample_size=None) -> FeatureSet:
    if getattr(args, "features", None):
        return read_features(args.features)
    if not getattr(args, "manifest", None):
        raise SystemExit("give --manifest or --features")
    return _features_from_manifest(args.manifest, sample_size or args.sample_size, args.maf, _peaks(args))


# ---------------------------------------------------------------- commands

def cmd_synth(args):
    pop = PopulationSpec(args.users, args.separation, args.duration, args.rate, args.seed)
    items = generate_population(pop, args.sessions, args.out)
    print(f"{len(items)} recordings written to {args.out}")


def cmd_ingest(args):
    rec = parse_recording(args.input, args.user, args.rate)
    windows = chunk(rec, args.sample_size)
    print(json.dumps({"user_id": rec.user_id, "frames": len(rec), "duration_s": rec.duration_seconds,
                      "sample_size": args.sample_size, "windows": len(windows)}))


def _is_manifest(path) -> bool:
    with open(path, encoding="utf-8") as fh:
        return fh.readline().strip().startswith("user_id,session")


def cmd_features(args):
    if args.input and not _is_manifest(args.input):
        rec = parse_recording(args.input, args.user, args.rate)
        fs = FeatureSet.from_windows(chunk(rec, args.sample_size), args.maf, _peaks(args))
    else:
        fs = _features_from_manifest(args.input or args.manifest, args.sample_size, args.maf, _peaks(args))
    write_features(fs, args.out)
    print(f"{len(fs)} feature vectors written to {args.out}")


def cmd_eer(args):
    fs = _load_features(args)
    metric = MetricSpec.parse(args.metric)
    rep = evaluate(fs, metric, args.bounds)
    out = Path(args.out)
    rows = [(u, e, t) for u, (e, t) in rep.per_user_eer.items()]
    rows.append(("mean", rep.mean_eer, ""))
    _write_csv(out / "eer_report.csv", ["user_id", "eer", "threshold"], rows)
    _write_csv(out / "far_frr.csv", ["threshold", "far", "frr"],
               zip(THRESHOLDS.tolist(), rep.far_curve.tolist(), rep.frr_curve.tolist()))
    e, tau = eer(rep.far_curve, rep.frr_curve)
    plotting.far_frr_figure(THRESHOLDS, rep.far_curve, rep.frr_curve, e, tau, out / "far_frr.png",
                            title=f"FAR / FRR ({metric}, mean over users)")
    print(f"mean EER {rep.mean_eer:.4f}  median {rep.median_eer:.4f}  ({len(rep.per_user_eer)} users, {metric})")


def cmd_sweep(args):
    sizes = _int_list(args.sizes)
    metrics = [MetricSpec.parse(m) for m in args.metrics.split(",")]
    rows, curves = [], {str(m): [] for m in metrics}
    for ss in sizes:
        fs = _features_from_manifest(args.manifest, ss, args.maf, _peaks(args))
        for m in metrics:
            rep = evaluate(fs, m, args.bounds)
            rows.append((ss, str(m), rep.mean_eer, rep.median_eer, len(fs)))
            curves[str(m)].append(rep.mean_eer)
            log.info("sample size %d, %s: mean EER %.4f", ss, m, rep.mean_eer)
    out = Path(args.out)
    _write_csv(out / "sweep.csv", ["sample_size", "metric", "mean_eer", "median_eer", "n_samples"], rows)
    plotting.sweep_figure(sizes, curves, out / "sweep.png")
    for ss, m, mean, med, _ in rows:
        print(f"{ss:5d} {m:12s} mean EER {mean:.4f}  median {med:.4f}")


def cmd_identify(args):
    train = _load_features(args)
    test = None
    if args.test:
        test = read_features(args.test)
    elif args.test_manifest:
        test = _features_from_manifest(args.test_manifest, args.sample_size, args.maf, _peaks(args))
    cfg = TrainConfig(tuple(_int_list(args.hidden)), args.lr, args.momentum, args.epochs, args.seed)
    ks = _int_list(args.k)
    rows, per_user = [], []
    for k in ks:
        res = run_scenario(train, test, k, cfg, args.folds)
        rows.append((k, res.accuracy, res.n_test))
        totals = res.confusion.sum(axis=1)
        for i, u in enumerate(res.users):
            wrong = {res.users[j]: int(c) for j, c in enumerate(res.confusion[i]) if j != i and c}
            top = max(wrong, key=wrong.get) if wrong else ""
            per_user.append((k, u, int(res.confusion[i, i]), int(totals[i]), top))
        print(f"k={k}: accuracy {res.accuracy:.4f} over {res.n_test} test samples")
    out = Path(args.out)
    _write_csv(out / "identify.csv", ["k", "accuracy", "n_test"], rows)
    _write_csv(out / "identify_per_user.csv", ["k", "user_id", "correct", "n_test", "most_confused_with"],
               per_user)
    plotting.identification_figure(ks, [r[1] for r in rows], out / "identify.png",
                                   title="Identification, " + ("scenario 2" if test else "scenario 1"))


def _victims(args, fs):
    return args.victim if args.victim else fs.users


def _population_matrix(fs, metric):
    return dissimilarity_matrix(normalize(fs.X, fit_normalizer(fs.X)), metric)


def cmd_attack_stat(args):
    fs = _load_features(args)
    metric = MetricSpec.parse(args.metric)
    D = _population_matrix(fs, metric) if args.bounds == "population" else None
    cfg = AttackConfig(args.forged, args.bins, args.top, args.seed)
    rows = []
    for v in _victims(args, fs):
        r = statistical_attack(fs, v, cfg, metric, args.bounds, D)
        rows.append((r.victim, r.config, r.baseline_eer, r.accept_rate, r.new_eer, r.forged_only_eer))
    out = Path(args.out)
    _write_csv(out / "attack_stat.csv",
               ["victim", "config", "baseline_eer", "accept_rate", "new_eer", "forged_only_eer"], rows)
    plotting.attack_figure([r[0] for r in rows], [r[2] for r in rows], [r[3] for r in rows],
                           out / "attack_stat.png", title=f"Statistical attack ({cfg.bin_number} bins)")
    print(f"mean baseline EER {np.mean([r[2] for r in rows]):.4f}  mean accept rate {np.mean([r[3] for r in rows]):.4f}")


def cmd_attack_imitate(args):
    manifest = Path(args.manifest)
    pop = read_population_spec(manifest.parent / POPULATION_FILE)
    fs = _load_features(args)
    metric = MetricSpec.parse(args.metric)
    D = _population_matrix(fs, metric) if args.bounds == "population" else None
    index = {user_id_for(i): i for i in range(pop.n_users)}
    alphas = _float_list(args.alpha)
    rows = []
    for v in _victims(args, fs):
        vi = index[v]
        ai = index[args.attacker] if args.attacker else (vi + 1) % pop.n_users
        for a in alphas:
            spec = ImitationSpec(sample_user_spec(pop, vi), sample_user_spec(pop, ai), a)
            r = imitation_attack(spec, fs, v, args.sample_size, metric, args.attempts,
                                 seed=args.seed * 1000 + vi, maf=args.maf, peaks=_peaks(args),
                                 bounds=args.bounds, D=D)
            rows.append((v, user_id_for(ai), r.config, r.baseline_eer, r.accept_rate))
    out = Path(args.out)
    _write_csv(out / "attack_imitate.csv", ["victim", "attacker", "config", "baseline_eer", "accept_rate"], rows)
    mean_acc = [np.mean([r[4] for r in rows if r[2].startswith(f"alpha={a:g};")]) for a in alphas]
    baseline = float(np.mean([r[3] for r in rows]))
    plotting.imitation_figure(alphas, mean_acc, baseline, out / "attack_imitate.png")
    for a, acc in zip(alphas, mean_acc):
        print(f"alpha {a:g}: mean accept rate {acc:.4f} (baseline EER {baseline:.4f})")


def cmd_serve(args):
    from .decision import Policy
    from .service import load_policy, parse_listen, start_server, stop_server
    policy = load_policy(args.policy) if args.policy else Policy()
    host, port = parse_listen(args.listen)
    server, thread = start_server(args.store, policy, host, port)
    h, p = server.address
    print(f"listening on {h}:{p}", flush=True)
    done = threading.Event()

    def _stop(signum, frame):
        done.set()

    signal.signal(signal.SIGTERM, _stop)
    signal.signal(signal.SIGINT, _stop)
    done.wait()
    stop_server(server, thread)
    log.info("server stopped")


# ---------------------------------------------------------------- parser

def _add_common_features(p, manifest_required=False, with_features=True):
    src = p.add_argument_group("input")
    src.add_argument("--manifest", required=manifest_required, help="manifest.csv written by synth")
    if with_features and not manifest_required:
        src.add_argument("--features", "--train", dest="features",
                         help="feature CSV written by the features command")
    p.add_argument("--sample-size", type=int, default=1500, help="frames per window (default 1500)")
    p.add_argument("--maf", type=int, default=9, help="moving-average filter length (default 9)")
    p.add_argument("--peak-separation", type=int, default=10, help="min frames between peaks")
    p.add_argument("--peak-k", type=float, default=1.0, help="peak threshold in std above the mean")


def _add_metric(p):
    p.add_argument("--metric", default="cityblock",
                   help=f"one of {', '.join(METRICS)}; minkowski:P sets the order (default p=5)")
    p.add_argument("--bounds", choices=BOUNDS, default="population",
                   help="normalization bounds for evaluation (default population)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wristtype", description="Wrist-motion typing authentication toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic population")
    p.add_argument("--users", type=int, default=30)
    p.add_argument("--sessions", type=int, default=1)
    p.add_argument("--duration", type=float, default=240.0, help="seconds per session")
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--rate", type=float, default=100.0, help="sample rate in Hz")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate a recording and count its windows")
    p.add_argument("--input", required=True, help="recording CSV")
    p.add_argument("--user", required=True)
    p.add_argument("--rate", type=float, default=100.0)
    p.add_argument("--sample-size", type=int, default=1500)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", help="extract feature vectors to CSV")
    _add_common_features(p, with_features=False)
    p.add_argument("--input", help="a recording CSV or a manifest")
    p.add_argument("--user", default="user", help="user id for a single recording")
    p.add_argument("--rate", type=float, default=100.0)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("eer", help="per-user EER report with FAR/FRR curves")
    _add_common_features(p)
    _add_metric(p)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_eer)

    p = sub.add_parser("sweep", help="mean EER over sample sizes and metrics")
    _add_common_features(p, manifest_required=True)
    p.add_argument("--sizes", default=",".join(map(str, DEFAULT_SIZES)))
    p.add_argument("--metrics", default="cityblock", help="comma-separated metric list")
    p.add_argument("--bounds", choices=BOUNDS, default="population")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("identify", help="MLP insider identification")
    _add_common_features(p)
    p.add_argument("--test", help="feature CSV of separate test data (scenario 2)")
    p.add_argument("--test-manifest", help="manifest of separate test data (scenario 2)")
    p.add_argument("--k", default="1,2,3,4,5", help="training samples per user, comma-separated")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--hidden", default="64", help="hidden layer sizes, comma-separated")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("attack-stat", help="statistical (histogram forgery) attack")
    _add_common_features(p)
    _add_metric(p)
    p.add_argument("--victim", action="append", help="victim user id (repeatable; default all users)")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--forged", type=int, default=100)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack_stat)

    p = sub.add_parser("attack-imitate", help="imitation attack with interpolated generator parameters")
    _add_common_features(p, manifest_required=True)
    _add_metric(p)
    p.add_argument("--victim", action="append", help="victim user id (repeatable; default all users)")
    p.add_argument("--attacker", help="attacker user id (default: the next user)")
    p.add_argument("--alpha", default="0.5", help="imitation fidelity, comma-separated")
    p.add_argument("--attempts", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack_imitate)

    p = sub.add_parser("serve", help="run the enrollment/verification server")
    p.add_argument("--listen", default="127.0.0.1:7070")
    p.add_argument("--store", required=True, help="profile store directory")
    p.add_argument("--policy", help="key=value policy file")
    p.set_defaults(func=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except WristTypeError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
