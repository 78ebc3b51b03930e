"""Command-line interface: detect, simulate, eval and bench."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .extractor import DetectionConfig, detect
from .graph import GraphError, read_edge_list, write_edge_list
from .metrics import UndefinedMetricError, benchmark_summary, nmi, overlap_matrix
from .models import InfeasibleParametersError, simulation_network

logger = logging.getLogger("l0lap")

# block layout of the benchmark networks at scale 1
BENCH_SIZES = [100] * 5 + [50] * 6 + [20] * 10
BENCH_OUTLIER_SIZES = [100] * 5 + [50] * 6 + [20] * 5


class CliError(Exception):
    """Raised for invalid command-line input."""


def fmt(x) -> str:
    """Six significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.6g}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in r])
    return buf.getvalue()


class _Outputs:
    """Collects output files and writes them at the end; on failure every
    file already written is removed."""

    def __init__(self):
        self.files: list[tuple[Path, str]] = []

    def add(self, path, text: str):
        self.files.append((Path(path), text))

    def commit(self):
        written = []
        try:
            for path, text in self.files:
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "w", encoding="utf-8", newline="") as fh:
                    written.append(path)
                    fh.write(text)
        except BaseException:
            for p in written:
                p.unlink(missing_ok=True)
            raise


def _manifest(command: str, config: dict, seed, inputs, outputs, started: float) -> str:
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "wall_clock_seconds": round(time.perf_counter() - started, 3),
        "version": __version__,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _int_list(text: str) -> list:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return vals


def _float_list(text: str) -> list:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty value list")
    return vals


def _default_threads() -> int:
    return os.cpu_count() or 1


# detect


def cmd_detect(args) -> int:
    started = time.perf_counter()
    g = read_edge_list(args.edges)
    cfg = DetectionConfig(c_grid=args.eta_grid_c, b_grid=args.eta_grid_b,
                          m_small=args.small_m, n_perm=args.n_perm, alpha=args.alpha,
                          seed=args.seed, n_jobs=args.threads)
    result = detect(g, cfg, filter=not args.no_filter)
    labels = g.labels
    rank = np.zeros(g.n, dtype=np.int64)
    for k, c in enumerate(result.communities, start=1):
        rank[c.members] = k
    status = result.status()
    rows = [(labels[i], rank[i] if status[i] != "unassigned" else 0, status[i])
            for i in range(g.n)]
    diag = [(k, c.eta, c.phi, c.n_nodes, c.n_internal_edges, c.tail_prob, c.perm_pvalue,
             c.kept) for k, c in enumerate(result.communities, start=1)]
    out = Path(args.out_dir)
    paths = [out / "result.csv", out / "diagnostics.csv", out / "manifest.json"]
    o = _Outputs()
    o.add(paths[0], _csv_text(["node", "community", "status"], rows))
    o.add(paths[1], _csv_text(["extraction_round", "eta", "phi", "n_nodes", "n_edges",
                               "tail_prob", "perm_pvalue", "kept"], diag))
    config = {"eta_grid_c": args.eta_grid_c, "eta_grid_b": args.eta_grid_b,
              "small_m": args.small_m, "n_perm": args.n_perm, "alpha": args.alpha,
              "filter": not args.no_filter, "threads": args.threads,
              "selection": cfg.selection, "prior_pairs": cfg.prior_pairs,
              "null_statistic": cfg.null_statistic,
              "load_report": {"lines": g.report.n_lines, "edges": g.report.n_edges,
                              "duplicates": g.report.n_duplicates,
                              "self_loops": g.report.n_self_loops}}
    o.add(paths[2], _manifest("detect", config, args.seed, [args.edges], paths, started))
    o.commit()
    print(f"{len(result.kept)} kept of {len(result.communities)} extracted communities; "
          f"{result.unassigned.size} nodes unassigned")
    return 0


# simulate


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    net = simulation_network(args.sizes, args.beta, args.lambda_deg, model=args.model,
                             n_outliers=args.outlier_n, seed=args.seed)
    out = Path(args.out_dir)
    paths = [out / "edges.txt", out / "truth.csv", out / "manifest.json"]
    g = net.graph
    buf = io.StringIO()
    for i, j in g.edges():
        buf.write(f"{i} {j}\n")
    o = _Outputs()
    o.add(paths[0], buf.getvalue())
    o.add(paths[1], _csv_text(["node", "true_community"],
                              [(str(i), int(net.labels[i])) for i in range(g.n)]))
    config = {"model": args.model, "sizes": args.sizes, "beta": args.beta,
              "lambda_deg": args.lambda_deg, "outlier_n": args.outlier_n,
              "n_nodes": g.n, "n_edges": g.n_edges, "clipped_pairs": net.n_clipped,
              "outlier_label": net.outlier_label}
    o.add(paths[2], _manifest("simulate", config, args.seed, [], paths, started))
    o.commit()
    print(f"n={g.n} nodes, {g.n_edges} edges")
    return 0


# eval


def _read_csv(path, required) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise CliError(f"{path}: missing column(s) {', '.join(missing)}")
        return list(reader)


def cmd_eval(args) -> int:
    res = _read_csv(args.result, ["node", "community", "status"])
    truth = _read_csv(args.truth, ["node", "true_community"])
    t_map = {r["node"]: r["true_community"] for r in truth}
    nodes = [r for r in res if r["node"] in t_map]
    if not nodes:
        raise CliError("result and truth files share no node ids")
    det = np.array([int(r["community"]) if r["status"] == "kept" else 0 for r in nodes])
    tru = np.array([t_map[r["node"]] for r in nodes], dtype=object)
    keep = det != 0
    if not keep.any():
        raise UndefinedMetricError("every node is unassigned; NMI is undefined")
    std = nmi(tru[keep], det[keep])
    try:
        raw = fmt(nmi(tru[keep], det[keep], variant="raw"))
    except UndefinedMetricError:
        raw = "undefined"
    kept_ids = sorted(set(det[keep].tolist()))
    t_ids = sorted(set(t_map.values()), key=lambda x: (len(x), x))
    names = [r["node"] for r in nodes]
    detected = [{names[i] for i in np.flatnonzero(det == k)} for k in kept_ids]
    true_sets = [{n for n, t in t_map.items() if t == tid} for tid in t_ids]
    M = overlap_matrix(detected, true_sets)
    table = _csv_text(["detected"] + [f"true_{t}" for t in t_ids],
                      [[str(k)] + [fmt(x) for x in row] for k, row in zip(kept_ids, M)])
    print(f"nmi_standard,{fmt(std)}")
    print(f"nmi_raw,{raw}")
    print(f"kept_communities,{len(kept_ids)}")
    if args.overlap_out:
        o = _Outputs()
        o.add(args.overlap_out, table)
        o.commit()
    else:
        print()
        sys.stdout.write(table)
    return 0


# bench


def bench_sizes(scale: float, outliers: bool) -> list:
    base = BENCH_OUTLIER_SIZES if outliers else BENCH_SIZES
    return [max(3, int(round(s * scale))) for s in base]


def cmd_bench(args) -> int:
    started = time.perf_counter()
    if args.replicates < 1:
        raise CliError("--replicates must be >= 1")
    if not args.scale > 0:
        raise CliError("--scale must be > 0")
    sizes = bench_sizes(args.scale, args.outlier_n > 0)
    n_out = int(round(args.outlier_n * args.scale)) if args.outlier_n else 0
    cfg = DetectionConfig(n_perm=args.n_perm, seed=args.seed, n_jobs=args.threads)
    rows = []
    for value in args.values:
        beta = value if args.sweep == "beta" else args.beta
        lam = value if args.sweep == "lambda" else args.lambda_deg
        # scaling the degree with the block sizes keeps the connection
        # probabilities of the full-size design
        lam_eff = lam * args.scale
        runs = []
        for rep in range(args.replicates):
            seed = np.random.SeedSequence([args.seed, rep])
            net = simulation_network(sizes, beta, lam_eff, model=args.model,
                                     n_outliers=n_out, seed=seed)
            res = detect(net.graph, cfg, filter=args.method == "l0lapt")
            runs.append((res, net.labels))
            logger.info("beta=%g lambda=%g replicate %d: %d kept", beta, lam, rep,
                        len(res.kept))
        b = benchmark_summary(runs)
        rows.append((args.model, beta, lam, args.method, b.mean_nmi, b.sd_nmi, b.mean_cn,
                     b.replicates))
    o = _Outputs()
    out = Path(args.out)
    o.add(out, _csv_text(["model", "beta", "lambda", "method", "mean_nmi", "sd_nmi",
                          "mean_cn", "replicates"], rows))
    config = {"sweep": args.sweep, "values": args.values, "model": args.model,
              "beta": args.beta, "lambda_deg": args.lambda_deg, "outlier_n": n_out,
              "sizes": sizes, "degree_scale": args.scale,
              "replicates": args.replicates, "scale": args.scale,
              "method": args.method, "n_perm": args.n_perm, "threads": args.threads}
    manifest = out.with_name(out.stem + ".manifest.json")
    o.add(manifest, _manifest("bench", config, args.seed, [], [out, manifest], started))
    o.commit()
    sys.stdout.write(_csv_text(["model", "beta", "lambda", "method", "mean_nmi",
                                "sd_nmi", "mean_cn", "replicates"], rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="l0lap", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="detect communities in an edge-list file")
    d.add_argument("edges", help="edge list: two node ids per line, '#' comments")
    d.add_argument("-o", "--out-dir", default=".", help="output directory")
    d.add_argument("--eta-grid-c", type=int, default=10)
    d.add_argument("--eta-grid-b", type=float, default=1.0)
    d.add_argument("--small-m", type=int, default=20)
    d.add_argument("--n-perm", type=int, default=100)
    d.add_argument("--alpha", type=float, default=0.05)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--no-filter", action="store_true", help="skip the permutation filter")
    d.add_argument("--threads", type=int, default=_default_threads())
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("simulate", help="sample a benchmark network")
    s.add_argument("--model", choices=("sbm", "dcsbm"), default="sbm")
    s.add_argument("--sizes", type=_int_list, required=True, help="e.g. 100,100,50")
    s.add_argument("--beta", type=float, required=True, help="out-in ratio")
    s.add_argument("--lambda-deg", type=float, required=True, help="expected degree")
    s.add_argument("--outlier-n", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--out-dir", default=".")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("eval", help="compare a detection result with ground truth")
    e.add_argument("result", help="result CSV from 'detect'")
    e.add_argument("truth", help="truth CSV with columns node,true_community")
    e.add_argument("--overlap-out", help="write the overlap matrix CSV here")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="sweep out-in ratio or degree on simulated networks")
    b.add_argument("--sweep", choices=("beta", "lambda"), default="beta")
    b.add_argument("--values", type=_float_list, default=None,
                   help="sweep values (default 0.02..0.2 for beta, 10..100 for lambda)")
    b.add_argument("--model", choices=("sbm", "dcsbm"), default="sbm")
    b.add_argument("--beta", type=float, default=0.1, help="fixed beta for lambda sweeps")
    b.add_argument("--lambda-deg", type=float, default=50.0,
                   help="fixed degree for beta sweeps")
    b.add_argument("--outlier-n", type=int, default=0,
                   help="outliers at scale 1 (switches to the outlier layout)")
    b.add_argument("--replicates", type=int, default=10)
    b.add_argument("--scale", type=float, default=1.0,
                   help="scales block sizes and expected degree (lambda column stays "
                        "the full-size value)")
    b.add_argument("--method", choices=("l0lapt", "l0lap"), default="l0lapt")
    b.add_argument("--n-perm", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--threads", type=int, default=_default_threads())
    b.add_argument("-o", "--out", default="bench.csv")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "bench" and args.values is None:
        args.values = ([0.02, 0.05, 0.1, 0.15, 0.2] if args.sweep == "beta"
                       else [10.0, 25.0, 50.0, 75.0, 100.0])
    try:
        return args.func(args)
    except (OSError, GraphError, InfeasibleParametersError, UndefinedMetricError,
            CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
