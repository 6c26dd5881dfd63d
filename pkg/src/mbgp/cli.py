"""Command-line entry point: ``mbgp {simulate,detect,analyze,report}``.

Exit codes: 0 success, 1 usage error, 2 input error, 3 partial failure.

Options may also come from a flat ``key = value`` file given with
``--config``; keys are the long option names with dashes or underscores.
Command-line flags override the file, which overrides the defaults.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from . import campaign, simulator, trace
from .campaign import (DEFAULT_GROUP_BOUNDS, DEFAULT_RATE_LIMIT, IxpDataset, PrefixTable,
                       SimulatedClock, WallClock, aggregate, collect_summaries,
                       find_multipath_candidates, format_evidence, load_as_rank, parse_evidence,
                       run_campaign)
from .engine import DEFAULT_MAX_PATHS
from .transport import FixtureTransport, HttpTransport

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_PARTIAL = 0, 1, 2, 3

log = logging.getLogger("mbgp")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- option handling ---------------------------------------------------------

DEFAULTS = {
    "seed": 0,
    "routers": simulator.SimConfig.n_routers,
    "peers": simulator.SimConfig.n_peers,
    "max_paths": DEFAULT_MAX_PATHS,
    "link_mix": "82.8/8.7/8.4",
    "mbgp_fraction": simulator.SimConfig.mbgp_fraction,
    "divergent_fraction": simulator.SimConfig.divergent_fraction,
    "fanout": simulator.SimConfig.fanout,
    "probes": 3,
    "interval": 420.0,
    "rate_limit": DEFAULT_RATE_LIMIT,
    "workers": 1,
    "group_bounds": ",".join(str(b) for b in DEFAULT_GROUP_BOUNDS),
    "format": "text",
}

_TYPES = {
    "seed": int, "routers": int, "peers": int, "max_paths": int, "probes": int,
    "fanout": int, "rate_limit": int, "workers": int, "interval": float,
    "mbgp_fraction": float, "divergent_fraction": float,
}


_CONFIG_ALIASES = {"in": "inp", "router_names": "routers_list"}


def read_config(path) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        values[_CONFIG_ALIASES.get(key, key)] = value
    return values


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from the config file, then from the defaults."""
    from_file = read_config(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if value is not None:
            continue
        if key in from_file:
            raw = from_file[key]
            try:
                value = _TYPES.get(key, str)(raw)
            except ValueError:
                raise UsageError(f"config value for {key} is not valid: {raw!r}") from None
        else:
            value = DEFAULTS.get(key)
        setattr(args, key, value)
    return args


def _positive(name: str, value) -> None:
    if value is None or value < 1:
        raise UsageError(f"--{name.replace('_', '-')} must be >= 1")


def parse_numbers(text: str, sep: str, name: str) -> list[float]:
    try:
        values = [float(x) for x in text.replace(",", sep).split(sep) if x.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects numbers separated by '{sep}' or ','") from None
    return values


def parse_group_bounds(text: str) -> tuple[int, ...]:
    values = parse_numbers(text, ",", "group-bounds")
    bounds = tuple(int(v) for v in values)
    if not bounds or any(b < 1 for b in bounds) or list(bounds) != sorted(set(bounds)):
        raise UsageError("--group-bounds must be ascending positive integers, e.g. 100,1000,10000")
    return bounds


def _write(out: str | None, text: str) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from None


def _input(path: Path, what: str) -> Path:
    if not path.is_file():
        raise InputError(f"missing {what}: {path}")
    return path


# --- commands ------------------------------------------------------------------

def cmd_simulate(args) -> int:
    mix = parse_numbers(args.link_mix, "/", "link-mix")
    if len(mix) != 3:
        raise UsageError("--link-mix needs three values for k = 2, 3, 4, e.g. 82.8/8.7/8.4")
    for name in ("routers", "peers", "max_paths", "probes"):
        _positive(name, getattr(args, name))
    try:
        config = simulator.SimConfig(
            n_routers=args.routers, n_peers=args.peers, max_paths=args.max_paths,
            link_mix=tuple(mix), mbgp_fraction=args.mbgp_fraction,
            divergent_fraction=args.divergent_fraction, fanout=args.fanout)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.out is None:
        raise UsageError("simulate needs --out <dir>")
    scenario, truth = simulator.generate_scenario(config, args.seed)
    try:
        simulator.export(scenario, truth, args.out, args.probes, args.interval)
    except OSError as exc:
        raise InputError(f"cannot write to {args.out}: {exc}") from None
    print(f"{len(scenario.routers)} routers, {len(scenario.peers)} peers, "
          f"{len(truth.mbgp_pairs)} multipath pairs -> {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_detect(args) -> int:
    _positive("rate_limit", args.rate_limit)
    base = Path(args.inp) if args.inp else None
    lg_dir = args.fixtures or (base / "lg" if base else None)
    prefixes_path = Path(args.prefixes) if args.prefixes else (base / "prefixes.csv" if base else None)
    ixp_path = Path(args.ixp) if args.ixp else (base / "ixp.csv" if base else None)
    if prefixes_path is None or ixp_path is None:
        raise UsageError("detect needs --in <dir>, or --prefixes and --ixp")
    prefixes = PrefixTable.from_csv(_input(prefixes_path, "prefix table"))
    ixp = IxpDataset.from_csv(_input(ixp_path, "IXP dataset"))

    if args.lg_url:
        if not args.routers_list:
            raise UsageError("--lg-url needs --router-names")
        transport = HttpTransport(args.lg_url)
        routers = [r for r in args.routers_list.split(",") if r]
        clock, backoff = WallClock(), 2.0
    else:
        if lg_dir is None:
            raise UsageError("detect needs --fixtures <dir>, --in <dir> or --lg-url")
        try:
            transport = FixtureTransport(lg_dir)
        except FileNotFoundError as exc:
            raise InputError(str(exc)) from None
        routers = transport.routers()
        clock, backoff = SimulatedClock(), 0.0

    limiter = campaign.RateLimiter(args.rate_limit, clock)
    queries: list = []
    summaries, failed = collect_summaries(transport, routers, limiter=limiter, backoff=backoff,
                                          query_log=queries)
    if not summaries:
        raise InputError("no parseable BGP summary from any router")
    candidates = find_multipath_candidates(summaries, ixp)
    result = run_campaign(transport, candidates, prefixes, args.rate_limit, clock=clock,
                          backoff=backoff, workers=args.workers, limiter=limiter)
    _write(args.out, format_evidence(result.evidence))

    log_path = args.log or (str(Path(args.out).with_suffix(".log")) if args.out not in (None, "-") else None)
    if log_path:
        lines = ["time,router,command,outcome"]
        lines += [f"{q.time:.3f},{q.router},{q.command},{q.outcome}"
                  for q in sorted(queries + result.log, key=lambda q: q.time)]
        _write(log_path, "\n".join(lines) + "\n")
    for router, err in failed.items():
        print(f"warning: summary for {router} failed: {err}", file=sys.stderr)
    for f in result.failures:
        print(f"warning: {f.router} AS{f.peering_as}: {f.error} "
              f"({len(f.skipped_targets)} targets skipped)", file=sys.stderr)
    print(f"{len(candidates)} candidates, {len(result.evidence)} deployments, "
          f"{len(result.log)} detail queries", file=sys.stderr)
    return EXIT_PARTIAL if (failed or result.failures) else EXIT_OK


def cmd_analyze(args) -> int:
    base = Path(args.inp) if args.inp else None

    def pick(flag, name):
        if flag:
            return Path(flag)
        if base is None:
            raise UsageError(f"analyze needs --in <dir> or an explicit path for {name}")
        return base / name

    traces = pick(args.traces, "traceroutes.txt")
    paths, bad = trace.load_traceroutes(_input(traces, "traceroute file"))
    if bad:
        print(f"warning: skipped {len(bad)} malformed traceroute lines", file=sys.stderr)
    if not paths:
        raise InputError("no paths" + (" (all lines malformed)" if bad else ""))
    primary = trace.PrefixOracle.from_csv(_input(pick(args.primary, "oracle_primary.csv"), "oracle"), "primary")
    secondary = trace.PrefixOracle.from_csv(_input(pick(args.secondary, "oracle_secondary.csv"), "oracle"),
                                            "secondary")
    ixp = IxpDataset.from_csv(_input(pick(args.ixp, "ixp.csv"), "IXP dataset"))
    analyses = trace.analyze(paths, primary, secondary, ixp)
    if args.format == "csv":
        body = trace.render_report_csv(analyses)
    else:
        body = trace.render_report(analyses)
        total = sum(a.n_discarded for a in analyses)
        body += f"discarded paths: {total} of {len(paths)}; malformed lines: {len(bad)}\n"
    _write(args.out, body)
    return EXIT_OK


def render_campaign_report(report: campaign.CampaignReport, fmt: str, as_rank=None) -> str:
    pct = report.link_count_percentages()
    top = campaign.top_ranked(report, as_rank) if as_rank else []
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["table", "key", "count", "percent"])
        w.writerow(["summary", "routers", report.n_routers, ""])
        w.writerow(["summary", "ases", report.n_ases, ""])
        w.writerow(["summary", "cases", report.n_cases, ""])
        for k, v in report.link_count_histogram.items():
            w.writerow(["link_count", k, v, f"{pct[k]:.1f}"])
        for label, v in report.rank_groups.items():
            w.writerow(["rank_group", label, v, ""])
        for router, v in report.per_router_counts.items():
            w.writerow(["router_ases", router, v, ""])
        for asn, v in report.per_as_router_counts.items():
            w.writerow(["as_routers", asn, v, ""])
        for entry, v in top:
            w.writerow(["top_ranked", entry.asn, v, ""])
        return buf.getvalue()

    out = [report.summary_line(), "", "link count  cases  percent"]
    for k, v in report.link_count_histogram.items():
        out.append(f"{k:>10}  {v:>5}  {pct[k]:>6.1f}%")
    out += ["", "rank group  ASes"]
    out += [f"{label:<10}  {v:>4}" for label, v in report.rank_groups.items()]
    out += ["", "router  ASes"]
    out += [f"{r:<6}  {v:>4}" for r, v in report.per_router_counts.items()]
    out += ["", "AS  routers"]
    out += [f"{a}  {v}" for a, v in report.per_as_router_counts.items()]
    if report.per_as_router_counts:
        out.append(f"max routers per AS: {max(report.per_as_router_counts.values())}")
    if top:
        out += ["", "rank  AS      cone size  routers  name"]
        out += [f"{e.rank:>4}  {e.asn:<6}  {e.cone_size:>9}  {v:>7}  {e.name}" for e, v in top]
    return "\n".join(out) + "\n"


def cmd_report(args) -> int:
    if not args.inp:
        raise UsageError("report needs --in <evidence file>")
    bounds = parse_group_bounds(args.group_bounds)
    path = Path(args.inp)
    if path.is_dir():
        path = path / "evidence.csv"
    try:
        evidence = parse_evidence(_input(path, "evidence file").read_text())
    except ValueError as exc:
        raise InputError(f"bad evidence file {path}: {exc}") from None
    as_rank = load_as_rank(_input(Path(args.as_rank), "AS-rank file")) if args.as_rank else None
    report = aggregate(evidence, as_rank, bounds)
    _write(args.out, render_campaign_report(report, args.format, as_rank))
    return EXIT_OK


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mbgp", description="Multipath BGP detection and characterization.")
    parser.add_argument("--log-file", help="write diagnostic log records to this file")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_help):
        p.add_argument("--config", help="flat key = value file with option defaults")
        p.add_argument("--out", help=out_help)
        return p

    p = common(sub.add_parser("simulate", help="generate a synthetic scenario and its artifacts"),
               "output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--routers", type=int)
    p.add_argument("--peers", type=int)
    p.add_argument("--max-paths", type=int)
    p.add_argument("--link-mix", help="share of multipath pairs with k = 2/3/4 links")
    p.add_argument("--mbgp-fraction", type=float)
    p.add_argument("--divergent-fraction", type=float)
    p.add_argument("--fanout", type=int)
    p.add_argument("--probes", type=int, help="probes per destination")
    p.add_argument("--interval", type=float, help="seconds between probes")

    p = common(sub.add_parser("detect", help="run the LG campaign"), "evidence CSV (default stdout)")
    p.add_argument("--in", dest="inp", help="directory written by simulate")
    p.add_argument("--fixtures", help="LG fixture directory")
    p.add_argument("--prefixes", help="prefix table CSV")
    p.add_argument("--ixp", help="IXP dataset CSV")
    p.add_argument("--rate-limit", type=int, help="requests per minute")
    p.add_argument("--workers", type=int)
    p.add_argument("--log", help="query log CSV (default: next to --out)")
    p.add_argument("--lg-url", help="live LG URL template with {router} and {command}")
    p.add_argument("--router-names", dest="routers_list", help="comma-separated routers for --lg-url")

    p = common(sub.add_parser("analyze", help="profile deployments from traceroutes"), "report file")
    p.add_argument("--in", dest="inp", help="directory written by simulate")
    p.add_argument("--traces", help="traceroute file")
    p.add_argument("--primary", help="router-level oracle CSV")
    p.add_argument("--secondary", help="registry oracle CSV")
    p.add_argument("--ixp", help="IXP dataset CSV")
    p.add_argument("--format", choices=("text", "csv"))

    p = common(sub.add_parser("report", help="aggregate an evidence file"), "report file")
    p.add_argument("--in", dest="inp", help="evidence CSV")
    p.add_argument("--as-rank", help="AS-rank CSV (asn,rank,cone_size,name)")
    p.add_argument("--group-bounds", help="ascending rank thresholds, e.g. 100,1000,10000")
    p.add_argument("--format", choices=("text", "csv"))
    return parser


COMMANDS = {"simulate": cmd_simulate, "detect": cmd_detect, "analyze": cmd_analyze, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.log_file:
        logging.basicConfig(filename=args.log_file, level=logging.INFO,
                            format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](resolve(args))
    except UsageError as exc:
        print(f"mbgp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, OSError, ValueError) as exc:
        print(f"mbgp: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
