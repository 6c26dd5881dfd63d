"""Detection campaign over a Looking Glass.

1. ``show ip bgp summary`` on every border router; keep peering ASes that are
   reached over two or more neighbor addresses at an IXP.
2. For each such (router, AS) pair, query ``show ip bgp detail x.x.x.1`` for
   the AS's /24 prefixes in ascending order and stop at the first response
   showing a multipath route set.
3. Aggregate the evidence into per-router, per-AS, link-count and rank-group
   tables.

The LG transport is any callable ``(router, command) -> str``. All requests go
through one shared sliding-window rate limiter.
"""
from __future__ import annotations

import csv
import io
import ipaddress
import logging
import threading
import time
from collections import Counter, defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .engine import as_address, as_network
from .lgparse import (BgpSummaryEntry, LgParseError, MbgpEvidence, MixedPrefixesError,
                      detect_mbgp, parse_bgp_summary, parse_route_detail)

log = logging.getLogger(__name__)

SUMMARY_COMMAND = "show ip bgp summary"
DETAIL_COMMAND = "show ip bgp detail {}"
DEFAULT_RATE_LIMIT = 6
DEFAULT_GROUP_BOUNDS = (100, 1000, 10000)
MAX_RETRIES = 3
WINDOW_SECONDS = 60.0


class TransportError(Exception):
    """A single LG request failed; the caller may retry."""


class TransportUnavailable(TransportError):
    """The LG cannot be reached at all; retrying is pointless."""


class LgTransport(Protocol):
    def __call__(self, router: str, command: str) -> str: ...


def detail_command(target) -> str:
    return DETAIL_COMMAND.format(target)


# --- datasets -------------------------------------------------------------

@dataclass(frozen=True)
class IxpRecord:
    ixp_name: str
    ixp_prefix: ipaddress.IPv4Network
    member_asn: int | None = None
    member_ip: ipaddress.IPv4Address | None = None

    def __post_init__(self) -> None:
        if self.member_ip is not None and self.member_ip not in self.ixp_prefix:
            raise ValueError(f"{self.member_ip} is outside {self.ixp_prefix}")


class IxpDataset:
    """IXP peering LANs and their member interfaces.

    A record without member fields only declares the peering LAN.
    """

    def __init__(self, records: Iterable[IxpRecord] = ()):
        self.records = list(records)
        self._members: dict[ipaddress.IPv4Address, IxpRecord] = {}
        self._lans: dict[ipaddress.IPv4Network, str] = {}
        for r in self.records:
            self._lans.setdefault(r.ixp_prefix, r.ixp_name)
            if r.member_ip is not None:
                self._members[r.member_ip] = r
        by_len: dict[int, dict] = defaultdict(dict)
        for prefix, name in self._lans.items():
            by_len[prefix.prefixlen][int(prefix.network_address)] = (prefix, name)
        self._by_len = sorted(by_len.items(), reverse=True)

    def __len__(self) -> int:
        return len(self.records)

    def member(self, ip) -> IxpRecord | None:
        return self._members.get(as_address(ip))

    def lan_for(self, ip) -> tuple[ipaddress.IPv4Network, str] | None:
        value = int(as_address(ip))
        for length, table in self._by_len:
            hit = table.get(value & (0xFFFFFFFF << (32 - length)) & 0xFFFFFFFF)
            if hit is not None:
                return hit
        return None

    def ixp_name(self, ip) -> str | None:
        rec = self.member(ip)
        if rec is not None:
            return rec.ixp_name
        lan = self.lan_for(ip)
        return lan[1] if lan else None

    def is_ixp_address(self, ip, asn: int | None = None) -> bool:
        """Exact member record for ``asn``, or any address inside a peering LAN."""
        rec = self.member(ip)
        if rec is not None and (asn is None or rec.member_asn == asn):
            return True
        return self.lan_for(ip) is not None

    @classmethod
    def from_csv(cls, source) -> "IxpDataset":
        records = []
        for row in _read_csv(source, ("ixp_name", "ixp_prefix", "member_asn", "member_ip")):
            asn = row["member_asn"].strip()
            ip = row["member_ip"].strip()
            records.append(IxpRecord(
                ixp_name=row["ixp_name"].strip(),
                ixp_prefix=ipaddress.IPv4Network(row["ixp_prefix"].strip()),
                member_asn=int(asn) if asn else None,
                member_ip=as_address(ip) if ip else None,
            ))
        return cls(records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ixp_name", "ixp_prefix", "member_asn", "member_ip"])
        for r in self.records:
            w.writerow([r.ixp_name, r.ixp_prefix,
                        "" if r.member_asn is None else r.member_asn,
                        "" if r.member_ip is None else r.member_ip])
        return buf.getvalue()


class PrefixTable:
    def __init__(self, records: Iterable[tuple] = ()):
        self.records = [(ipaddress.IPv4Network(p), int(asn)) for p, asn in records]
        self._by_origin: dict[int, set] = defaultdict(set)
        for prefix, asn in self.records:
            self._by_origin[asn].add(prefix)

    def __len__(self) -> int:
        return len(self.records)

    def prefixes_of(self, asn: int) -> list[ipaddress.IPv4Network]:
        return sorted(self._by_origin.get(asn, ()), key=lambda p: (int(p.network_address), p.prefixlen))

    @classmethod
    def from_csv(cls, source) -> "PrefixTable":
        return cls((row["prefix"].strip(), row["origin_asn"].strip())
                   for row in _read_csv(source, ("prefix", "origin_asn")))

    def to_csv(self) -> str:
        lines = ["prefix,origin_asn"] + [f"{p},{a}" for p, a in self.records]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AsRankEntry:
    asn: int
    rank: int
    cone_size: int
    name: str = ""


def load_as_rank(source) -> dict[int, AsRankEntry]:
    table = {}
    for row in _read_csv(source, ("asn", "rank", "cone_size", "name")):
        entry = AsRankEntry(int(row["asn"]), int(row["rank"]),
                            int(row["cone_size"] or 0), row.get("name", "") or "")
        table[entry.asn] = entry
    return table


def read_source(source) -> str:
    """Text from a path, an open file, or a string that already holds the data."""
    if isinstance(source, Path):
        return source.read_text()
    if hasattr(source, "read"):
        return source.read()
    text = str(source)
    if "\n" not in text and "," not in text:
        return Path(text).read_text()
    return text


def _read_csv(source, fieldnames: Sequence[str]) -> list[dict]:
    text = read_source(source)
    lines = [l for l in text.splitlines() if l.strip() and not l.lstrip().startswith("#")]
    if lines and lines[0].replace(" ", "").lower().startswith(fieldnames[0].lower() + ","):
        lines = lines[1:]
    rows = []
    for values in csv.reader(lines):
        values = values + [""] * (len(fieldnames) - len(values))
        rows.append(dict(zip(fieldnames, values)))
    return rows


# --- candidate discovery ---------------------------------------------------

@dataclass(frozen=True)
class PeerCandidate:
    router: str
    peering_as: int
    neighbor_addresses: frozenset
    via_ixp: bool = True
    ixp_name: str | None = None

    def __post_init__(self) -> None:
        if len(self.neighbor_addresses) < 2:
            raise ValueError("a multipath candidate needs at least two neighbor addresses")

    @property
    def key(self) -> tuple[str, int]:
        return (self.router, self.peering_as)


def find_multipath_candidates(summaries: Mapping[str, Sequence[BgpSummaryEntry]],
                              ixp: IxpDataset) -> list[PeerCandidate]:
    candidates = []
    for router in sorted(summaries):
        by_as: dict[int, set] = defaultdict(set)
        for entry in summaries[router]:
            by_as[entry.neighbor_as].add(entry.neighbor_address)
        for asn in sorted(by_as):
            addresses = by_as[asn]
            if len(addresses) < 2:
                continue
            if not all(ixp.is_ixp_address(a, asn) for a in addresses):
                continue
            names = sorted({ixp.ixp_name(a) for a in addresses} - {None})
            candidates.append(PeerCandidate(router, asn, frozenset(addresses), True,
                                            "/".join(names) or None))
    return candidates


def select_probe_targets(asn: int, prefixes: PrefixTable) -> list[ipaddress.IPv4Address]:
    return [p.network_address + 1 for p in prefixes.prefixes_of(asn) if p.prefixlen == 24]


# --- rate limiting ---------------------------------------------------------

class SimulatedClock:
    """Virtual time: ``sleep`` advances the clock instead of blocking."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)
        self._lock = threading.Lock()

    def now(self) -> float:
        return self._now

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            with self._lock:
                self._now += seconds

    def advance(self, seconds: float) -> None:
        self.sleep(seconds)


class WallClock:
    def now(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class RateLimiter:
    """At most ``rate`` acquisitions in any half-open window of ``window`` seconds."""

    def __init__(self, rate: int = DEFAULT_RATE_LIMIT, clock=None, window: float = WINDOW_SECONDS):
        if rate < 1:
            raise ValueError("rate limit must be >= 1")
        self.rate = rate
        self.window = window
        self.clock = clock or WallClock()
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        with self._lock:
            now = self.clock.now()
            while True:
                while self._stamps and self._stamps[0] + self.window <= now:
                    self._stamps.popleft()
                if len(self._stamps) < self.rate:
                    self._stamps.append(now)
                    return now
                wake = self._stamps[0] + self.window
                self.clock.sleep(wake - now)
                # float sleeps can end a hair short of the deadline
                now = max(self.clock.now(), wake)


def max_requests_in_window(stamps: Iterable[float], window: float = WINDOW_SECONDS) -> int:
    """Largest number of timestamps inside any window [t, t + window)."""
    stamps = sorted(stamps)
    best, lo = 0, 0
    for hi, t in enumerate(stamps):
        while stamps[lo] + window <= t:
            lo += 1
        best = max(best, hi - lo + 1)
    return best


# --- campaign --------------------------------------------------------------

@dataclass(frozen=True)
class QueryRecord:
    time: float
    router: str
    command: str
    outcome: str


@dataclass
class CandidateFailure:
    router: str
    peering_as: int
    skipped_targets: list = field(default_factory=list)
    error: str = ""


@dataclass
class CampaignResult:
    evidence: list[MbgpEvidence] = field(default_factory=list)
    failures: list[CandidateFailure] = field(default_factory=list)
    requests: dict = field(default_factory=dict)
    log: list[QueryRecord] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.failures)


class _Gate:
    """Rate limiter plus request log, shared by every worker."""

    def __init__(self, transport, limiter: RateLimiter):
        self.transport = transport
        self.limiter = limiter
        self.log: list[QueryRecord] = []
        self._lock = threading.Lock()

    def request(self, router: str, command: str) -> str:
        stamp = self.limiter.acquire()
        try:
            body = self.transport(router, command)
        except TransportError as exc:
            self._record(stamp, router, command, f"error: {exc}")
            raise
        self._record(stamp, router, command, "ok")
        return body

    def _record(self, stamp, router, command, outcome) -> None:
        with self._lock:
            self.log.append(QueryRecord(stamp, router, command, outcome))


class _Attempts:
    def __init__(self) -> None:
        self.count = 0


def _with_retries(gate: _Gate, router: str, command: str, backoff: float,
                  attempts: _Attempts | None = None) -> str:
    attempts = attempts or _Attempts()
    retry = 0
    while True:
        attempts.count += 1
        try:
            return gate.request(router, command)
        except TransportUnavailable:
            raise
        except TransportError:
            if retry >= MAX_RETRIES:
                raise
            gate.limiter.clock.sleep(backoff * 2 ** retry)
            retry += 1


def collect_summaries(transport, routers: Iterable[str], rate_limit: int = DEFAULT_RATE_LIMIT,
                      clock=None, backoff: float = 0.0, limiter: RateLimiter | None = None,
                      query_log: list | None = None):
    """Query the BGP summary of every router.

    Returns ``(summaries, failures)`` where failures maps router to an error
    message for routers whose summary could not be fetched or parsed. Issued
    requests are appended to ``query_log`` when one is given.
    """
    gate = _Gate(transport, limiter or RateLimiter(rate_limit, clock))
    summaries, failures = {}, {}
    for router in routers:
        try:
            body = _with_retries(gate, router, SUMMARY_COMMAND, backoff)
            summaries[router] = parse_bgp_summary(body)
        except (TransportError, LgParseError) as exc:
            log.warning("summary for %s failed: %s", router, exc)
            failures[router] = str(exc)
    if query_log is not None:
        query_log.extend(gate.log)
    return summaries, failures


@dataclass
class _Outcome:
    evidence: MbgpEvidence | None = None
    sent: int = 0
    failure: CandidateFailure | None = None
    unavailable: bool = False


def _probe_candidate(gate: _Gate, cand: PeerCandidate, targets: list, backoff: float) -> _Outcome:
    out = _Outcome()
    attempts = _Attempts()
    skipped = []
    for n, target in enumerate(targets):
        try:
            body = _with_retries(gate, cand.router, detail_command(target), backoff, attempts)
        except TransportUnavailable as exc:
            out.sent = attempts.count
            out.unavailable = True
            out.failure = CandidateFailure(cand.router, cand.peering_as, skipped + targets[n:],
                                           f"transport unavailable: {exc}")
            return out
        except TransportError as exc:
            log.info("skipping %s on %s after retries: %s", target, cand.router, exc)
            skipped.append(target)
            continue
        try:
            evidence = detect_mbgp(parse_route_detail(body), cand.router, cand.peering_as)
        except (LgParseError, MixedPrefixesError):
            evidence = None
        if evidence is not None:
            out.evidence = evidence
            break
    out.sent = attempts.count
    if skipped:
        out.failure = CandidateFailure(cand.router, cand.peering_as, skipped, "targets skipped after retries")
    return out


def run_campaign(transport, candidates: Sequence[PeerCandidate], prefixes: PrefixTable,
                 rate_limit: int = DEFAULT_RATE_LIMIT, *, clock=None, backoff: float = 0.0,
                 workers: int = 1, limiter: RateLimiter | None = None) -> CampaignResult:
    """Query route details for each candidate until multipath is found.

    Candidates on distinct routers may be probed concurrently (``workers`` >
    1); results are returned in candidate order regardless. Once the
    transport reports itself unavailable, every remaining candidate is listed
    as a failure.
    """
    gate = _Gate(transport, limiter or RateLimiter(rate_limit, clock))
    outcomes: dict[int, _Outcome] = {}
    dead = threading.Event()

    def work(indices: list[int]) -> None:
        for i in indices:
            cand = candidates[i]
            targets = select_probe_targets(cand.peering_as, prefixes)
            if dead.is_set():
                outcomes[i] = _Outcome(failure=CandidateFailure(
                    cand.router, cand.peering_as, targets, "transport unavailable"))
                continue
            outcome = _probe_candidate(gate, cand, targets, backoff)
            if outcome.unavailable:
                dead.set()
            outcomes[i] = outcome

    if workers <= 1:
        work(list(range(len(candidates))))
    else:
        by_router: dict[str, list[int]] = defaultdict(list)
        for i, cand in enumerate(candidates):
            by_router[cand.router].append(i)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, by_router.values()))

    result = CampaignResult(log=sorted(gate.log, key=lambda q: q.time))
    for i, cand in enumerate(candidates):
        outcome = outcomes[i]
        result.requests[cand.key] = result.requests.get(cand.key, 0) + outcome.sent
        if outcome.evidence is not None:
            result.evidence.append(outcome.evidence)
        if outcome.failure is not None:
            result.failures.append(outcome.failure)
    return result


# --- evidence files ---------------------------------------------------------

EVIDENCE_FIELDS = ("router", "peering_as", "prefix", "link_count", "next_hops")


def format_evidence(evidence: Iterable[MbgpEvidence]) -> str:
    lines = [",".join(EVIDENCE_FIELDS)]
    for e in evidence:
        hops = ";".join(str(h) for h in e.sorted_next_hops())
        lines.append(f"{e.router},{e.peering_as},{e.prefix},{e.link_count},{hops}")
    return "\n".join(lines) + "\n"


def parse_evidence(text: str) -> list[MbgpEvidence]:
    out = []
    for row in _read_csv(text, EVIDENCE_FIELDS):
        hops = frozenset(ipaddress.IPv4Address(h) for h in row["next_hops"].split(";") if h.strip())
        declared = int(row["link_count"])
        if declared != len(hops):
            raise ValueError(f"link_count {declared} does not match next hops for {row['router']}")
        out.append(MbgpEvidence(row["router"].strip(), int(row["peering_as"]),
                                ipaddress.IPv4Network(row["prefix"].strip()), hops))
    return out


# --- aggregation ------------------------------------------------------------

@dataclass
class CampaignReport:
    deployments: list[MbgpEvidence]
    cases: dict
    per_router_counts: dict
    per_as_router_counts: dict
    link_count_histogram: dict
    rank_groups: dict

    @property
    def n_cases(self) -> int:
        return len(self.cases)

    @property
    def n_routers(self) -> int:
        return len(self.per_router_counts)

    @property
    def n_ases(self) -> int:
        return len(self.per_as_router_counts)

    def link_count_percentages(self) -> dict[int, float]:
        total = sum(self.link_count_histogram.values())
        return {k: (100.0 * v / total if total else 0.0) for k, v in self.link_count_histogram.items()}

    def summary_line(self) -> str:
        return f"{self.n_routers} routers, {self.n_ases} ASes, {self.n_cases} cases"


def rank_group_labels(bounds: Sequence[int]) -> list[str]:
    labels, lo = [], 1
    for b in bounds:
        labels.append(f"{lo}-{b}")
        lo = b + 1
    labels.append(f"{lo}+")
    return labels + ["unranked"]


def aggregate(deployments: Iterable[MbgpEvidence], as_rank: Mapping[int, AsRankEntry] | None = None,
              group_bounds: Sequence[int] = DEFAULT_GROUP_BOUNDS) -> CampaignReport:
    deployments = list(deployments)
    bounds = sorted(group_bounds)
    cases: dict[tuple[str, int], int] = {}
    for e in deployments:
        key = (e.router, e.peering_as)
        cases[key] = max(cases.get(key, 0), e.link_count)

    ases_at_router: dict[str, set] = defaultdict(set)
    routers_for_as: dict[int, set] = defaultdict(set)
    for router, asn in cases:
        ases_at_router[router].add(asn)
        routers_for_as[asn].add(router)
    histogram = Counter(cases.values())

    labels = rank_group_labels(bounds)
    groups = {label: 0 for label in labels}
    as_rank = as_rank or {}
    for asn in routers_for_as:
        entry = as_rank.get(asn)
        if entry is None:
            groups["unranked"] += 1
            continue
        idx = next((i for i, b in enumerate(bounds) if entry.rank <= b), len(bounds))
        groups[labels[idx]] += 1

    return CampaignReport(
        deployments=deployments,
        cases=dict(sorted(cases.items())),
        per_router_counts={r: len(a) for r, a in sorted(ases_at_router.items())},
        per_as_router_counts={a: len(r) for a, r in sorted(routers_for_as.items())},
        link_count_histogram=dict(sorted(histogram.items())),
        rank_groups=groups,
    )


def top_ranked(report: CampaignReport, as_rank: Mapping[int, AsRankEntry],
               n: int = 10) -> list[tuple[AsRankEntry, int]]:
    """The ``n`` best-ranked ASes of a report with their router counts."""
    ranked = [(as_rank[a], count) for a, count in report.per_as_router_counts.items() if a in as_rank]
    ranked.sort(key=lambda item: (item[0].rank, item[0].asn))
    return ranked[:n]
