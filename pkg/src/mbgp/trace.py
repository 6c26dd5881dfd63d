"""Traceroute analysis of multipath deployments.

Each hop address is mapped to an AS by two independent oracles and only
agreed answers are kept. IXP peering-LAN addresses get no AS from a
registry-style oracle; they are resolved through the IXP dataset instead.
The border crossing of a path is the (nearside, IXP, farside) hop triple, and
per-deployment statistics are computed over the paths where that triple was
found unambiguously.
"""
from __future__ import annotations

import csv
import io
import ipaddress
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .campaign import IxpDataset, read_source
from .engine import as_address, as_network

PARALLEL = "Parallel"
DIVERGENT = "Divergent"

PROBES_PER_DESTINATION = 50
PROBE_INTERVAL = 420


# --- verdicts and oracles ---------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    kind: str  # "AS", "IXP", "UNMAPPED" or "DISAGREEMENT"
    asn: int | None = None
    ixp_name: str | None = None

    @classmethod
    def of_as(cls, asn: int) -> "Verdict":
        return cls("AS", asn=int(asn))

    @classmethod
    def of_ixp(cls, name: str) -> "Verdict":
        return cls("IXP", ixp_name=name)

    @property
    def is_as(self) -> bool:
        return self.kind == "AS"

    def __str__(self) -> str:
        if self.kind == "AS":
            return str(self.asn)
        if self.kind == "IXP":
            return f"IXP:{self.ixp_name}"
        return self.kind.lower()


UNMAPPED = Verdict("UNMAPPED")
DISAGREEMENT = Verdict("DISAGREEMENT")


def parse_verdict(text: str) -> Verdict:
    text = text.strip()
    if text.upper().startswith("IXP:"):
        return Verdict.of_ixp(text[4:].strip())
    if text.lower() in ("unmapped", "", "?"):
        return UNMAPPED
    return Verdict.of_as(int(text.upper().removeprefix("AS")))


class PrefixOracle:
    """IP-to-AS oracle backed by a prefix table, longest prefix wins."""

    def __init__(self, entries: Iterable[tuple] = (), name: str = "oracle"):
        self.name = name
        self._by_len: dict[int, dict[int, Verdict]] = defaultdict(dict)
        for prefix, verdict in entries:
            net = ipaddress.IPv4Network(prefix, strict=False)
            if not isinstance(verdict, Verdict):
                verdict = parse_verdict(str(verdict))
            self._by_len[net.prefixlen][int(net.network_address)] = verdict
        self._lengths = sorted(self._by_len, reverse=True)

    def __call__(self, ip) -> Verdict:
        value = int(as_address(ip))
        for length in self._lengths:
            mask = (0xFFFFFFFF << (32 - length)) & 0xFFFFFFFF
            hit = self._by_len[length].get(value & mask)
            if hit is not None:
                return hit
        return UNMAPPED

    def entries(self) -> list[tuple[ipaddress.IPv4Network, Verdict]]:
        out = []
        for length, table in self._by_len.items():
            for addr, verdict in table.items():
                out.append((ipaddress.IPv4Network((addr, length)), verdict))
        return sorted(out, key=lambda e: (int(e[0].network_address), e[0].prefixlen))

    @classmethod
    def from_csv(cls, source, name: str = "oracle") -> "PrefixOracle":
        lines = [l for l in read_source(source).splitlines() if l.strip() and not l.startswith("#")]
        rows = []
        for values in csv.reader(lines):
            if len(values) < 2 or values[0].strip().lower() == "prefix":
                continue
            rows.append((values[0].strip(), parse_verdict(values[1])))
        return cls(rows, name=name)

    def to_csv(self) -> str:
        lines = ["prefix,verdict"] + [f"{p},{v}" for p, v in self.entries()]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class IpMapping:
    ip: ipaddress.IPv4Address
    verdict: Verdict


def map_ip(ip, primary: Callable, secondary: Callable, ixp: IxpDataset | None = None) -> IpMapping:
    """Combine two oracle answers for one address.

    Two AS answers must agree. When only one oracle answers, the answer is
    kept only if it says IXP, or if the address lies in a known IXP peering
    LAN (a router-level mapper attributes such addresses to the next AS while
    a registry leaves them blank).
    """
    ip = as_address(ip)
    a, b = primary(ip), secondary(ip)
    if a.kind == "AS" and b.kind == "AS":
        verdict = a if a.asn == b.asn else DISAGREEMENT
    elif a.kind == "IXP" and b.kind == "IXP":
        verdict = a if a.ixp_name == b.ixp_name else DISAGREEMENT
    elif "IXP" in (a.kind, b.kind) and "AS" in (a.kind, b.kind):
        verdict = a if a.kind == "IXP" else b
    elif a.kind == "UNMAPPED" and b.kind == "UNMAPPED":
        verdict = UNMAPPED
    else:
        other = b if a.kind == "UNMAPPED" else a
        lan = ixp.lan_for(ip) if ixp is not None else None
        if other.kind == "IXP":
            verdict = other
        elif lan is not None:
            verdict = Verdict.of_ixp(lan[1])
        else:
            verdict = UNMAPPED
    return IpMapping(ip, verdict)


def resolve_ixp_hop(prev_as: int, ixp_ip, next_as: int, ixp: IxpDataset) -> int | None:
    """AS that an IXP hop is attributed to, or None when the path must be dropped."""
    if prev_as == next_as:
        raise ValueError("an IXP hop sits between two different ASes")
    member = ixp.member(ixp_ip)
    if member is not None and member.member_asn is not None:
        return member.member_asn
    if ixp.lan_for(ixp_ip) is not None:
        return next_as
    return None


# --- traceroute records ------------------------------------------------------

@dataclass(frozen=True)
class Hop:
    ttl: int
    ip: ipaddress.IPv4Address | None  # None: no reply
    rtt_ms: float | None = None


@dataclass(frozen=True)
class TraceroutePath:
    src: ipaddress.IPv4Address
    dst: ipaddress.IPv4Address
    started_at: float
    hops: tuple[Hop, ...]

    def __post_init__(self) -> None:
        ttls = [h.ttl for h in self.hops]
        if any(b <= a for a, b in zip(ttls, ttls[1:])):
            raise ValueError("hop TTLs must be strictly increasing")

    def ip_sequence(self) -> tuple:
        return tuple(h.ip for h in self.hops)


def parse_traceroute_line(line: str) -> TraceroutePath:
    parts = line.strip().split(",")
    if len(parts) != 4:
        raise ValueError(f"expected 4 fields, got {len(parts)}")
    src, dst, started, hop_field = parts
    hops = []
    for item in hop_field.split("|"):
        if not item:
            continue
        fields = item.split(":")
        ttl = int(fields[0])
        ip = None if fields[1] == "*" else ipaddress.IPv4Address(fields[1])
        rtt_text = fields[2] if len(fields) > 2 else ""
        rtt = None if rtt_text in ("", "*") else float(rtt_text)
        hops.append(Hop(ttl, ip, rtt))
    return TraceroutePath(as_address(src), as_address(dst),
                          float(started), tuple(hops))


def format_traceroute(path: TraceroutePath) -> str:
    hops = []
    for h in path.hops:
        ip = "*" if h.ip is None else str(h.ip)
        rtt = "*" if h.rtt_ms is None else f"{h.rtt_ms:.3f}"
        hops.append(f"{h.ttl}:{ip}:{rtt}")
    t = path.started_at
    started = str(int(t)) if t == int(t) else repr(t)
    return f"{path.src},{path.dst},{started},{'|'.join(hops)}"


def load_traceroutes(source) -> tuple[list[TraceroutePath], list[str]]:
    """Parse a traceroute file; returns (paths, malformed lines)."""
    paths, bad = [], []
    for line in read_source(source).splitlines():
        if not line.strip() or line.startswith("#") or line.startswith("src,"):
            continue
        try:
            paths.append(parse_traceroute_line(line))
        except ValueError:
            bad.append(line)
    return paths, bad


def plan_probe_schedule(prefix, probes_per_dst: int = PROBES_PER_DESTINATION,
                        interval: float = PROBE_INTERVAL, start: float = 0.0):
    prefix = as_network(prefix)
    if prefix.prefixlen != 24:
        raise ValueError("probe schedules are planned for /24 prefixes")
    if probes_per_dst < 1:
        raise ValueError("probes_per_dst must be >= 1")
    return [(dst, start + k * interval)
            for dst in prefix.hosts()
            for k in range(probes_per_dst)]


# --- border crossings --------------------------------------------------------

class PathDiscarded(ValueError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class BorderCrossing:
    nearside_ip: ipaddress.IPv4Address
    ixp_ip: ipaddress.IPv4Address
    farside_ip: ipaddress.IPv4Address
    ixp_name: str


def _verdict(mappings: Mapping, ip) -> Verdict:
    m = mappings.get(ip, UNMAPPED)
    return m.verdict if isinstance(m, IpMapping) else m


def extract_border_crossing(path: TraceroutePath, src_as: int, peer_as: int,
                            mappings: Mapping, ixp: IxpDataset) -> BorderCrossing:
    """The unique nearside -> IXP -> farside triple on ``path``.

    Raises :class:`PathDiscarded` when the path never crosses into the peer
    through an IXP, crosses more than once, or has an unresponsive or
    disputed hop inside the triple.
    """
    hops = path.hops
    src_v, peer_v = Verdict.of_as(src_as), Verdict.of_as(peer_as)
    found, problems = [], []
    for i in range(len(hops) - 1):
        near = hops[i]
        if near.ip is None or _verdict(mappings, near.ip) != src_v:
            continue
        mid = hops[i + 1]
        if mid.ip is not None and _verdict(mappings, mid.ip) == src_v:
            continue
        if mid.ip is None or _verdict(mappings, mid.ip).kind == DISAGREEMENT.kind:
            problems.append("interrupted")
            continue
        mid_verdict = _verdict(mappings, mid.ip)
        in_lan = ixp.lan_for(mid.ip) is not None
        if mid_verdict.kind == "AS" and not in_lan:
            problems.append("no IXP hop")
            continue
        if i + 2 >= len(hops):
            problems.append("incomplete")
            continue
        far = hops[i + 2]
        if far.ip is None or _verdict(mappings, far.ip).kind == DISAGREEMENT.kind:
            problems.append("interrupted")
            continue
        resolved = resolve_ixp_hop(src_as, mid.ip, peer_as, ixp)
        if resolved is None:
            problems.append("IXP hop unresolved")
            continue
        if resolved != peer_as or _verdict(mappings, far.ip) != peer_v:
            problems.append("not towards peer")
            continue
        name = ixp.ixp_name(mid.ip) or mid_verdict.ixp_name or ""
        found.append(BorderCrossing(near.ip, mid.ip, far.ip, name))
    if len(found) == 1 and not problems:
        return found[0]
    if len(found) > 1 or (found and problems):
        raise PathDiscarded("ambiguous")
    if problems:
        raise PathDiscarded(problems[0])
    raise PathDiscarded("no crossing")


# --- profiles ------------------------------------------------------------------

@dataclass
class DeploymentProfile:
    ixp_shares: dict
    farside_shares: dict
    stability: dict
    shape: str
    ixp_names: dict = field(default_factory=dict)
    nearside_ips: list = field(default_factory=list)
    accepted: int = 0

    def joint_farside_shares(self) -> dict:
        """Farside shares as a fraction of all accepted paths."""
        return {k: self.ixp_shares[k[0]] * v for k, v in self.farside_shares.items()}

    @property
    def all_stable(self) -> bool:
        return all(self.stability.values())


def compute_profile(paths: Sequence[TraceroutePath],
                    crossings: Sequence[BorderCrossing | None]) -> DeploymentProfile:
    if len(paths) != len(crossings):
        raise ValueError("paths and crossings must align")
    accepted = [(p, c) for p, c in zip(paths, crossings) if c is not None]
    if not accepted:
        raise ValueError("no accepted paths")
    n = len(accepted)
    per_ixp = Counter(c.ixp_ip for _, c in accepted)
    per_pair = Counter((c.ixp_ip, c.farside_ip) for _, c in accepted)
    used_by_dst: dict = defaultdict(set)
    for p, c in accepted:
        used_by_dst[p.dst].add(c.ixp_ip)

    ixp_shares = {ip: per_ixp[ip] / n for ip in sorted(per_ixp, key=int)}
    farside_shares = {pair: per_pair[pair] / per_ixp[pair[0]]
                      for pair in sorted(per_pair, key=lambda k: (int(k[0]), int(k[1])))}
    fan = Counter(ixp_ip for ixp_ip, _ in per_pair)
    shape = PARALLEL if all(v == 1 for v in fan.values()) else DIVERGENT
    names = {}
    for _, c in accepted:
        names.setdefault(c.ixp_ip, c.ixp_name)
    return DeploymentProfile(
        ixp_shares=ixp_shares,
        farside_shares=farside_shares,
        stability={dst: len(used) == 1 for dst, used in sorted(used_by_dst.items(), key=lambda kv: int(kv[0]))},
        shape=shape,
        ixp_names={ip: names[ip] for ip in ixp_shares},
        nearside_ips=sorted({c.nearside_ip for _, c in accepted}, key=int),
        accepted=n,
    )


# --- whole-file analysis -----------------------------------------------------------

@dataclass
class DeploymentAnalysis:
    src: ipaddress.IPv4Address
    dst_prefix: ipaddress.IPv4Network
    src_as: int | None
    peer_as: int | None
    total: int
    discarded: Counter
    profile: DeploymentProfile | None

    @property
    def n_discarded(self) -> int:
        return sum(self.discarded.values())

    @property
    def n_accepted(self) -> int:
        return self.total - self.n_discarded


class Mapper:
    """Caches :func:`map_ip` results for one pair of oracles."""

    def __init__(self, primary, secondary, ixp: IxpDataset | None = None):
        self.primary, self.secondary, self.ixp = primary, secondary, ixp
        self._cache: dict = {}

    def __call__(self, ip) -> Verdict:
        ip = as_address(ip)
        hit = self._cache.get(ip)
        if hit is None:
            hit = self._cache[ip] = map_ip(ip, self.primary, self.secondary, self.ixp).verdict
        return hit

    def mappings_for(self, paths: Iterable[TraceroutePath]) -> dict:
        out = {}
        for p in paths:
            for h in p.hops:
                if h.ip is not None and h.ip not in out:
                    out[h.ip] = self(h.ip)
        return out


def analyze_deployment(paths: Sequence[TraceroutePath], mapper: Mapper, ixp: IxpDataset,
                       src_as: int | None = None, peer_as: int | None = None) -> DeploymentAnalysis:
    """Border crossings and profile for paths sharing one source and one /24."""
    first = paths[0]
    dst_prefix = ipaddress.IPv4Network((int(first.dst) & 0xFFFFFF00, 24))
    if src_as is None:
        v = mapper(first.src)
        src_as = v.asn if v.is_as else None
    if peer_as is None:
        v = mapper(first.dst)
        peer_as = v.asn if v.is_as else None
    discarded: Counter = Counter()
    crossings: list = []
    if src_as is None or peer_as is None or src_as == peer_as:
        discarded["endpoint unmapped"] = len(paths)
        return DeploymentAnalysis(first.src, dst_prefix, src_as, peer_as, len(paths), discarded, None)
    mappings = mapper.mappings_for(paths)
    for p in paths:
        try:
            crossings.append(extract_border_crossing(p, src_as, peer_as, mappings, ixp))
        except PathDiscarded as exc:
            discarded[exc.reason] += 1
            crossings.append(None)
    profile = compute_profile(paths, crossings) if any(c is not None for c in crossings) else None
    return DeploymentAnalysis(first.src, dst_prefix, src_as, peer_as, len(paths), discarded, profile)


def group_paths(paths: Iterable[TraceroutePath]) -> dict:
    groups: dict = defaultdict(list)
    for p in paths:
        key = (p.src, ipaddress.IPv4Network((int(p.dst) & 0xFFFFFF00, 24)))
        groups[key].append(p)
    return dict(sorted(groups.items(), key=lambda kv: (int(kv[0][0]), int(kv[0][1].network_address))))


def analyze(paths: Iterable[TraceroutePath], primary, secondary, ixp: IxpDataset) -> list[DeploymentAnalysis]:
    mapper = Mapper(primary, secondary, ixp)
    return [analyze_deployment(group, mapper, ixp) for group in group_paths(paths).values()]


# --- reports -------------------------------------------------------------------

def _pct(x: float) -> str:
    return f"{100 * x:.1f}%"


def render_report(analyses: Sequence[DeploymentAnalysis]) -> str:
    out = []
    for n, a in enumerate(analyses, 1):
        peer = f"AS{a.peer_as}" if a.peer_as is not None else "AS?"
        out.append(f"Deployment {n}: source {a.src} -> {peer} {a.dst_prefix}")
        out.append(f"  paths: {a.total} total, {a.n_accepted} accepted, {a.n_discarded} discarded")
        for reason, count in sorted(a.discarded.items()):
            out.append(f"    discarded ({reason}): {count}")
        prof = a.profile
        if prof is None:
            out.append("  shape: n/a (no accepted paths)")
            out.append("")
            continue
        stable = sum(prof.stability.values())
        out.append(f"  shape: {prof.shape}")
        out.append(f"  nearside IPs: {', '.join(str(ip) for ip in prof.nearside_ips)}")
        names = sorted(set(prof.ixp_names.values()))
        out.append(f"  IXP name: {' / '.join(names)}")
        out.append(f"  stable destinations: {stable}/{len(prof.stability)}")
        out.append(f"  {'IXP IP':<17}{'IXP name':<22}{'routes%':>8}   {'farside IP':<17}{'routes%':>8}")
        joint = prof.joint_farside_shares()
        for ixp_ip, share in prof.ixp_shares.items():
            first = True
            for (ip, far), j in joint.items():
                if ip != ixp_ip:
                    continue
                left = (f"{str(ixp_ip):<17}{prof.ixp_names[ixp_ip]:<22}{_pct(share):>8}"
                        if first else " " * 47)
                out.append(f"  {left}   {str(far):<17}{_pct(j):>8}")
                first = False
        out.append("")
    return "\n".join(out)


def render_report_csv(analyses: Sequence[DeploymentAnalysis]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source", "peer_as", "dst_prefix", "shape", "nearside_ips", "ixp_name",
                "ixp_ip", "ixp_share", "farside_ip", "farside_share", "accepted", "discarded"])
    for a in analyses:
        prof = a.profile
        if prof is None:
            w.writerow([a.src, a.peer_as, a.dst_prefix, "", "", "", "", "", "", "", 0, a.n_discarded])
            continue
        near = ";".join(str(ip) for ip in prof.nearside_ips)
        joint = prof.joint_farside_shares()
        for (ixp_ip, far), j in joint.items():
            w.writerow([a.src, a.peer_as, a.dst_prefix, prof.shape, near, prof.ixp_names[ixp_ip],
                        ixp_ip, f"{prof.ixp_shares[ixp_ip]:.4f}", far, f"{j:.4f}",
                        a.n_accepted, a.n_discarded])
    return buf.getvalue()
