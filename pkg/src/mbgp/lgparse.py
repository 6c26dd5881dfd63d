"""Parsers for Looking Glass responses to ``show ip bgp summary`` and
``show ip bgp detail <addr>``, and multipath detection on the parsed routes.

The grammar is anchored on IPv4 address and AS number tokens so that small
layout differences between LG front-ends do not matter. The canonical text
format (the one :mod:`mbgp.simulator` writes) is::

    Prefix: 142.46.150.0/24
    Status: M,E  NextHop: 198.32.181.46  LocPrf: 100  Weight: 0  MED: 0
    Path: 19752

with a blank line between route blocks, and for the summary a header line
followed by ``<neighbor-ip>  <asn>  <state/pfx>  <uptime>`` rows.
"""
from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass, field

STATUS_MEANINGS = {
    "M": "multipath",
    "E": "external",
    "B": "best",
    "I": "internal",
}

_IPV4 = r"(?:\d{1,3}\.){3}\d{1,3}"
_IPV4_RE = re.compile(rf"^{_IPV4}$")
_PREFIX_LINE_RE = re.compile(rf"(?:^|\s)(?:prefix|entry for)\s*:?\s*({_IPV4}/\d{{1,2}})", re.I)
_STATUS_RE = re.compile(r"\bstatus(?!\s+codes)\s*:\s*([A-Za-z]+(?:\s*,\s*[A-Za-z]+)*)", re.I)
_NEXT_HOP_RE = re.compile(rf"\bnext[\s_-]?hop\s*:?\s*({_IPV4})", re.I)
_LOCPREF_RE = re.compile(r"\b(?:locprf|locpref|localpref|local[\s_-]pref)\s*[:=]?\s*(\d+)", re.I)
_WEIGHT_RE = re.compile(r"\bweight\s*[:=]?\s*(\d+)", re.I)
_MED_RE = re.compile(r"\b(?:med|metric)\s*[:=]?\s*(\d+)", re.I)
_PATH_RE = re.compile(r"^[ \t]*(?:as[ _-]?)?path[ \t]*:?[ \t]*([\d \t{},]*)$", re.I | re.M)
_ASN_RE = re.compile(r"^(?:AS)?(\d{1,10})$", re.I)


class LgParseError(ValueError):
    """Raised when a response carries no usable content."""

    def __init__(self, message: str, sample: list[str] | None = None):
        super().__init__(message)
        self.sample = sample or []


class MixedPrefixesError(ValueError):
    def __init__(self) -> None:
        super().__init__("mixed prefixes")


@dataclass(frozen=True)
class BgpSummaryEntry:
    neighbor_address: ipaddress.IPv4Address
    neighbor_as: int
    state_or_prefix_count: str = ""
    uptime: str = ""
    extras: dict = field(default_factory=dict, compare=False, hash=False)


class SummaryTable(list):
    """List of :class:`BgpSummaryEntry` that also remembers what was dropped.

    ``skipped`` holds lines that looked like table rows but could not be
    parsed; ``ignored`` holds headers, banners and prompts.
    """

    def __init__(self, entries=(), skipped=(), ignored=()):
        super().__init__(entries)
        self.skipped = list(skipped)
        self.ignored = list(ignored)

    @property
    def skipped_count(self) -> int:
        return len(self.skipped)


@dataclass(frozen=True)
class RouteDetailRecord:
    prefix: ipaddress.IPv4Network
    status_codes: frozenset
    next_hop: ipaddress.IPv4Address
    loc_pref: int | None = None
    weight: int | None = None
    med: int | None = None
    as_path: tuple[int, ...] = ()
    raw_block: str = field(default="", compare=False)

    @property
    def is_multipath(self) -> bool:
        return {"M", "E"} <= self.status_codes

    @property
    def is_best_external(self) -> bool:
        return {"B", "E"} <= self.status_codes


@dataclass(frozen=True)
class MbgpEvidence:
    router: str
    peering_as: int
    prefix: ipaddress.IPv4Network
    next_hops: frozenset

    @property
    def link_count(self) -> int:
        return len(self.next_hops)

    def sorted_next_hops(self) -> list[ipaddress.IPv4Address]:
        return sorted(self.next_hops, key=int)


def parse_ipv4(token: str) -> ipaddress.IPv4Address | None:
    if not _IPV4_RE.match(token):
        return None
    try:
        return ipaddress.IPv4Address(token)
    except ValueError:
        return None


def parse_asn(token: str) -> int | None:
    m = _ASN_RE.match(token)
    if not m:
        return None
    asn = int(m.group(1))
    return asn if 0 < asn < 2**32 else None


def _looks_like_row(token: str) -> bool:
    # dotted-quad-ish first token: an address, possibly mangled
    return bool(re.match(r"^\d{1,3}\.[\d.]*", token))


def _header_columns(tokens: list[str]) -> dict[str, int] | None:
    lowered = [t.lower() for t in tokens]
    if not lowered or not lowered[0].startswith("neighbor"):
        return None
    cols = {"neighbor": 0}
    for i, t in enumerate(lowered):
        if t in ("as", "asn", "remote-as") and "as" not in cols:
            cols["as"] = i
        elif ("state" in t or "pfx" in t) and "state" not in cols:
            cols["state"] = i
        elif t.startswith("up") and "uptime" not in cols:
            cols["uptime"] = i
    return cols if "as" in cols else None


def parse_bgp_summary(text: str) -> SummaryTable:
    """Parse a ``show ip bgp summary`` response.

    A header line starting with ``Neighbor`` fixes the column positions; with
    no header the AS number is taken from the token right after the address.
    """
    entries, skipped, ignored, unparsed = [], [], [], []
    header: list[str] | None = None
    cols: dict[str, int] | None = None
    for line in (text or "").splitlines():
        tokens = line.split()
        if not tokens:
            continue
        found = _header_columns(tokens)
        if found is not None:
            header, cols = tokens, found
            ignored.append(line)
            unparsed.append(line)
            continue
        if not _looks_like_row(tokens[0]):
            ignored.append(line)
            unparsed.append(line)
            continue
        address = parse_ipv4(tokens[0])
        if cols is not None:
            as_idx = cols["as"]
            state_idx = cols.get("state", as_idx + 1)
            up_idx = cols.get("uptime", state_idx + 1)
        else:
            as_idx, state_idx, up_idx = 1, 2, 3
        asn = parse_asn(tokens[as_idx]) if as_idx < len(tokens) else None
        if address is None or asn is None:
            skipped.append(line)
            unparsed.append(line)
            continue
        used = {0, as_idx, state_idx, up_idx}
        extras = {}
        for i, tok in enumerate(tokens):
            if i in used:
                continue
            name = header[i] if header is not None and i < len(header) else f"col{i}"
            extras[name] = tok if name not in extras else f"{extras[name]} {tok}"
        entries.append(BgpSummaryEntry(
            neighbor_address=address,
            neighbor_as=asn,
            state_or_prefix_count=tokens[state_idx] if state_idx < len(tokens) else "",
            uptime=tokens[up_idx] if up_idx < len(tokens) else "",
            extras=extras,
        ))
    if not entries:
        raise LgParseError("unrecognized summary format", unparsed[:3])
    return SummaryTable(entries, skipped, ignored)


def _split_blocks(text: str) -> list[str]:
    return [b for b in re.split(r"\n\s*\n", text.replace("\r\n", "\n")) if b.strip()]


def _int_or_none(regex: re.Pattern, block: str) -> int | None:
    m = regex.search(block)
    return int(m.group(1)) if m else None


def _parse_status(raw: str) -> frozenset:
    # "M,E", "M, E" and "ME" all mean the same two codes
    return frozenset(c.upper() for c in raw if c.isalpha())


def parse_route_detail(text: str) -> list[RouteDetailRecord]:
    """Parse a ``show ip bgp detail <addr>`` response into route records.

    A prefix line may appear once for the whole response or once per block;
    each block is attributed to the most recent prefix seen.
    """
    records = []
    prefix: ipaddress.IPv4Network | None = None
    for block in _split_blocks(text or ""):
        m = _PREFIX_LINE_RE.search(block)
        if m:
            try:
                prefix = ipaddress.IPv4Network(m.group(1), strict=False)
            except ValueError:
                pass
        status = _STATUS_RE.search(block)
        hop = _NEXT_HOP_RE.search(block)
        if status is None or hop is None or prefix is None:
            continue
        next_hop = parse_ipv4(hop.group(1))
        codes = _parse_status(status.group(1))
        if next_hop is None or not codes:
            continue
        path_match = _PATH_RE.search(block)
        as_path: tuple[int, ...] = ()
        if path_match:
            tokens = re.findall(r"\d+", path_match.group(1))
            as_path = tuple(int(t) for t in tokens)
        records.append(RouteDetailRecord(
            prefix=prefix,
            status_codes=codes,
            next_hop=next_hop,
            loc_pref=_int_or_none(_LOCPREF_RE, block),
            weight=_int_or_none(_WEIGHT_RE, block),
            med=_int_or_none(_MED_RE, block),
            as_path=as_path,
            raw_block=block,
        ))
    if not records:
        raise LgParseError("no routes in response", [l for l in (text or "").splitlines() if l.strip()][:3])
    return records


def _agree(records: list[RouteDetailRecord]) -> bool:
    """True when every field is equal wherever it is present."""
    for getter in (lambda r: r.loc_pref, lambda r: r.weight,
                   lambda r: len(r.as_path) if r.as_path else None):
        values = {getter(r) for r in records} - {None}
        if len(values) > 1:
            return False
    return True


def detect_mbgp(records: list[RouteDetailRecord], router: str,
                peering_as: int) -> MbgpEvidence | None:
    """Return evidence of a multipath deployment, or None.

    Routes flagged M and E form the multipath set. A best external route (B,
    E) that ties them on LocPrf, Weight and path length joins the set too,
    since vendors mark one member of the group as best.
    """
    if not records:
        return None
    prefixes = {r.prefix for r in records}
    if len(prefixes) > 1:
        raise MixedPrefixesError()

    members = [r for r in records if r.is_multipath]
    if not members:
        return None
    for r in records:
        if r.is_best_external and not r.is_multipath and _agree(members + [r]):
            members.append(r)
    next_hops = frozenset(r.next_hop for r in members)
    if len(next_hops) < 2:
        return None
    if any(not r.as_path or r.as_path[0] != peering_as for r in members):
        return None
    if not _agree(members):
        return None
    return MbgpEvidence(router=router, peering_as=peering_as,
                        prefix=prefixes.pop(), next_hops=next_hops)


def render_route_detail(records) -> str:
    """Canonical text for route records (inverse of :func:`parse_route_detail`)."""
    blocks = []
    for r in records:
        codes = ",".join(sorted(r.status_codes, key=_status_order))
        line = f"Status: {codes}  NextHop: {r.next_hop}"
        if r.loc_pref is not None:
            line += f"  LocPrf: {r.loc_pref}"
        if r.weight is not None:
            line += f"  Weight: {r.weight}"
        if r.med is not None:
            line += f"  MED: {r.med}"
        path = " ".join(str(a) for a in r.as_path)
        blocks.append(f"Prefix: {r.prefix}\n{line}\nPath: {path}\n")
    return "\n".join(blocks)


def _status_order(code: str) -> tuple:
    order = "BMEI"
    return (order.index(code) if code in order else len(order), code)


def render_summary(rows) -> str:
    """Canonical summary text; ``rows`` are (address, asn, state, uptime)."""
    lines = ["Neighbor         AS          State/PfxRcd  Up/Down"]
    for address, asn, state, uptime in rows:
        lines.append(f"{str(address):<16} {asn:<11} {state:<13} {uptime}")
    return "\n".join(lines) + "\n"
