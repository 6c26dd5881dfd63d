"""BGP best-path selection with the multipath extension and per-destination
load sharing.

Candidates are ranked on a fixed attribute ladder. When several eBGP routes
from the same peering AS tie on every ranked attribute, up to ``max_paths``
of them are installed together instead of falling through to the router-id
tie-breaker. Traffic is then spread over the installed next hops by hashing
the (source, destination) address pair, so a given destination always leaves
on the same link.
"""
from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

DEFAULT_MAX_PATHS = 4

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class Origin(enum.IntEnum):
    IGP = 0
    EGP = 1
    INCOMPLETE = 2


class Protocol(enum.IntEnum):
    # lower value wins
    EBGP = 0
    IBGP = 1


class Preference(enum.Enum):
    A = "a-preferred"
    B = "b-preferred"
    TIE = "tie"


class NoRoutesError(ValueError):
    def __init__(self) -> None:
        super().__init__("no routes")


def as_address(value) -> ipaddress.IPv4Address:
    # the ipaddress constructors re-parse typed values through str()
    return value if isinstance(value, ipaddress.IPv4Address) else ipaddress.IPv4Address(value)


def as_network(value) -> ipaddress.IPv4Network:
    return value if isinstance(value, ipaddress.IPv4Network) else ipaddress.IPv4Network(value)


_ip = as_address


@dataclass(frozen=True)
class RouteCandidate:
    next_hop: ipaddress.IPv4Address
    as_path: tuple[int, ...]
    loc_pref: int = 100
    weight: int = 0
    origin: Origin = Origin.IGP
    med: int = 0
    protocol: Protocol = Protocol.EBGP
    igp_metric: int = 0
    router_id: ipaddress.IPv4Address | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "next_hop", _ip(self.next_hop))
        object.__setattr__(self, "as_path", tuple(int(a) for a in self.as_path))
        object.__setattr__(self, "origin", Origin(self.origin))
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        rid = self.next_hop if self.router_id is None else _ip(self.router_id)
        object.__setattr__(self, "router_id", rid)
        if not self.as_path:
            raise ValueError("as_path must be non-empty")
        for name in ("loc_pref", "weight", "med", "igp_metric"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def neighbor_as(self) -> int:
        return self.as_path[0]

    def ranked_attributes(self) -> tuple:
        """The seven fields the decision process looks at, in ladder order."""
        return (self.weight, self.loc_pref, len(self.as_path), self.origin,
                self.med, self.protocol, self.igp_metric)


@dataclass(frozen=True)
class InstalledRouteSet:
    """Routes installed for one prefix.

    ``routes`` is sorted by ascending next hop, which is also the bucket order
    used by the load-sharing hash. ``best`` is the route a single-path router
    would have picked (lowest router id in the tie group).
    """
    prefix: ipaddress.IPv4Network
    routes: tuple[RouteCandidate, ...]
    best: RouteCandidate

    @property
    def multipath(self) -> bool:
        return len(self.routes) > 1

    @property
    def next_hops(self) -> tuple[ipaddress.IPv4Address, ...]:
        return tuple(r.next_hop for r in self.routes)


@dataclass(frozen=True)
class FlowKey:
    src: ipaddress.IPv4Address
    dst: ipaddress.IPv4Address

    def __post_init__(self) -> None:
        object.__setattr__(self, "src", _ip(self.src))
        object.__setattr__(self, "dst", _ip(self.dst))


def _cmp(x, y, higher_wins: bool) -> Preference:
    if x == y:
        return Preference.TIE
    if (x > y) == higher_wins:
        return Preference.A
    return Preference.B


def compare_routes(a: RouteCandidate, b: RouteCandidate) -> Preference:
    """Compare two candidates for the same prefix.

    Ladder: weight (high), loc_pref (high), AS path length (short), origin
    (IGP < EGP < Incomplete), MED (low, only between routes from the same
    neighbor AS), eBGP over iBGP, IGP metric (low).
    """
    steps = [
        (a.weight, b.weight, True),
        (a.loc_pref, b.loc_pref, True),
        (len(a.as_path), len(b.as_path), False),
        (a.origin, b.origin, False),
    ]
    if a.neighbor_as == b.neighbor_as:
        steps.append((a.med, b.med, False))
    steps += [
        (a.protocol, b.protocol, False),
        (a.igp_metric, b.igp_metric, False),
    ]
    for x, y, higher_wins in steps:
        result = _cmp(x, y, higher_wins)
        if result is not Preference.TIE:
            return result
    return Preference.TIE


def _sort_key(route: RouteCandidate, with_med: bool) -> tuple:
    # smaller sorts first == more preferred
    return (-route.weight, -route.loc_pref, len(route.as_path), route.origin,
            route.med if with_med else 0, route.protocol, route.igp_metric)


def top_group(candidates: Iterable[RouteCandidate]) -> list[RouteCandidate]:
    """Candidates that tie for first place.

    MED is only defined between routes from one neighbor AS, which makes the
    pairwise relation non-transitive in general. Ranking is therefore done in
    two passes: the best tier inside each neighbor-AS group (MED included),
    then the best tier across those group winners (MED irrelevant because the
    winners of different groups never compare it).
    """
    groups: dict[int, list[RouteCandidate]] = {}
    for route in candidates:
        groups.setdefault(route.neighbor_as, []).append(route)
    finalists = []
    for members in groups.values():
        best = min(_sort_key(r, True) for r in members)
        finalists += [r for r in members if _sort_key(r, True) == best]
    best = min(_sort_key(r, False) for r in finalists)
    return [r for r in finalists if _sort_key(r, False) == best]


def select_installed(candidates: Iterable[RouteCandidate], prefix,
                     max_paths: int = DEFAULT_MAX_PATHS) -> InstalledRouteSet:
    candidates = list(candidates)
    if not candidates:
        raise NoRoutesError()
    if max_paths < 1:
        raise ValueError("max_paths must be >= 1")
    prefix = as_network(prefix)

    tied = sorted(top_group(candidates), key=lambda r: (int(r.router_id), int(r.next_hop)))
    best = tied[0]
    chosen = [best]
    if len(tied) > 1 and max_paths > 1 and best.protocol is Protocol.EBGP:
        eligible = [r for r in tied
                    if r.neighbor_as == best.neighbor_as and r.protocol is Protocol.EBGP]
        if len(eligible) >= 2:
            chosen = eligible[:max_paths]
    routes = tuple(sorted(chosen, key=lambda r: int(r.next_hop)))
    return InstalledRouteSet(prefix=prefix, routes=routes, best=best)


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def flow_hash(key: FlowKey) -> int:
    return fnv1a_64(key.src.packed + key.dst.packed)


def egress_next_hop(key: FlowKey, installed: InstalledRouteSet | Sequence) -> ipaddress.IPv4Address:
    """Next hop used for traffic matching ``key``.

    ``installed`` may also be a plain sequence of next-hop addresses.
    """
    if isinstance(installed, InstalledRouteSet):
        hops = installed.next_hops
    else:
        hops = tuple(_ip(h) for h in installed)
    if not hops:
        raise NoRoutesError()
    hops = sorted(hops, key=int)
    return hops[flow_hash(key) % len(hops)]


def host_addresses(prefix) -> list[ipaddress.IPv4Address]:
    prefix = as_network(prefix)
    if prefix.prefixlen > 30:
        raise ValueError("prefix must be /30 or shorter")
    return list(prefix.hosts())


def expected_shares(prefix, src, installed: InstalledRouteSet) -> dict[ipaddress.IPv4Address, float]:
    """Fraction of the prefix's host addresses hashed onto each next hop."""
    src = _ip(src)
    hosts = host_addresses(prefix)
    counts: dict[ipaddress.IPv4Address, int] = {nh: 0 for nh in installed.next_hops}
    for dst in hosts:
        counts[egress_next_hop(FlowKey(src, dst), installed)] += 1
    return {nh: n / len(hosts) for nh, n in sorted(counts.items(), key=lambda kv: int(kv[0]))}


def share_deviation(shares: Mapping[object, float]) -> float:
    """Largest absolute distance of any share from a perfectly even split."""
    if not shares:
        return 0.0
    even = 1.0 / len(shares)
    return max(abs(v - even) for v in shares.values())
