"""Deterministic synthetic scenarios with known multipath deployments.

A scenario is one source AS with a handful of border routers, each attached
to one or two IXP peering LANs, and a set of peering ASes present at some of
those routers over one or more neighbor addresses. Some (router, peer) pairs
are configured for multipath; the rest either have a single session or
several sessions with different LocPrf so that only one route wins.

From a scenario the module renders the LG texts a campaign would see, the
traceroutes a probe behind each router would record, and the IP-to-AS oracle
tables and IXP dataset the analysis needs. The ground truth is computed from
the configuration alone.

Address plan (all synthetic):

* probe sources 198.51.100.0/24, nearside interfaces 192.0.2.0/24 and
  router-internal hops 203.0.113.0/24, all in the source AS;
* one /24 per IXP peering LAN from 198.18.0.0/15;
* one /16 per peering AS from 10.0.0.0/8, then 100.64.0.0/10; the AS announces
  /24s from the low part of it, sometimes a /23 at .252, and its farside
  interfaces sit in the .255 /24.
"""
from __future__ import annotations

import ipaddress
import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import engine
from .campaign import (DETAIL_COMMAND, SUMMARY_COMMAND, IxpDataset, IxpRecord, PrefixTable,
                       TransportError)
from .engine import FlowKey, as_address, as_network, RouteCandidate, egress_next_hop, fnv1a_64, select_installed
from .lgparse import MbgpEvidence, RouteDetailRecord, render_route_detail, render_summary
from .trace import DIVERGENT, PARALLEL, Hop, PrefixOracle, TraceroutePath, UNMAPPED, Verdict

DEFAULT_LINK_MIX = (82.8, 8.7, 8.4)
LOCATIONS = ("ams", "ash", "chi", "dal", "fra", "hkg", "lax", "lon", "mia", "nyc", "par",
             "sea", "sin", "sjc", "sto", "syd", "tor", "tyo", "vie", "waw", "zrh")
FORMAT_VERSION = 1

_SOURCES = ipaddress.IPv4Network("198.51.100.0/24")
_NEARSIDE = ipaddress.IPv4Network("192.0.2.0/24")
_INTERNAL = ipaddress.IPv4Network("203.0.113.0/24")
_IXP_SPACE = ipaddress.IPv4Network("198.18.0.0/15")
_PEER_SPACES = (ipaddress.IPv4Network("10.0.0.0/8"), ipaddress.IPv4Network("100.64.0.0/10"))


@dataclass(frozen=True)
class SimConfig:
    n_routers: int = 4
    n_peers: int = 20
    max_routers_per_peer: int = 3
    max_prefixes: int = 4
    mbgp_fraction: float = 0.4
    link_mix: tuple = DEFAULT_LINK_MIX
    divergent_fraction: float = 0.3
    fanout: int = 3
    max_paths: int = engine.DEFAULT_MAX_PATHS
    src_asn: int = 6939
    single_path_fraction: float = 0.3
    peeringdb_coverage: float = 0.75

    def __post_init__(self) -> None:
        if self.n_routers < 1 or self.n_peers < 1:
            raise ValueError("need at least one router and one peer")
        if self.n_routers > 250:
            raise ValueError("at most 250 routers fit the address plan")
        if self.n_peers > peer_capacity():
            raise ValueError(f"at most {peer_capacity()} peers fit the address plan")
        if len(self.link_mix) != 3 or min(self.link_mix) < 0 or sum(self.link_mix) <= 0:
            raise ValueError("link_mix needs three non-negative weights for k = 2, 3, 4")
        if self.fanout < 2:
            raise ValueError("divergent fanout must be >= 2")
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")


def peer_capacity() -> int:
    return sum(2 ** (16 - s.prefixlen) for s in _PEER_SPACES)


@dataclass(frozen=True)
class Router:
    name: str
    location: str
    source_ip: ipaddress.IPv4Address
    nearside_ip: ipaddress.IPv4Address
    internal_ip: ipaddress.IPv4Address
    ixps: tuple[str, ...]


@dataclass(frozen=True)
class Ixp:
    name: str
    prefix: ipaddress.IPv4Network


@dataclass(frozen=True)
class Peer:
    asn: int
    block: ipaddress.IPv4Network
    prefixes: tuple[ipaddress.IPv4Network, ...]
    # router name -> neighbor addresses at that router, in session order
    sessions: dict = field(hash=False, compare=True)
    in_peeringdb: bool = True

    def slash24s(self) -> list[ipaddress.IPv4Network]:
        return [p for p in self.prefixes if p.prefixlen == 24]


@dataclass(frozen=True)
class MbgpConfig:
    link_count: int
    wiring: str = PARALLEL
    fanout: int = 1
    single_path_prefixes: tuple = ()


@dataclass
class Scenario:
    seed: int
    config: SimConfig
    routers: list[Router]
    ixps: list[Ixp]
    peers: list[Peer]
    mbgp_config: dict  # (router, asn) -> MbgpConfig
    farsides: dict     # (router, asn, neighbor address) -> tuple of farside addresses

    _index: dict = field(default=None, init=False, repr=False, compare=False)
    _installed: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def max_paths(self) -> int:
        return self.config.max_paths

    def _lookup(self) -> dict:
        if self._index is None:
            by_len: dict = {}
            for p in self.peers:
                for prefix in p.prefixes:
                    by_len.setdefault(prefix.prefixlen, {})[int(prefix.network_address)] = (p, prefix)
            self._index = {
                "routers": {r.name: r for r in self.routers},
                "sources": {r.source_ip: r for r in self.routers},
                "peers": {p.asn: p for p in self.peers},
                "prefixes": sorted(by_len.items(), reverse=True),
            }
        return self._index

    def router(self, name: str) -> Router:
        return self._lookup()["routers"][name]

    def router_for_source(self, src) -> Router:
        src = as_address(src)
        try:
            return self._lookup()["sources"][src]
        except KeyError:
            raise KeyError(f"no probe at {src}") from None

    def peer(self, asn: int) -> Peer:
        return self._lookup()["peers"][asn]

    def peer_for_address(self, ip) -> tuple[Peer, ipaddress.IPv4Network] | None:
        """Longest announced prefix covering ``ip`` and the peer announcing it."""
        value = int(as_address(ip))
        for length, table in self._lookup()["prefixes"]:
            mask = (0xFFFFFFFF << (32 - length)) & 0xFFFFFFFF
            hit = table.get(value & mask)
            if hit is not None:
                return hit
        return None

    def pairs(self) -> list[tuple[str, int]]:
        return [(r, p.asn) for p in self.peers for r in p.sessions]

    def candidates(self, router: str, asn: int, prefix) -> list[RouteCandidate]:
        """Routes the router holds for ``prefix`` from peer ``asn``."""
        peer = self.peer(asn)
        addresses = peer.sessions[router]
        cfg = self.mbgp_config.get((router, asn))
        prefix = as_network(prefix)
        if cfg is not None and prefix in cfg.single_path_prefixes:
            addresses = addresses[:1]
        tied = cfg.link_count if cfg is not None else 1
        routes = []
        for j, addr in enumerate(addresses):
            loc_pref = 100 if j < tied else 90 - 10 * (j - tied)
            routes.append(RouteCandidate(
                next_hop=addr, as_path=(asn,), loc_pref=loc_pref,
                router_id=self.farsides[(router, asn, addr)][0]))
        return routes

    def installed(self, router: str, asn: int, prefix) -> engine.InstalledRouteSet:
        key = (router, asn, as_network(prefix))
        hit = self._installed.get(key)
        if hit is None:
            hit = self._installed[key] = select_installed(
                self.candidates(router, asn, key[2]), key[2], self.max_paths)
        return hit

    # -- serialization --

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "seed": self.seed,
            "config": {
                **{k: getattr(self.config, k) for k in SimConfig.__dataclass_fields__},
                "link_mix": list(self.config.link_mix),
            },
            "routers": [{
                "name": r.name, "location": r.location, "source_ip": str(r.source_ip),
                "nearside_ip": str(r.nearside_ip), "internal_ip": str(r.internal_ip),
                "ixps": list(r.ixps),
            } for r in self.routers],
            "ixps": [{"name": x.name, "prefix": str(x.prefix)} for x in self.ixps],
            "peers": [{
                "asn": p.asn, "block": str(p.block),
                "prefixes": [str(x) for x in p.prefixes],
                "sessions": {r: [str(a) for a in addrs] for r, addrs in p.sessions.items()},
                "in_peeringdb": p.in_peeringdb,
            } for p in self.peers],
            "mbgp": [{
                "router": r, "asn": asn, "link_count": c.link_count, "wiring": c.wiring,
                "fanout": c.fanout,
                "single_path_prefixes": [str(x) for x in c.single_path_prefixes],
            } for (r, asn), c in sorted(self.mbgp_config.items())],
            "farsides": [{
                "router": r, "asn": asn, "neighbor": str(a), "farside": [str(f) for f in fs],
            } for (r, asn, a), fs in sorted(self.farsides.items(), key=lambda kv: (kv[0][0], kv[0][1], int(kv[0][2])))],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        A, N = ipaddress.IPv4Address, ipaddress.IPv4Network
        conf = dict(d["config"])
        conf["link_mix"] = tuple(conf["link_mix"])
        return cls(
            seed=d["seed"],
            config=SimConfig(**conf),
            routers=[Router(r["name"], r["location"], A(r["source_ip"]), A(r["nearside_ip"]),
                            A(r["internal_ip"]), tuple(r["ixps"])) for r in d["routers"]],
            ixps=[Ixp(x["name"], N(x["prefix"])) for x in d["ixps"]],
            peers=[Peer(p["asn"], N(p["block"]), tuple(N(x) for x in p["prefixes"]),
                        {r: tuple(A(a) for a in addrs) for r, addrs in p["sessions"].items()},
                        p["in_peeringdb"]) for p in d["peers"]],
            mbgp_config={(m["router"], m["asn"]): MbgpConfig(
                m["link_count"], m["wiring"], m["fanout"],
                tuple(N(x) for x in m["single_path_prefixes"])) for m in d["mbgp"]},
            farsides={(f["router"], f["asn"], A(f["neighbor"])): tuple(A(x) for x in f["farside"])
                      for f in d["farsides"]},
        )

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


@dataclass
class GroundTruth:
    mbgp_pairs: list[MbgpEvidence]
    expected_shape: dict  # (router, asn) -> shape

    def pair_keys(self) -> set[tuple[str, int]]:
        return {(e.router, e.peering_as) for e in self.mbgp_pairs}

    def to_csv(self) -> str:
        lines = ["router,peering_as,prefix,link_count,next_hops,shape"]
        for e in self.mbgp_pairs:
            hops = ";".join(str(h) for h in e.sorted_next_hops())
            shape = self.expected_shape[(e.router, e.peering_as)]
            lines.append(f"{e.router},{e.peering_as},{e.prefix},{e.link_count},{hops},{shape}")
        return "\n".join(lines) + "\n"


# --- generation --------------------------------------------------------------

def _quota(weights: Sequence[float], total: int) -> list[int]:
    """Split ``total`` in proportion to ``weights`` (largest remainder)."""
    s = float(sum(weights))
    raw = [w / s * total for w in weights]
    counts = [int(x) for x in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def _peer_block(i: int) -> ipaddress.IPv4Network:
    for space in _PEER_SPACES:
        blocks = 2 ** (16 - space.prefixlen)
        if i < blocks:
            return ipaddress.IPv4Network((int(space.network_address) + (i << 16), 16))
        i -= blocks
    raise ValueError("peer index outside the address plan")


class _IxpAllocator:
    def __init__(self) -> None:
        self.ixps: list[Ixp] = []
        self._used: dict[str, int] = {}

    def new(self, location: str) -> str:
        n = len(self.ixps)
        if n >= 2 ** (24 - _IXP_SPACE.prefixlen):
            raise ValueError("out of IXP address space")
        name = f"IX-{location.upper()}-{n + 1}"
        prefix = ipaddress.IPv4Network((int(_IXP_SPACE.network_address) + (n << 8), 24))
        self.ixps.append(Ixp(name, prefix))
        self._used[name] = 0
        return name

    def address(self, name: str) -> ipaddress.IPv4Address | None:
        used = self._used[name]
        if used >= 253:
            return None
        self._used[name] = used + 1
        prefix = next(x.prefix for x in self.ixps if x.name == name)
        return prefix.network_address + used + 1


def generate_scenario(config: SimConfig | None = None, seed: int = 0) -> tuple[Scenario, GroundTruth]:
    config = config or SimConfig()
    rng = random.Random(seed)
    alloc = _IxpAllocator()

    routers = []
    for i in range(config.n_routers):
        loc = LOCATIONS[i % len(LOCATIONS)]
        name = f"{loc}{i // len(LOCATIONS) + 1}"
        ixps = [alloc.new(loc)]
        if rng.random() < 0.3:
            ixps.append(alloc.new(loc))
        routers.append(Router(name, loc, _SOURCES.network_address + i + 1,
                              _NEARSIDE.network_address + i + 1,
                              _INTERNAL.network_address + i + 1, tuple(ixps)))
    router_ixps = {r.name: list(r.ixps) for r in routers}

    asns = sorted(rng.sample(range(1000, 64000), config.n_peers))
    rng.shuffle(asns)
    presence = []
    for i, asn in enumerate(asns):
        m = rng.randint(1, min(config.max_routers_per_peer, config.n_routers))
        presence.append(sorted(rng.sample(range(config.n_routers), m)))
    pair_index = [(i, ri) for i, rs in enumerate(presence) for ri in rs]

    n_mbgp = round(config.mbgp_fraction * len(pair_index))
    mbgp_pairs = set(rng.sample(range(len(pair_index)), n_mbgp))
    ks = []
    for k, count in zip((2, 3, 4), _quota(config.link_mix, n_mbgp)):
        ks += [k] * count
    rng.shuffle(ks)
    k_of = dict(zip(sorted(mbgp_pairs), ks))

    sessions_count: dict[tuple[int, int], int] = {}
    for n, (i, ri) in enumerate(pair_index):
        if n in k_of:
            extra = 1 if rng.random() < 0.2 else 0
            sessions_count[(i, ri)] = min(4, k_of[n] + extra)
        else:
            sessions_count[(i, ri)] = 1 if rng.random() < 0.6 else rng.randint(2, 3)

    peers, mbgp_config, farsides = [], {}, {}
    for i, asn in enumerate(asns):
        block = _peer_block(i)
        base = int(block.network_address)
        n24 = rng.randint(1, config.max_prefixes)
        thirds = sorted(rng.sample(range(252), n24))
        prefixes = [ipaddress.IPv4Network((base + (t << 8), 24)) for t in thirds]
        if rng.random() < 0.3:
            prefixes.append(ipaddress.IPv4Network((base + (252 << 8), 23)))
        farside_next = 1
        sessions = {}
        for ri in presence[i]:
            router = routers[ri]
            addrs = []
            for s in range(sessions_count[(i, ri)]):
                ixp_names = router_ixps[router.name]
                addr = alloc.address(ixp_names[s % len(ixp_names)])
                if addr is None:
                    ixp_names.append(alloc.new(router.location))
                    addr = alloc.address(ixp_names[-1])
                addrs.append(addr)
            sessions[router.name] = tuple(addrs)

            n = pair_index.index((i, ri))
            cfg = None
            if n in k_of:
                k = k_of[n]
                divergent = rng.random() < config.divergent_fraction
                single = ()
                if len(prefixes) > 1 and n24 > 1 and rng.random() < config.single_path_fraction:
                    single = tuple(prefixes[: rng.randint(1, n24 - 1)])
                cfg = MbgpConfig(k, DIVERGENT if divergent else PARALLEL,
                                 config.fanout if divergent else 1, single)
                mbgp_config[(router.name, asn)] = cfg
            fan = cfg.fanout if cfg is not None else 1
            for addr in addrs:
                hops = []
                for _ in range(fan):
                    hops.append(ipaddress.IPv4Address(base + (255 << 8) + farside_next))
                    farside_next += 1
                farsides[(router.name, asn, addr)] = tuple(hops)
        peers.append(Peer(asn, block, tuple(prefixes), sessions,
                          rng.random() < config.peeringdb_coverage))

    routers = [Router(r.name, r.location, r.source_ip, r.nearside_ip, r.internal_ip,
                      tuple(router_ixps[r.name])) for r in routers]
    peers.sort(key=lambda p: p.asn)
    scenario = Scenario(seed, config, routers, alloc.ixps, peers, mbgp_config, farsides)
    return scenario, ground_truth(scenario)


def ground_truth(scenario: Scenario) -> GroundTruth:
    pairs, shapes = [], {}
    for (router, asn), cfg in sorted(scenario.mbgp_config.items()):
        peer = scenario.peer(asn)
        for prefix in peer.slash24s():
            installed = scenario.installed(router, asn, prefix)
            if installed.multipath:
                pairs.append(MbgpEvidence(router, asn, prefix, frozenset(installed.next_hops)))
                shapes[(router, asn)] = cfg.wiring
                break
    pairs.sort(key=lambda e: (e.router, e.peering_as))
    return GroundTruth(pairs, shapes)


# --- LG texts --------------------------------------------------------------------

def _uptime(router: str, address) -> str:
    h = fnv1a_64(router.encode() + as_address(address).packed)
    return f"{h % 60}d{(h >> 8) % 24:02d}h"


def synth_summary(scenario: Scenario, router: str) -> str:
    scenario.router(router)
    rows = []
    for peer in scenario.peers:
        for addr in peer.sessions.get(router, ()):
            rows.append((addr, peer.asn, str(len(peer.prefixes)), _uptime(router, addr)))
    return render_summary(rows)


def synth_route_detail(scenario: Scenario, router: str, target_ip) -> str:
    scenario.router(router)
    hit = scenario.peer_for_address(target_ip)
    if hit is None:
        return f"% Network not in table for {target_ip}\n"
    peer, prefix = hit
    if router not in peer.sessions:
        via = next(r for r in scenario.routers if r.name in peer.sessions)
        rec = RouteDetailRecord(prefix, frozenset("BI"), via.nearside_ip, 100, 0, 0, (peer.asn,))
        return render_route_detail([rec])
    installed = scenario.installed(router, peer.asn, prefix)
    chosen = set(installed.next_hops)
    records = []
    for route in scenario.candidates(router, peer.asn, prefix):
        codes = {"E"}
        if installed.multipath and route.next_hop in chosen:
            codes.add("M")
        if route == installed.best:
            codes.add("B")
        records.append(RouteDetailRecord(prefix, frozenset(codes), route.next_hop, route.loc_pref,
                                         route.weight, route.med, route.as_path))
    records.sort(key=lambda r: ("B" not in r.status_codes, int(r.next_hop)))
    return render_route_detail(records)


class SimulatorTransport:
    """LG transport answering from a scenario; counts every request."""

    def __init__(self, scenario: Scenario, fail: dict | None = None):
        self.scenario = scenario
        self.calls: list[tuple[str, str]] = []
        # (router, command) -> number of leading failures to inject
        self.fail = dict(fail or {})

    def __call__(self, router: str, command: str) -> str:
        self.calls.append((router, command))
        pending = self.fail.get((router, command), 0)
        if pending:
            self.fail[(router, command)] = pending - 1
            raise TransportError(f"injected failure for {command!r} on {router}")
        try:
            self.scenario.router(router)
        except KeyError:
            raise TransportError(f"unknown router {router}") from None
        if command == SUMMARY_COMMAND:
            return synth_summary(self.scenario, router)
        prefix = DETAIL_COMMAND.format("")
        if command.startswith(prefix):
            return synth_route_detail(self.scenario, router, command[len(prefix):].strip())
        return f"% Unknown command {command}\n"

    def count(self, router: str | None = None, command_prefix: str = "") -> int:
        return sum(1 for r, c in self.calls
                   if (router is None or r == router) and c.startswith(command_prefix))


# --- traceroutes -------------------------------------------------------------------

def second_stage_index(dst, ixp_ip, fanout: int) -> int:
    """Farside choice behind one IXP next hop.

    Uses the high half of an FNV-1a digest salted with the IXP address; the
    low bits of FNV-1a track byte parities, which would make this stage
    repeat the egress choice when both have an even fan.
    """
    h = fnv1a_64(as_address(ixp_ip).packed + as_address(dst).packed)
    return (h >> 32) % fanout


def synth_traceroute(scenario: Scenario, src, dst, probes: int = 1, interval: float = 420.0,
                     start: float = 0.0) -> list[TraceroutePath]:
    src, dst = as_address(src), as_address(dst)
    router = scenario.router_for_source(src)
    hit = scenario.peer_for_address(dst)
    if hit is None or router.name not in hit[0].sessions:
        raise ValueError(f"{dst} is not reachable through a peer of {router.name}")
    peer, prefix = hit
    installed = scenario.installed(router.name, peer.asn, prefix)
    ixp_ip = egress_next_hop(FlowKey(src, dst), installed)
    farside_choices = scenario.farsides[(router.name, peer.asn, ixp_ip)]
    if len(farside_choices) == 1:
        farside = farside_choices[0]
    else:
        farside = farside_choices[second_stage_index(dst, ixp_ip, len(farside_choices))]
    ips = (router.internal_ip, router.nearside_ip, ixp_ip, farside, dst)
    paths = []
    for k in range(probes):
        jitter = random.Random((scenario.seed << 80) ^ (int(src) << 48) ^ (int(dst) << 16) ^ k)
        rtt, hops = 0.0, []
        for ttl, ip in enumerate(ips, 1):
            rtt += 0.5 + 2.0 * ttl + jitter.random()
            hops.append(Hop(ttl, ip, round(rtt, 3)))
        paths.append(TraceroutePath(src, dst, start + k * interval, tuple(hops)))
    return paths


def sweep(scenario: Scenario, router: str, prefix, probes: int = 1,
          interval: float = 420.0) -> list[TraceroutePath]:
    """Traceroutes from the router's probe to every host of a /24."""
    src = scenario.router(router).source_ip
    out = []
    for dst in as_network(prefix).hosts():
        out += synth_traceroute(scenario, src, dst, probes, interval)
    return out


# --- datasets for the pipeline ---------------------------------------------------------

def prefix_table(scenario: Scenario) -> PrefixTable:
    return PrefixTable((p, peer.asn) for peer in scenario.peers for p in peer.prefixes)


def ixp_dataset(scenario: Scenario) -> IxpDataset:
    records = [IxpRecord(x.name, x.prefix) for x in scenario.ixps]
    lan_of = {x.name: x.prefix for x in scenario.ixps}
    for peer in scenario.peers:
        if not peer.in_peeringdb:
            continue
        for router, addrs in sorted(peer.sessions.items()):
            for addr in addrs:
                name = next(n for n, pfx in lan_of.items() if addr in pfx)
                records.append(IxpRecord(name, lan_of[name], peer.asn, addr))
    return IxpDataset(records)


def oracle_tables(scenario: Scenario) -> tuple[PrefixOracle, PrefixOracle]:
    """(router-level oracle, registry oracle).

    The router-level one maps each IXP interface to the AS behind it; the
    registry one knows nothing about IXP LANs.
    """
    own = Verdict.of_as(scenario.config.src_asn)
    common = [(_SOURCES, own), (_NEARSIDE, own), (_INTERNAL, own)]
    common += [(p.block, Verdict.of_as(p.asn)) for p in scenario.peers]
    router_level = list(common)
    for peer in scenario.peers:
        for addrs in peer.sessions.values():
            router_level += [(ipaddress.IPv4Network(a), Verdict.of_as(peer.asn)) for a in addrs]
    registry = common + [(x.prefix, UNMAPPED) for x in scenario.ixps]
    return PrefixOracle(router_level, "router-level"), PrefixOracle(registry, "registry")


def as_rank_table(scenario: Scenario) -> str:
    rng = random.Random(f"{scenario.seed}|rank")
    lines = ["asn,rank,cone_size,name"]
    ranks = rng.sample(range(1, 20000), len(scenario.peers))
    for peer, rank in zip(scenario.peers, ranks):
        if rng.random() < 0.95:
            lines.append(f"{peer.asn},{rank},{max(1, 20000 // rank)},AS{peer.asn}")
    return "\n".join(lines) + "\n"


def export(scenario: Scenario, truth: GroundTruth, out, probes: int = 3,
           interval: float = 420.0) -> list:
    """Write every artifact of a scenario under ``out``; returns the paths.

    Traceroutes sweep the multipath /24 of each ground-truth pair from the
    probe behind its router. The LG fixtures answer the summary of every
    router and the detail query for every /24 target of every peer present
    at that router.
    """
    from pathlib import Path

    from .campaign import detail_command, select_probe_targets
    from .trace import format_traceroute
    from .transport import write_fixture

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    primary, secondary = oracle_tables(scenario)
    prefixes = prefix_table(scenario)
    lines = ["src,dst,started_at,hops"]
    for e in truth.mbgp_pairs:
        lines += [format_traceroute(p) for p in sweep(scenario, e.router, e.prefix, probes, interval)]
    files = {
        "scenario.json": scenario.to_json(),
        "ground_truth.csv": truth.to_csv(),
        "traceroutes.txt": "\n".join(lines) + "\n",
        "oracle_primary.csv": primary.to_csv(),
        "oracle_secondary.csv": secondary.to_csv(),
        "ixp.csv": ixp_dataset(scenario).to_csv(),
        "prefixes.csv": prefixes.to_csv(),
        "as_rank.csv": as_rank_table(scenario),
    }
    written = []
    for name, body in files.items():
        (out / name).write_text(body)
        written.append(out / name)
    lg = out / "lg"
    for router in scenario.routers:
        written.append(write_fixture(lg, router.name, SUMMARY_COMMAND, synth_summary(scenario, router.name)))
        for peer in scenario.peers:
            if router.name not in peer.sessions:
                continue
            for target in select_probe_targets(peer.asn, prefixes):
                command = detail_command(target)
                written.append(write_fixture(lg, router.name, command,
                                             synth_route_detail(scenario, router.name, target)))
    return written
