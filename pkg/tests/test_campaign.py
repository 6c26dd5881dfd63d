from __future__ import annotations

import dataclasses
import ipaddress

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbgp.campaign import (MAX_RETRIES, AsRankEntry, BgpSummaryEntry, IxpDataset, IxpRecord,
                           PeerCandidate, PrefixTable, RateLimiter, SimulatedClock,
                           TransportError, TransportUnavailable, aggregate, collect_summaries,
                           detail_command, find_multipath_candidates, format_evidence,
                           load_as_rank, max_requests_in_window, parse_evidence,
                           rank_group_labels, run_campaign, select_probe_targets, top_ranked)
from mbgp.lgparse import MbgpEvidence
from mbgp.simulator import SimConfig, SimulatorTransport, generate_scenario, prefix_table
from mbgp.transport import FixtureTransport

from pipeline import detect, first_multipath_index

A = ipaddress.IPv4Address
N = ipaddress.IPv4Network


def entry(ip, asn):
    return BgpSummaryEntry(A(ip), asn)


EQX = IxpDataset([IxpRecord("Equinix Toronto", N("198.32.181.0/24"), 19752, A("198.32.181.46")),
                  IxpRecord("TorIX", N("206.108.34.0/23"))])


# --- candidates and targets ---------------------------------------------------------------

def test_candidates_need_two_ixp_addresses():
    summaries = {"tor1": [entry("198.32.181.46", 19752), entry("206.108.34.48", 19752),
                          entry("206.108.34.200", 64500),
                          entry("198.32.181.10", 64501), entry("10.9.9.9", 64501)]}
    (cand,) = find_multipath_candidates(summaries, EQX)
    assert cand.key == ("tor1", 19752)
    assert cand.neighbor_addresses == {A("198.32.181.46"), A("206.108.34.48")}
    assert cand.ixp_name == "Equinix Toronto/TorIX"


def test_member_record_for_other_as_still_counts_inside_lan():
    assert EQX.is_ixp_address("198.32.181.46", 64500)
    assert not EQX.is_ixp_address("10.0.0.1")
    assert EQX.ixp_name("206.108.35.7") == "TorIX"


def test_candidate_needs_two_addresses():
    with pytest.raises(ValueError):
        PeerCandidate("r", 1, frozenset({A("10.0.0.1")}))


def test_probe_targets_are_first_hosts_of_slash24s():
    table = PrefixTable([("10.1.2.0/24", 7), ("10.1.0.0/23", 7), ("10.0.9.0/24", 7), ("10.5.0.0/24", 8)])
    assert select_probe_targets(7, table) == [A("10.0.9.1"), A("10.1.2.1")]
    assert select_probe_targets(9, table) == []


def test_dataset_csv_round_trips():
    assert IxpDataset.from_csv(EQX.to_csv()).records == EQX.records
    table = PrefixTable([("10.1.2.0/24", 7)])
    assert PrefixTable.from_csv(table.to_csv()).records == table.records


# --- rate limiter -----------------------------------------------------------------------

@settings(max_examples=50)
@given(st.integers(1, 10), st.lists(st.floats(0, 30), min_size=1, max_size=80))
def test_rate_limiter_never_exceeds_window(rate, gaps):
    clock = SimulatedClock()
    limiter = RateLimiter(rate, clock)
    stamps = []
    for gap in gaps:
        clock.advance(gap)
        stamps.append(limiter.acquire())
    assert max_requests_in_window(stamps) <= rate
    assert stamps == sorted(stamps)


def test_rate_limiter_spaces_a_burst():
    clock = SimulatedClock()
    limiter = RateLimiter(6, clock)
    stamps = [limiter.acquire() for _ in range(13)]
    assert stamps == [0.0] * 6 + [60.0] * 6 + [120.0]


def test_max_requests_in_window_oracle():
    stamps = [0, 10, 59.9, 60, 61, 119.9]
    brute = max(sum(1 for s in stamps if t <= s < t + 60) for t in stamps)
    assert max_requests_in_window(stamps) == brute == 4


def test_rate_limit_must_be_positive():
    with pytest.raises(ValueError):
        RateLimiter(0)


# --- campaign on the simulator -------------------------------------------------------------

@pytest.fixture(scope="module")
def scenario():
    sc, _ = generate_scenario(SimConfig(n_routers=6, n_peers=60), seed=11)
    return sc


def test_campaign_matches_ground_truth(scenario):
    _, result, _ = detect(scenario)
    truth = generate_scenario(SimConfig(n_routers=6, n_peers=60), seed=11)[1]
    assert {(e.router, e.peering_as) for e in result.evidence} == truth.pair_keys()
    assert set(result.evidence) == set(truth.mbgp_pairs)
    assert not result.partial


def test_query_counts_stop_at_first_multipath_prefix(scenario):
    candidates, result, _ = detect(scenario)
    for cand in candidates:
        assert result.requests[cand.key] == first_multipath_index(scenario, cand)


def test_early_stop_on_third_target():
    sc, _ = generate_scenario(SimConfig(n_routers=3, n_peers=40, max_prefixes=6), seed=2)
    key = next(k for k in sorted(sc.mbgp_config) if len(sc.peer(k[1]).slash24s()) >= 5)
    cfg = sc.mbgp_config[key]
    sc.mbgp_config[key] = dataclasses.replace(cfg, single_path_prefixes=tuple(sc.peer(key[1]).slash24s()[:2]))
    sc._installed.clear()
    candidates, result, transport = detect(sc)
    cand = next(c for c in candidates if c.key == key)
    assert result.requests[key] == 3
    detail = [c for r, c in transport.calls if r == key[0] and c.startswith("show ip bgp detail")]
    targets = select_probe_targets(key[1], prefix_table(sc))
    assert [detail_command(t) for t in targets[:3]] == [c for c in detail if c in
                                                        {detail_command(t) for t in targets}]
    assert cand in candidates


def test_rate_limit_holds_for_campaign_log(scenario):
    _, result, _ = detect(scenario, rate_limit=4)
    assert max_requests_in_window(q.time for q in result.log) <= 4


def test_workers_do_not_change_results(scenario):
    _, serial, _ = detect(scenario)
    _, parallel, _ = detect(scenario, workers=4)
    assert parallel.evidence == serial.evidence
    assert parallel.requests == serial.requests
    assert max_requests_in_window(q.time for q in parallel.log) <= 6


def test_transient_failures_are_retried(scenario):
    candidates, clean, _ = detect(scenario)
    cand = candidates[0]
    target = select_probe_targets(cand.peering_as, prefix_table(scenario))[0]
    transport = SimulatorTransport(scenario, fail={(cand.router, detail_command(target)): MAX_RETRIES})
    result = run_campaign(transport, [cand], prefix_table(scenario), clock=SimulatedClock())
    assert result.evidence == [e for e in clean.evidence if (e.router, e.peering_as) == cand.key]
    assert result.requests[cand.key] == clean.requests[cand.key] + MAX_RETRIES
    assert not result.failures


def test_exhausted_retries_skip_target(scenario):
    candidates, _, _ = detect(scenario)
    cand = candidates[0]
    target = select_probe_targets(cand.peering_as, prefix_table(scenario))[0]
    transport = SimulatorTransport(scenario, fail={(cand.router, detail_command(target)): MAX_RETRIES + 1})
    result = run_campaign(transport, [cand], prefix_table(scenario), clock=SimulatedClock(), backoff=2)
    (failure,) = result.failures
    assert failure.skipped_targets == [target]
    assert result.partial


def test_unavailable_transport_fails_remaining_candidates():
    cands = [PeerCandidate(f"r{i}", 19752, frozenset({A("198.32.181.46"), A("206.108.34.48")}))
             for i in range(3)]
    calls = []

    def down(router, command):
        calls.append(router)
        raise TransportUnavailable("connection refused")

    table = PrefixTable([("142.46.150.0/24", 19752), ("142.47.202.0/24", 19752)])
    result = run_campaign(down, cands, table, clock=SimulatedClock())
    assert calls == ["r0"]
    assert [f.router for f in result.failures] == ["r0", "r1", "r2"]
    assert all(len(f.skipped_targets) == 2 for f in result.failures)


def test_collect_summaries_reports_failures(scenario):
    log = []
    summaries, failures = collect_summaries(SimulatorTransport(scenario), ["ghost", scenario.routers[0].name],
                                            clock=SimulatedClock(), query_log=log)
    assert list(summaries) == [scenario.routers[0].name]
    assert "unknown router" in failures["ghost"]
    assert len(log) == 1 + MAX_RETRIES + 1


def test_tor1_fixture_campaign(fixtures):
    transport = FixtureTransport(fixtures / "tor1" / "lg")
    summaries, _ = collect_summaries(transport, transport.routers(), clock=SimulatedClock())
    ixp = IxpDataset.from_csv(fixtures / "tor1" / "ixp.csv")
    cands = find_multipath_candidates(summaries, ixp)
    result = run_campaign(transport, cands, PrefixTable.from_csv(fixtures / "tor1" / "prefixes.csv"),
                          clock=SimulatedClock())
    assert [(e.router, str(e.prefix), e.link_count) for e in result.evidence] == [("tor1", "142.46.150.0/24", 2)]
    assert result.requests == {("tor1", 19752): 1}


def test_fixture_transport_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        FixtureTransport(tmp_path / "missing")
    with pytest.raises(TransportError):
        FixtureTransport(tmp_path)("r1", "show ip bgp summary")


# --- evidence and aggregation -----------------------------------------------------------------

def ev(router, asn, k, third=0):
    hops = frozenset(A(f"198.18.{third}.{i + 1}") for i in range(k))
    return MbgpEvidence(router, asn, N(f"10.{asn % 250}.0.0/24"), hops)


def test_evidence_round_trip():
    items = [ev("ams1", 100, 2), ev("lon1", 200, 4)]
    assert parse_evidence(format_evidence(items)) == items


def test_evidence_link_count_checked():
    with pytest.raises(ValueError, match="link_count"):
        parse_evidence("router,peering_as,prefix,link_count,next_hops\nr,1,10.0.0.0/24,3,10.0.0.1;10.0.0.2\n")


def test_aggregate_counts_cases_once():
    report = aggregate([ev("ams1", 100, 2), ev("ams1", 100, 3, third=1), ev("lon1", 100, 2),
                        ev("lon1", 200, 4)])
    assert report.cases == {("ams1", 100): 3, ("lon1", 100): 2, ("lon1", 200): 4}
    assert report.summary_line() == "2 routers, 2 ASes, 3 cases"
    assert report.per_as_router_counts == {100: 2, 200: 1}
    assert report.link_count_histogram == {2: 1, 3: 1, 4: 1}


def test_rank_groups():
    ranks = {100: AsRankEntry(100, 100, 5), 200: AsRankEntry(200, 101, 5), 300: AsRankEntry(300, 20000, 1)}
    report = aggregate([ev("a", 100, 2), ev("a", 200, 2), ev("a", 300, 2), ev("a", 400, 2)], ranks)
    assert report.rank_groups == {"1-100": 1, "101-1000": 1, "1001-10000": 0, "10001+": 1, "unranked": 1}
    assert rank_group_labels([10]) == ["1-10", "11+", "unranked"]
    assert [e.asn for e, _ in top_ranked(report, ranks, 2)] == [100, 200]


@settings(max_examples=50)
@given(st.lists(st.tuples(st.sampled_from(["a", "b", "c", "d"]), st.integers(1, 30), st.integers(2, 4)),
                max_size=40))
def test_aggregate_marginals(rows):
    items = [ev(r, asn, k) for r, asn, k in rows]
    report = aggregate(items)
    assert sum(report.per_router_counts.values()) == report.n_cases == sum(report.per_as_router_counts.values())
    assert sum(report.link_count_histogram.values()) == report.n_cases
    if report.n_cases:
        assert abs(sum(report.link_count_percentages().values()) - 100) < 1e-9


def test_campaign_fixture(fixtures):
    report = aggregate(parse_evidence(fixtures / "campaign" / "evidence.csv"),
                       load_as_rank(fixtures / "campaign" / "as_rank.csv"))
    assert report.summary_line() == "58 routers, 512 ASes, 950 cases"
    assert report.per_as_router_counts[10310] == 30
