from __future__ import annotations

import csv
import subprocess
import sys

import pytest

from mbgp.campaign import SUMMARY_COMMAND, max_requests_in_window, parse_evidence
from mbgp.cli import EXIT_INPUT, EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, main
from mbgp.lgparse import render_summary
from mbgp.simulator import Scenario
from mbgp.transport import write_fixture


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim") / "run"
    assert main(["simulate", "--seed", "7", "--routers", "5", "--peers", "40", "--out", str(out)]) == EXIT_OK
    return out


def read_truth(path):
    with open(path) as fh:
        return {(r["router"], int(r["peering_as"])): r for r in csv.DictReader(fh)}


def test_simulate_is_deterministic(tmp_path, simulated):
    again = tmp_path / "again"
    assert main(["simulate", "--seed", "7", "--routers", "5", "--peers", "40", "--out", str(again)]) == EXIT_OK
    for f in simulated.rglob("*"):
        if f.is_file():
            assert (again / f.relative_to(simulated)).read_bytes() == f.read_bytes()


def test_detect_then_analyze_recovers_ground_truth(tmp_path, simulated, capsys):
    evidence = tmp_path / "evidence.csv"
    assert main(["detect", "--in", str(simulated), "--out", str(evidence)]) == EXIT_OK
    truth = read_truth(simulated / "ground_truth.csv")
    found = {(e.router, e.peering_as): e for e in parse_evidence(evidence.read_text())}
    assert set(found) == set(truth)
    for key, e in found.items():
        assert str(e.prefix) == truth[key]["prefix"]

    log_lines = (tmp_path / "evidence.log").read_text().splitlines()
    assert log_lines[0] == "time,router,command,outcome"
    assert any(SUMMARY_COMMAND in line for line in log_lines)
    assert max_requests_in_window(float(line.split(",")[0]) for line in log_lines[1:]) <= 6

    report = tmp_path / "report.csv"
    assert main(["analyze", "--in", str(simulated), "--format", "csv", "--out", str(report)]) == EXIT_OK
    with open(report) as fh:
        rows = list(csv.DictReader(fh))
    scenario = Scenario.from_json((simulated / "scenario.json").read_text())
    shapes = {(scenario.router_for_source(r["source"]).name, int(r["peer_as"])): r["shape"] for r in rows}
    assert shapes == {k: v["shape"] for k, v in truth.items()}


def test_detect_is_idempotent(tmp_path, simulated):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["detect", "--in", str(simulated), "--out", str(a)]) == EXIT_OK
    assert main(["detect", "--in", str(simulated), "--out", str(b), "--workers", "3"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_tor1_fixture(fixtures, capsys):
    d = fixtures / "tor1"
    rc = main(["detect", "--fixtures", str(d / "lg"), "--prefixes", str(d / "prefixes.csv"),
               "--ixp", str(d / "ixp.csv"), "--log", "-"])
    captured = capsys.readouterr()
    assert rc == EXIT_OK
    assert "tor1,19752,142.46.150.0/24,2,198.32.181.46;206.108.34.48" in captured.out
    assert "1 candidates, 1 deployments" in captured.err


def test_no_multi_neighbor_peers_gives_empty_evidence(tmp_path, capsys):
    lg = tmp_path / "lg"
    write_fixture(lg, "r1", SUMMARY_COMMAND, render_summary([("198.32.181.46", 19752, "5", "1d"),
                                                             ("198.32.181.47", 64500, "5", "1d")]))
    (tmp_path / "prefixes.csv").write_text("prefix,origin_asn\n142.46.150.0/24,19752\n")
    (tmp_path / "ixp.csv").write_text("ixp_name,ixp_prefix,member_asn,member_ip\nEQ,198.32.181.0/24,,\n")
    rc = main(["detect", "--in", str(tmp_path), "--out", str(tmp_path / "ev.csv")])
    assert rc == EXIT_OK
    assert (tmp_path / "ev.csv").read_text() == "router,peering_as,prefix,link_count,next_hops\n"
    assert "0 candidates" in capsys.readouterr().err


def test_missing_detail_is_partial(tmp_path, fixtures):
    lg = tmp_path / "lg"
    summary = (fixtures / "tor1" / "lg" / "tor1" / "summary.txt").read_text()
    write_fixture(lg, "tor1", SUMMARY_COMMAND, summary)
    rc = main(["detect", "--fixtures", str(lg), "--prefixes", str(fixtures / "tor1" / "prefixes.csv"),
               "--ixp", str(fixtures / "tor1" / "ixp.csv"), "--out", str(tmp_path / "ev.csv")])
    assert rc == EXIT_PARTIAL


def test_unparseable_summaries_are_input_error(tmp_path, capsys):
    write_fixture(tmp_path / "lg", "r1", SUMMARY_COMMAND, "<html>busy</html>\n")
    (tmp_path / "prefixes.csv").write_text("prefix,origin_asn\n")
    (tmp_path / "ixp.csv").write_text("ixp_name,ixp_prefix,member_asn,member_ip\n")
    assert main(["detect", "--in", str(tmp_path)]) == EXIT_INPUT
    assert "no parseable BGP summary" in capsys.readouterr().err


def test_deployment_case_analyze(fixtures, capsys):
    assert main(["analyze", "--in", str(fixtures / "deployments" / "case3")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "shape: Divergent" in out
    assert "206.223.116.49" in out and "50.5%" in out


def test_analyze_empty_input(tmp_path, capsys):
    (tmp_path / "traceroutes.txt").write_text("src,dst,started_at,hops\n")
    assert main(["analyze", "--in", str(tmp_path)]) == EXIT_INPUT
    assert "no paths" in capsys.readouterr().err


def test_analyze_counts_malformed_lines(tmp_path, fixtures, capsys):
    case = fixtures / "deployments" / "case1"
    traces = tmp_path / "t.txt"
    traces.write_text((case / "traceroutes.txt").read_text() + "garbage\n")
    rc = main(["analyze", "--traces", str(traces), "--primary", str(case / "oracle_primary.csv"),
               "--secondary", str(case / "oracle_secondary.csv"), "--ixp", str(case / "ixp.csv")])
    captured = capsys.readouterr()
    assert rc == EXIT_OK
    assert "malformed lines: 1" in captured.out
    assert "skipped 1 malformed" in captured.err


def test_report_vb(fixtures, capsys):
    camp = fixtures / "campaign"
    assert main(["report", "--in", str(camp / "evidence.csv"), "--as-rank", str(camp / "as_rank.csv")]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("58 routers, 512 ASes, 950 cases")
    assert "max routers per AS: 30" in out
    assert "Zayo Bandwidth" in out


def test_config_precedence(tmp_path, fixtures, capsys):
    camp = fixtures / "campaign"
    conf = tmp_path / "mbgp.conf"
    conf.write_text(f"# report options\nin = {camp / 'evidence.csv'}\nformat = csv\ngroup-bounds = 50\n")
    assert main(["report", "--config", str(conf)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("table,key,count,percent")
    assert "rank_group,51+," in out
    assert main(["report", "--config", str(conf), "--format", "text"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("58 routers")


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["report"],
    ["report", "--in", "x", "--group-bounds", "100,10"],
    ["detect", "--in", "x", "--rate-limit", "0"],
    ["simulate", "--link-mix", "a/b/c"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE


def test_bad_config_line(tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text("just words\n")
    assert main(["report", "--config", str(conf)]) == EXIT_USAGE


def test_missing_input_file(tmp_path, capsys):
    assert main(["report", "--in", str(tmp_path / "none.csv")]) == EXIT_INPUT
    assert "missing evidence file" in capsys.readouterr().err


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "mbgp", "--help"], capture_output=True, text=True)
    assert done.returncode == 0
    assert "simulate" in done.stdout
