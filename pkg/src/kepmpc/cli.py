"""Command line entry point: ``kepmpc gen|run|local|oracle|bench``."""

from __future__ import annotations

import argparse
import json
import socket
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from .bench import BenchPlan, bench, fit_report, write_csv
from .domain import HLA_COUNT, CriteriaWeights, PublicParams, ValidationError, dump_cohort, load_cohort
from .generate import Prevalence, gen_cohort
from .mpc.ledger import PhaseLedger
from .mpc.triples import SetupUnderprovisioned
from .net.channel import Connection, PeerAborted, Transcript, TransportError
from .net.session import (Acceptor, DealerClient, HandshakeError, InputCollector, NoDealer,
                          connect_retry, dealer_accept, handshake, listen_socket, parse_endpoint,
                          provider_submit, serve_dealer)
from .oracle import oracle_pipeline
from .protocols.inputs import SharedCohort, encode_table, share_table
from .protocols.pipeline import PipelineConfig, result_identity, run_pipeline

EXIT_FAIL = 1


def load_weights(path: str | None) -> CriteriaWeights:
    if not path:
        return CriteriaWeights()
    return CriteriaWeights.from_json(json.loads(Path(path).read_text()))


def emit(obj, path: str | None):
    text = json.dumps(obj, indent=1, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def fail(role: str, reason: str) -> int:
    print(f"kepmpc {role}: aborted: {reason}", file=sys.stderr)
    return EXIT_FAIL


# --- gen / oracle --------------------------------------------------------------

def cmd_gen(args) -> int:
    prevalence = Prevalence(args.antigen, args.antibody, args.typing)
    pairs = gen_cohort(args.n, args.seed, prevalence)
    text = dump_cohort(pairs, args.out)
    if not args.out:
        print(text)
    return 0


def cmd_oracle(args) -> int:
    pairs = load_cohort(args.pairs)
    res = oracle_pipeline(pairs, load_weights(args.weights), args.cycle_length, args.reveal_guard)
    emit(res.to_json() if args.intermediates else res.outcome(), args.out)
    return 0


# --- run: one role per process -------------------------------------------------

def run_dealer(args) -> int:
    listener = listen_socket(parse_endpoint(args.listen))
    try:
        c0, c1, hellos = dealer_accept(listener, args.session, args.timeout)
        try:
            served = serve_dealer(c0, c1, args.seed, hellos)
        finally:
            c0.close()
            c1.close()
    except HandshakeError as exc:
        return fail("dealer", exc.reason)
    except TransportError as exc:
        return fail("dealer", str(exc))
    finally:
        listener.close()
    print(f"kepmpc dealer: served {served} phases", file=sys.stderr)
    return 0


def run_provider(args) -> int:
    if len(args.connect) != 2:
        return fail("provider", "a provider needs --connect for p0 and then p1")
    pairs = load_cohort(args.pairs)
    rng = np.random.default_rng(args.seed)
    tables = share_table(encode_table(pairs), rng, HLA_COUNT)
    endpoints = [parse_endpoint(e) for e in args.connect]
    try:
        out = provider_submit(tables, endpoints, args.provider_id, HLA_COUNT, args.session, args.timeout)
    except TransportError as exc:
        return fail("provider", str(exc))
    print(f"kepmpc provider: submitted {out['pairs']} pairs as provider {out['provider_id']}",
          file=sys.stderr)
    return 0


def run_server(args) -> int:
    role = args.role
    pid = 0 if role == "p0" else 1
    if pid == 1 and len(args.connect) != 1:
        return fail(role, "p1 needs exactly one --connect (the p0 endpoint)")
    if not args.listen:
        return fail(role, "servers need --listen for provider submissions")
    weights = load_weights(args.weights)
    listener = listen_socket(parse_endpoint(args.listen))
    collector = InputCollector(pid, HLA_COUNT, args.session, args.timeout)
    acceptor = Acceptor(listener, collector, args.session, args.timeout)
    peer = dealer = None
    transcript = Transcript(digests=True) if args.transcript_digests else None
    try:
        table = collector.wait(args.providers, args.timeout)
        cfg = PipelineConfig(PublicParams(int(table.shape[0]), args.cycle_length), weights,
                             args.reveal_guard)
        params = {**cfg.to_json(), "inputs": collector.manifest()}
        if pid == 0:
            peer, raw = acceptor.wait_peer(args.timeout)
            peer.transcript = transcript
            handshake(peer, role, params, "p1", initiator=False, received=raw)
        else:
            sock = connect_retry(parse_endpoint(args.connect[0]), args.timeout)
            peer = Connection(sock, args.session, first=False, transcript=transcript, timeout=args.timeout)
            handshake(peer, role, params, "p0", initiator=True)
        if args.dealer:
            dconn = Connection(connect_retry(parse_endpoint(args.dealer), args.timeout),
                               args.session, timeout=args.timeout)
            dealer = DealerClient(dconn)
            dealer.introduce(role, params)
        else:
            dealer = NoDealer()
        cohort = SharedCohort(pid, table, HLA_COUNT)
        result = run_pipeline(pid, cohort, cfg, peer, dealer, PhaseLedger())
    except HandshakeError as exc:
        return fail(role, exc.reason)
    except PeerAborted as exc:
        return fail(role, exc.reason)
    except (SetupUnderprovisioned, TransportError) as exc:
        return fail(role, str(exc))
    finally:
        acceptor.close()
        if peer is not None:
            peer.close()
        if isinstance(dealer, DealerClient):
            dealer.conn.close()
        if transcript is not None:
            transcript.dump(args.transcript_digests)
    emit(result, args.out)
    return 0


def cmd_run(args) -> int:
    try:
        if args.role == "dealer":
            return run_dealer(args)
        if args.role == "provider":
            return run_provider(args)
        return run_server(args)
    except (ValidationError, ValueError, OSError) as exc:
        return fail(args.role, str(exc))


# --- local: all roles as child processes ---------------------------------------

def free_ports(k: int) -> list[int]:
    socks = []
    for _ in range(k):
        s = socket.socket()
        s.bind(("127.0.0.1", 0))
        socks.append(s)
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


def cmd_local(args) -> int:
    pairs = load_cohort(args.pairs)
    k = max(1, min(args.providers, len(pairs)))
    out_dir = Path(args.out_dir or tempfile.mkdtemp(prefix="kepmpc-"))
    out_dir.mkdir(parents=True, exist_ok=True)
    p0, p1, dealer = (f"127.0.0.1:{p}" for p in free_ports(3))
    base = [sys.executable, "-m", "kepmpc.cli", "run", "--session", str(args.session),
            "--timeout", str(args.timeout)]
    common = ["--cycle-length", str(args.cycle_length), "--providers", str(k)]
    if args.weights:
        common += ["--weights", args.weights]
    if args.reveal_guard:
        common.append("--reveal-guard")
    if not args.no_dealer:
        common += ["--dealer", dealer]

    cmds = {}
    if not args.no_dealer:
        cmds["dealer"] = base + ["--role", "dealer", "--listen", dealer, "--seed", str(args.seed)]
    for role, listen, extra in (("p0", p0, []), ("p1", p1, ["--connect", p0])):
        cmd = base + ["--role", role, "--listen", listen, *extra, *common,
                      "--out", str(out_dir / f"{role}.json")]
        if args.transcript_digests:
            cmd += ["--transcript-digests", str(out_dir / f"{role}.transcript.jsonl")]
        cmds[role] = cmd
    for i, chunk in enumerate(np.array_split(np.arange(len(pairs)), k)):
        path = out_dir / f"provider{i}.json"
        dump_cohort([pairs[j] for j in chunk], path)
        cmds[f"provider{i}"] = base + ["--role", "provider", "--connect", p0, "--connect", p1,
                                       "--pairs", str(path), "--provider-id", str(i),
                                       "--seed", str(args.seed + 1 + i)]

    procs = {name: subprocess.Popen(cmd, stderr=subprocess.PIPE, text=True)
             for name, cmd in cmds.items()}
    status = 0
    deadline = time.monotonic() + args.timeout * 4
    for name, proc in procs.items():
        try:
            _, err = proc.communicate(timeout=max(1.0, deadline - time.monotonic()))
        except subprocess.TimeoutExpired:
            proc.kill()
            _, err = proc.communicate()
        if err:
            sys.stderr.write(err)
        if proc.returncode != 0:
            status = EXIT_FAIL
    if status:
        return status
    r0 = json.loads((out_dir / "p0.json").read_text())
    r1 = json.loads((out_dir / "p1.json").read_text())
    if result_identity(r0) != result_identity(r1):
        return fail("local", "the two servers disagree")
    emit(r0, args.out)
    return 0


# --- bench ---------------------------------------------------------------------

def cmd_bench(args) -> int:
    plan = BenchPlan.load(args.bench)

    def progress(row):
        print(f"n={row['pairs']} L={row['cycle_len']} total={row['total_s']:.3f}s "
              f"online={int(row['online_bytes'])}B", file=sys.stderr)

    rows = bench(plan, progress)
    write_csv(rows, args.out)
    report = fit_report(rows, plan)
    emit(report, args.report)
    return 0


# --- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kepmpc", description="Two-server private kidney exchange.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="write a synthetic cohort")
    g.add_argument("-n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--antigen", type=float, default=Prevalence.antigen)
    g.add_argument("--antibody", type=float, default=Prevalence.antibody)
    g.add_argument("--typing", type=float, default=Prevalence.typing)
    g.add_argument("-o", "--out")
    g.set_defaults(fn=cmd_gen)

    o = sub.add_parser("oracle", help="cleartext reference result")
    o.add_argument("--pairs", required=True)
    o.add_argument("--cycle-length", type=int, default=2)
    o.add_argument("--weights")
    o.add_argument("--reveal-guard", action="store_true")
    o.add_argument("--intermediates", action="store_true", help="include edges and unique cycles")
    o.add_argument("--out")
    o.set_defaults(fn=cmd_oracle)

    r = sub.add_parser("run", help="run one role")
    r.add_argument("--role", choices=("p0", "p1", "dealer", "provider"), required=True)
    r.add_argument("--listen", help="host:port this role accepts on")
    r.add_argument("--connect", action="append", default=[], help="host:port to reach; repeatable")
    r.add_argument("--dealer", help="dealer host:port (servers only)")
    r.add_argument("--pairs", help="cohort JSON (providers)")
    r.add_argument("--provider-id", type=int, default=0)
    r.add_argument("--providers", type=int, default=1, help="submissions a server waits for")
    r.add_argument("--cycle-length", type=int, default=2)
    r.add_argument("--weights")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--reveal-guard", action="store_true")
    r.add_argument("--transcript-digests", metavar="FILE", help="dump per-frame digests as JSON lines")
    r.add_argument("--session", type=int, default=1)
    r.add_argument("--timeout", type=float, default=60.0)
    r.add_argument("--out")
    r.set_defaults(fn=cmd_run)

    lo = sub.add_parser("local", help="run every role as a local process")
    lo.add_argument("--pairs", required=True)
    lo.add_argument("--cycle-length", type=int, default=2)
    lo.add_argument("--weights")
    lo.add_argument("--seed", type=int, default=0)
    lo.add_argument("--providers", type=int, default=1)
    lo.add_argument("--reveal-guard", action="store_true")
    lo.add_argument("--transcript-digests", action="store_true")
    lo.add_argument("--no-dealer", action="store_true")
    lo.add_argument("--session", type=int, default=1)
    lo.add_argument("--timeout", type=float, default=60.0)
    lo.add_argument("--out-dir")
    lo.add_argument("--out")
    lo.set_defaults(fn=cmd_local)

    b = sub.add_parser("bench", help="sweep cohort sizes")
    b.add_argument("--bench", required=True, metavar="PLANFILE")
    b.add_argument("--out", required=True, metavar="CSV")
    b.add_argument("--report", help="write the power-law fit here instead of stdout")
    b.set_defaults(fn=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
