"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the criterion lines are
written straight to the terminal so they appear even without ``-s``.
"""

import json
import os
import random
import threading
import time
from collections import Counter
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from laminar.behaviors import Catalog, IterativePE, ProducerPE, describe
from laminar.cli import main as cli_main
from laminar.dataflow import PEDescriptor, compile_plan, linear_pipeline
from laminar.engine import execute
from laminar.errors import ProviderUnavailable
from laminar.peformat import render_header
from laminar.registry import Registry
from laminar.search import HttpProvider, code_completion_search, semantic_search
from laminar.server import App, serialize_payload
from laminar.showcase import (
    IsPrime,
    NumberProducer,
    PrintPrime,
    demo_scenario,
    is_prime_graph,
    word_count_graph,
)
from oracles import API_ERROR_SCHEMA, embed_reference, listing_is_prime, ranked_reference
from pipelines import multiset, random_pipeline

GOLDEN_ROUTES = Path(__file__).parent / "golden" / "routes.txt"


@pytest.fixture
def criterion(request):
    """Yields ``check(n, ok, detail)``; a test that dies early reports FAIL."""
    reporter = request.config.pluginmanager.getplugin("terminalreporter")
    seen = []

    def write(line):
        if reporter is not None:
            reporter.write_line(line)
        else:
            print(line)

    def check(n, ok, detail):
        seen.append(n)
        write(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, f"criterion {n} failed: {detail}"

    yield check
    if not seen:
        n = request.node.name.split("_")[1]
        write(f"criterion {n}: FAIL (raised before completing)")


# ------------------------------------------------------------------ 1

def test_c1_isprime_end_to_end(criterion, live_server, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LAMINAR_SESSION", str(tmp_path / "session.json"))
    monkeypatch.setenv("LAMINAR_ADDR", live_server)
    monkeypatch.chdir(tmp_path)
    cli_main(["register", "zz46", "password"])
    cli_main(["login", "zz46", "password"])
    pes = []
    for cls in (NumberProducer, IsPrime, PrintPrime):
        d = describe(cls)
        path = tmp_path / f"{d.name}.py"
        path.write_text(render_header(d) + "".join(f"import {m}\n" for m in d.imports) + d.source)
        pes.append(path.name)
    wf = tmp_path / "isPrime.json"
    wf.write_text(json.dumps({
        "name": "isPrime",
        "nodes": [{"file": p} for p in pes],
        "connections": [
            {"src": "NumberProducer", "src_port": "output", "dst": "IsPrime", "dst_port": "input"},
            {"src": "IsPrime", "src_port": "output", "dst": "PrintPrime", "dst_port": "input"},
        ],
    }))
    cli_main(["register-workflow", str(wf)])
    capsys.readouterr()

    mismatches, slowest = [], 0.0
    for seed in (36, 3, 44, 1, 50, 7):
        start = time.monotonic()
        code = cli_main(["run", "isPrime", "--input", "5", "--process", "MULTI", "--num", "5",
                         "--arg", f"seed={seed}"])
        elapsed = time.monotonic() - start
        slowest = max(slowest, elapsed)
        out = capsys.readouterr().out.splitlines()
        got = sorted(int(line.split()[2]) for line in out if line.startswith("the num "))
        rng = random.Random(seed)
        oracle = sorted(n for n in (rng.randint(1, 1000) for _ in range(5)) if listing_is_prime(n))
        if code != 0 or got != oracle:
            mismatches.append((seed, got, oracle))
    ok = not mismatches and slowest < 2.0
    criterion(1, ok, f"6 seeds, mismatches={mismatches}, slowest run {slowest:.2f}s < 2s")


# ------------------------------------------------------------------ 2

def test_c2_mapping_equivalence(criterion):
    rng = random.Random(20240601)
    start = time.monotonic()
    failures, runs = [], 0
    for k in range(50):
        seed = rng.randrange(2**32)
        graph, cat = random_pipeline(random.Random(seed))
        items = rng.randint(100, 1000)
        n = len(graph.nodes)
        simple = execute(compile_plan(graph, "SIMPLE"), cat, items, args={"seed": seed})
        expected = multiset(simple.outputs)
        # every pipeline is checked at each process count nodes..nodes+4
        for p in range(n, n + 5):
            multi = execute(compile_plan(graph, "MULTI", p), cat, items, args={"seed": seed})
            runs += 1
            if not (simple.ok and multi.ok and multiset(multi.outputs) == expected):
                failures.append((k, seed, p))
    elapsed = time.monotonic() - start
    ok = not failures and elapsed < 60
    criterion(2, ok, f"50 pipelines, {runs} MULTI runs, failures={failures[:5]}, {elapsed:.1f}s < 60s")


# ------------------------------------------------------------------ 3

def synthetic_corpus(n_words: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    vocab = [f"w{i}" for i in range(400)]
    weights = [1 / (i + 1) for i in range(len(vocab))]
    words = rng.choices(vocab, weights, k=n_words)
    return [" ".join(words[i:i + 10]) for i in range(0, n_words, 10)]


class PairProducer(ProducerPE):
    def setup(self):
        self.words = [w for line in self.args["corpus"] for w in line.split()]
        self.i = 0

    def _process(self):
        word = self.words[self.i]
        self.i += 1
        return (word, 1)


def test_c3_group_by_word_count(criterion, catalog):
    corpus = synthetic_corpus(10_000, 7)
    oracle = {}
    for line in corpus:
        for w in line.split():
            oracle[w] = oracle.get(w, 0) + 1
    assert sum(oracle.values()) == 10_000

    start = time.monotonic()
    checks = []
    # the three-node word count as registered, P = 4
    plan = compile_plan(word_count_graph(), "MULTI", 4)
    res = execute(plan, catalog, len(corpus), args={"corpus": corpus})
    checks.append(("wordCount", plan.instances, res))
    # pairs straight into the counter, so P = 4 gives the counter 3 instances
    cat = catalog.copy()
    cat.register("PairProducer", PairProducer)
    from laminar.showcase import CountWords
    g = linear_pipeline([PEDescriptor.producer("PairProducer"), describe(CountWords)])
    plan2 = compile_plan(g, "MULTI", 4)
    res2 = execute(plan2, cat, 10_000, args={"corpus": corpus})
    checks.append(("pairs", plan2.instances, res2))
    elapsed = time.monotonic() - start

    problems = []
    for label, _, r in checks:
        rows = r.outputs.get("CountWords", [])
        words = Counter(w for w, _, _ in rows)
        if not r.ok:
            problems.append(f"{label}: {r.error}")
        elif any(c != 1 for c in words.values()):
            problems.append(f"{label}: word updated in several instances")
        elif {w: c for w, c, _ in rows} != oracle:
            problems.append(f"{label}: totals differ from oracle")
    instances_used = len({i for _, _, i in res2.outputs.get("CountWords", [])})
    if instances_used < 2:
        problems.append("pairs: counting did not spread over instances")
    ok = not problems and elapsed < 5
    criterion(3, ok, f"{len(oracle)} distinct words, counter instances "
                     f"{checks[0][1]['CountWords']} and {checks[1][1]['CountWords']}, "
                     f"problems={problems}, {elapsed:.2f}s < 5s")


# ------------------------------------------------------------------ 4

def test_c4_plan_reproduction(criterion):
    plan = compile_plan(is_prime_graph(), "MULTI", 5)
    got = dict(plan.instances)
    expected = {"NumberProducer": 1, "IsPrime": 2, "PrintPrime": 2}
    criterion(4, got == expected and plan.total_processes == 5, f"instances {got}")


# ------------------------------------------------------------------ 5

def test_c5_text_search(criterion, app, auth):
    demo_scenario(app.registry, "zz46")
    status, hits = app.dispatch("GET", "/registry/zz46/search/prime/type/workflow", auth)
    got = [(h["kind"], h["name"], h["id"]) for h in hits]
    criterion(5, status == 200 and got == [("workflow", "isPrime", 2)], f"hits {got}")


# ------------------------------------------------------------------ 6

WORDS = ("prime number random word count galaxy filter sum print sensor alert text "
         "stream average read table split reduce map join").split()


def test_c6_ranking_oracle(criterion):
    rng = random.Random(99)
    start = time.monotonic()
    mismatches, stores = [], 0
    sizes = [0, 1, 2, 200] + [rng.randint(3, 200) for _ in range(4)]
    for size in sizes:
        reg = Registry(pbkdf2_iterations=1000)
        reg.register_user("u", "pw")
        for i in range(size):
            body = " + ".join(rng.choice(WORDS) for _ in range(rng.randint(0, 5))) or "x"
            src = f"class P{i}:\n    def _process(self, x):\n        return {body}\n"
            desc = " ".join(rng.choice(WORDS) for _ in range(rng.randint(0, 4)))
            reg.add_pe("u", PEDescriptor.iterative(f"P{i}", source=src), desc or "x")
        recs = reg.pes_of("u")
        desc_vecs = [(r.pe_id, embed_reference(r.description)) for r in recs]
        code_vecs = [(r.pe_id, embed_reference(r.source)) for r in recs]
        for _ in range(3):
            q = " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 4)))
            qv = embed_reference(q)
            if [h.id for h in semantic_search(reg, q, "u")] != ranked_reference(qv, desc_vecs):
                mismatches.append(("semantic", size, q))
            if [h.id for h in code_completion_search(reg, q, "u")] != ranked_reference(qv, code_vecs):
                mismatches.append(("code", size, q))
        stores += 1
    elapsed = time.monotonic() - start
    ok = not mismatches and elapsed < 5
    criterion(6, ok, f"{stores} stores up to 200 records, mismatches={mismatches[:3]}, "
                     f"{elapsed:.2f}s < 5s")


# ------------------------------------------------------------------ 7

def test_c7_registry_dedup(criterion, app):
    headers = {}
    for user in ("zz46", "rf208"):
        app.dispatch("POST", "/auth/register", body={"user_name": user, "user_password": "pw"})
        _, doc = app.dispatch("POST", "/auth/login", body={"user_name": user, "user_password": "pw"})
        headers[user] = {"Authorization": f"Bearer {doc['token']}"}
    d = describe(IsPrime).to_json()
    source = d.pop("source")
    body = {"name": "IsPrime", "code": serialize_payload(source), "descriptor": d}
    ids = [app.dispatch("POST", f"/registry/{u}/pe/add", headers[u], body)[1]["peId"]
           for u in ("zz46", "rf208")]
    reg = app.registry
    records, links = len(reg.pes), sorted(reg.user_pes)
    status, removed = app.dispatch("DELETE", f"/registry/zz46/pe/remove/id/{ids[0]}", headers["zz46"])
    still, other_view = ids[0] in reg.pes, app.dispatch("GET", "/registry/rf208/pe/name/IsPrime",
                                                       headers["rf208"])[0]
    ok = (ids[0] == ids[1] and records == 1 and links == [(1, ids[0]), (2, ids[0])]
          and status == 200 and not removed["recordDeleted"] and still and other_view == 200)
    criterion(7, ok, f"records={records}, links={links}, preserved after removal={still}")


# ------------------------------------------------------------------ 8

def test_c8_endpoint_golden(criterion, app, auth, live_server):
    served = "\n".join(f"{m} {p}" for m, p in app.route_table())
    golden = GOLDEN_ROUTES.read_text().rstrip("\n")
    table_ok = served == golden

    u = "/registry/zz46"
    bad_pe = {"code": "***"}
    error_calls = [
        ("GET", "/no/such/route", None, None),
        ("POST", "/auth/register", None, {"user_name": "zz46", "user_password": "x"}),
        ("POST", "/auth/register", None, b"not json"),
        ("POST", "/auth/login", None, {"user_name": "zz46", "user_password": "wrong"}),
        ("GET", "/auth/all", None, None),
        ("GET", f"{u}/all", None, None),
        ("GET", f"{u}/all", {"Authorization": "Bearer forged"}, None),
        ("GET", "/registry/someoneelse/all", auth, None),
        ("POST", f"{u}/pe/add", auth, bad_pe),
        ("POST", f"{u}/pe/add", auth, {}),
        ("GET", f"{u}/pe/id/77", auth, None),
        ("GET", f"{u}/pe/id/seven", auth, None),
        ("GET", f"{u}/pe/name/Nope", auth, None),
        ("DELETE", f"{u}/pe/remove/id/77", auth, None),
        ("DELETE", f"{u}/pe/remove/name/Nope", auth, None),
        ("POST", f"{u}/workflow/add", auth, {"graph": {"nodes": [{"name": "X", "kind": "Bogus"}]}}),
        ("GET", f"{u}/workflow/id/9", auth, None),
        ("GET", f"{u}/workflow/name/none", auth, None),
        ("GET", f"{u}/workflow/pes/id/9", auth, None),
        ("GET", f"{u}/workflow/pes/name/none", auth, None),
        ("DELETE", f"{u}/workflow/remove/id/9", auth, None),
        ("DELETE", f"{u}/workflow/remove/name/none", auth, None),
        ("PUT", f"{u}/workflow/9/pe/9", auth, None),
        ("GET", f"{u}/search/x/type/galaxy", auth, None),
        ("POST", "/execution/zz46/run", auth, {"workflow": "missing"}),
        ("POST", "/execution/zz46/run", auth, {"workflow": is_prime_graph().to_json(), "process": "MPI",
                                               "args": {"num": 5}}),
        ("POST", "/execution/zz46/run", auth, {"workflow": is_prime_graph().to_json(), "input": -3}),
    ]
    bad = []
    for method, path, headers, body in error_calls:
        status, doc = app.dispatch(method, path, headers, body)
        try:
            jsonschema.validate(doc, API_ERROR_SCHEMA)
            if status < 400 or doc["code"] != status:
                bad.append((method, path, status))
        except jsonschema.ValidationError:
            bad.append((method, path, "schema"))

    # and over the socket, where the body is raw bytes
    import urllib.error
    import urllib.request
    for method, path in (("GET", "/nope"), ("DELETE", "/auth/login"), ("GET", "/registry/zz46/all")):
        try:
            urllib.request.urlopen(urllib.request.Request(live_server + path, method=method))
            bad.append((method, path, "no error"))
        except urllib.error.HTTPError as exc:
            try:
                jsonschema.validate(json.loads(exc.read()), API_ERROR_SCHEMA)
            except (ValueError, jsonschema.ValidationError):
                bad.append((method, path, "schema over http"))
    ok = table_ok and not bad
    criterion(8, ok, f"route table {'identical' if table_ok else 'DIFFERS'} "
                     f"({len(app.route_table())} routes), {len(error_calls) + 3} error paths, bad={bad}")


# ------------------------------------------------------------------ 9

class TickProducer(ProducerPE):
    def setup(self):
        self.n = 0

    def _process(self):
        self.n += 1
        return self.n


class BusyWork(IterativePE):
    def _process(self, x):
        # 50 ms of CPU time consumed by this process, not wall time
        end = time.process_time() + 0.05
        acc = 0
        while time.process_time() < end:
            acc += 1
        return x


def test_c9_cpu_bound_speedup(criterion):
    cat = Catalog({"TickProducer": TickProducer, "BusyWork": BusyWork})
    g = linear_pipeline([PEDescriptor.producer("TickProducer"), PEDescriptor.iterative("BusyWork")])
    start = time.monotonic()
    t0 = time.perf_counter()
    simple = execute(compile_plan(g, "SIMPLE"), cat, 8)
    t_simple = time.perf_counter() - t0
    plan = compile_plan(g, "MULTI", 5)
    assert plan.instances["BusyWork"] == 4
    t0 = time.perf_counter()
    multi = execute(plan, cat, 8)
    t_multi = time.perf_counter() - t0
    elapsed = time.monotonic() - start
    speedup = t_simple / t_multi
    same = sorted(simple.outputs["BusyWork"]) == sorted(multi.outputs["BusyWork"]) == list(range(1, 9))
    ok = same and speedup >= 1.5 and elapsed < 10
    criterion(9, ok, f"SIMPLE {t_simple:.3f}s, MULTI(4 workers) {t_multi:.3f}s, speedup {speedup:.2f}x "
                     f"(need >= 1.5x), {os.cpu_count()} CPU(s) visible")


# ----------------------------------------------------------------- 10

class FakeModel(BaseHTTPRequestHandler):
    def do_POST(self):
        doc = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        if self.path == "/embed":
            v = [1.0, 0.0, 0.0] if "prime" in doc["text"].lower() else [0.0, 1.0, 0.0]
            reply = {"dim": 3, "values": v}
        elif self.path == "/summarize":
            reply = {"summary": "model summary"}
        else:
            self.send_response(404)
            self.end_headers()
            return
        data = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *a):
        pass


def test_c10_provider_contract(criterion):
    problems = []
    dead = HttpProvider("http://127.0.0.1:9", timeout=0.5)
    for call in (lambda: dead.desc_embed("x"), lambda: dead.code_embed("x"), lambda: dead.summarize("x")):
        try:
            call()
            problems.append("unreachable provider returned a value")
        except ProviderUnavailable:
            pass

    reg = Registry(dead, pbkdf2_iterations=1000)
    app = App(reg)
    app.dispatch("POST", "/auth/register", body={"user_name": "u", "user_password": "pw"})
    token = app.dispatch("POST", "/auth/login", body={"user_name": "u", "user_password": "pw"})[1]["token"]
    d = describe(IsPrime).to_json()
    source = d.pop("source")
    status, doc = app.dispatch("POST", "/registry/u/pe/add", {"Authorization": f"Bearer {token}"},
                               {"name": "IsPrime", "code": serialize_payload(source), "descriptor": d})
    if status != 500 or doc.get("type") != "ProviderUnavailable" or reg.pes:
        problems.append(f"registration with dead provider gave {status} {doc.get('type')}")
    jsonschema.validate(doc, API_ERROR_SCHEMA)

    server = ThreadingHTTPServer(("127.0.0.1", 0), FakeModel)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        live = HttpProvider(f"http://127.0.0.1:{server.server_address[1]}")
        reg2 = Registry(live, pbkdf2_iterations=1000)
        reg2.register_user("u", "pw")
        rec = reg2.add_pe("u", describe(IsPrime))
        if rec.description != "model summary" or not np.array_equal(rec.desc_embedding, [0, 1, 0]):
            problems.append("provider output not stored verbatim")
        hits = semantic_search(reg2, "prime", "u")
        if hits[0].score != 0.0:
            problems.append("provider query vector not used")
        server.shutdown()
        try:
            semantic_search(reg2, "prime", "u")
            problems.append("search fell back silently after provider went away")
        except ProviderUnavailable:
            pass
    finally:
        server.server_close()
    criterion(10, not problems, f"dead provider -> ProviderUnavailable, live provider pass-through, "
                                f"problems={problems}")
