"""``laminar`` command line client."""

from __future__ import annotations

import argparse
import base64
import json
import os
import sys
from pathlib import Path

from .client import ClientError, LaminarClient, format_description
from .engine import RunResult
from .errors import LaminarError

SESSION_ENV = "LAMINAR_SESSION"

# (command, key kind) -> endpoint it talks to
COMMAND_ROUTES = {
    ("register", None): ("POST", "/auth/register"),
    ("login", None): ("POST", "/auth/login"),
    ("register-pe", None): ("POST", "/registry/{user}/pe/add"),
    ("register-workflow", None): ("POST", "/registry/{user}/workflow/add"),
    ("remove-pe", "id"): ("DELETE", "/registry/{user}/pe/remove/id/{id}"),
    ("remove-pe", "name"): ("DELETE", "/registry/{user}/pe/remove/name/{name}"),
    ("remove-workflow", "id"): ("DELETE", "/registry/{user}/workflow/remove/id/{id}"),
    ("remove-workflow", "name"): ("DELETE", "/registry/{user}/workflow/remove/name/{name}"),
    ("get-pe", "id"): ("GET", "/registry/{user}/pe/id/{id}"),
    ("get-pe", "name"): ("GET", "/registry/{user}/pe/name/{name}"),
    ("get-workflow", "id"): ("GET", "/registry/{user}/workflow/id/{id}"),
    ("get-workflow", "name"): ("GET", "/registry/{user}/workflow/name/{name}"),
    ("pes-by-workflow", "id"): ("GET", "/registry/{user}/workflow/pes/id/{id}"),
    ("pes-by-workflow", "name"): ("GET", "/registry/{user}/workflow/pes/name/{name}"),
    ("search", None): ("GET", "/registry/{user}/search/{search}/type/{type}"),
    ("describe", "id"): ("GET", "/registry/{user}/pe/id/{id}"),
    ("describe", "name"): ("GET", "/registry/{user}/pe/name/{name}"),
    ("list", None): ("GET", "/registry/{user}/all"),
    ("run", None): ("POST", "/execution/{user}/run"),
}


def session_path() -> Path:
    return Path(os.environ.get(SESSION_ENV) or Path.home() / ".laminar" / "session.json")


def load_session() -> dict:
    path = session_path()
    if path.exists():
        return json.loads(path.read_text())
    return {}


def save_session(doc: dict) -> None:
    path = session_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc))
    path.chmod(0o600)


def make_client(args) -> LaminarClient:
    session = load_session()
    addr = args.addr or os.environ.get("LAMINAR_ADDR") or session.get("addr") or "127.0.0.1:8000"
    return LaminarClient(addr, session.get("user"), session.get("token"))


def _key(text: str):
    return int(text) if text.isdigit() else text


def render_table(hits: list[dict]) -> str:
    rows = [("kind", "id", "name", "description", "score")]
    for h in hits:
        score = "" if h.get("score") is None else f"{h['score']:.4f}"
        rows.append((h["kind"], str(h["id"]), h["name"], h.get("description") or "", score))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def print_result(result: RunResult) -> None:
    for line in result.stdout:
        print(line)
    for node, values in result.outputs.items():
        if values:
            print(f"{node}: {json.dumps(values)}")
    if not result.ok and result.error:
        e = result.error
        print(f"error: {e['type']} ({e['code']}): {e['details']}", file=sys.stderr)


# ------------------------------------------------------------------ commands

def cmd_register(client, args):
    doc = client.register(args.user, args.password)
    print(f"registered user {doc['userName']} (id {doc['userId']})")


def cmd_login(client, args):
    client.login(args.user, args.password)
    save_session({"addr": client.base_url, "user": client.user, "token": client.token})
    print(f"logged in as {args.user}")


def cmd_register_pe(client, args):
    doc = client.register_PE(args.file, args.description)
    print(f"peId {doc['peId']}: {doc['peName']}")


def cmd_register_workflow(client, args):
    doc = client.register_Workflow(args.file, args.name, args.description)
    print(f"workflowId {doc['workflowId']}: {doc['entryPoint']} (PEs {doc.get('peIds', [])})")


def cmd_remove_pe(client, args):
    doc = client.remove_PE(_key(args.ref))
    state = "deleted" if doc["recordDeleted"] else "unlinked"
    print(f"PE {doc['peName']} ({doc['peId']}) {state}")


def cmd_remove_workflow(client, args):
    doc = client.remove_Workflow(_key(args.ref))
    state = "deleted" if doc["recordDeleted"] else "unlinked"
    print(f"workflow {doc['entryPoint']} ({doc['workflowId']}) {state}")


def cmd_get_pe(client, args):
    doc = client.get_PE(_key(args.ref))
    out = Path(args.out or f"{doc['peName']}.py")
    out.write_bytes(base64.b64decode(doc["peCode"]))
    print(f"wrote {out}")


def cmd_get_workflow(client, args):
    doc = client.get_Workflow(_key(args.ref))
    out = Path(args.out or f"{doc['entryPoint']}.json")
    graph = json.loads(base64.b64decode(doc["workflowCode"]))
    out.write_text(json.dumps(graph, indent=2))
    print(f"wrote {out}")


def cmd_pes_by_workflow(client, args):
    for doc in client.get_PEs_By_Workflow(_key(args.ref)):
        print(f"{doc['peId']}\t{doc['peName']}\t{doc['description']}")


def cmd_search(client, args):
    hits = client.search_Registry(args.text, args.type, args.query)
    print(render_table(hits))


def cmd_describe(client, args):
    print(format_description(client.describe(_key(args.ref), workflow=args.workflow)))


def cmd_list(client, args):
    doc = client.get_Registry()
    print(f"{len(doc['pes'])} PEs, {len(doc['workflows'])} workflows")
    for p in doc["pes"]:
        print(f"  pe {p['peId']}\t{p['peName']}")
    for w in doc["workflows"]:
        print(f"  workflow {w['workflowId']}\t{w['entryPoint']}")


def cmd_run(client, args):
    ref = args.workflow
    path = Path(ref)
    if path.suffix == ".json" and path.is_file():
        from .client import load_workflow_file
        ref = load_workflow_file(path)
    else:
        ref = _key(ref)
    run_args = {}
    for item in args.arg or []:
        k, _, v = item.partition("=")
        try:
            run_args[k] = json.loads(v)
        except json.JSONDecodeError:
            run_args[k] = v
    if args.num is not None:
        run_args["num"] = args.num
    result = client.run(ref, input=args.input, process=args.process, args=run_args or None,
                        resources=args.resources)
    print_result(result)
    return 0 if result.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laminar", description="Laminar registry and execution client")
    parser.add_argument("--addr", help="server address host:port (default $LAMINAR_ADDR)")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn in (("register", cmd_register), ("login", cmd_login)):
        p = sub.add_parser(name)
        p.add_argument("user")
        p.add_argument("password")
        p.set_defaults(func=fn)

    p = sub.add_parser("register-pe", help="register a PE source file")
    p.add_argument("file")
    p.add_argument("--description")
    p.set_defaults(func=cmd_register_pe)

    p = sub.add_parser("register-workflow", help="register a workflow JSON file")
    p.add_argument("file")
    p.add_argument("--name")
    p.add_argument("--description")
    p.set_defaults(func=cmd_register_workflow)

    for name, fn in (("remove-pe", cmd_remove_pe), ("remove-workflow", cmd_remove_workflow),
                     ("pes-by-workflow", cmd_pes_by_workflow)):
        p = sub.add_parser(name)
        p.add_argument("ref", help="name or numeric id")
        p.set_defaults(func=fn)

    for name, fn in (("get-pe", cmd_get_pe), ("get-workflow", cmd_get_workflow)):
        p = sub.add_parser(name)
        p.add_argument("ref", help="name or numeric id")
        p.add_argument("--out", help="output file")
        p.set_defaults(func=fn)

    p = sub.add_parser("search")
    p.add_argument("text")
    p.add_argument("--type", default="both", choices=["pe", "workflow", "both"])
    p.add_argument("--query", default="text", choices=["text", "code"])
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("describe")
    p.add_argument("ref")
    p.add_argument("--workflow", action="store_true", help="describe a workflow instead of a PE")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("list")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("run", help="run a workflow by name, id or JSON file")
    p.add_argument("workflow")
    p.add_argument("--input", type=int, default=1, help="iterations")
    p.add_argument("--process", default="SIMPLE", help="SIMPLE, MULTI, MPI or REDIS")
    p.add_argument("--num", type=int, help="process count for parallel mappings")
    p.add_argument("--arg", action="append", help="extra run argument key=value (JSON value)")
    p.add_argument("--resources", action="store_true", help="ship ./resources with the run")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    client = make_client(args)
    try:
        code = args.func(client, args)
    except ClientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (LaminarError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
