#!/usr/bin/env python3
"""Record service exchanges for the card-ui test suite.

Runs the real HTTP service in-process against the fixture config and captures
request/response pairs into frontend/test/fixtures/service_replay.json.  The
frontend tests replay these exchanges through a fake ApiClient, so the UI
suite runs offline while still being pinned to genuine server behaviour.

Also shells out to the installed `nl2sell` CLI to record `select` counts for
the same expressions, so the UI can prove its export count preview matches
the command-line path.

Regenerate after changing the service, catalog, or fixture data:

    python3 scripts/gen_frontend_fixtures.py
"""

from __future__ import annotations

import copy
import json
import subprocess
import sys
from pathlib import Path

from fastapi.testclient import TestClient

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from nl2sell.config import load_config  # noqa: E402
from nl2sell.service import create_app  # noqa: E402

CONFIG = ROOT / "fixtures" / "config.yaml"
OUT = ROOT / "frontend" / "test" / "fixtures" / "service_replay.json"

# The demand whose cassette-backed translation the UI demo renders.
TRANSLATE_DEMANDS = [
    "Young people in City A who enjoy milk tea or white-collar workers in "
    "first-tier cities who listen to audiobooks",
]

# Base card for the edit-scenario exchanges (kept deliberately small).
EDIT_BASE_SELL = "(User Age Group#Between#18,35) AND (Gender#Belongs To#Female)"

# Matches no user: both conditions are valid but mutually exclusive.
EMPTY_MATCH_SELL = (
    "(Resident City#Belongs To#City A) AND (Resident City#Not Belongs To#City A)"
)


def canonical_body(body) -> str:
    if body is None:
        return ""
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def exchange_key(method: str, path: str, body) -> str:
    return f"{method} {path} {canonical_body(body)}"


class Recorder:
    def __init__(self, client: TestClient):
        self.client = client
        self.exchanges: dict[str, dict] = {}

    def _record(self, method: str, path: str, body, response) -> dict:
        entry: dict = {"status": response.status_code}
        content_type = response.headers.get("content-type", "")
        if content_type.startswith("application/json"):
            entry["json"] = response.json()
        else:
            entry["text"] = response.text
            entry["content_type"] = content_type
        disposition = response.headers.get("content-disposition")
        if disposition:
            entry["content_disposition"] = disposition
        self.exchanges[exchange_key(method, path, body)] = entry
        return entry

    def get(self, path: str) -> dict:
        return self._record("GET", path, None, self.client.get(path))

    def post(self, path: str, body: dict) -> dict:
        return self._record("POST", path, body, self.client.post(path, json=body))


def load_testset() -> list[dict]:
    rows = []
    with open(ROOT / "fixtures" / "testset.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def cli_select(sell: str) -> dict:
    proc = subprocess.run(
        ["nl2sell", "--json", "--config", str(CONFIG), "select", sell],
        capture_output=True,
        text=True,
        cwd=ROOT,
        check=True,
    )
    return json.loads(proc.stdout)


def build_edit_cards(base_card: dict) -> dict[str, dict]:
    """The exact card trees the UI mutation tests produce.

    Client-side edits only rearrange the JSON tree; node ids added by the
    client count up from "c1".  Each shape here must stay byte-identical to
    what frontend/src/model.ts produces for the same mutation sequence.
    """
    cards: dict[str, dict] = {}

    # remove the second leaf: group keeps a single child until the server
    # re-canonicalizes on print.
    removed = copy.deepcopy(base_card)
    removed["children"] = [removed["children"][0]]
    cards["removed_leaf"] = removed

    # flip the root combinator.
    as_or = copy.deepcopy(base_card)
    as_or["combinator"] = "OR"
    cards["root_or"] = as_or

    # invalid value on the Gender leaf.
    bad_value = copy.deepcopy(base_card)
    bad_value["children"][1]["value"] = "Skiing"
    cards["bad_value"] = bad_value

    # singleton group wrapper around the first leaf plus the bad value:
    # the canonical expression collapses the wrapper, so validation paths
    # must be mapped back through it.
    wrapped = copy.deepcopy(bad_value)
    wrapped["children"][0] = {
        "kind": "group",
        "node_id": "c1",
        "combinator": "AND",
        "children": [copy.deepcopy(base_card["children"][0])],
    }
    cards["wrapped_bad_value"] = wrapped

    # same-combinator nested group: flattened on print, shifting paths.
    nested = copy.deepcopy(base_card)
    nested["children"][1] = {
        "kind": "group",
        "node_id": "c2",
        "combinator": "AND",
        "children": [
            copy.deepcopy(base_card["children"][1]),
            {
                "kind": "condition",
                "node_id": "c3",
                "key": "Preference",
                "operator": "Belongs To",
                "value": "Skiing",
            },
        ],
    }
    cards["nested_bad_value"] = nested

    # operator switched to Equal To while the value is still a pair:
    # the server rejects the card outright (400) rather than guessing.
    bad_operator = copy.deepcopy(base_card)
    bad_operator["children"][0]["operator"] = "Equal To"
    cards["bad_operator"] = bad_operator

    return cards


def main() -> None:
    app = create_app(load_config(CONFIG))
    testset = load_testset()

    with TestClient(app) as client:
        rec = Recorder(client)

        rec.get("/v1/health")
        rec.get("/v1/tags/search?q=")
        rec.get("/v1/tags/search?q=income&n=5")

        for demand in TRANSLATE_DEMANDS:
            rec.post("/v1/translate", {"demand": demand})
        # A demand outside the recorded set: the backend reports failure.
        rec.post("/v1/translate", {"demand": "completely unrecorded demand"})

        # Full no-edit loop for every testset expression.
        for row in testset:
            sell = row["sell"]
            parsed = rec.post("/v1/parse", {"sell": sell})
            assert parsed["status"] == 200, sell
            card = parsed["json"]["card"]
            printed = rec.post("/v1/print", {"card": card})
            assert printed["json"]["sell"] == sell, (
                f"testset sell is not canonical: {sell!r} -> {printed['json']['sell']!r}"
            )
            rec.post("/v1/validate", {"sell": sell})
            rec.post("/v1/structure", {"sell": sell})
            rec.post("/v1/select-users", {"sell": sell})
            rec.post("/v1/export", {"sell": sell, "format": "csv"})

        # Malformed SELL: parse errors carry the failure position.
        rec.post("/v1/parse", {"sell": "(Gender#"})

        # Edit scenario: base card plus every mutated shape the UI tests use.
        base = rec.post("/v1/parse", {"sell": EDIT_BASE_SELL})
        base_card = base["json"]["card"]
        rec.post("/v1/print", {"card": base_card})
        rec.post("/v1/validate", {"sell": EDIT_BASE_SELL})
        rec.post("/v1/structure", {"sell": EDIT_BASE_SELL})
        rec.post("/v1/select-users", {"sell": EDIT_BASE_SELL})
        rec.post("/v1/export", {"sell": EDIT_BASE_SELL, "format": "csv"})

        edited = build_edit_cards(base_card)
        edited_sells: dict[str, str] = {}
        for name, card in edited.items():
            printed = rec.post("/v1/print", {"card": card})
            if printed["status"] != 200:
                continue  # bad_operator: the 400 itself is the fixture
            sell = printed["json"]["sell"]
            edited_sells[name] = sell
            rec.post("/v1/validate", {"sell": sell})
            rec.post("/v1/structure", {"sell": sell})
            rec.post("/v1/select-users", {"sell": sell})
            rec.post("/v1/export", {"sell": sell, "format": "csv"})

        # Cross-checked expressions get the complete no-edit loop so the UI
        # can run load -> preview -> export against recorded responses.
        crosscheck_sells = [row["sell"] for row in testset[:3]] + [
            EDIT_BASE_SELL,
            edited_sells["root_or"],
            EMPTY_MATCH_SELL,
        ]
        for sell in crosscheck_sells:
            parsed = rec.post("/v1/parse", {"sell": sell})
            rec.post("/v1/print", {"card": parsed["json"]["card"]})
            rec.post("/v1/validate", {"sell": sell})
            rec.post("/v1/structure", {"sell": sell})
            rec.post("/v1/select-users", {"sell": sell})
            rec.post("/v1/export", {"sell": sell, "format": "csv"})

    # Command-line cross-check: same expressions through `nl2sell select`.
    crosscheck = {sell: cli_select(sell) for sell in crosscheck_sells}

    OUT.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "note": (
            "Recorded service exchanges for the card-ui tests. "
            "Regenerate with: python3 scripts/gen_frontend_fixtures.py"
        ),
        "edit_base_sell": EDIT_BASE_SELL,
        "empty_match_sell": EMPTY_MATCH_SELL,
        "testset_sells": [row["sell"] for row in testset],
        "translate_demands": TRANSLATE_DEMANDS,
        "edited_sells": edited_sells,
        "cli_select": crosscheck,
        "exchanges": dict(sorted(rec.exchanges.items())),
    }
    with open(OUT, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False, ensure_ascii=False)
        fh.write("\n")
    print(f"recorded {len(rec.exchanges)} exchanges -> {OUT.relative_to(ROOT)}")


if __name__ == "__main__":
    main()
