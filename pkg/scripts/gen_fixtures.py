"""Regenerate the committed fixtures deterministically.

Writes library seeds, the built reasoning library, the synthetic user
database, the evaluation testset, and the translate cassette. Hand-edited
inputs live here as literals so a single run rebuilds everything
byte-identically. Run from the repository root:

    python3 scripts/gen_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

sys.path.insert(0, str(ROOT / "src"))

from nl2sell.catalog import ValueType, load_catalog          # noqa: E402
from nl2sell.gateway import cassette_key                     # noqa: E402
from nl2sell.prompts import build_predict_prompt, load_instructions  # noqa: E402
from nl2sell.retrieval import HashEmbedder, build_library, save_library  # noqa: E402
from nl2sell.sell import parse, print_sell                   # noqa: E402
from nl2sell.synth import split_rng                          # noqa: E402

FIXED_TIMESTAMP = "2026-08-18T00:00:00+00:00"


def _entry(demand, tags, conditions, sell, keywords):
    """Library seed with reasoning that walks the four steps to the answer."""
    lines = [
        f"1. Extract keywords: {keywords}.",
        f"2. Select tags: {', '.join(tags)}.",
        "3. Form conditional expressions: " + "; ".join(conditions) + ".",
        f"4. Combine: {sell}",
    ]
    return {"demand": demand, "tags": tags, "reasoning": "\n".join(lines), "sell": sell}


LIBRARY_SEEDS = [
    _entry(
        "Young people in City A who enjoy milk tea",
        ["Resident City", "User Age Group", "Preference"],
        ["(Resident City#Belongs To#City A)", "(User Age Group#Between#18,35)",
         "(Preference#Belongs To#Milk Tea)"],
        "(Resident City#Belongs To#City A) AND (User Age Group#Between#18,35) AND (Preference#Belongs To#Milk Tea)",
        "young people, City A, milk tea",
    ),
    _entry(
        "Company white-collar workers who enjoy drinking Starbucks",
        ["Preference", "Career"],
        ["(Preference#Belongs To#Starbucks)", "(Career#Belongs To#White-collar)"],
        "(Preference#Belongs To#Starbucks) AND (Career#Belongs To#White-collar)",
        "white-collar workers, Starbucks",
    ),
    _entry(
        "Mothers of young babies who care about early education",
        ["Preference", "User Gender", "User Has Child", "User Child Age"],
        ["(Preference#Belongs To#Baby Education)", "(User Gender#Belongs To#Female)",
         "(User Has Child#Belongs To#True)", "(User Child Age#Between#0,4)"],
        "(Preference#Belongs To#Baby Education) AND (User Gender#Belongs To#Female) AND ((User Has Child#Belongs To#True) OR (User Child Age#Between#0,4))",
        "mothers, babies, early education",
    ),
    _entry(
        "Middle-aged women",
        ["User Age Group", "Gender"],
        ["(User Age Group#Between#35,55)", "(Gender#Belongs To#Female)"],
        "(User Age Group#Between#35,55) AND (Gender#Belongs To#Female)",
        "middle-aged, women",
    ),
    _entry(
        "Pet owners who live in City A or City B",
        ["Resident City", "Pet Owning"],
        ["(Resident City#Belongs To#City A)", "(Resident City#Belongs To#City B)",
         "(Pet Owning#Belongs To#True)"],
        "((Resident City#Belongs To#City A) OR (Resident City#Belongs To#City B)) AND (Pet Owning#Belongs To#True)",
        "pet owners, City A, City B",
    ),
    _entry(
        "Users interested in wealth management products or insurance",
        ["Preference", "Has actively invested in major financial products"],
        ["(Preference#Belongs To#Wealth Management Products)", "(Preference#Belongs To#Insurance)",
         "(Has actively invested in major financial products#Belongs To#True)"],
        "(Preference#Belongs To#Wealth Management Products) OR (Preference#Belongs To#Insurance) OR (Has actively invested in major financial products#Belongs To#True)",
        "wealth management, insurance, invested",
    ),
    _entry(
        "White-collar workers in first-tier cities who often listen to audiobooks",
        ["City Level", "Days of Listening to Audiobooks", "Career"],
        ["(City Level#Belongs To#First-tier)", "(Days of Listening to Audiobooks#Greater Than#3)",
         "(Career#Belongs To#White-collar)"],
        "(City Level#Belongs To#First-tier) AND (Days of Listening to Audiobooks#Greater Than#3) AND (Career#Belongs To#White-collar)",
        "first-tier cities, audiobooks, white-collar",
    ),
    _entry(
        "Young people who enjoy swimming or female white-collar workers who enjoy reading in Shanghai",
        ["User Age Group", "Preference", "Location", "Gender", "Career"],
        ["(User Age Group#Between#18,35)", "(Preference#Belongs To#Swimming)",
         "(Location#Belongs To#Shanghai)", "(Gender#Belongs To#Female)",
         "(Career#Belongs To#White-collar)", "(Preference#Belongs To#Reading)"],
        "((User Age Group#Between#18,35) AND (Preference#Belongs To#Swimming)) OR ((Location#Belongs To#Shanghai) AND (Gender#Belongs To#Female) AND (Career#Belongs To#White-collar) AND (Preference#Belongs To#Reading))",
        "young people, swimming, Shanghai, white-collar, reading",
    ),
    _entry(
        "Unmarried students with modest income",
        ["Marital Status", "Career", "Monthly Income"],
        ["(Marital Status#Not Belongs To#True)", "(Career#Belongs To#Student)",
         "(Monthly Income#Not Greater Than#8000)"],
        "(Marital Status#Not Belongs To#True) AND (Career#Belongs To#Student) AND (Monthly Income#Not Greater Than#8000)",
        "unmarried, students, income",
    ),
    _entry(
        "High earners who do not live in Beijing",
        ["Monthly Income", "Resident City"],
        ["(Monthly Income#Not Less Than#20000)", "(Resident City#Not Belongs To#Beijing)"],
        "(Monthly Income#Not Less Than#20000) AND (Resident City#Not Belongs To#Beijing)",
        "high earners, not Beijing",
    ),
]

TESTSET = [
    ("t-001", "Young people in City A who enjoy milk tea or white-collar workers in first-tier cities who listen to audiobooks",
     "((Resident City#Belongs To#City A) AND (User Age Group#Between#18,35) AND (Preference#Belongs To#Milk Tea)) OR ((City Level#Belongs To#First-tier) AND (Days of Listening to Audiobooks#Greater Than#3) AND (Career#Belongs To#White-collar))"),
    ("t-002", "Married users with a child in primary school who care about education",
     "(Marital Status#Belongs To#True) AND (User Child Age#Between#6,12) AND (Preference#Belongs To#Education)"),
    ("t-003", "Pet owners in Hangzhou or Shanghai",
     "((Location#Belongs To#Hangzhou) OR (Location#Belongs To#Shanghai)) AND (Pet Owning#Belongs To#True)"),
    ("t-004", "Women between 35 and 55",
     "(User Age Group#Between#35,55) AND (Gender#Belongs To#Female)"),
    ("t-005", "White-collar coffee lovers",
     "(Preference#Belongs To#Starbucks) AND (Career#Belongs To#White-collar)"),
    ("t-006", "Users open to wealth products, insurance, or already investing",
     "(Preference#Belongs To#Wealth Management Products) OR (Preference#Belongs To#Insurance) OR (Eligible group for Wealth Infinity Card#Belongs To#True) OR (Has actively invested in major financial products#Belongs To#True)"),
    ("t-007", "Mothers of babies interested in early education",
     "(Preference#Belongs To#Baby Education) AND (User Gender#Belongs To#Female) AND ((User Has Child#Belongs To#True) OR (User Child Age#Between#0,4))"),
    ("t-008", "Students or teachers who enjoy reading",
     "((Career#Belongs To#Student) OR (Career#Belongs To#Teacher)) AND (Preference#Belongs To#Reading)"),
    ("t-009", "High earners outside Beijing",
     "(Monthly Income#Not Less Than#20000) AND (Resident City#Not Belongs To#Beijing)"),
    ("t-010", "Young swimmers or reading fans in Shanghai",
     "((User Age Group#Between#18,35) AND (Preference#Belongs To#Swimming)) OR ((Location#Belongs To#Shanghai) AND (Preference#Belongs To#Reading))"),
]

# Predictions exercise the whole metric surface: exact matches, value and
# operator drift, wrong structure, unparseable text, and an empty string.
PREDICTIONS = [
    ("t-001", "((Resident City#Belongs To#City A) AND (User Age Group#Between#18,35) AND (Preference#Belongs To#Milk Tea)) OR ((City Level#Belongs To#First-tier) AND (Days of Listening to Audiobooks#Greater Than#3) AND (Career#Belongs To#White-collar))"),
    ("t-002", "(Marital Status#Belongs To#True) AND (User Child Age#Between#6,12)"),
    ("t-003", "((Location#Belongs To#Hangzhou) OR (Location#Belongs To#Shanghai)) AND (Pet Owning#Belongs To#True)"),
    ("t-004", "(User Age Group#Between#30,55) AND (Gender#Belongs To#Female)"),
    ("t-005", "(Preference#Belongs To#Starbucks)"),
    ("t-006", "(Preference#Belongs To#Wealth Management Products) OR (Preference#Belongs To#Insurance) OR (Eligible group for Wealth Infinity Card#Belongs To#True) OR (Has actively invested in major financial products#Belongs To#True)"),
    ("t-007", "(Preference#Belongs To#Baby Education) AND (User Gender#Belongs To#Female) AND (User Has Child#Belongs To#True) AND (User Child Age#Between#0,4)"),
    ("t-008", "the target users are students or teachers who like reading"),
    ("t-009", "(Monthly Income#Not Less Than#20000) AND (Resident City#Not Belongs To#Beijing)"),
    ("t-010", ""),
]


def write_jsonl(path: Path, rows) -> None:
    with path.open("w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
            f.write("\n")


def gen_users(catalog, count: int = 50):
    """Synthetic user records; each tag present with probability 0.8."""
    rows = []
    for i in range(1, count + 1):
        rng = split_rng("users-v1", i)
        assignments = {}
        for tag in catalog:
            if rng.random() >= 0.8:
                continue
            if tag.value_type is ValueType.NUMERIC:
                lo, hi = tag.sample_range if tag.sample_range else (0, 100)
                assignments[tag.name] = rng.randint(lo, hi)
            elif tag.value_type is ValueType.BOOLEAN:
                assignments[tag.name] = rng.choice([True, False])
            elif tag.multi_valued:
                pool = list(tag.allowed_values)
                size = rng.randint(1, min(3, len(pool)))
                assignments[tag.name] = sorted(rng.sample(pool, size))
            else:
                assignments[tag.name] = rng.choice(list(tag.allowed_values))
        rows.append({"user_id": f"u{i:04d}", "assignments": assignments})
    return rows


def main() -> None:
    catalog = load_catalog(FIXTURES / "catalog.json")
    embedder = HashEmbedder()
    instructions = load_instructions()

    for seed in LIBRARY_SEEDS:
        parse(seed["sell"])
    write_jsonl(FIXTURES / "library_seeds.jsonl", LIBRARY_SEEDS)

    report = build_library(LIBRARY_SEEDS, embedder, catalog)
    if report.rejected:
        raise SystemExit(f"seed records rejected: {report.rejected}")
    save_library(report.library, FIXTURES / "library.jsonl")

    write_jsonl(FIXTURES / "users.jsonl", gen_users(catalog))

    write_jsonl(FIXTURES / "testset.jsonl",
                [{"id": i, "demand": d, "sell": s} for i, d, s in TESTSET])
    write_jsonl(FIXTURES / "predictions.jsonl",
                [{"id": i, "sell": s} for i, s in PREDICTIONS])

    # Cassette: the recorded "model" answers each testset demand with its
    # reference expression, so replayed translations are the references.
    cassette_rows = []
    for item_id, demand, sell in TESTSET:
        bundle = build_predict_prompt(demand, report.library, catalog, embedder,
                                      instructions, k=3, n=20)
        assert print_sell(parse(sell)) == sell, f"{item_id}: reference not canonical"
        cassette_rows.append({
            "key": cassette_key("default", bundle.rendered, 512),
            "prompt": bundle.rendered,
            "response": sell,
            "model": "default",
            "timestamp": FIXED_TIMESTAMP,
        })
    (FIXTURES / "cassettes").mkdir(exist_ok=True)
    write_jsonl(FIXTURES / "cassettes" / "translate.jsonl", cassette_rows)

    print(f"library entries: {len(report.library)}")
    print(f"users: 50  testset: {len(TESTSET)}  cassette rows: {len(cassette_rows)}")


if __name__ == "__main__":
    main()
