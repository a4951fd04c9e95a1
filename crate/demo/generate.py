#!/usr/bin/env python3
"""Regenerate the demo corpus: manifest.csv, texts/*.txt, expected_flags.csv.

Each document is drawn mostly from one of four word pools. The expected
machine flags follow from that design alone: a document is flagged when it
mentions "nuclear" and its pool is one the reference mapping marks relevant
(arms, budget). Gold labels agree except for two planted disagreements.
"""

import csv
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent

POOLS = {
    "arms": (
        "treaty missile warhead verification inspection arsenal reduction "
        "strategic deterrent launcher ballistic silo negotiators ceiling "
        "protocol disarmament"
    ).split(),
    "budget": (
        "budget funding appropriation fiscal congress dollars procurement "
        "spending request outlays deficit committee allocation billion "
        "authorization supplemental"
    ).split(),
    "trade": (
        "trade tariff export import market economic commerce quota "
        "shipping currency investment exchange surplus goods industry "
        "partners"
    ).split(),
    "emergency": (
        "flood disaster relief hurricane evacuation shelter damage "
        "recovery storm rescue volunteers aid victims coastal wildfire "
        "assistance"
    ).split(),
}
RELEVANT_POOLS = {"arms", "budget"}
GOLD_CATEGORIES = {"arms": "3;4", "budget": "6;5"}

# (pool, mentions nuclear, admin, year, gold override or None, note)
DESIGN = [
    ("arms", True, "Reagan", 1983, None, ""),
    ("arms", True, "Reagan", 1984, None, ""),
    ("arms", True, "Reagan", 1986, None, ""),
    ("arms", True, "Bush", 1989, None, ""),
    ("arms", True, "Bush", 1991, None, ""),
    ("arms", True, "Clinton", 1994, None, ""),
    ("arms", False, "Clinton", 1995, True, "analyst-only: no keyword"),
    ("budget", True, "Reagan", 1982, None, ""),
    ("budget", True, "Bush", 1990, None, ""),
    ("budget", True, "Clinton", 1996, False, "machine-only: routine budget"),
    ("budget", False, "Reagan", 1985, None, ""),
    ("budget", False, "Bush", 1992, None, ""),
    ("trade", True, "Reagan", 1987, None, ""),
    ("trade", False, "Bush", 1990, None, ""),
    ("trade", False, "Clinton", 1997, None, ""),
    ("trade", False, "Clinton", 1998, None, ""),
    ("emergency", True, "Reagan", 1988, None, ""),
    ("emergency", False, "Bush", 1992, None, ""),
    ("emergency", False, "Clinton", 1993, None, ""),
    ("emergency", False, "Clinton", 1999, None, ""),
]

TOKENS = 150
OWN_SHARE = 0.9


def document(rng, pool, nuclear):
    others = [p for p in POOLS if p != pool]
    words = []
    for _ in range(TOKENS):
        src = pool if rng.random() < OWN_SHARE else rng.choice(others)
        words.append(rng.choice(POOLS[src]))
    if nuclear:
        for _ in range(3):
            words.insert(rng.randrange(len(words)), "nuclear")
    sentences = []
    for i in range(0, len(words), 12):
        s = " ".join(words[i : i + 12])
        sentences.append(s[0].upper() + s[1:] + ".")
    return "\n".join(" ".join(sentences[i : i + 3]) for i in range(0, len(sentences), 3)) + "\n"


def main():
    rng = random.Random(1987)
    texts = HERE / "texts"
    texts.mkdir(exist_ok=True)
    manifest_rows = []
    expected_rows = []
    for i, (pool, nuclear, admin, year, gold_override, _note) in enumerate(DESIGN):
        doc_id = f"PD{i + 1:02d}"
        text = document(rng, pool, nuclear)
        if i == 18:
            # A badly scanned page: mostly symbols.
            text = "%$#@ &*~ |\\|/ ^^ ## " * 40 + "\n" + text
        (texts / f"{doc_id}.txt").write_text(text)
        flagged = nuclear and pool in RELEVANT_POOLS
        gold = flagged if gold_override is None else gold_override
        manifest_rows.append(
            {
                "doc_id": doc_id,
                "source_path": f"{doc_id}.txt",
                "administration": admin,
                "year": year,
                "impacted_override": "",
                "gold_relevant": int(gold),
                "gold_categories": GOLD_CATEGORIES[pool] if gold else "",
            }
        )
        expected_rows.append({"doc_id": doc_id, "pool": pool, "analyze_document": int(flagged)})

    with open(HERE / "manifest.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(manifest_rows[0]))
        w.writeheader()
        w.writerows(manifest_rows)
    with open(HERE / "expected_flags.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(expected_rows[0]))
        w.writeheader()
        w.writerows(expected_rows)


if __name__ == "__main__":
    main()
