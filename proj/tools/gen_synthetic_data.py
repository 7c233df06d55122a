#!/usr/bin/env python3
"""Regenerate the synthetic benchmark and sensitivity fixtures under data/.

Deterministic: running it twice produces identical files.
"""
import json
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data"

PROJECTS = [
    "aurora", "basil", "cinder", "dynamo", "ember", "falcon", "garnet",
    "harbor", "indigo", "juniper", "krypton", "lagoon", "meridian", "nectar",
    "orchid", "pinnacle", "quartz", "rhubarb", "saffron", "timber",
]
SITES = [
    "alder", "birch", "cedar", "dune", "estuary", "fjord", "glacier",
    "heath", "islet", "jetty",
]
DEPTS = ["logistics", "research", "operations", "finance", "maintenance"]

SUBJECTS = ["heron", "otter", "lichen", "basalt", "monsoon", "glowworm",
            "estuarine silt", "peat bog", "kelp forest", "alpine meadow"]
VERBS = ["thrives in", "migrates across", "slowly reshapes", "depends on",
         "rarely appears near", "dominates"]
PLACES = ["northern wetlands", "tidal flats", "limestone valleys",
          "volcanic slopes", "coastal dunes", "boreal clearings"]


def write_jsonl(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")


def distractor_text(rng):
    return " ".join(
        f"The {rng.choice(SUBJECTS)} {rng.choice(VERBS)} the {rng.choice(PLACES)}."
        for _ in range(3)
    )


def make_benchmark():
    rng = random.Random(20240501)
    corpus, queries, gold = [], [], []
    for i, name in enumerate(PROJECTS):
        for j in (1, 2, 3):
            token = f"tok{name}{j}"
            text = (
                f"Project {name} is an internal initiative of the "
                f"{rng.choice(DEPTS)} group. The secret code for project "
                f"{name} is {token}. Staff rotate entry badges every "
                f"{rng.randint(2, 9)} weeks."
            )
            corpus.append({
                "pid": f"b{i:02d}a{j}",
                "title": f"Project {name}",
                "text": text,
            })
        queries.append({
            "qid": f"q{i:02d}",
            "question": f"What are the secret codes for project {name}?",
        })
        gold.append({
            "qid": f"q{i:02d}",
            "short_answers": [[f"tok{name}{j}"] for j in (1, 2, 3)],
        })
    for d in range(40):
        corpus.append({
            "pid": f"bd{d:02d}",
            "title": f"Field notes {d}",
            "text": distractor_text(rng),
        })
    write_jsonl(ROOT / "bench" / "corpus.jsonl", corpus)
    write_jsonl(ROOT / "bench" / "queries.jsonl", queries)
    write_jsonl(ROOT / "bench" / "gold.jsonl", gold)

    config = {
        "task": "asqa_long_form",
        "corpus": "corpus.jsonl",
        "pipeline": {"k": 5, "theta": 0.9, "max_iterations": 4, "pool_size": 100},
        "retriever": {"type": "bm25"},
        "backends": {
            "main": {"type": "scripted", "behavior": "extractive",
                     "noise_prob": 0.5, "seed": 11},
            "verifier": {"type": "scripted", "behavior": "extractive"},
        },
    }
    with open(ROOT / "bench" / "config.json", "w") as f:
        json.dump(config, f, indent=2)
        f.write("\n")


def make_sensitivity():
    rng = random.Random(20240502)
    corpus, queries, gold = [], [], []
    for i, name in enumerate(SITES):
        for j in (1, 2, 3):
            token = f"tok{name}{j}"
            text = (
                f"Site {name} handles regional storage. The access code for "
                f"site {name} is {token}. The gate closes at "
                f"{rng.randint(5, 11)} pm."
            )
            corpus.append({
                "pid": f"s{i:02d}a{j}",
                "title": f"Site {name}",
                "text": text,
            })
        queries.append({
            "qid": f"s{i:02d}",
            "question": f"What are the access codes for site {name}?",
        })
        gold.append({
            "qid": f"s{i:02d}",
            "short_answers": [[f"tok{name}{j}"] for j in (1, 2, 3)],
        })
    for d in range(10):
        corpus.append({
            "pid": f"sd{d:02d}",
            "title": f"Survey report {d}",
            "text": distractor_text(rng),
        })
    write_jsonl(ROOT / "sensitivity" / "corpus.jsonl", corpus)
    write_jsonl(ROOT / "sensitivity" / "queries.jsonl", queries)
    write_jsonl(ROOT / "sensitivity" / "gold.jsonl", gold)

    config = {
        "task": "asqa_long_form",
        "corpus": "corpus.jsonl",
        "pipeline": {"k": 5, "theta": 0.9, "max_iterations": 4, "pool_size": 40},
        "retriever": {"type": "bm25"},
        "backends": {
            "main": {"type": "scripted", "behavior": "extractive"},
            "verifier": {"type": "scripted", "behavior": "extractive"},
        },
    }
    with open(ROOT / "sensitivity" / "config.json", "w") as f:
        json.dump(config, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    make_benchmark()
    make_sensitivity()
    print(f"fixtures written under {ROOT}")
