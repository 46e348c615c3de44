#!/usr/bin/env python3
"""Writes a synthetic four-option question set in the dataset record format."""

import argparse
import json
import random

SUBJECTS = ["astronomy", "chemistry", "geography", "history", "logic", "statistics"]


def make_record(i, rng):
    subject = rng.choice(SUBJECTS)
    options = [f"{subject} option {i}-{k}" for k in range(4)]
    gold = "ABCD"[rng.randrange(4)]
    return {
        "id": f"q{i:04d}",
        "input_fields": {
            "question": f"Question {i} ({subject}): which option is correct?",
            "choices": "\n".join(f"{'ABCD'[k]}. {text}" for k, text in enumerate(options)),
        },
        "gold": gold,
        "metadata": {"subject": subject},
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=300)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="configs/demo/questions.jsonl")
    args = parser.parse_args()
    rng = random.Random(args.seed)
    with open(args.out, "w") as f:
        for i in range(args.count):
            f.write(json.dumps(make_record(i, rng)) + "\n")


if __name__ == "__main__":
    main()
