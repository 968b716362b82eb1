#!/usr/bin/env python3
"""Writes data/sample_captions.txt: image-caption-style sentences from a small
topic grammar. Output depends only on the seed, so the file is reproducible.

    python3 tools/make_sample_corpus.py [--lines 2000] [--seed 2018] [--out PATH]
"""

import argparse
import random
from pathlib import Path

TOPICS = {
    "street": {
        "subjects": ["man", "woman", "person", "boy", "girl", "cyclist", "skateboarder"],
        "actions": [("riding", ["bike", "bicycle", "skateboard", "motorcycle", "scooter"]),
                    ("walking", ["dog", "bike"]),
                    ("crossing", ["street", "road", "intersection"])],
        "places": ["city street", "busy road", "sidewalk", "parking lot", "crosswalk"],
        "adjectives": ["young", "old", "tall", "smiling"],
        "scenes": ["a red bus parked on the side of a street", "a traffic light over a busy intersection",
                   "cars driving down a wet road", "a stop sign on a street corner"],
    },
    "kitchen": {
        "subjects": ["woman", "man", "chef", "cook", "child"],
        "actions": [("cutting", ["vegetables", "bread", "pizza", "cake", "carrots"]),
                    ("cooking", ["food", "eggs", "soup", "dinner"]),
                    ("holding", ["plate", "knife", "bowl", "cup"])],
        "places": ["kitchen", "small kitchen", "restaurant kitchen", "counter"],
        "adjectives": ["happy", "young", "busy"],
        "scenes": ["a kitchen with white cabinets and a stove", "a plate of food on a wooden table",
                   "a pizza sitting on top of a pan", "a bowl of fruit on a counter"],
    },
    "beach": {
        "subjects": ["surfer", "man", "woman", "kid", "group of people"],
        "actions": [("riding", ["wave", "surfboard"]),
                    ("flying", ["kite"]),
                    ("carrying", ["surfboard", "umbrella", "towel"])],
        "places": ["beach", "ocean", "sandy beach", "shore", "water"],
        "adjectives": ["young", "tanned", "wet"],
        "scenes": ["a kite flying over a sandy beach", "waves crashing on the shore",
                   "umbrellas lined up on the beach", "a boat floating in the ocean"],
    },
    "field": {
        "subjects": ["baseball player", "tennis player", "dog", "boy", "team"],
        "actions": [("swinging", ["bat", "racket"]),
                    ("throwing", ["ball", "frisbee"]),
                    ("catching", ["ball", "frisbee"])],
        "places": ["field", "grassy field", "tennis court", "baseball field", "park"],
        "adjectives": ["young", "fast", "small"],
        "scenes": ["a herd of cows grazing in a field", "horses standing in a grassy field",
                   "a giraffe standing next to a tree", "two zebras walking in a field"],
    },
    "home": {
        "subjects": ["cat", "dog", "man", "woman", "baby"],
        "actions": [("sitting on", ["couch", "bed", "chair", "sofa"]),
                    ("looking at", ["laptop", "television", "phone", "book"]),
                    ("laying on", ["bed", "couch", "blanket"])],
        "places": ["living room", "bedroom", "room", "house"],
        "adjectives": ["sleepy", "small", "tired", "young"],
        "scenes": ["a living room with a couch and a television", "a bedroom with a large bed",
                   "a desk with a laptop and a lamp", "a bathroom with a sink and a toilet"],
    },
}

DETERMINERS = ["a", "the"]
PREPOSITIONS = ["on", "in", "near", "at", "next to"]


def article(word: str) -> str:
    return "an" if word[0] in "aeiou" else "a"


def caption(rng: random.Random, topic: dict) -> str:
    form = rng.random()
    if form < 0.2:
        return rng.choice(topic["scenes"])
    subject = rng.choice(topic["subjects"])
    if rng.random() < 0.4:
        subject = rng.choice(topic["adjectives"]) + " " + subject
    verb, objects = rng.choice(topic["actions"])
    obj = rng.choice(objects)
    head = f"{article(subject)} {subject} {verb} {rng.choice(DETERMINERS)} {obj}"
    if form < 0.75:
        place = rng.choice(topic["places"])
        return f"{head} {rng.choice(PREPOSITIONS)} {rng.choice(DETERMINERS)} {place}"
    if form < 0.9:
        return head
    other = rng.choice(topic["subjects"])
    return f"{head} while {article(other)} {other} watches"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--lines", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=2018)
    parser.add_argument("--out", type=Path,
                        default=Path(__file__).resolve().parent.parent / "data" / "sample_captions.txt")
    args = parser.parse_args()
    rng = random.Random(args.seed)
    names = sorted(TOPICS)
    lines = [caption(rng, TOPICS[rng.choice(names)]) for _ in range(args.lines)]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
