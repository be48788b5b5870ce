#!/usr/bin/env python3
"""Writes the bundled toy knowledge graph to data/toy.

Entities belong to typed groups and carry a hidden 2-D position. Each relation
links two head types to one tail type, and connects a head to the tail
entities nearest its position plus a per-relation offset. The output is a
pure function of the seed.
"""

import argparse
import math
import os
import random

TYPES = 9
PER_TYPE = 15
RELATIONS = 46


def build(seed):
    rng = random.Random(seed)
    entities = []
    for t in range(TYPES):
        for i in range(PER_TYPE):
            entities.append((f"t{t}_e{i:02d}", t, (rng.uniform(-1, 1), rng.uniform(-1, 1))))
    by_type = [[e for e in entities if e[1] == t] for t in range(TYPES)]

    triples = []
    for r in range(RELATIONS):
        heads = rng.sample(range(TYPES), 2)
        tail_type = rng.randrange(TYPES)
        angle = rng.uniform(0, 2 * math.pi)
        offset = (0.6 * math.cos(angle), 0.6 * math.sin(angle))
        fanout = rng.choice([3, 4, 5, 6])
        for ht in heads:
            for name, _, (x, y) in by_type[ht]:
                tx, ty = x + offset[0], y + offset[1]
                ranked = sorted(by_type[tail_type],
                                key=lambda e: (e[2][0] - tx) ** 2 + (e[2][1] - ty) ** 2)
                for tail, _, _ in ranked[:fanout]:
                    if tail != name:
                        triples.append((name, f"r{r:02d}", tail))
    return triples


def split(triples, seed, frac=0.1):
    rng = random.Random(seed + 1)
    rng.shuffle(triples)
    n_eval = int(len(triples) * frac)
    valid, test, train = triples[:n_eval], triples[n_eval:2 * n_eval], triples[2 * n_eval:]
    # Every entity and relation must occur in train.
    seen = set()
    for h, r, t in train:
        seen.update((h, r, t))
    kept = {"valid": [], "test": []}
    for name, part in (("valid", valid), ("test", test)):
        for tr in part:
            if all(x in seen for x in tr):
                kept[name].append(tr)
            else:
                train.append(tr)
                seen.update(tr)
    return train, kept["valid"], kept["test"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "toy"))
    args = ap.parse_args()
    train, valid, test = split(build(args.seed), args.seed)
    os.makedirs(args.out, exist_ok=True)
    for name, rows in (("train", train), ("valid", valid), ("test", test)):
        with open(os.path.join(args.out, f"{name}.txt"), "w") as f:
            for h, r, t in rows:
                f.write(f"{h}\t{r}\t{t}\n")
        print(f"{name}: {len(rows)} triples")


if __name__ == "__main__":
    main()
