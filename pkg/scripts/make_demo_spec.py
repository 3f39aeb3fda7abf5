#!/usr/bin/env python3
"""Write the demo generator spec used by the pipeline scripts.

Four latent conditions over ten procedure codes. Code 100 is a shared,
ambiguous entry point; 101..104 are condition signatures; 105..109 form a
shared corridor that keeps two conditions mixed for a while (which is what
makes the entropy trajectories interesting to look at in the UI).
"""

import argparse

from medentropy.corpus import Condition, GeneratorSpec


def demo_spec(seed: int = 20_240, max_procedures: int = 6) -> GeneratorSpec:
    chains = {
        "a": (0.35, {"100": 0.15, "101": 0.85},
              {"100": {"101": 0.8, "105": 0.2},
               "101": {"105": 0.6, "106": 0.4},
               "105": {"108": 0.7, "101": 0.3},
               "106": {"105": 0.7, "107": 0.3},
               "107": {"106": 1.0},
               "108": {"109": 0.3, "106": 0.7},
               "109": {"106": 1.0}}),
        "b": (0.30, {"100": 0.15, "102": 0.85},
              {"100": {"102": 0.8, "105": 0.2},
               "102": {"105": 0.5, "107": 0.5},
               "105": {"108": 0.35, "102": 0.65},
               "107": {"105": 0.5, "106": 0.5},
               "106": {"107": 1.0},
               "108": {"109": 0.7, "107": 0.3},
               "109": {"107": 1.0}}),
        "c": (0.20, {"100": 0.15, "103": 0.85},
              {"100": {"103": 0.8, "106": 0.2},
               "103": {"106": 0.7, "105": 0.3},
               "106": {"103": 1.0},
               "105": {"103": 1.0}}),
        "d": (0.15, {"100": 0.15, "104": 0.85},
              {"100": {"104": 0.8, "106": 0.2},
               "104": {"107": 0.6, "105": 0.4},
               "107": {"104": 0.7, "105": 0.3},
               "105": {"104": 1.0},
               "106": {"104": 0.6, "107": 0.4}}),
    }
    emissions = {
        "a": [{"201": 0.50, "202": 0.25, "205": 0.25}, {"205": 0.7, "206": 0.3}],
        "b": [{"202": 0.45, "203": 0.30, "206": 0.25}, {"206": 0.8, "207": 0.2}],
        "c": [{"203": 0.55, "204": 0.25, "207": 0.20}, {"207": 0.6, "205": 0.4}],
        "d": [{"204": 0.60, "201": 0.20, "208": 0.20}, {"208": 0.9, "205": 0.1}],
    }
    conditions = [
        Condition(name, prior, initial, transitions, 0.2, emissions[name])
        for name, (prior, initial, transitions) in chains.items()
    ]
    return GeneratorSpec(conditions=conditions, seed=seed, max_procedures=max_procedures)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="output spec JSON path")
    parser.add_argument("--seed", type=int, default=20_240)
    args = parser.parse_args()
    spec = demo_spec(seed=args.seed)
    spec.validate()
    spec.save_json(args.out)
    print(f"wrote demo spec to {args.out}")
