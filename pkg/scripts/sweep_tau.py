#!/usr/bin/env python3
"""Sweep the mining threshold tau and report multimodal ground-truth density.

For each tau the script mines the training split of a freshly generated
corpus and prints the member-set size distribution, plus how many distinct
motion families each held-out sample's mined set spans. Use it to pick a
tau where every sample sees several genuine future modes without the sets
collapsing to the full pool.
"""

from __future__ import annotations

import argparse
import dataclasses

import numpy as np

from mmforecast.config import RunConfig, load_config
from mmforecast.mining import mine_against, mine_multimodal_gt, split_by_sequence, window_corpus
from mmforecast.synthetic import generate_synthetic_corpus


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", help="key = value config file (defaults otherwise)")
    parser.add_argument(
        "--taus",
        default="0.02,0.04,0.08,0.16,0.32",
        help="comma-separated thresholds to sweep",
    )
    args = parser.parse_args()

    config = load_config(args.config) if args.config else RunConfig()
    taus = [float(t) for t in args.taus.split(",")]

    corpus = generate_synthetic_corpus(config.generator_config(), config.seed)
    samples = window_corpus(
        corpus, config.observed_frames, config.future_frames, config.window_stride
    )
    train, test = split_by_sequence(corpus, samples, config.test_fraction)
    train_by_id = {s.id: s for s in train}
    print(f"{len(samples)} samples -> {len(train)} train / {len(test)} test")
    print(f"{'tau':>8}{'members(min/mean/max)':>24}{'families(min/mean)':>20}")

    for tau in taus:
        index = mine_multimodal_gt(train, corpus.topology, tau)
        sizes = np.array([len(v) for v in index.members.values()])
        eval_members = mine_against(test, train, corpus.topology, tau, ensure_nonempty=True)
        families = np.array(
            [
                len({train_by_id[m].action_label for m in members})
                for members in eval_members.values()
            ]
        )
        print(
            f"{tau:>8.3f}"
            f"{f'{sizes.min()}/{sizes.mean():.1f}/{sizes.max()}':>24}"
            f"{f'{families.min()}/{families.mean():.2f}':>20}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
