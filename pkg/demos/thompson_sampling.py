"""Parallel Thompson sampling against random search.

A small version of the benchmark: targets are random functions drawn from
the prior, Thompson sampling takes two points per round.
"""

import numpy as np

from pathgp import BOConfig, run_bo


def main():
    base = dict(target="rff", dim=2, num_evals=32, batch_size=2, seeds=(0, 1, 2), refit=False,
                num_candidates=1024, refine_steps=20)
    for acq in ("ts", "random"):
        traces = run_bo(BOConfig(**base, acquisition=acq))
        final = [t.simple_regret[-1] for t in traces]
        print(f"{acq:>6}: final simple regret per seed {np.round(final, 4).tolist()}")


if __name__ == "__main__":
    main()
