"""Build the synthetic two-block corpus and train the model the e2e UI
test serves. Self-contained on purpose: the frontend suite only needs the
installed techinfer package and numpy.

Usage: python3 make_model.py OUTPUT_DIR
"""

import sys
from pathlib import Path

import numpy as np

from techinfer.dataset import InteractionDataset, to_matrix, write_csv
from techinfer.model import save_model
from techinfer.wmf import WmfHyperparams, train_wmf


def planted_pairs(seed=0, m=200, n=50, per_entity=8, noise_frac=0.05):
    rng = np.random.default_rng(seed)
    reports = [f"r{i:03d}" for i in range(m)]
    techniques = [f"T{1000 + j:04d}" for j in range(n)]
    half_m, half_n = m // 2, n // 2
    pairs = set()
    for i in range(m):
        block = range(half_n) if i < half_m else range(half_n, n)
        for j in rng.choice(list(block), size=per_entity, replace=False):
            pairs.add((reports[i], techniques[int(j)]))
    n_noise = int(round(noise_frac * len(pairs)))
    while n_noise > 0:
        i = int(rng.integers(m))
        off_block = range(half_n, n) if i < half_m else range(half_n)
        pair = (reports[i], techniques[int(rng.choice(list(off_block)))])
        if pair not in pairs:
            pairs.add(pair)
            n_noise -= 1
    return sorted(pairs)


def main(out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = InteractionDataset.from_pairs(planted_pairs())
    (out / "data.csv").write_bytes(write_csv(ds))
    model = train_wmf(
        to_matrix(ds),
        WmfHyperparams(embedding_dim=4, epochs=15, seed=0),
        ds.entities,
        ds.items,
    )
    (out / "model.json").write_bytes(save_model(model))
    print(f"model ready: {out / 'model.json'}")


if __name__ == "__main__":
    main(sys.argv[1])
