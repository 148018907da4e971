"""Measured kernel cycle counts next to the published figures.

    python3 scripts/cycle_table.py [--grid 16x16] [--random-kernels 20] [--seed 0]
"""
import argparse

import numpy as np

from meshtta.array import ArrayConfig, run_batch
from meshtta.kernels import Kernel3x3, conv3x3_program, lbp3x3_program, load_shipped

PUBLISHED = {"lbp3x3": 74, "box_blur": 56, "conv_integer": 1553, "maxpool_w3_s2": 271}


def measure(program, rows, cols, rng):
    imgs = rng.integers(0, 65536, (4, rows, cols))
    _, stats = run_batch(ArrayConfig.single(rows, cols, program), imgs)
    return stats.cycles


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", default="16x16")
    ap.add_argument("--random-kernels", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rows, cols = map(int, args.grid.lower().split("x"))
    rng = np.random.default_rng(args.seed)

    rows_out = []
    for name in ("lbp3x3", "sobel_x", "sobel_y", "box_blur", "maxpool_w2_s2", "maxpool_w3_s2"):
        rep = lbp3x3_program() if name == "lbp3x3" else load_shipped(name)
        rows_out.append((name, rep.predicted_cycles, measure(rep.program, rows, cols, rng),
                         PUBLISHED.get(name)))
    conv = []
    for _ in range(args.random_kernels):
        w = rng.integers(-128, 128, 9)
        if w.any():
            conv.append(conv3x3_program(Kernel3x3.from_flat(w.tolist())))
    if conv:
        cycles = [measure(r.program, rows, cols, rng) for r in conv]
        rows_out.append((f"conv random x{len(conv)} (min)", min(r.predicted_cycles for r in conv),
                         min(cycles), None))
        rows_out.append((f"conv random x{len(conv)} (max)", max(r.predicted_cycles for r in conv),
                         max(cycles), PUBLISHED["conv_integer"]))

    print(f"{'kernel':<26}{'predicted':>10}{'measured':>10}{'published':>11}{'ratio':>8}")
    for name, pred, got, pub in rows_out:
        ratio = f"{got / pub:.2f}" if pub else "-"
        print(f"{name:<26}{pred:>10}{got:>10}{pub or '-':>11}{ratio:>8}")


if __name__ == "__main__":
    main()
