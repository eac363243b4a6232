#!/usr/bin/env python3
"""Conditionals of hand-constructed models versus sampled histograms.

Two manually parameterized models (a multimodal 2D machine with four
hidden units and a 3D machine with one hidden unit) are sampled with the
exact mixture sampler; windowed empirical conditionals from those samples
are compared against the corresponding child-model densities.  Since the
models are the ground truth by construction, the MSE here measures only
sampling noise plus the correctness of the reparameterization.
"""

import argparse

import numpy as np

from rtbm.density import condition_on, log_pdf_many
from rtbm.model import RtbmParams
from rtbm.sampling import empirical_conditional, sample_visible

MULTIMODAL_2D = RtbmParams(
    t=[[28.77, 0.0], [0.0, 6.3]],
    q=(np.array([[15.48, 8.82, -3.19, -3.67],
                 [8.82, 17.99, 8.94, -4.04],
                 [-3.19, 8.94, 15.74, 4.14],
                 [-3.67, -4.04, 4.14, 5.54]]) + 4.0 * np.eye(4)),
    w=[[18.54, 3.02, -12.89, -5.45],
       [0.46, 1.01, -1.32, -5.54]],
    bv=[-1.76, -2.69],
    bh=[-0.31, 2.29, 1.65, -2.73])

THREE_DIM = RtbmParams(
    t=[[16.02, -6.52, -6.76],
       [-6.52, 29.04, -2.56],
       [-6.76, -2.56, 42.16]],
    w=[[-15.76], [2.29], [2.09]],
    q=[[19.18]],
    bv=[1.08, -0.67, 4.86],
    bh=[3.17])


def compare(name, params, cond_index, values, count, seed, window, bins):
    samples = sample_visible(params, count, seed=seed)
    print(f"{name}: {count} samples (seed {seed})")
    for value in values:
        hist = empirical_conditional(samples, [cond_index], [value],
                                     window=window, bins=bins)
        child, free = condition_on(params, [cond_index], [value])
        if hist.dims == 1:
            pts = hist.centers[0][:, None]
            ref = np.exp(log_pdf_many(child, pts))
        else:
            cx, cy = hist.centers
            grid = np.stack(np.meshgrid(cx, cy, indexing="ij"), -1).reshape(-1, 2)
            ref = np.exp(log_pdf_many(child, grid)).reshape(cx.size, cy.size)
        mse = float(np.mean((hist.density - ref) ** 2))
        label = f"P({','.join(f'x{i}' for i in free)}|x{cond_index}={value:g})"
        print(f"  {label:>24}: mse={mse:.4g} "
              f"({int(hist.counts.sum())} in-window)")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=600000)
    ap.add_argument("--seed", type=int, default=23)
    ap.add_argument("--window", type=float, default=0.05)
    ap.add_argument("--bins", type=int, default=None,
                    help="bins per free axis (default: 40 for 1D, 30 for 2D)")
    args = ap.parse_args()

    compare("multimodal 2D", MULTIMODAL_2D, 1, (2.0, 1.3, 0.4),
            args.count, args.seed, args.window, args.bins or 40)
    compare("three-dimensional", THREE_DIM, 2, (-0.4, -0.6, -0.8),
            args.count, args.seed, args.window, args.bins or 30)


if __name__ == "__main__":
    main()
