"""MPSNR of FastHyDe as a function of the subspace dimension k.

Prints one row per k together with the eigenvalue profile of the clean cube
and of the noise, which is the data needed to plot the robustness curve.

    python3 scripts/rank_sweep.py --sigma 0.1 --kmax 24
"""

import argparse

import numpy as np

from hsirestore.fasthyde import DenoiseRequest, fasthyde_iid
from hsirestore.metrics import report
from hsirestore.patch import DenoiserSpec
from hsirestore.simulate import add_case1, make_ground_truth
from hsirestore.subspace import IidNoise, learn_subspace


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--sigma", type=float, default=0.10)
    ap.add_argument("--rank", type=int, default=8)
    ap.add_argument("--kmax", type=int, default=24)
    ap.add_argument("--size", type=int, nargs=3, default=[64, 64, 32], metavar=("W", "H", "B"))
    ap.add_argument("--denoiser", choices=("bm3d", "nlmeans"), default="bm3d")
    args = ap.parse_args()

    w, h, nb = args.size
    clean = make_ground_truth(w, h, nb, args.rank, args.seed)
    noisy = add_case1(clean, args.sigma, args.seed + 1000)
    spec = DenoiserSpec.bm3d() if args.denoiser == "bm3d" else DenoiserSpec.nlmeans()
    vals = learn_subspace(noisy.matrix, nb).eigenvalues
    clean_vals = np.linalg.eigvalsh(clean.matrix @ clean.matrix.T / clean.n_pixels)[::-1]

    print(f"# noisy input MPSNR {report(clean, noisy).mpsnr:.2f} dB, noise power per direction {args.sigma**2:.4g}")
    print(f"{'k':>3} {'mpsnr':>7} {'mssim':>7} {'eig_noisy':>11} {'eig_clean':>11}")
    for k in range(1, min(args.kmax, nb) + 1):
        out = fasthyde_iid(DenoiseRequest(noisy, IidNoise(args.sigma), k, spec)).restored
        rep = report(clean, out)
        print(f"{k:>3} {rep.mpsnr:7.2f} {rep.mssim:7.4f} {vals[k - 1]:11.4g} {max(clean_vals[k - 1], 0):11.4g}")


if __name__ == "__main__":
    main()
