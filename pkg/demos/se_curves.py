"""Informed and uninformed state-evolution curves for noiseless real Gaussian sensing.

Writes alpha, informed MMSE and uninformed (algorithmic) MSE as CSV on stdout.
The uninformed curve leaves 1 at the weak-recovery threshold and reaches 0 at
the algorithmic full-recovery threshold; the informed curve drops to 0 just
above alpha = 1.

Run: python3 demos/se_curves.py > se_curves.csv   (a few seconds)
"""

import csv
import sys

import numpy as np

from phaseretrieval import spectra
from phaseretrieval.state_evolution import Informed, ProblemSpec, SEConfig, Uninformed, se_fixed_point


def main():
    ens = spectra.gaussian_iid(1)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["alpha", "mmse_informed", "mse_uninformed"])
    for alpha in np.round(np.arange(0.3, 1.501, 0.05), 10):
        spec = ProblemSpec.for_ensemble(ens, float(alpha))
        row = [alpha]
        for init in (Informed(), Uninformed()):
            row.append(se_fixed_point(spec, SEConfig(init=init, free_entropy=False)).mmse)
        out.writerow([f"{v:.6g}" for v in row])


if __name__ == "__main__":
    main()
