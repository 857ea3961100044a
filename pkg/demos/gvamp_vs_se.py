"""Finite-size G-VAMP against the uninformed state-evolution prediction.

Complex Gaussian sensing, n = 500, three seeds per alpha.  Expect agreement
to a few percent away from the thresholds (1 and about 2.03) and larger
seed-to-seed spread close to them.

Run: python3 demos/gvamp_vs_se.py   (about ten seconds)
"""

import numpy as np

from phaseretrieval import gvamp, spectra
from phaseretrieval import scalar_models as sm
from phaseretrieval.state_evolution import ProblemSpec, SEConfig, se_fixed_point


def main(n=500, seeds=(0, 1, 2)):
    ens = spectra.gaussian_iid(2)
    prior, channel = sm.Prior(2, 1.0), sm.Channel(2, 0.0)
    print(f"{'alpha':>6}{'SE':>10}{'G-VAMP':>10}{'std':>8}")
    for alpha in (0.7, 1.3, 1.6, 1.9, 2.3):
        pred = se_fixed_point(ProblemSpec.for_ensemble(ens, alpha), SEConfig(free_entropy=False)).mmse
        finals = []
        for seed in seeds:
            inst, x, y = gvamp.generate_instance(ens, prior, channel, n, alpha, seed)
            res = gvamp.run(inst, y, prior, channel, gvamp.GvampConfig(seed=seed), truth=x)
            finals.append(res.final_mse)
        print(f"{alpha:>6.2f}{pred:>10.4f}{np.mean(finals):>10.4f}{np.std(finals):>8.4f}")


if __name__ == "__main__":
    main()
