"""Print the weak- and full-recovery thresholds for the four standard ensembles.

Run: python3 demos/thresholds_table.py   (about a minute, most of it in the
complex full-recovery bisections)
"""

from phaseretrieval import spectra, thresholds

ENSEMBLES = [
    spectra.gaussian_iid(1),
    spectra.gaussian_iid(2),
    spectra.column_orthonormal(1),
    spectra.column_orthonormal(2),
]


def main():
    print(f"{'ensemble':<22}{'alpha_WR,Algo':>15}{'alpha_FR,IT':>14}{'alpha_FR,Algo':>16}")
    for ens in ENSEMBLES:
        rep = thresholds.threshold_report(ens)
        print(f"{ens.label:<22}{rep.alpha_wr_algo:>15.4f}{rep.alpha_fr_it:>14.4f}"
              f"{rep.alpha_fr_algo:>16.4f}")


if __name__ == "__main__":
    main()
