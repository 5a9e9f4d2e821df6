"""Writes a synthetic normalized transmission spectrum with 1% Gaussian noise."""
import sys

import numpy as np

KEX, KI, H = 1.15, 1.16, 1.08  # GHz


def transmission(d):
    kap = KEX + KI
    z = 1j * kap + d
    t = 1 - 2j * KEX * z / (z**2 - H**2)
    return np.abs(t) ** 2


def main(path):
    rng = np.random.default_rng(20240611)
    d = np.linspace(-10.0, 10.0, 401)
    y = transmission(d) + rng.normal(0.0, 0.01, d.size)
    with open(path, "w") as f:
        f.write("detuning_GHz,transmission\n")
        for a, b in zip(d, y):
            f.write(f"{a:.6f},{b:.6f}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/resonator_spectrum.csv")
