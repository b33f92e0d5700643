"""Regenerate the CSV tables referenced by the scenario files."""

from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent


def write(name, values):
    np.savetxt(HERE / name, values, fmt="%.17g", delimiter=",")


def main():
    t = np.arange(200) / 200.0
    write("forcing_200.csv", 1.0 + 0.5 * np.sin(2 * np.pi * t))
    write("a_ramp_64.csv", 0.5 + 0.5 * np.linspace(0.0, 1.0, 64))
    # r = s = a = 1 gives h0 = 0.5 - e, so this e makes h0 = 0.3 - 0.6 x
    write("e_sign_change_512.csv", 0.2 + 0.6 * np.linspace(0.0, 1.0, 512))


if __name__ == "__main__":
    main()
