#!/usr/bin/env python3
"""Regenerate the synthetic measurement files in src/bsthreshold/data."""
from pathlib import Path

import numpy as np

from bsthreshold.charfit import exp_gauss, hom_model, linewidth_ghz, transmission_model

DATA = Path(__file__).resolve().parents[1] / "src" / "bsthreshold" / "data"


def write(name, header, rows, comments=()):
    lines = [f"# {c}" for c in comments] + [header]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    (DATA / name).write_text("\n".join(lines) + "\n")


def main():
    DATA.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(1)
    theta = np.arange(0.0, 91.0, 5.0)
    sigma = np.full_like(theta, 0.005)
    a0 = hom_model(theta, 1.0, 0.9, 10.0) + sigma * rng.standard_normal(theta.size)
    write("hom_synthetic.csv", "theta_deg,a0,sigma", zip(theta, np.abs(a0), sigma),
          ["synthetic: A_m=1, A_c=0.9, phi=10 deg, noise sigma=0.005, seed 1"])

    rng = np.random.default_rng(2)
    gamma = linewidth_ghz(2.89)
    det = np.linspace(-2.0, 2.0, 401)
    tr = transmission_model(det, gamma, 0.1 * gamma, 0.92, 0.2) + 0.002 * rng.standard_normal(det.size)
    write("transmission_synthetic.csv", "detuning_ghz,transmission", zip(det, tr),
          ["synthetic: beta=0.92, gamma=2.89/ns linewidth, gamma_d=0.1 gamma, chi=0.2, noise 0.002, seed 2"])

    rng = np.random.default_rng(3)
    t = np.arange(0.0, 10.0, 0.02)
    counts = rng.poisson(exp_gauss(t, 1e4, 2.89, 1.0, 0.05) + 5.0)
    write("decay_synthetic.csv", "time_ns,counts", zip(t, counts),
          ["synthetic: gamma=2.89/ns, t0=1 ns, IRF sigma=0.05 ns, background 5, Poisson, seed 3"])

    length = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    write("loss_synthetic.csv", "length_mm,intensity", zip(length, 10.0 ** (-10.5 * length / 10.0)),
          ["synthetic: 10.5 dB/mm, unit input intensity"])


if __name__ == "__main__":
    main()
