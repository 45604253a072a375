"""A small version of the noise-robustness heatmap."""

import numpy as np

from contactbayes import ScenarioConfig, fit_kde, generate_fit_dataset, noise_sweep

base = ScenarioConfig()
contact, no_contact = generate_fit_dataset(base)
models = fit_kde(contact, "C"), fit_kde(no_contact, "NC")

sigmas = [0.0, 1.0, 2.0, 10.0]
report = noise_sweep(base, sigmas, sigmas, episodes_per_cell=4, model_c=models[0], model_nc=models[1], jobs=2)

print("rows: torque noise (Nm), columns: accel noise (m/s^2)")
print("        " + "".join(f"{s:>8}" for s in sigmas))
for s, row in zip(sigmas, report.success):
    print(f"{s:>8}" + "".join(f"{v:8.3f}" for v in row))
print("\nworst cell:", np.round(report.success.min(), 3))
