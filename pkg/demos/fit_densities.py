"""Fit the two torque densities and look at their lookup grids."""

import numpy as np

from contactbayes import ScenarioConfig, TorqueSample, fit_kde, generate_fit_dataset, likelihood
from contactbayes.density import exact_log_density

contact, no_contact = generate_fit_dataset(ScenarioConfig())
model_c = fit_kde(contact, "C")
model_nc = fit_kde(no_contact, "NC")

for m in (model_c, model_nc):
    print(f"{m.state:>2}: n={m.sample_count} h={m.bandwidth:.4f} Nm  "
          f"box=[{m.lower[0]:.2f}, {m.upper[0]:.2f}] x [{m.lower[1]:.2f}, {m.upper[1]:.2f}]  "
          f"grid mass={m.grid_mass():.4f}")

# grid lookups against the exact kernel sum
rng = np.random.default_rng(0)
q = contact[rng.integers(0, len(contact), 5)] + 0.1
exact = np.exp(exact_log_density(contact, model_c.bandwidth, q))
approx = np.exp(model_c.log_density(q))
for row, e, a in zip(q, exact, approx):
    print(f"f_C({row[0]:6.2f}, {row[1]:5.2f}) exact {e:.6e} grid {a:.6e} rel err {abs(a / e - 1):.1e}")

# far from any data the density is floored, so one outlier cannot zero a belief
print("far away:", likelihood(model_c, TorqueSample(500.0, 500.0)))
