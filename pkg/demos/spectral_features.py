"""What the transition model sees around a takeoff and a landing.

Slides the 32-sample window over a clean one-drop trace and prints the
window power, the median frequency and the two transition probabilities
at a few instants.
"""

import numpy as np

from contactbayes import EstimatorConfig, ScenarioConfig, generate_trace
from contactbayes.bayes import transition_from_features, window_features

cfg = EstimatorConfig()
trace = generate_trace(ScenarioConfig())
n = cfg.window_length
frames = np.lib.stride_tricks.sliding_window_view(trace.acc_z, n)
power, median = window_features(frames, cfg)

t_off = trace.event_times("takeoff")[0]
t_land = trace.event_times("landing")[0]
rate = trace.sample_rate

print(f"takeoff at {t_off:.3f} s, landing at {t_land:.3f} s")
print(f"{'time':>7} {'power':>10} {'median':>7} {'p_switch':>9} {'p_land':>7}")
for label, t in [("rolling", 1.0), ("takeoff", t_off + 0.02), ("free fall", t_off + 0.25),
                 ("landing", t_land), ("settled", t_land + 0.5)]:
    i = int(round(t * rate)) - (n - 1)  # window ending at t
    trans = transition_from_features(power[i], median[i], cfg)
    print(f"{t:7.3f} {power[i]:10.3f} {median[i]:7.2f} {trans.p_switch:9.4f} {trans.p_land_given_switch:7.3f}"
          f"  {label}")

# the smooth takeoff bump keeps its energy in the lowest bins, the ringing
# impact spreads it towards Nyquist; sigma_2 turns that into a direction
