"""Bayes filter against the measurement-only ablation on a noisy trace."""

from contactbayes import (ScenarioConfig, detect_events, fit_kde, generate_fit_dataset, generate_trace,
                          latency_stats, match_events, pointwise_metrics, run_filter)

contact, no_contact = generate_fit_dataset(ScenarioConfig())
model_c, model_nc = fit_kde(contact, "C"), fit_kde(no_contact, "NC")

trace = generate_trace(ScenarioConfig(n_drops=5, seed=3).with_noise(torque=1.0, acc=0.5))
print(f"{len(trace)} steps, {len(trace.events)} true transitions")

for mode in ("bayes", "measurement-only"):
    run = run_filter(trace.acc_z, trace.torques, model_c, model_nc, mode=mode)
    pw = pointwise_metrics(run.p_contact, trace.labels)
    ev = match_events(detect_events(run.p_contact, timestamps=trace.timestamps), trace.events)
    lat = latency_stats(ev)
    print(f"\n{mode}: success {pw.success_rate:.4f}")
    for kind in ("takeoff", "landing"):
        r, l = ev[kind], lat[kind]
        mean = "undefined" if l.mean_ms is None else f"{l.mean_ms:.1f} +- {l.std_ms:.1f} ms"
        print(f"  {kind:8} precision {r.precision}  recall {r.recall}  false positives {len(r.false_positives)}"
              f"  latency {mean}")
