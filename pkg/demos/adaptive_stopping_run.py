"""Matched width-only and component-aware trajectories on one batch.

Both rules walk the same shadow data.  The width-only rule may declare
success as soon as its severity score dips below tolerance; the
component-aware rule additionally demands minimum resources and two
consecutive passes, which suppresses the premature stop.
"""

from shadow_qfi.benchmark import NoiseConfig, build_instance
from shadow_qfi.controller import run
from shadow_qfi.estimator import BootstrapConfig
from shadow_qfi.stopping import StopConfig

inst = build_instance(NoiseConfig(4, 0.12, 0.03))
print(f"Instance: n=4, p_phi=0.12, F_ref = {inst.f_ref:.4f}, tolerance 0.2\n")

seed = 13696927791926439895  # a replicate whose width-only run stops early
boot = BootstrapConfig(seed=seed ^ 0xD1B54A32D192ED03)

for rule in ("width_only", "component_aware"):
    res = run(inst, StopConfig(epsilon=0.2, rule=rule), boot, seed)
    print(f"--- {rule} ---")
    for s in res.steps:
        b = s.bundle
        d = "inf" if b.d_k == float("inf") else f"{b.d_k:6.3f}"
        print(
            f"  it={s.iteration:2d} (K={s.k}, M={s.m:3d}) "
            f"f_hat={b.f_hat:7.4f} d={d} w={b.width:6.3f} -> {s.action}"
        )
    d = res.decision
    err = abs(d.f_hat - inst.f_ref)
    print(
        f"  terminal: {d.outcome} at (K={d.k_final}, M={d.m_final}), "
        f"estimate {d.f_hat:.4f}, true error {err:.4f}\n"
    )
