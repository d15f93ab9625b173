"""A scaled-down reliability grid with summary metrics.

Runs a handful of replicates at two noise levels for both stopping
rules and prints false-stop rate, stop rate, and stop precision with
Wilson intervals.  The full study uses configs/default.json through
the CLI.
"""

from shadow_qfi.estimator import BootstrapConfig
from shadow_qfi.harness import GridSpec, run_grid
from shadow_qfi.stopping import StopConfig

spec = GridSpec(
    n_qubits=4,
    p_phi_list=(0.0, 0.24),
    replicates=6,
    rules=("width_only", "component_aware"),
    epsilon=0.2,
    base_seed=20240501,
)
records, summaries, _ = run_grid(spec, StopConfig(epsilon=0.2), BootstrapConfig(replicates=100))

print(f"{'rule':>18s} {'p_phi':>6s} {'FSR':>16s} {'SR':>16s} {'SP':>5s} {'med err':>8s}")
for s in summaries:
    sp = " n/a" if s.sp is None else f"{s.sp:4.2f}"
    print(
        f"{s.rule:>18s} {s.p_phi:6.2f} "
        f"{s.fsr:4.2f} [{s.fsr_lo:4.2f},{s.fsr_hi:4.2f}] "
        f"{s.sr:4.2f} [{s.sr_lo:4.2f},{s.sr_hi:4.2f}] {sp} "
        f"{s.median_abs_err:8.3f}"
    )
print("\nEvery false stop is a success declaration whose true error exceeds 0.2.")
