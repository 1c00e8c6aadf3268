"""Sweeps over hedge strength, horizon and volatility.

Each sweep reads a JSON config from configs/ and writes a CSV next to this
script. The same runs are available from the shell, e.g.

    corrport sweep --config demos/configs/delta_sweep.json --workers 4
"""

from pathlib import Path

from corrport import harness

here = Path(__file__).parent
for name in ("delta_sweep", "horizon_sweep", "sigma_sweep"):
    config = harness.load_config(here / "configs" / f"{name}.json")
    rows = harness.run_config(config, workers=4)
    out = harness.emit(rows, here / f"{name}.csv")
    print(f"== {name} -> {out.name}")
    for r in rows:
        if r.skipped:
            print(f"  {r.value:<6} {r.strategy:6} skipped ({r.note})")
            continue
        print(f"  {r.value:<6} {r.strategy:6} E[U] {r.expected_utility:+.5f}  "
              f"shortfall {r.risk_shortfall:+.4f}  dU {r.utility_change:+.3f}  dRisk {r.risk_change:+.3f}")
