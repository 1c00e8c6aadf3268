"""Brute-force checks of the closed forms on small horizons.

Every shock is a fair coin flip, so for a few periods the whole sample space
can be listed and every expectation computed exactly.
"""

from corrport import csgp, cpc, oracle, baseline_grid, baseline_params
from corrport.harness import verify

params = baseline_params()
grid = baseline_grid(3)

eq = csgp(params, grid)
print("CSGP:", eq.amounts)
for m in range(grid.n_steps):
    print(f"  enumerated correlation given date {m}: {oracle.exact_correlation(params, grid, eq, m):.12f}")

pre = cpc(params, grid)
print("CPC time-0 correlation:", round(oracle.exact_correlation(params, grid, pre), 12))
# the precommitted plan is only tuned for date 0; later it overshoots
print("CPC correlation given date 2:", round(oracle.exact_correlation(params, grid, pre, 2), 6))

# Independent solutions: bisect the enumerated correlation and scan the utility.
print()
print("bisection of last cap:", oracle.bisect_cap(params, grid))
print("equal-weight bisection:", oracle.bisect_equal_weight(params, grid))
print("nested utility scan:", oracle.grid_search_csgp(params, baseline_grid(2)).amounts)

print()
print(verify(params, grid).text())
