"""How a correlation cap reshapes an exponential-utility investor's plan.

Without the cap the investor holds a constant amount in the stock. Requiring
terminal wealth to be negatively correlated with a benchmark index pushes
the holding down to a short position, and the size of that short depends on
how many periods are left.
"""

from corrport import csgp, cpc, derive_constants, pi_bar, baseline_grid, baseline_params
from corrport.strategies import unconditional_correlation, unconstrained

params = baseline_params()

print("Unconstrained amount per period:", round(pi_bar(params, baseline_grid()), 6))
print("Its correlation with the index at N=8:",
      round(unconditional_correlation(params, baseline_grid(8), unconstrained(params, baseline_grid(8))), 4))
print()

# The equilibrium plan is solved backwards: the last date sees the smallest
# short, earlier dates must also offset the income still to come.
for n in (2, 4, 8):
    grid = baseline_grid(n)
    eq = csgp(params, grid)
    pre = cpc(params, grid)
    print(f"N={n}")
    print("  CSGP:", " ".join(f"{x:+.5f}" for x in eq))
    print("  CPC: ", f"{pre[0]:+.5f} on every date")

# The final entry never depends on the horizon.
print()
print("Last CSGP entry for N = 2, 6, 10:", {n: round(csgp(params, baseline_grid(n))[-1], 9) for n in (2, 6, 10)})

# How strong a hedge can be demanded at all?
for n in (1, 2, 8, 20):
    bound = derive_constants(params, baseline_grid(n)).admissibility_bound()
    print(f"largest admissible delta with {n:2d} periods: {bound:.4f}")
