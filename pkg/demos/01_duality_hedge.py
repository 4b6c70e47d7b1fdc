# Capping a price through the dual: a one-node walk-through.
#
# Run from the repository root:  python demos/01_duality_hedge.py

import math

from flexhedge import lp_core
from flexhedge.market import (
    DispatchInputs,
    Generator,
    Load,
    build_economic_dispatch,
    build_hedged_dispatch,
    extract_lmp,
    flexreq_var,
)

# One bus, cheap local generation (3 MW at 20) and unlimited imports at 100.
# The load is fixed at 5 MW and would pay up to 150.
gens = [Generator("dist", None, 3.0, 20.0), Generator("trans", None, math.inf, 100.0)]
loads = [Load("prl", None, 5.0, 5.0, 150.0)]

plain = build_economic_dispatch(DispatchInputs(gens, loads))
sol = lp_core.solve(plain)
print("no cap:   price", extract_lmp(plain, sol), " imports", sol["pg[trans]"])

# Now ask for a price of at most 75. The dual constraint price <= 75 turns into
# a primal column: flexibility, paid 75 per MW, that the optimizer can buy instead
# of imports. Whenever it buys any, complementary slackness pins the price to 75.
capped = build_hedged_dispatch(DispatchInputs(gens, loads, {"k": 75.0}))
sol = lp_core.solve(capped)
print("cap 75:   price", extract_lmp(capped, sol), " imports", sol["pg[trans]"],
      " flexibility", sol[flexreq_var("k")])

# The dual is a proper certificate: same objective both ways.
print("primal objective", sol.objective, " dual objective", lp_core.dual_objective(capped, sol))

# Raise the cap above the import price and the flexibility column stays idle.
loose = build_hedged_dispatch(DispatchInputs(gens, loads, {"k": 120.0}))
sol = lp_core.solve(loose)
print("cap 120:  price", extract_lmp(loose, sol), " flexibility", sol[flexreq_var("k")])
