"""
How fast the angular search closes the gap
==========================================

After the first answer z the ratio v1 = max(lam*g/h, h/(lam*g)) is known.
At every later step t the incumbent is within v1**(4/(t+1)) of the optimum.
This script traces one large instance and prints the guarantee next to the
true ratio.
"""

import numpy as np

from slackrescale import SearchConfig, angular_search
from slackrescale.data import random_instance

inst = random_instance(5000, "lognormal", seed=11)
star = float(np.max(inst.h * inst.g))
o = angular_search(inst, SearchConfig(stop_ratio=1.0, queue="fifo", trace=True))
v1 = o.info["v1"]
print(f"M={inst.size}  optimum {star:.5g}  v1={v1:.4g}  queries={o.queries}")
print(f"{'t':>4s}  {'incumbent':>10s}  {'true ratio':>10s}  {'guarantee':>10s}")
for rec in o.trace:
    if "iteration" in rec:
        t = rec["iteration"]
        print(f"{t:4d}  {rec['phi_hat']:10.5g}  {star / rec['phi_hat']:10.5f}  {v1 ** (4 / (t + 1)):10.5f}")
