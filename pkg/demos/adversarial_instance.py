"""
Why lambda-only search can fail
===============================

Three labels sit at (eps, 1), (1, eps) and (1/2, 1/2) in the (h, g) plane.
The middle one has the largest product h*g, but it lies strictly inside the
convex hull, so no weight lam makes it the argmax of h + lam*g.  Every search
that only asks the plain oracle is stuck with a product near eps.
"""

import numpy as np

from slackrescale import SearchConfig, angular_search, run_search
from slackrescale.data import adversarial_instance

inst = adversarial_instance(1e-3, 1.0, 1.0)
print("labels:", inst.labels)
print("h:", inst.h, " g:", inst.g, " h*g:", inst.h * inst.g)

# sweep the oracle weight over twelve decades; the middle label never comes back
answers = {inst.lambda_oracle(float(lam)).label for lam in np.logspace(-6, 6, 2001)}
print("labels returned by the plain oracle:", sorted(answers))

for name in ("sarawagi", "binary", "bisecting"):
    o = run_search(name, inst)
    print(f"{name:>10s}: label {o.best_label}  h*g={o.best_phi:.4g}  queries={o.queries}")

# restricting the slope g/h to a wedge around 1 exposes the middle label
o = angular_search(inst, SearchConfig(trace=True))
print(f"{'angular':>10s}: label {o.best_label}  h*g={o.best_phi:.4g}  queries={o.queries}  {o.certificate.kind}")
for rec in o.trace:
    if "alpha" in rec:
        print(f"    wedge [{rec['beta']:.3g}, {rec['alpha']:.3g}] at lam={rec['lam']:.3g} -> h*g={rec['phi']}")
