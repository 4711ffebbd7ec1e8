"""Certify a hand-picked decision point and inspect the LMI margins.

The stability conditions ask for a weight chi of the Lyapunov cross term and
multipliers lambda such that three small symmetric matrices are sign
definite.  This script checks one feasible point and one infeasible point
(chi too large) and prints the decisive eigenvalue of each matrix.
"""

from wavecert import (DecisionVars, ProblemParams, check_stability,
                      make_certificate)

params = ProblemParams(n=1, k=1.0, g1=0.1, delta=0.05)

good = DecisionVars(chi=0.2, lambda1=0.15)
report = check_stability(params, good)
print("chi = 0.2:")
for name, value in report["margins"].items():
    print("  %-8s %+.3e  %s" % (name, value,
                                "ok" if report[name + "_ok"] else "VIOLATED"))

cert = make_certificate(params, good)
print("certified: alpha = %.4f, beta = %.4f" % (cert.alpha, cert.beta))
print("energy envelope: alpha E <= V <= beta E along every solution")

# chi >= 1/2 breaks positivity of the envelope matrix in one dimension
bad = DecisionVars(chi=0.6, lambda1=0.15)
report = check_stability(params, bad)
print("\nchi = 0.6:")
for name, value in report["margins"].items():
    print("  %-8s %+.3e  %s" % (name, value,
                                "ok" if report[name + "_ok"] else "VIOLATED"))
print("feasible:", report["feasible"])
