"""Monte-Carlo audit of the assembled generalization bounds.

For each operator shape the audit draws a family of random networks,
estimates its empirical Rademacher complexity from the weak residual
values, and checks estimate - 3*stderr <= assembled bound. The audits
are one-sided: they can confirm the inequality, never prove it tight.
Each honest audit is paired with a deliberately corrupted one (the
operator constant scaled by 1e-6) that must FAIL, so a vacuously loose
harness cannot slip through.

Reduced draw count for speed; `koopinn verify` runs the shipped scale.
"""

from koopinn import default_audit_suite

suite = default_audit_suite(seed=0, draws=800, family_size=20)

print("Rademacher audits (estimate - 3*stderr vs bound):")
print("name                        estimate      stderr       bound   verdict")
for audit in suite["rademacher"]:
    verdict = "pass" if audit["passed"] else "FAIL"
    expected = " (corruption caught)" if audit["name"].endswith("corrupted") \
        and not audit["passed"] else ""
    print(f"{audit['name']:<25} {audit['estimate']:>11.4e}"
          f" {audit['stderr']:>11.4e} {audit['bound']:>11.4e}"
          f"   {verdict}{expected}")

print()
print("1-d tanh composition norm, MC sup vs cosh(a):")
for check in suite["tanh_norm"]:
    margin = check["bound"] - check["empirical_norm"]
    print(f"  a={check['a']:<4} estimate {check['empirical_norm']:.6f} <= "
          f"cosh(a) {check['bound']:.6f} (margin {margin:.4f})")

print()
print(f"adjoint identity max discrepancy "
      f"{suite['adjoint_identity_max_discrepancy']:.3e}")
print(f"Cauchy-Schwarz max violation "
      f"{suite['cauchy_schwarz_max_violation']:.3e}")
print(f"suite passed: {suite['passed']}")
