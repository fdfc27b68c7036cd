"""Intercept-and-resend on BB84 with blinded TES detectors.

Run: python demos/bb84_attack.py
"""

from tesfake import AttackScenario, ClickModel, analytic_qber, run_bb84_attack

# Half-energy pulses register 0.1737 times as often as full-energy ones.
model = ClickModel(p_click_full=1.0, p_click_half=0.1737)
print(f"closed-form QBER: {100 * analytic_qber(model):.2f}%")

for transmission in (1.0, 0.5, 0.3):
    scenario = AttackScenario(channel_transmission=transmission, trials=1_000_000, seed=11)
    stats = run_bb84_attack(scenario, model)
    lo, hi = stats.qber_ci()
    print(f"T = {transmission:.1f}: QBER {100 * stats.qber:.2f}% [{100 * lo:.2f}, {100 * hi:.2f}], "
          f"induced loss {100 * stats.induced_loss:.1f}%, verdict {stats.verdict}")

honest = run_bb84_attack(AttackScenario(trials=100_000, seed=11))
print(f"no eavesdropper: QBER {honest.qber:.3f}, induced loss {honest.induced_loss:.3f}")
