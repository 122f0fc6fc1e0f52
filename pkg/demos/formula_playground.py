"""Parsing and evaluating spatial formulas over a busy intersection view.

Shows the concrete syntax, satisfaction over single views and the
multi-view, the named protocol checks, and the twist/inversion duality.
"""

from crossings import build_multiview, eval_formula, eval_multiview, invert, parse, twist
from crossings.logic import default_valuation, pretty
from crossings.scenario import load_scenario

scenario = load_scenario("left-turn")
ts = scenario.snapshot()
mv = build_multiview(scenario.topo, ts, "E", scenario.h_b, scenario.h_f)
nu = default_valuation(ts, "E")
v1 = mv.views[0]

samples = [
    "<re(ego) ; free ; (cs & free)>",   # room to start the left turn
    "<re(ego) ; free & l < 60.0 ; cs>", # the crossing is ahead within reach
    "<[re(D) / free]>",                 # D somewhere on the facing lane
    "<re(A) & cs>",                     # A still occupies a crossing cell
    "E c. (!(c = ego) & <re(ego) & re(c)>)",  # any overlap with ego?
]
print("== on the view along E's own path ==")
for text in samples:
    f = parse(text, params=scenario.params)
    print(f"  {str(eval_formula(ts, v1, nu, f)):5}  {text}")

print("\n== named protocol checks over the whole multi-view ==")
for text in ("@ca", "@col", "@ph(D)", "@ph(A)", "@ph(G)", "@lc(G)", "@safe"):
    f = parse(text, params=scenario.params)
    verdict = eval_multiview(ts, mv, nu, f, mode="exists")
    print(f"  {str(verdict):5}  {text}")

print("\n== twisting the view by 180 degrees ==")
phi = parse("<re(E) ; free ; cs>")
print("  formula:         ", pretty(phi)[:60], "...")
print("  on V1:           ", eval_formula(ts, v1, nu, phi))
print("  inverse on twist:", eval_formula(ts, twist(v1), nu, invert(phi)))
print("  plain on twist:  ", eval_formula(ts, twist(v1), nu, phi))
