"""Step through the crossing protocol on the bundled scripted scenarios.

For each manoeuvre the controller transitions, actions and messages of the
ego car are printed as a compact timeline.
"""

from crossings.harness import run
from crossings.scenario import load_scenario


def timeline(events, car):
    for ev in events:
        d = dict(ev.payload)
        if ev.kind == "ControllerTransition" and d["inst"].startswith(f"{car}/"):
            if d["from"] != d["to"]:
                yield ev.time, f"{d['inst'].split('/', 1)[1]:12} {d['from']} -> {d['to']}  ({d['label']})"
        elif ev.kind == "Action" and d["car"] == car:
            yield ev.time, f"{'action':12} {d['kind']}"
        elif ev.kind == "Message" and d.get("role") == "send" and d.get("sender") == car:
            yield ev.time, f"{'broadcast':12} {d['channel']}!({d['payload']})"


for name, blurb in (
    ("lone-left-turn", "empty intersection: reserve without help"),
    ("helper-yes", "opposing car vouches, both manoeuvres run"),
    ("helper-no", "hidden conflict: the helper declines"),
    ("helper-timeout", "a silent potential helper forces retries"),
):
    scenario = load_scenario(name)
    verdict, events = run(scenario)
    print(f"\n=== {name}: {blurb} ===")
    shown = 0
    for when, line in timeline(events, "E"):
        print(f"  t={when:6.2f}  {line}")
        shown += 1
        if shown >= 18:
            print("  ... (run `crossings run", name, "--trace out` for the rest)")
            break
    print(f"  verdict: {'safe' if verdict.safe else 'UNSAFE'}"
          + (f", deadlocked: {sorted(verdict.deadlocked_cars)}"
             if verdict.deadlocked_cars else ""))
