"""Walk through the device-id bridge: discovery, the generated attacker, the leak.

    python demos/ordering_leak.py
"""

from bridgeflow.air import parse_program
from bridgeflow.babelview import render_airtext
from bridgeflow.fixtures import fixture_text
from bridgeflow.instrument import instrument
from bridgeflow.interfaces import interface_methods, map_webviews
from bridgeflow.oracle import enumerate_sequences, interpret
from bridgeflow.pipeline import analyze_program

program = parse_program(fixture_text("imei_order"))

# which Webviews may hold which bridge objects
wmap = map_webviews(program)
print("interface map:", wmap.as_dict())
for w in wmap.webviews():
    print(f"  {w} exports", sorted(str(m) for m in interface_methods(program, wmap, w)))

# the attacker subclass that replaces every Webview allocation
_, generated = instrument(program, wmap)
print()
print(render_airtext(generated["WebView"]))

# static result: one leak, blamed on the method that returned the value
analysis = analyze_program(program, "imei_order")
for alarm in analysis.report.alarms:
    ev = alarm.evidence
    print(f"{alarm.category.value}: {ev['source']} -> {ev['sink']} via {ev['attribution']}")

# the concrete interpreter agrees, and shows why order matters
methods = {m.name: m for m in interface_methods(program, wmap, "WebView")}
print()
for seq in enumerate_sequences(sorted(methods), 2):
    leaks = interpret(program, [methods[n] for n in seq]).leaks
    print(f"  {' then '.join(seq) or '(no calls)':<26} {sorted(leaks) or '-'}")

# remove the store into the field and nothing leaks any more
empty = parse_program(fixture_text("imei_order_empty"))
print("\nwithout initialize:", analyze_program(empty, "imei_order_empty").report.alarms)
