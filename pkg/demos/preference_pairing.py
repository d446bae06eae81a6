"""How a cached password becomes a preference leak.

The bridge in this app stores a database value under a key built with a
StringBuilder and another method returns whatever is stored under that key.
Neither flow alone reaches the page; paired by key and type they do.

    python demos/preference_pairing.py
"""

from bridgeflow.air import Invoke, parse_program
from bridgeflow.fixtures import fixture_text
from bridgeflow.pipeline import analyze_program
from bridgeflow.strings import fold_strings

for name in ("swingaid", "swingaid_key_mismatch", "swingaid_type_mismatch"):
    program = parse_program(fixture_text(name))

    # keys as the string folder sees them at each preference call
    keys = []
    for m in program.app_methods():
        consts = fold_strings(m)
        for i, ins in enumerate(m.body):
            if isinstance(ins, Invoke) and ins.target.cls.startswith("SharedPreferences") \
                    and ins.target.name[:3] in ("put", "get") and len(ins.args) > 1:
                keys.append((m.name, ins.target.name, consts.get(i, ins.args[1])))

    a = analyze_program(program, name)
    print(f"== {name}")
    for method, call, key in keys:
        print(f"   {method:<16} {call:<10} key={key!r}")
    for pl in a.pref_leaks:
        print(f"   paired: key={pl.key} type={pl.value_type} suspicious={pl.suspicious} "
              f"{pl.put.source} -> {pl.get.sink}")
    if not a.pref_leaks:
        print("   no pairing")
    print("   alarms:", sorted(al.category.value for al in a.report.alarms))
