"""Run every bundled app and look at which alarm categories travel together.

    python demos/corpus_correlation.py
"""

import numpy as np

from bridgeflow.alarms import aggregate_corpus
from bridgeflow.fixtures import fixture_names, fixture_path
from bridgeflow.pipeline import analyze_app

reports = [analyze_app(fixture_path(n))[0] for n in fixture_names()]
summary = aggregate_corpus(reports)
print(summary.table())

# keep categories that fired at least once
used = [i for i, c in enumerate(summary.categories) if summary.counts[c]]
names = [summary.categories[i] for i in used]
sub = summary.matrix[np.ix_(used, used)]

# strongest off-diagonal pairs, undefined entries skipped
iu = np.triu_indices(len(used), k=1)
vals = sub[iu]
order = np.argsort(-np.nan_to_num(np.abs(vals), nan=-1))
print("most correlated categories")
for k in order[:8]:
    if np.isnan(vals[k]):
        break
    print(f"  {names[iu[0][k]]:>18} ~ {names[iu[1][k]]:<18} {vals[k]:+.3f}")

# per-app indicator matrix, rows = apps
ind = np.array([[c in {a.category.value for a in r.alarms} for c in names] for r in reports], int)
print("\napps per number of distinct categories:", np.bincount(ind.sum(axis=1)))
