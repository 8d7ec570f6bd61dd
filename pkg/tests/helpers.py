"""Small shared helpers for the test modules."""

import math


def rel_err(a, b):
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def random_probs(rng, n, ties=False):
    """Positive weights normalized to one; with ``ties`` some values repeat."""
    if ties and n > 1:
        levels = [rng.uniform(0.2, 1.0) for _ in range(rng.randint(1, n - 1))]
        raw = [rng.choice(levels) for _ in range(n)]
    else:
        raw = [rng.uniform(0.05, 1.0) for _ in range(n)]
    total = math.fsum(raw)
    # equal weights divide to equal floats, so ties survive normalizing
    return [w / total for w in raw]


#: pass/fail lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line
