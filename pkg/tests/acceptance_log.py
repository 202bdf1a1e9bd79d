"""Collects one verdict line per acceptance criterion; printed at the end of the pytest run."""

LINES = {}


def record(n, name, ok, detail, seconds):
    LINES[n] = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {name}: {detail} ({seconds:.1f}s)"
    print(LINES[n])
    return ok
