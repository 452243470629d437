import os
import sys

from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None)
settings.load_profile("default")

# criterion number -> list of (ok, detail) recorded by test_acceptance.py
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}

TITLES = {
    1: "projection table reproduction",
    2: "CFL table reproduction",
    3: "convergence orders and spot values",
    4: "energy identity and drift",
    5: "oracle equivalence",
    6: "basis and mass properties",
    7: "projection-operator properties",
    8: "DoF and apply-time growth (timing substitute)",
}


def record(criterion: int, ok: bool, detail: str):
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p[0] for p in parts)
        n_ok = sum(good for good, _ in parts)
        tr.write_line(f"criterion {n} ({TITLES.get(n, '')}): {'PASS' if ok else 'FAIL'} "
                      f"[{n_ok}/{len(parts)} checks]")
    tr.section("acceptance details")
    for n in sorted(ACCEPTANCE):
        for good, d in ACCEPTANCE[n]:
            tr.write_line(f"  {n} {'ok    ' if good else 'FAILED'} {d}")
