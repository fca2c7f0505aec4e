"""Collects the acceptance verdicts and prints one line per criterion after the run."""

from collections import defaultdict

ACCEPTANCE: dict[int, list[tuple[bool, str]]] = defaultdict(list)


def record(criterion: int, ok: bool, detail: str) -> None:
    ok = bool(ok)
    ACCEPTANCE[criterion].append((ok, detail))
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        tag = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(("" if ok else "[FAIL] ") + d for ok, d in parts)
        terminalreporter.write_line(f"criterion {k}: {tag}  {detail}")
