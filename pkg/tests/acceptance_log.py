"""Collects one verdict per acceptance criterion for the end-of-run summary."""

RESULTS: list[tuple[str, bool, str]] = []


def record(name: str, ok: bool, detail: str) -> bool:
    RESULTS.append((name, ok, detail))
    print(f"[acceptance] {'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok
