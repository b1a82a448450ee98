import pytest

# criterion id -> list of (part, ok, detail, seconds)
_CRITERIA: dict[str, dict] = {}


@pytest.fixture
def criterion():
    """Record one sub-check of an acceptance criterion for the summary table."""

    def record(cid, title, part, ok, detail="", seconds=0.0):
        entry = _CRITERIA.setdefault(cid, {"title": title, "parts": []})
        entry["parts"].append((part, bool(ok), detail, seconds))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_CRITERIA):
        entry = _CRITERIA[cid]
        parts = entry["parts"]
        ok = all(p[1] for p in parts)
        seconds = sum(p[3] for p in parts)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {cid}  {entry['title']}  ({seconds:.2f} s)")
        for part, part_ok, detail, _ in parts:
            tr.write_line(f"        {'pass' if part_ok else 'FAIL'}: {part}" + (f" -- {detail}" if detail else ""))
