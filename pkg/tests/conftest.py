import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from citeoverlap.core import CitingRecord, SourceDatabase, classify_doc_type  # noqa: E402


@pytest.fixture
def make_record():
    def make(rid, source, title, cited="X1", **kw):
        if "doc_type_raw" in kw and "doc_type" not in kw:
            kw["doc_type"] = classify_doc_type(kw["doc_type_raw"])
        return CitingRecord(record_id=rid, source=SourceDatabase(source), cited_doc_id=cited,
                            title_raw=title, **kw)

    return make


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
