import pytest

from dacplant.config import parse_config
from dacplant.world.build import build_world


def make_world(doc: dict, seed: int = 0):
    return build_world(parse_config(doc), seed)


@pytest.fixture
def open_doc():
    return {"arena": {"width": 10.0, "height": 8.0, "home": [0.2, 0.2, 1.8, 1.8], "sorting": [0.2, 0.2, 1.8, 1.8]}}


ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def ac_report():
    def report(name: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[name] = (ok, detail)
        print(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")
    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")
