import pytest

from bcexcl.config import preset
from bcexcl.engine import PartitionEngine

# criterion number -> (passed, detail), filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def run_preset(name: str, **overrides):
    cfg = preset(name, **overrides)
    fam = cfg.family_obj()
    return cfg, fam, PartitionEngine(fam, cfg.engine_config()).run()


@pytest.fixture(scope="session")
def recurrent_run():
    return run_preset("recurrent")


@pytest.fixture(scope="session")
def conservation_run():
    return run_preset("conservation")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_configure(config):
    config.addinivalue_line("markers", "property: hypothesis-driven property test")


def pytest_collection_modifyitems(items):
    for item in items:
        if getattr(getattr(item, "obj", None), "is_hypothesis_test", False):
            item.add_marker("property")
