import os
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from myograph.pipeline import analyze_session, read_manifest
from myograph.synth import make_protocol_dataset, write_manifest

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")

FS = 2048.0


@pytest.fixture(scope="session")
def protocol_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("protocol")
    paths = make_protocol_dataset(str(out))
    write_manifest(paths, os.path.join(out, "manifest.json"))
    return out


@pytest.fixture(scope="session")
def protocol_paths(protocol_dir):
    return sorted(str(p) for p in protocol_dir.iterdir() if p.name.startswith("trial"))


@pytest.fixture(scope="session")
def protocol_session(protocol_dir):
    return analyze_session(read_manifest(os.path.join(protocol_dir, "manifest.json")))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


SESSION_START = time.perf_counter()
ACCEPTANCE_LINES: list[str] = []


def pytest_collection_modifyitems(config, items):
    # acceptance criteria run last so the suite-runtime check sees the whole run
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""
    def report(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
