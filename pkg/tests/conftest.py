import json
import random
from pathlib import Path

import pytest

from propnet.pipeline import PipelineConfig, run_pipeline

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
STUDY = FIXTURES / "study"


@pytest.fixture(scope="session")
def study_dir() -> Path:
    return STUDY


@pytest.fixture(scope="session")
def truth():
    return json.loads((STUDY / "truth.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def study_run(tmp_path_factory):
    """One full pipeline run on the bundled fixture, shared by read-only tests."""
    out = tmp_path_factory.mktemp("study_out")
    cfg = PipelineConfig.from_toml(STUDY / "pipeline.toml", output_dir=out)
    manifest = run_pipeline(cfg)
    return out, manifest


def random_digraph(rng: random.Random, n: int, p: float, weights=(1,)):
    nodes = tuple(f"v{i:02d}" for i in range(n))
    w = {}
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < p:
                w[nodes[i], nodes[j]] = rng.choice(weights)
    return nodes, w


# -- acceptance summary --------------------------------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed and not rep.skipped):
        return
    label, title = mark.args
    if hasattr(rep, "wasxfail"):
        status = "FAIL (expected, see known limitation)" if rep.skipped else "PASS (unexpectedly)"
    else:
        status = "PASS" if rep.passed else "FAIL"
    prev = _CRITERIA.get(label)
    if prev is None or prev[1] == "PASS":
        _CRITERIA[label] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, (title, status) in sorted(_CRITERIA.items(), key=lambda kv: (int(kv[0].split()[0].rstrip("abc")), kv[0])):
        terminalreporter.write_line(f"criterion {label:<14} {status:<5}  {title}")
