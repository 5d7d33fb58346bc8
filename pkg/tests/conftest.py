import numpy as np
import pytest

from emocascade.corpus import SynthSpec, generate_synthetic_corpus
from emocascade.dataset import features_from_manifest


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """14 utterances per class; enough to train every stage."""
    out = tmp_path_factory.mktemp("small_corpus")
    return generate_synthetic_corpus(SynthSpec(utterances_per_class=14, seed=7), out)


@pytest.fixture(scope="session")
def small_table(small_corpus):
    return features_from_manifest(small_corpus)


@pytest.fixture
def blobs():
    """Two isotropic Gaussian blobs whose centers are 6 sigma apart."""

    def make(n, seed=0, dim=2, n_classes=2, sep=6.0):
        rng = np.random.default_rng(seed)
        centers = rng.normal(size=(n_classes, dim))
        centers = sep * centers / np.linalg.norm(centers, axis=1, keepdims=True)
        if n_classes == 2:
            centers = np.array([np.zeros(dim), np.r_[sep, np.zeros(dim - 1)]])
        y = np.arange(n) % n_classes
        X = centers[y] + rng.normal(size=(n, dim))
        return X, y

    return make


# --- acceptance reporting ----------------------------------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "setup" and report.skipped:
        _ACCEPTANCE[number] = (title, "SKIP", 0.0, str(report.longrepr[-1]) if report.longrepr else "")
    elif report.when == "call":
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        detail = str(report.longrepr[-1]) if report.skipped and report.longrepr else ""
        _ACCEPTANCE[number] = (title, status, report.duration, detail)
    elif report.when == "setup" and report.failed:
        _ACCEPTANCE[number] = (title, "FAIL", 0.0, "setup error")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status, seconds, detail = _ACCEPTANCE[number]
        line = f"[{status}] criterion {number}: {title} ({seconds:.2f}s)"
        if detail:
            line += f" - {detail}"
        terminalreporter.write_line(line)
