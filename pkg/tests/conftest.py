import pytest
from hypothesis import HealthCheck, settings

from corpusprep import fixtures, langid
from corpusprep.ngram_lm import train_from_texts

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def lid_split():
    return fixtures.lid_split()


@pytest.fixture(scope="session")
def lid_model(lid_split):
    train, _ = lid_split
    return langid.train_profiles(train)


@pytest.fixture(scope="session")
def harmful_lines():
    return fixtures.harmful_corpus(seed=0)


@pytest.fixture(scope="session")
def harmful_lm(harmful_lines):
    return train_from_texts(harmful_lines)


@pytest.fixture(scope="session")
def model_files(tmp_path_factory, lid_model, harmful_lm):
    d = tmp_path_factory.mktemp("models")
    lid_model.save(d / "lid.json")
    harmful_lm.save(d / "harmful.knlm")
    return d / "lid.json", d / "harmful.knlm"
