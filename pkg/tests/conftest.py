import numpy as np
import pytest

from stftvae import data


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def corpus():
    """Twenty binarized MNIST test digits."""
    return data.binarize(data.load_mnist_sample("test")).images[:20]


@pytest.fixture(scope="session")
def gray_corpus():
    return data.load_mnist_sample("test").images[:20]


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import sorted_lines

    lines = sorted_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
