import pytest

from _support import (
    example_source,
    example_target_literal,
    example_target_marginal_shift,
)


@pytest.fixture
def source():
    return example_source()


@pytest.fixture
def target_literal():
    return example_target_literal()


@pytest.fixture
def target_marginal_shift():
    return example_target_marginal_shift()
