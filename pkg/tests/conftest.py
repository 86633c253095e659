import pytest
from hypothesis import settings

from weilcalc import catalog

settings.register_profile("weilcalc", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("weilcalc")


@pytest.fixture(scope="session")
def entries():
    return catalog.entries()
