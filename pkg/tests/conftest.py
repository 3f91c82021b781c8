from __future__ import annotations

import pytest

from bootauth.crypto import make_provider
from bootauth.provisioning import (
    DEFAULT_AP_SEED,
    DEFAULT_BSP_SEED,
    DEFAULT_OEM_SEED,
    provision,
)


@pytest.fixture(params=["concrete", "symbolic"])
def provider(request):
    return make_provider(request.param)


@pytest.fixture(scope="session")
def concrete():
    return make_provider("concrete")


@pytest.fixture(scope="session")
def symbolic():
    return make_provider("symbolic")


@pytest.fixture
def record(provider):
    return provision(DEFAULT_OEM_SEED, DEFAULT_BSP_SEED, DEFAULT_AP_SEED, provider)
