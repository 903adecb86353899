import os

os.environ.setdefault("SPREADLAB_LOG_TO_FILE", "false")

from fractions import Fraction

import pytest

from services_encoder import run_encoder
from services_lattice import STANDARD_LATTICES, m3
from services_orlicz import OrliczFunction, OrliczParams, Pattern
from services_pwl import identity_pwl
from services_submult import build_incomparable_family


@pytest.fixture
def params():
    return OrliczParams.validated("1/2", "2", "5/2")


@pytest.fixture
def identity():
    return identity_pwl()


@pytest.fixture
def all_ones(params):
    return OrliczFunction(params, Pattern.all_ones(64))


@pytest.fixture(params=sorted(STANDARD_LATTICES))
def standard_lattice(request):
    return STANDARD_LATTICES[request.param]()


@pytest.fixture(scope="session")
def family():
    """Two members, one request per nonempty proper subset."""
    return build_incomparable_family(2, 1)


@pytest.fixture(scope="session")
def m3_state():
    return run_encoder(m3(), OrliczParams(Fraction(1, 2), Fraction(2), Fraction(5, 2)), 6)
