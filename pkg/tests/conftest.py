from fractions import Fraction

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from pseudodyn.cohomology import make_blowup_space

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

fractions = st.fractions(min_value=-20, max_value=20, max_denominator=12)


def class_coeffs(dim):
    return st.lists(fractions, min_size=dim, max_size=dim)


@pytest.fixture(scope="session")
def bl4():
    return make_blowup_space(4)


@pytest.fixture(scope="session")
def cat():
    from pseudodyn.maps import catalog
    return catalog()
