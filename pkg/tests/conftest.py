import gmpy2
import pytest
from gmpy2 import mpfr

from radmom import available_backends, set_backend
from radmom.precision import working_precision


@pytest.fixture
def prec256():
    with working_precision(256):
        yield 256


@pytest.fixture(params=available_backends())
def any_backend(request):
    """Run a test under each available kernel lane."""
    set_backend(request.param)
    yield request.param
    set_backend("auto")


def rel_err(a, b):
    a = mpfr(a)
    b = mpfr(b)
    if b == 0:
        return abs(a)
    return abs(a - b) / abs(b)


def assert_close(a, b, tol):
    assert rel_err(a, b) <= mpfr(tol), "%s != %s (rel %s)" % (a, b, float(rel_err(a, b)))


def assert_abs_close(a, b, tol):
    d = abs(mpfr(a) - mpfr(b))
    assert d <= mpfr(tol), "%s != %s (abs %s)" % (a, b, float(d))
