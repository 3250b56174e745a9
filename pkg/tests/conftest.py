# type: ignore
from pytest import fixture

from fieldroad.cubic import ModelParams, classify_regime
from fieldroad.semi_analytic import TRACE_CACHE

# d = nu = 1, so A^2 d = 1 and the thresholds are 8/27 and 1/4.
REGIME_MUS = {
    "SimpleOnly": 1.0,
    "TripleAt": 8.0 / 27.0,
    "DoubleTwice": 0.27,
    "DoubleOnce": 0.2,
}


def make_params(mu=1.0, D=2.0, d=1.0, nu=1.0):
    return ModelParams(d=d, D=D, mu=mu, nu=nu)


@fixture(params=sorted(REGIME_MUS))
def regime_params(request):
    """
    Parameters and regime for each of the four mu-regimes, with D = 2 > d.
    """
    params = make_params(mu=REGIME_MUS[request.param])
    return request.param, params, classify_regime(params)


@fixture
def simple_params():
    params = make_params(mu=1.0)
    return params, classify_regime(params)


@fixture
def triple_params():
    params = make_params(mu=8.0 / 27.0)
    return params, classify_regime(params)


@fixture
def clear_trace_cache():
    """
    Empty the process-wide trace cache around a test.
    """
    TRACE_CACHE.clear()
    yield TRACE_CACHE
    TRACE_CACHE.clear()
