import pytest

from shiftaudit.dgp import preset, sample
from shiftaudit.learner import CovariatePolicy, FitConfig, fit

# One seed for every protocol-scale test in the suite. Data seeds derive as
# 2*SEED (train) and 2*SEED+1 (test), matching the audit pipeline.
SEED = 1234
N_TRAIN = 50_000
N_TEST = 20_000


@pytest.fixture(scope="session")
def protocol_data():
    """family -> (train, test) at protocol scale, cached per session."""
    cache = {}

    def get(family):
        if family not in cache:
            spec = preset(family)
            cache[family] = (
                sample(spec, N_TRAIN, 2 * SEED),
                sample(spec, N_TEST, 2 * SEED + 1),
            )
        return cache[family]

    return get


@pytest.fixture(scope="session")
def protocol_models(protocol_data):
    """(family, policy) -> model fit on the cached protocol training split."""
    cache = {}

    def get(family, policy):
        key = (family, CovariatePolicy(policy))
        if key not in cache:
            train, _ = protocol_data(family)
            cache[key] = fit(train, key[1], FitConfig(seed=SEED))
        return cache[key]

    return get
