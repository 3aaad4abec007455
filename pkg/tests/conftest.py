import pytest

from dfscore import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # JIT compile up front so kernel latency never lands inside a timed test.
    kernels.warm_up()
