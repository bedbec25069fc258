import pytest

from calibrated_necks.glue import default_collar_input, glue
from calibrated_necks.verify import Construction, RunConfig


@pytest.fixture(scope="session")
def default_collar():
    """The glued structure of the default collar (built once per session)."""
    return glue(default_collar_input())


@pytest.fixture(scope="session")
def default_construction():
    """Scheduled necks and atlas of the default K = 3 quadratic configuration."""
    return Construction(RunConfig().validate())


@pytest.fixture(scope="session")
def default_collar_report(default_collar):
    """Glue property checks of the default collar on the full sampling grid."""
    return default_collar.certify()
