import math

import pytest

from app.config import settings
from app.logging_config import setup_logging

# keep test runs from writing rotating log files into the checkout
settings.LOG_FILE = ""
setup_logging(level="WARNING")


@pytest.fixture
def within_se():
    """Check |empirical - p| against n_se binomial standard errors of p."""

    def check(errors: int, trials: int, p: float, n_se: float = 4.5) -> bool:
        se = math.sqrt(p * (1 - p) / trials)
        return abs(errors / trials - p) <= n_se * se

    return check
