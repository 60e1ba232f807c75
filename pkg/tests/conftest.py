import logging
import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

for _key in ("QBK_LOG_LEVEL", "QBK_LOG_FORMAT"):
    os.environ.pop(_key, None)

settings.register_profile(
    "qbk",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "qbk"))


@pytest.fixture(autouse=True)
def _reset_state():
    from qbk.config import reset_settings_cache
    from qbk.observability import metrics

    reset_settings_cache()
    metrics.reset()
    yield
    reset_settings_cache()
    logging.getLogger("qbk").handlers = []
