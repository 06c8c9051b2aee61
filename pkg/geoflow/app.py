import logging
import os
import sys
from enum import Enum
from pathlib import Path

import numpy as np
import sentry_sdk
from simplejson import JSONEncoder

log_level = os.environ.get("GEOFLOW_LOG_LEVEL", "WARNING").upper()

logger = logging.getLogger("geoflow")
if not logger.handlers:
    logger.addHandler(logging.StreamHandler(sys.stderr))
logger.setLevel(log_level)


def output_root() -> Path:
    return Path(os.environ.get("GEOFLOW_OUT", "geoflow-out"))


def init_error_reporting():
    # Without a DSN the client is a no-op, so local runs stay silent.
    sentry_sdk.init(
        dsn=os.environ.get("SENTRY_DSN"),
        traces_sample_rate=0.6,
    )


class CustomJSONEncoder(JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.generic):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, Enum):
            return obj.value
        if isinstance(obj, Path):
            return str(obj)
        try:
            iterable = iter(obj)
        except TypeError:
            pass
        else:
            return list(iterable)
        return JSONEncoder.default(self, obj)


def json_kwargs():
    """Keyword arguments shared by every simplejson dump in the package."""
    return {"cls": CustomJSONEncoder, "ignore_nan": True}
