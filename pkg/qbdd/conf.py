"""
Default parameters for qbdd.

Module-level constants are the defaults; ``Settings.from_env()`` applies the
``QBDD_*`` environment overrides so budgets can be raised for one run
without touching code.
"""

import os
import tempfile
from dataclasses import dataclass, field, replace
from fractions import Fraction

from qbdd.utils.helpers import parse_rational

DELTA_LLL = Fraction(3, 4)

# hard caps: oracles must fail loudly instead of hanging
ENUM_BUDGET = 10**7
GROUP_BUDGET = 10**7
DENSE_BUDGET = 2**22
GRAM_BUDGET = 2**28

DEFAULT_P_ERR = 0.1
SUCCESS_TARGET = 0.9

CALIBRATION_DIR = os.path.join(tempfile.gettempdir(), "qbdd_calibration")

_ENV_INT = {
    "QBDD_ENUM_BUDGET": "enum_budget",
    "QBDD_GROUP_BUDGET": "group_budget",
    "QBDD_DENSE_BUDGET": "dense_budget",
    "QBDD_GRAM_BUDGET": "gram_budget",
}


@dataclass(frozen=True)
class Settings:
    """Resolved configuration for one run."""

    delta_lll: Fraction = DELTA_LLL
    enum_budget: int = ENUM_BUDGET
    group_budget: int = GROUP_BUDGET
    dense_budget: int = DENSE_BUDGET
    gram_budget: int = GRAM_BUDGET
    p_err: float = DEFAULT_P_ERR
    calibration_dir: str = field(default=CALIBRATION_DIR)

    @classmethod
    def from_env(cls, environ=None):
        environ = os.environ if environ is None else environ
        overrides = {}
        for var, name in _ENV_INT.items():
            if environ.get(var):
                overrides[name] = int(environ[var])
        if environ.get("QBDD_DELTA_LLL"):
            overrides["delta_lll"] = parse_rational(environ["QBDD_DELTA_LLL"])
        if environ.get("QBDD_CALIBRATION_DIR"):
            overrides["calibration_dir"] = environ["QBDD_CALIBRATION_DIR"]
        return replace(cls(), **overrides)


def get_settings():
    return Settings.from_env()
