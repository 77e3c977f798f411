import numpy as np
import pytest

from graspspec.extract import placeholder  # noqa  (rewritten below)
