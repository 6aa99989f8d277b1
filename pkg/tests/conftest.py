import os
import sys

# Single-threaded BLAS is fastest for this workload's small matrices and
# must be pinned before numpy loads its backend.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

sys.path.insert(0, os.path.dirname(__file__))

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


def make_csv(rows, header="Date,Open,High,Low,Close,Adj Close,Volume"):
    """Build CSV text from (date, close) pairs; close=None leaves the cell blank."""
    lines = [header]
    for day, close in rows:
        cell = "" if close is None else f"{close}"
        lines.append(f"{day},{cell},{cell},{cell},{cell},{cell},1000")
    return "\n".join(lines) + "\n"
