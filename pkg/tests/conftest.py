import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from attnbench.attention import AttentionStack


def random_stack(rng: np.random.Generator, layers: int, heads: int, n: int) -> AttentionStack:
    """Random row-stochastic stack (softmax of gaussian logits)."""
    logits = rng.normal(size=(layers, heads, n, n))
    weights = np.exp(logits - logits.max(axis=3, keepdims=True))
    tensor = weights / weights.sum(axis=3, keepdims=True)
    return AttentionStack(tensor=tensor)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
