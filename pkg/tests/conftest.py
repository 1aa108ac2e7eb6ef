import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", deadline=None)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model_config():
    from seke.model import ModelConfig

    return ModelConfig(
        d_model=8,
        backbone="transformer",
        num_layers=1,
        num_heads=2,
        d_ff=16,
        max_len=16,
        lora_rank=2,
        lora_alpha=2.0,
        lora_dropout_p=0.0,
        moe_enabled=True,
        rnn_enabled=True,
        n_experts=4,
        top_k=2,
        d_hidden=8,
        moe_noise=False,
        dropout_p=0.0,
    )


@pytest.fixture
def tiny_vocab():
    from seke.backbone import Vocab

    return Vocab({f"w{i}": i + 2 for i in range(12)})
