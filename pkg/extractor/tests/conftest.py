import numpy as np
import pytest
import scipy.io.wavfile
import torch


def write_tone(path, seconds=1.0, rate=16_000, freq=440.0, stereo=False):
    t = np.arange(int(seconds * rate)) / rate
    wav = (0.5 * np.sin(2 * np.pi * freq * t) * 32767).astype(np.int16)
    if stereo:
        wav = np.stack([wav, wav // 2], axis=1)
    scipy.io.wavfile.write(path, rate, wav)
    return path


@pytest.fixture(scope="session")
def large_model():
    """Random-weight stand-in with the Large checkpoints' geometry:
    1024-dim hidden states, 24 transformer layers, 20 ms frontend stride.
    Attention width is what matters for the archives; the frontend and FFN
    are shrunk to keep the test fast."""
    from transformers import Wav2Vec2Config, Wav2Vec2Model

    torch.manual_seed(1234)
    config = Wav2Vec2Config(
        hidden_size=1024,
        num_hidden_layers=24,
        num_attention_heads=16,
        intermediate_size=128,
        conv_dim=(32,) * 7,
        num_conv_pos_embeddings=16,
        num_conv_pos_embedding_groups=4,
        feat_extract_norm="layer",
        do_stable_layer_norm=True,
    )
    model = Wav2Vec2Model(config)
    model.eval()
    return model


@pytest.fixture(scope="session")
def large_model_dir(large_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "w2v2-large-random"
    large_model.save_pretrained(path)
    return str(path)
