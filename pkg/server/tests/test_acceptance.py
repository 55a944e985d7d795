"""Adapter acceptance: remote fidelity against the in-process path."""

import numpy as np
from fastapi.testclient import TestClient

from ltpo.model import build_toy_lm, load_checkpoint, save_checkpoint
from ltpo.optimizer import init_latents
from ltpo.reward import evaluate_action
from ltpo_server.app import create_app
from ltpo_server.client import RemoteModel
from ltpo_server.wire import decode_matrix, encode_matrix


def test_wire_fidelity(tmp_path):
    """Remote reward within 1e-4, decode token-exact, payloads lossless."""
    # serve an actual serialized toy checkpoint, load the same file locally
    source = build_toy_lm(seed=42, vocab_size=32, hidden_dim=16, layers=2)
    path = tmp_path / "toy.ltpo"
    save_checkpoint(source, path)
    local = load_checkpoint(path)
    remote = RemoteModel("http://testserver",
                         client=TestClient(create_app(load_checkpoint(path))))

    # embedding payload round-trip is bitwise lossless
    rng = np.random.default_rng(5)
    matrix = rng.standard_normal((6, 16)).astype("<f4")
    assert decode_matrix(encode_matrix(matrix)).tobytes() == matrix.tobytes()

    prompt_ids = local.tokenize("What is 2+3?")
    local_prompt = local.embed(prompt_ids)
    remote_prompt = remote.embed(prompt_ids)
    np.testing.assert_array_equal(remote_prompt, local_prompt)

    # reward fidelity: initial latents (exactly representable) and random
    # float64 actions (rounded on the wire) both stay within 1e-4
    init = init_latents(local, 2).matrix
    for action in (init, init + rng.standard_normal(init.shape) * 0.37):
        local_reward = evaluate_action(local, local_prompt, action, 10)
        remote_reward = evaluate_action(remote, remote_prompt, action, 10)
        assert abs(remote_reward.mean_reward - local_reward.mean_reward) < 1e-4
        np.testing.assert_allclose(remote_reward.per_position,
                                   local_reward.per_position, atol=1e-4)

    # greedy decode agrees token for token
    prefix = np.concatenate([local_prompt, init])
    local_decode = local.greedy_decode(prefix, 16)
    remote_decode = remote.greedy_decode(prefix, 16)
    assert remote_decode.token_ids.tolist() == local_decode.token_ids.tolist()
    assert remote_decode.text == local_decode.text
    assert remote_decode.stop_reason == local_decode.stop_reason
