import numpy as np
import pytest
import httpx

from ltpo.model import CountingModel
from ltpo.optimizer import PolicyConfig, optimize
from ltpo.reward import evaluate_action, top_log_probs_from_row
from ltpo_server.client import (
    ConfigurationError,
    ProtocolError,
    RemoteModel,
    TransportError,
)
from ltpo_server.wire import encode_matrix


class TestDescriptorEndpoint:
    def test_metadata_echo(self, http, toy32):
        reply = http.get("/descriptor").json()
        desc = toy32.descriptor
        assert reply["vocab_size"] == desc.vocab_size
        assert reply["hidden_dim"] == desc.hidden_dim
        assert reply["think_token_id"] == desc.think_token_id
        assert reply["eos_token_id"] == desc.eos_token_id
        assert reply["charset"] == toy32.charset
        assert reply["version"] == 1


class TestForwardEndpoint:
    def test_single_row_truncated_distribution(self, http, toy32):
        emb = toy32.embed([5])
        reply = http.post("/forward", json={
            "embeddings": encode_matrix(emb), "top_m": 8,
        }).json()
        assert len(reply["positions"]) == 1
        entries = reply["positions"][0]
        assert len(entries) == 8
        log_probs = [lp for _, lp in entries]
        assert all(lp <= 0 for lp in log_probs)
        assert sum(np.exp(log_probs)) <= 1.0 + 1e-9
        # sorted descending with token-id tiebreak
        keys = [(-lp, tid) for tid, lp in entries]
        assert keys == sorted(keys)

    def test_matches_in_process_top_m(self, http, toy32):
        emb = toy32.embed([3, 9, 20]).astype("<f4").astype(np.float64)
        reply = http.post("/forward", json={
            "embeddings": encode_matrix(emb), "top_m": 10,
        }).json()
        rows = toy32.forward_distributions(emb)
        for pos, row in zip(reply["positions"], rows):
            ids, log_probs = top_log_probs_from_row(row, 10)
            np.testing.assert_array_equal([t for t, _ in pos], ids)
            np.testing.assert_allclose(
                [lp for _, lp in pos], log_probs, atol=1e-4
            )

    def test_width_mismatch_is_protocol_error(self, http):
        reply = http.post("/forward", json={
            "embeddings": encode_matrix(np.zeros((2, 7))), "top_m": 4,
        })
        assert reply.status_code == 400
        assert "hidden_dim" in reply.json()["error"]

    def test_bad_top_m_rejected(self, http, toy32):
        emb = toy32.embed([5])
        for bad in (0, 33, "ten"):
            reply = http.post("/forward", json={
                "embeddings": encode_matrix(emb), "top_m": bad,
            })
            assert reply.status_code == 400


class TestDecodeEndpoint:
    def test_single_step_equals_forward_argmax(self, http, toy32):
        emb = toy32.embed([4, 7, 9]).astype("<f4").astype(np.float64)
        decode = http.post("/decode", json={
            "embeddings": encode_matrix(emb), "max_tokens": 1,
        }).json()
        forward = http.post("/forward", json={
            "embeddings": encode_matrix(emb), "top_m": 1,
        }).json()
        best_id = forward["positions"][-1][0][0]
        if best_id == toy32.descriptor.eos_token_id:
            assert decode["token_ids"] == []
        else:
            assert decode["token_ids"] == [best_id]


class TestRemoteModel:
    def test_embed_round_trip(self, remote, toy32):
        ids = [3, 4, 5]
        rows = remote.embed(ids)
        np.testing.assert_allclose(rows, toy32.embed(ids), atol=1e-6)

    def test_tokenizer_from_descriptor_charset(self, remote, toy32):
        text = "12ab"
        np.testing.assert_array_equal(remote.tokenize(text),
                                      toy32.tokenize(text))
        assert remote.detokenize(remote.tokenize(text)) == text

    def test_reward_uses_truncated_path(self, remote, toy32):
        prompt = remote.embed([3, 4, 5])
        action = remote.embed([1, 1])
        counting = CountingModel(remote)
        report = evaluate_action(counting, prompt, action, 10)
        assert counting.forward_passes == 1
        assert report.per_position.shape == (2,)

    def test_truncation_boundary(self, app, toy32):
        from fastapi.testclient import TestClient
        prompt = toy32.embed([3, 4])
        action = toy32.embed([1, 1])
        wide = RemoteModel("http://testserver", top_m=10,
                           client=TestClient(app))
        evaluate_action(wide, prompt, action, 10)  # top_m == k: fine
        narrow = RemoteModel("http://testserver", top_m=9,
                             client=TestClient(app))
        with pytest.raises(ConfigurationError):
            evaluate_action(narrow, prompt, action, 10)

    def test_transport_error_is_distinct_and_typed(self):
        def explode(request):
            raise httpx.ConnectError("unreachable", request=request)

        client = httpx.Client(
            transport=httpx.MockTransport(explode),
            base_url="http://nowhere",
        )
        with pytest.raises(TransportError):
            RemoteModel("http://nowhere", client=client)

    def test_protocol_error_carries_message(self, remote):
        with pytest.raises(ProtocolError, match="hidden_dim"):
            remote.forward_top_log_probs(np.zeros((1, 7)), 3)


@pytest.fixture(scope="module")
def live_endpoint(toy32):
    import socket
    import threading
    import time

    import uvicorn

    from ltpo_server.app import create_app

    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    config = uvicorn.Config(create_app(toy32), host="127.0.0.1",
                            port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    for _ in range(100):
        if server.started:
            break
        time.sleep(0.05)
    else:
        raise RuntimeError("server did not start")
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


class TestEndToEndOverTcp:
    """The full engine driving a checkpoint served over real HTTP."""

    def test_optimize_and_decode_remotely(self, live_endpoint, toy32):
        remote = RemoteModel(live_endpoint)
        prompt_ids = remote.tokenize("What is 2+2?")
        prompt = remote.embed(prompt_ids)
        config = PolicyConfig(num_thoughts=2, steps=4, top_k=5, rng_seed=3)
        h_star, trace = optimize(remote, prompt, config)
        assert trace.forward_passes == 4
        assert trace.decode_calls == 0

        local_prompt = toy32.embed(prompt_ids)
        h_local, trace_local = optimize(toy32, local_prompt, config)
        for a, b in zip(trace.steps, trace_local.steps):
            assert abs(a.reward - b.reward) < 1e-4

        remote_decode = remote.greedy_decode(
            np.concatenate([prompt, h_star]), 12
        )
        assert remote_decode.stop_reason in ("eos", "max_tokens")

    def test_cli_run_against_remote_endpoint(self, live_endpoint, tmp_path):
        import json

        from ltpo.cli import main

        dataset = tmp_path / "two.jsonl"
        dataset.write_text(
            '{"id": "a", "question": "1+1=", "answer": "2"}\n'
            '{"id": "b", "question": "2+2=", "answer": "4"}\n'
        )
        out = tmp_path / "out"
        rc = main([
            "run", "--model", live_endpoint, "--dataset", str(dataset),
            "--mode", "ltpo", "--seed", "1", "--max-decode-tokens", "6",
            "--config", str(_quick_config(tmp_path)), "--out", str(out),
        ])
        assert rc == 0
        records = [json.loads(line)
                   for line in (out / "records.jsonl").read_text().splitlines()]
        assert len(records) == 2
        assert all(r["decode_calls"] == 1 for r in records)
        assert all(r["error"] is None for r in records)


def _quick_config(tmp_path):
    import json

    path = tmp_path / "quick.json"
    path.write_text(json.dumps({
        "# thought tokens": 2, "# steps": 3, "top-k": 5,
        "sigma": 1.0, "sigma decay": 0.9, "lr": 5e-3,
    }))
    return path
