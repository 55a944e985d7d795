"""Driving the engine against a checkpoint served over HTTP.

Requires the adapter package: pip install -e ./server
A real deployment runs `ltpo-server --checkpoint <ref> --bind host:port` in
its own process; here the service runs in a background thread so the demo
is self-contained.  The wire carries base64 float32 embeddings outbound and
truncated top-m log-probabilities inbound; the reward needs only the top-k,
so the truncation loses nothing.
"""

import socket
import threading
import time

import numpy as np

try:
    import uvicorn
    from ltpo_server.app import create_app
    from ltpo_server.client import RemoteModel
except ImportError:
    raise SystemExit("this demo needs the adapter: pip install -e ./server")

from ltpo import PolicyConfig, build_toy_lm, optimize

local = build_toy_lm(seed=42, vocab_size=32, hidden_dim=16, layers=2)

with socket.socket() as sock:
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
server = uvicorn.Server(uvicorn.Config(create_app(local), host="127.0.0.1",
                                       port=port, log_level="error"))
threading.Thread(target=server.run, daemon=True).start()
while not server.started:
    time.sleep(0.02)
endpoint = f"http://127.0.0.1:{port}"
print(f"serving the toy checkpoint at {endpoint}")

remote = RemoteModel(endpoint)
print(f"descriptor over the wire: |V|={remote.descriptor.vocab_size} "
      f"d={remote.descriptor.hidden_dim}")

ids = remote.tokenize("What is 2+2?")
prompt = remote.embed(ids)
config = PolicyConfig(num_thoughts=4, steps=8, top_k=5, sigma0=2.0, rng_seed=0)

h_remote, trace_remote = optimize(remote, prompt, config)
h_local, trace_local = optimize(local, local.embed(ids), config)
worst = max(abs(a.reward - b.reward)
            for a, b in zip(trace_remote.steps, trace_local.steps))
print(f"\nremote vs local optimization, max per-step reward gap: {worst:.2e}")

remote_out = remote.greedy_decode(np.concatenate([prompt, h_remote]), 12)
local_out = local.greedy_decode(
    np.concatenate([local.embed(ids), h_local]), 12)
print(f"remote decode: {remote_out.token_ids.tolist()}")
print(f"local decode:  {local_out.token_ids.tolist()}")
print(f"token-identical: {remote_out.token_ids.tolist() == local_out.token_ids.tolist()}")

server.should_exit = True
