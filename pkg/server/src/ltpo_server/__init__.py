"""HTTP adapter between checkpoints and the latent-thought engine."""

from .app import create_app, resolve_checkpoint, serve
from .client import (
    ConfigurationError,
    ProtocolError,
    RemoteModel,
    RemoteModelError,
    TransportError,
)
from .wire import decode_matrix, encode_matrix

__all__ = [
    "ConfigurationError",
    "ProtocolError",
    "RemoteModel",
    "RemoteModelError",
    "TransportError",
    "create_app",
    "decode_matrix",
    "encode_matrix",
    "resolve_checkpoint",
    "serve",
]
