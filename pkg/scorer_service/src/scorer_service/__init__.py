"""Masked language model scoring service for the svagree wire protocol."""

__version__ = "0.1.0"

from .session import ModelSession, DEFAULT_MODEL  # noqa: F401
from .service import create_app  # noqa: F401
from .stdio import serve_stdio  # noqa: F401
