"""HTTP service wrapping the solver; ``app`` is the ASGI application."""

from .app import app

__all__ = ["app"]
