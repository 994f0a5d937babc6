"""HTTP service wrapping the library: fit, predict, and experiment runs."""

from .app import app, create_app

__all__ = ["app", "create_app"]
