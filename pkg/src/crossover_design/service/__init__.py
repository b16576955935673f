"""HTTP service layer: pydantic schemas, shared handlers, FastAPI app."""

from .app import app

__all__ = ["app"]
