"""HTTP facade: pydantic request/response models and a FastAPI app.

The handlers are plain functions over the models so the command line can
call them in-process; the FastAPI app simply exposes the same handlers
over HTTP.
"""

from .app import app, create_app  # noqa: F401
