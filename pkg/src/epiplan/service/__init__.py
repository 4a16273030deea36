"""HTTP facade for the user-in-the-loop decision workflow."""

from .app import create_app

__all__ = ["create_app"]
