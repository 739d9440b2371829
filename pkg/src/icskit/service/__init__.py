"""HTTP service exposing the tool modules, inbox, and reporting."""

from icskit.service.config import ServiceConfig
from icskit.service.app import create_app

__all__ = ["ServiceConfig", "create_app"]
