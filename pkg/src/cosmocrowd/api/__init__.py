"""API package."""

from cosmocrowd.api.routes import init_store, register_error_handlers, router

__all__ = [
    "router",
    "init_store",
    "register_error_handlers",
]
