"""Config package."""

from cosmocrowd.config.settings import Settings, settings

__all__ = ["Settings", "settings"]
