"""Storage factory for creating store instances.

Provides a factory function to create the store from configuration.
"""

from cosmocrowd.config.settings import Settings
from cosmocrowd.exceptions import StorageError
from cosmocrowd.storage.log_store import LogEventStore


def create_store(settings: Settings) -> LogEventStore:
    """Create the store for the configured data directory, replaying its logs.

    Args:
        settings: Application settings.

    Returns:
        A LogEventStore holding every record found in ``settings.data_dir``.

    Raises:
        StorageError: The data directory cannot be created or read.
    """
    try:
        settings.data_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"Cannot create {settings.data_dir}: {e}") from e
    return LogEventStore.replay(settings.data_dir, fsync=settings.fsync_appends)
