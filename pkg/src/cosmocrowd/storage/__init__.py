"""Storage package."""

from cosmocrowd.storage.base import EventStore, StoreSnapshot, StoreTransaction
from cosmocrowd.storage.factory import create_store
from cosmocrowd.storage.log_store import LogEventStore

__all__ = [
    "EventStore",
    "StoreSnapshot",
    "StoreTransaction",
    "LogEventStore",
    "create_store",
]
