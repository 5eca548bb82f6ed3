"""Record codec package."""

from cosmocrowd.parsers.protocol import decode_record, encode_record

__all__ = [
    "decode_record",
    "encode_record",
]
