from .app import create_app
from .rle import decode_mask, encode_mask
from .sessions import ServedCase, SessionService, served_cases_from

__all__ = [
    "ServedCase",
    "SessionService",
    "create_app",
    "decode_mask",
    "encode_mask",
    "served_cases_from",
]
