"""Provide hashing and artifact writing helpers."""
from .artifacts import (
    dumps_json,
    read_csv,
    read_json,
    sha256_file,
    sha256_indices,
    write_csv,
    write_json,
)

__all__ = (
    "dumps_json",
    "read_csv",
    "read_json",
    "sha256_file",
    "sha256_indices",
    "write_csv",
    "write_json",
)
