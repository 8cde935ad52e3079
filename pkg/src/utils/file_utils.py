"""File utility functions.

This module provides utility functions for file operations
used when writing experiment outputs and manifests.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any


class FileUtils:
    """Utility class for file operations.

    Provides static methods for common file operations.
    """

    @staticmethod
    def ensure_directory(path: str | Path) -> Path:
        """Ensure a directory exists.

        Args:
            path: Directory path.

        Returns:
            The directory as a Path.
        """
        directory = Path(path)
        directory.mkdir(parents=True, exist_ok=True)
        return directory

    @staticmethod
    def sha256_bytes(data: bytes) -> str:
        """Hex digest of a byte string.

        Args:
            data: Bytes to hash.

        Returns:
            SHA-256 hex digest.
        """
        return hashlib.sha256(data).hexdigest()

    @staticmethod
    def sha256_file(path: str | Path, chunk_size: int = 65536) -> str:
        """Hex digest of a file's contents.

        Args:
            path: File path.
            chunk_size: Read size in bytes.

        Returns:
            SHA-256 hex digest.
        """
        digest = hashlib.sha256()
        with open(path, "rb") as f:
            while chunk := f.read(chunk_size):
                digest.update(chunk)
        return digest.hexdigest()

    @staticmethod
    def write_text(path: str | Path, content: str) -> Path:
        """Write text atomically (write to a sibling temp file, then rename).

        Args:
            path: File path.
            content: Text to write.

        Returns:
            The written path.
        """
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as f:
            f.write(content)
        os.replace(tmp, target)
        return target

    @staticmethod
    def write_json(path: str | Path, payload: Any) -> Path:
        """Write JSON with sorted keys so equal payloads give equal bytes.

        Args:
            path: File path.
            payload: JSON-serializable object.

        Returns:
            The written path.
        """
        return FileUtils.write_text(
            path, json.dumps(payload, indent=2, sort_keys=True) + "\n"
        )

    @staticmethod
    def read_text(path: str | Path) -> str:
        """Read a UTF-8 text file.

        Args:
            path: File path.

        Returns:
            File contents.
        """
        with open(path, encoding="utf-8") as f:
            return f.read()

    @staticmethod
    def write_bytes(path: str | Path, content: bytes) -> Path:
        """Write bytes atomically.

        Args:
            path: File path.
            content: Bytes to write.

        Returns:
            The written path.
        """
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + ".tmp")
        with open(tmp, "wb") as f:
            f.write(content)
        os.replace(tmp, target)
        return target
