import hashlib
from typing import Optional
from fastapi import UploadFile, HTTPException

from app.config import get_settings

HISTORY_SIGNATURE = b"index,level,cost,cumulative_cost,off_budget,"


def validate_history_content(content: bytes) -> bool:
    """History files are UTF-8 CSV starting with the fixed header columns"""
    if not content.startswith(HISTORY_SIGNATURE):
        return False
    try:
        content.decode("utf-8")
    except UnicodeDecodeError:
        return False
    return True


def get_file_hash(content: bytes) -> str:
    """Generate SHA-256 hash of file for logging/auditing"""
    return hashlib.sha256(content).hexdigest()[:16]


async def validate_history_upload(file: UploadFile, max_size: Optional[int] = None) -> bytes:
    """
    Complete history upload validation:
    1. Verify extension
    2. Verify size
    3. Verify header signature and encoding
    """
    if not file.filename or not file.filename.lower().endswith(".csv"):
        raise HTTPException(
            status_code=400,
            detail="File must have .csv extension"
        )

    content = await file.read()

    max_size = max_size or get_settings().MAX_HISTORY_SIZE
    if len(content) > max_size:
        raise HTTPException(
            status_code=413,
            detail=f"File exceeds maximum size of {max_size // (1024 * 1024)}MB"
        )

    if len(content) == 0:
        raise HTTPException(
            status_code=400,
            detail="File is empty"
        )

    if not validate_history_content(content):
        raise HTTPException(
            status_code=400,
            detail="File is not a history CSV"
        )

    return content


def sanitize_filename(filename: str, max_length: int = 200) -> str:
    """Remove dangerous characters from filename"""
    if not filename:
        return "history.csv"

    filename = filename.replace("\\", "/").split("/")[-1]

    dangerous_chars = ['<', '>', ':', '"', '|', '?', '*', '\x00']
    for char in dangerous_chars:
        filename = filename.replace(char, '_')

    if len(filename) > max_length:
        name, ext = filename.rsplit(".", 1) if "." in filename else (filename, "")
        filename = name[:max_length - len(ext) - 1] + "." + ext

    return filename
