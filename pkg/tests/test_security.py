import asyncio
import io

import pytest
from fastapi import HTTPException, UploadFile

from app.utils.security import (
    get_file_hash,
    sanitize_filename,
    validate_history_content,
    validate_history_upload,
)

HISTORY = b"index,level,cost,cumulative_cost,off_budget,x_1,value\n0,1,1,1,0,0.5,0.9\n"


def _upload(content: bytes, filename: str = "history_seed0.csv", max_size=None) -> bytes:
    upload = UploadFile(file=io.BytesIO(content), filename=filename)
    return asyncio.run(validate_history_upload(upload, max_size))


class TestValidateHistoryContent:
    def test_valid_history(self):
        assert validate_history_content(HISTORY) == True

    def test_wrong_header(self):
        assert validate_history_content(b"a,b,c\n") == False

    def test_not_utf8(self):
        assert validate_history_content(HISTORY + b"\xff\xfe") == False


class TestValidateHistoryUpload:
    def test_valid_upload(self):
        assert _upload(HISTORY) == HISTORY

    def test_wrong_extension(self):
        with pytest.raises(HTTPException) as exc:
            _upload(HISTORY, "history.txt")
        assert exc.value.status_code == 400

    def test_too_large(self):
        with pytest.raises(HTTPException) as exc:
            _upload(HISTORY, max_size=10)
        assert exc.value.status_code == 413

    def test_empty(self):
        with pytest.raises(HTTPException) as exc:
            _upload(b"")
        assert exc.value.detail == "File is empty"

    def test_not_a_history(self):
        with pytest.raises(HTTPException) as exc:
            _upload(b"just some text")
        assert exc.value.status_code == 400


class TestSanitizeFilename:
    def test_simple_filename(self):
        assert sanitize_filename("history_seed3.csv") == "history_seed3.csv"

    def test_path_traversal_attack(self):
        result = sanitize_filename("../../../etc/passwd")
        assert ".." not in result
        assert result == "passwd"

    def test_windows_path(self):
        assert sanitize_filename("..\\results\\history_seed1.csv") == "history_seed1.csv"

    def test_dangerous_characters(self):
        assert sanitize_filename("run<1>.csv") == "run_1_.csv"

    def test_empty_filename(self):
        assert sanitize_filename("") == "history.csv"

    def test_long_filename_keeps_extension(self):
        result = sanitize_filename("a" * 300 + ".csv")
        assert len(result) <= 200
        assert result.endswith(".csv")


class TestFileHash:
    def test_consistent_hash(self):
        assert get_file_hash(HISTORY) == get_file_hash(HISTORY)

    def test_hash_length(self):
        assert len(get_file_hash(HISTORY)) == 16
