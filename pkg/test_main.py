#!/usr/bin/env python3
"""
Tests for command line exit codes
"""

import sys
import tempfile
from pathlib import Path

from main import EXIT_CONFIG, EXIT_OK, main


def test_keys_command():
    assert main(["--no-progress", "keys"]) == EXIT_OK


def test_too_few_verify_trials_is_a_parameter_error():
    assert main(["--no-progress", "verify", "--trials", "500"]) == EXIT_CONFIG


def test_missing_map_file_is_a_config_error():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "run.cfg"
        path.write_text("scenario = grid\nmap_file = /nonexistent/room.map\nruns = 1\nrounds = 1\n")
        assert main(["--no-progress", "run", "--config", str(path), "--out", str(Path(tmp) / "out")]) == EXIT_CONFIG


if __name__ == "__main__":
    success = True
    for name, test in list(globals().items()):
        if name.startswith("test_") and callable(test):
            try:
                test()
                print(f"✅ {name}")
            except Exception as e:
                print(f"❌ {name}: {e!r}")
                success = False
    sys.exit(0 if success else 1)
