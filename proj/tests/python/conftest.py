import os
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parents[2]

build_python = os.environ.get("COMPSEARCH_PYTHONPATH")
if build_python:
    sys.path.insert(0, build_python)
