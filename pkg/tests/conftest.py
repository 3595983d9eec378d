import json
import os

import pytest

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")

FIXTURE_STEMS = ("a16w8", "a16w4", "a8w8", "a8w4", "a4w4", "mixed", "a8w8_bn")
PRECISION_STEMS = ("a16w8", "a16w4", "a8w8", "a8w4", "a4w4")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURE_DIR, name)


def model_path(stem: str) -> str:
    return fixture_path(f"mnist_tiny_{stem}.onnx")


def have_fixtures() -> bool:
    return os.path.exists(model_path("a8w8"))


requires_fixtures = pytest.mark.skipif(
    not have_fixtures(), reason="bundled fixtures not generated yet"
)


def load_golden() -> dict:
    with open(fixture_path("golden_predictions.json")) as fh:
        return json.load(fh)
