from pathlib import Path

import pytest

from repargen.modelspec import parse_model

MODELS = Path(__file__).resolve().parents[1] / "src" / "repargen" / "models"


def load_model(name):
    return parse_model((MODELS / f"{name}.model").read_text())


@pytest.fixture(scope="session")
def vajda():
    return load_model("vajda")


@pytest.fixture(scope="session")
def pk():
    return load_model("pk")


@pytest.fixture(scope="session")
def big_known():
    return load_model("big_known")


@pytest.fixture(scope="session")
def big_unknown():
    return load_model("big_unknown")


@pytest.fixture(scope="session")
def nfkb():
    return load_model("nfkb")


@pytest.fixture(scope="session")
def toy_fispo():
    return load_model("toy_fispo")
