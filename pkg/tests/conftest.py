import pathlib

import pytest

from btverify import compile_model, explore, parse_btf, validate

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"


def corpus_text(name):
    return (CORPUS / name).read_text()


def load_spec(name):
    return validate(parse_btf(corpus_text(name)))


def load_model(name, **kw):
    return compile_model(load_spec(name), **kw)


def build(text, **kw):
    """Compile an inline tree definition."""
    return compile_model(validate(parse_btf(text)), **kw)


@pytest.fixture(scope="session")
def recovery_graph():
    return explore(load_model("recovery.btf"))


@pytest.fixture(scope="session")
def roundrobin_graph():
    return explore(load_model("roundrobin.btf"))


@pytest.fixture(scope="session")
def mars_rover_graph():
    return explore(load_model("mars_rover.btf"))


@pytest.fixture(scope="session")
def drone_graph():
    return explore(load_model("drone.btf"))


@pytest.fixture(scope="session")
def drone_graph_all_nodes(request):
    return explore(load_model("drone.btf", tick_semantics="all"))
