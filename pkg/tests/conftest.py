import os

import pytest

from proofscore.session import Session

CORPUS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "corpus")


def corpus(name: str) -> str:
    return os.path.join(CORPUS, name)


def load(*names) -> Session:
    s = Session()
    for n in names:
        s.load(corpus(n))
    return s


@pytest.fixture(scope="session")
def qlock_session():
    return load("qlock.cafe")


@pytest.fixture(scope="session")
def pnat_session():
    return load("pnat.cafe")


@pytest.fixture(scope="session")
def bool_module():
    return load("bool.cafe").env.flatten("BOOL")


def red(flat, text, variables=None):
    from proofscore.rewriting import normalize
    t = flat.parse(text, variables)
    nf, stats = normalize(flat.context(), t)
    return nf, stats


def show(flat, t):
    from proofscore.mixfix import format_term
    return format_term(flat.signature, t)
