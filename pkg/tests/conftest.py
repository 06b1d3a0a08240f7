import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from ctsbisim.models import Lats
from ctsbisim.poset import ConditionPoset

MODELS = Path(__file__).resolve().parent.parent / "models"

ROUTING_STATES = ("ready", "received", "safe", "unsafe")
ROUTING_ALPHABET = ("receive", "check", "u", "e")


@pytest.fixture
def models_dir() -> Path:
    return MODELS


@pytest.fixture
def fig1_poset() -> ConditionPoset:
    # irreducible poset of the motivating lattice: a < f, b < f, b < e
    return ConditionPoset(["a", "b", "e", "f"], [("a", "f"), ("b", "f"), ("b", "e")])


def make_routing(check_unsafe_guard=("a", "b"), precedence=(("e", "u"),)) -> Lats:
    poset = ConditionPoset(["a", "b"], [("a", "b")])
    alpha = {
        ("ready", "receive", "received"): ("a", "b"),
        ("received", "check", "safe"): ("a", "b"),
        ("received", "check", "unsafe"): tuple(check_unsafe_guard),
        ("safe", "u", "ready"): ("a", "b"),
        ("unsafe", "u", "ready"): ("a", "b"),
        ("unsafe", "e", "ready"): ("a",),
    }
    return Lats(ROUTING_STATES, ROUTING_ALPHABET, poset, alpha, precedence=precedence)


@pytest.fixture
def routing_pair():
    return make_routing(), make_routing(check_unsafe_guard=("a",))


# --- seeded random model generators ------------------------------------------------


def random_poset(rng: random.Random, max_n=5, min_n=1) -> ConditionPoset:
    n = rng.randint(min_n, max_n)
    names = ["c%d" % i for i in range(n)]
    pairs = [
        (names[i], names[j])
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < 0.35
    ]
    return ConditionPoset(names, pairs)


def random_downset_bits(rng: random.Random, poset: ConditionPoset) -> int:
    bits = 0
    for i in range(len(poset)):
        if rng.random() < 0.5:
            bits |= 1 << i
    return poset.close_down_bits(bits)


def random_lats(rng, poset, states, alphabet, precedence=(), density=0.3) -> Lats:
    alpha = {}
    for x in states:
        for a in alphabet:
            for y in states:
                if rng.random() < density:
                    bits = random_downset_bits(rng, poset)
                    if bits:
                        alpha[(x, a, y)] = bits
    return Lats(states, alphabet, poset, alpha, precedence=precedence)


def random_precedence(rng, alphabet):
    pairs = []
    for i in range(len(alphabet)):
        for j in range(i + 1, len(alphabet)):
            if rng.random() < 0.4:
                pairs.append((alphabet[i], alphabet[j]))
    return tuple(pairs)


def random_lats_pair(
    rng: random.Random,
    max_states=6,
    max_actions=3,
    max_conds=5,
    with_precedence=False,
    density=0.3,
):
    poset = random_poset(rng, max_conds)
    alphabet = tuple("act%d" % i for i in range(rng.randint(1, max_actions)))
    precedence = random_precedence(rng, alphabet) if with_precedence else ()
    states1 = tuple("x%d" % i for i in range(rng.randint(1, max_states)))
    states2 = tuple("y%d" % i for i in range(rng.randint(1, max_states)))
    l1 = random_lats(rng, poset, states1, alphabet, precedence, density)
    l2 = random_lats(rng, poset, states2, alphabet, precedence, density)
    return l1, l2
