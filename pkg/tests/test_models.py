import json
import random

import pytest

from ctsbisim import features as ft
from ctsbisim.errors import (
    GuardNotDownwardClosed,
    ModelError,
    UnknownCondition,
)
from ctsbisim.features import FeatureUniverse, parse_expr
from ctsbisim.modelio import (
    convert_model,
    load_model,
    model_from_dict,
    model_to_dict,
)
from ctsbisim.models import (
    Cts,
    Fts,
    Lats,
    close_precedence,
    cts_to_lats,
    fts_to_lats,
    gen_benchmark,
    gen_benchmark_fts,
    lats_to_cts,
)
from ctsbisim.poset import ConditionPoset, iter_bits

from conftest import make_routing, random_lats_pair


class TestCts:
    def test_monotonicity_violation_rejected(self):
        poset = ConditionPoset(["a", "b"], [("a", "b")])
        # enabled at b but not at the upgrade a: not monotone
        with pytest.raises(ModelError, match="monotone"):
            Cts(["x", "y"], ["act"], poset, {("x", "act", "b"): {"y"}})

    def test_monotone_transitions_accepted(self):
        poset = ConditionPoset(["a", "b"], [("a", "b")])
        c = Cts(
            ["x", "y"],
            ["act"],
            poset,
            {("x", "act", "b"): {"y"}, ("x", "act", "a"): {"y"}},
        )
        assert c.successors("x", "act", "a") == {"y"}

    def test_unknown_condition(self):
        poset = ConditionPoset(["a"], [])
        c = Cts(["x"], ["act"], poset, {})
        with pytest.raises(UnknownCondition):
            c.instantiate("zz")


class TestConversions:
    def test_routing_guard_of_check_unsafe(self, routing_pair):
        basic, modified = routing_pair
        assert basic.guard("received", "check", "unsafe").members() == ("a", "b")
        assert modified.guard("received", "check", "unsafe").members() == ("a",)

    def test_roundtrip_on_routing(self, routing_pair):
        basic, _ = routing_pair
        assert cts_to_lats(lats_to_cts(basic)) == basic

    def test_roundtrip_on_random_models(self):
        rng = random.Random(42)
        for _ in range(50):
            l1, _ = random_lats_pair(rng, max_states=6, max_conds=5)
            assert cts_to_lats(lats_to_cts(l1)) == l1

    def test_empty_transition_map(self):
        poset = ConditionPoset(["a"], [])
        c = Cts(["x"], ["act"], poset, {})
        assert cts_to_lats(c).alpha == {}
        assert lats_to_cts(cts_to_lats(c)).trans == {}


class TestInstantiate:
    def test_routing_at_b_has_no_encrypted_send(self, routing_pair):
        basic, _ = routing_pair
        cts = lats_to_cts(basic)
        lts = cts.instantiate("b")
        assert lts.successors("unsafe", "e") == frozenset()
        assert lts.successors("unsafe", "u") == {"ready"}

    def test_precedence_deactivates_plain_send(self, routing_pair):
        basic, _ = routing_pair
        cts = lats_to_cts(basic)
        lts = cts.instantiate_prec("a")
        assert lts.successors("unsafe", "u") == frozenset()
        assert lts.successors("unsafe", "e") == {"ready"}
        assert lts.successors("safe", "u") == {"ready"}

    def test_empty_precedence_changes_nothing(self):
        rng = random.Random(9)
        for _ in range(20):
            l1, _ = random_lats_pair(rng, max_states=4, max_conds=3)
            cts = lats_to_cts(l1)
            for cond in l1.poset.elements:
                assert cts.instantiate_prec(cond).moves == cts.instantiate(cond).moves

    def test_instantiation_is_antitone(self):
        rng = random.Random(10)
        for _ in range(20):
            l1, _ = random_lats_pair(rng, max_states=5, max_conds=4)
            cts = lats_to_cts(l1)
            poset = l1.poset
            for ci, c in enumerate(poset.elements):
                for cj in iter_bits(poset.down[ci]):
                    smaller = poset.elements[cj]
                    big = cts.instantiate(c).moves
                    small = cts.instantiate(smaller).moves
                    for key, targets in big.items():
                        assert targets <= small.get(key, frozenset())


class TestPrecedence:
    def test_transitive_closure(self):
        closed = close_precedence([("a", "b"), ("b", "c")], ["a", "b", "c"])
        assert ("a", "c") in closed

    def test_irreflexive(self):
        with pytest.raises(ModelError, match="strict"):
            close_precedence([("a", "b"), ("b", "a")], ["a", "b"])

    def test_unknown_action(self):
        with pytest.raises(ModelError):
            close_precedence([("a", "zz")], ["a"])


class TestFts:
    def routing_fts(self, check_unsafe="true"):
        u = FeatureUniverse(("enc",), {"enc"})
        trans = {
            ("ready", "receive", "received"): parse_expr("true"),
            ("received", "check", "safe"): parse_expr("true"),
            ("received", "check", "unsafe"): parse_expr(check_unsafe),
            ("safe", "u", "ready"): parse_expr("true"),
            ("unsafe", "u", "ready"): parse_expr("true"),
            ("unsafe", "e", "ready"): parse_expr("enc"),
        }
        return Fts(
            u,
            ("ready", "received", "safe", "unsafe"),
            ("receive", "check", "u", "e"),
            trans,
            parse_expr("true"),
        )

    def test_configuration_order_mirrors_products(self):
        lats = fts_to_lats(self.routing_fts())
        assert set(lats.poset.elements) == {"{}", "{enc}"}
        assert lats.poset.leq("{enc}", "{}")
        assert not lats.poset.leq("{}", "{enc}")

    def test_guard_collects_configurations(self):
        lats = fts_to_lats(self.routing_fts())
        assert lats.guard("unsafe", "e", "ready").members() == ("{enc}",)
        assert set(lats.guard("safe", "u", "ready").members()) == {"{}", "{enc}"}

    def test_discrete_when_no_upgrades(self):
        u = FeatureUniverse(("x", "y"))
        f = Fts(u, ("s",), ("act",), {("s", "act", "s"): parse_expr("x | !y")}, ft.TRUE)
        lats = fts_to_lats(f)
        assert lats.poset.is_discrete
        assert len(lats.poset) == 4

    def test_any_guard_accepted_on_discrete_order(self):
        u = FeatureUniverse(("x",))
        f = Fts(u, ("s",), ("act",), {("s", "act", "s"): parse_expr("!x")}, ft.TRUE)
        fts_to_lats(f)  # no upgrade features: nothing to violate

    def test_unsatisfiable_diagram(self):
        u = FeatureUniverse(("x",), {"x"})
        f = Fts(u, ("s",), ("act",), {("s", "act", "s"): parse_expr("x")}, parse_expr("x & !x"))
        lats = fts_to_lats(f)
        assert len(lats.poset) == 0
        assert lats.alpha == {}

    def test_violating_guard_rejected_with_witness(self):
        u = FeatureUniverse(("x",), {"x"})
        f = Fts(u, ("s",), ("act",), {("s", "act", "s"): parse_expr("!x")}, ft.TRUE)
        with pytest.raises(GuardNotDownwardClosed) as err:
            fts_to_lats(f)
        assert "{}" in str(err.value) and "{x}" in str(err.value)

    def test_violating_guard_closed_on_request(self):
        u = FeatureUniverse(("x",), {"x"})
        f = Fts(u, ("s",), ("act",), {("s", "act", "s"): parse_expr("!x")}, ft.TRUE)
        lats = fts_to_lats(f, close=True)
        assert set(lats.guard("s", "act", "s").members()) == {"{}", "{x}"}

    def test_undeclared_atom(self):
        u = FeatureUniverse(("x",))
        with pytest.raises(Exception):
            Fts(u, ("s",), ("act",), {("s", "act", "s"): parse_expr("y")}, ft.TRUE)


class TestBenchmarkFamily:
    def test_smallest_instance(self):
        l1, l2 = gen_benchmark(1)
        assert l1.states == ("s1_0", "s1_1", "s1_2")
        assert set(l1.poset.elements) == {"{}", "{f1}"}
        assert set(l1.guard("s1_0", "b", "s1_2").members()) == {"{}", "{f1}"}
        assert l2.guard("s1_0", "b", "s1_2").members() == ("{f1}",)
        assert l1.guard("s1_0", "b", "s1_1").members() == ("{f1}",)

    def test_counts_at_two(self):
        l1, l2 = gen_benchmark(2)
        assert len(l1.states) == 6 and len(l2.states) == 6
        assert len(l1.alpha) == 8 and len(l2.alpha) == 8

    def test_guards_downward_closed_by_construction(self):
        f1, f2 = gen_benchmark_fts(3)
        for lats in (fts_to_lats(f1), fts_to_lats(f2)):
            for bits in lats.alpha.values():
                assert lats.poset.is_down_closed_bits(bits)

    def test_size_must_be_positive(self):
        with pytest.raises(ModelError):
            gen_benchmark_fts(0)


class TestModelIo:
    def test_load_routing(self, models_dir, routing_pair):
        basic, modified = routing_pair
        loaded = load_model(models_dir / "routing_basic.json")
        assert cts_to_lats(loaded) == basic
        loaded = load_model(models_dir / "routing_modified.json")
        assert cts_to_lats(loaded) == modified

    def test_cts_loader_closes_downward(self, models_dir):
        loaded = load_model(models_dir / "routing_basic.json")
        # listed with maximal condition b; closure adds a
        assert loaded.successors("ready", "receive", "a") == {"received"}

    def test_lats_guard_rejected_unless_closed(self):
        raw = {
            "kind": "lats",
            "states": ["x"],
            "alphabet": ["act"],
            "poset": {"elements": ["a", "b"], "leq": [["a", "b"]]},
            "transitions": [{"from": "x", "action": "act", "to": "x", "guard": ["b"]}],
        }
        with pytest.raises(GuardNotDownwardClosed):
            model_from_dict(raw)
        lats = model_from_dict(raw, close=True)
        assert lats.guard("x", "act", "x").members() == ("a", "b")

    def test_missing_field_is_named(self):
        with pytest.raises(ModelError, match="model.states"):
            model_from_dict({"kind": "cts"})

    def test_bad_guard_field_is_named(self):
        raw = {
            "kind": "cts",
            "states": ["x"],
            "alphabet": ["act"],
            "poset": {"elements": ["a"], "leq": []},
            "transitions": [{"from": "x", "action": "act", "to": "x", "guard": ["zz"]}],
        }
        with pytest.raises(ModelError, match=r"transitions\[0\].guard"):
            model_from_dict(raw)

    def test_invalid_json_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ModelError, match="invalid JSON"):
            load_model(bad)

    def test_fts_roundtrip(self, models_dir):
        f = load_model(models_dir / "routing_fts_basic.json")
        again = model_from_dict(model_to_dict(f))
        assert fts_to_lats(f) == fts_to_lats(again)

    def test_cts_roundtrip(self, models_dir):
        c = load_model(models_dir / "routing_basic.json")
        again = model_from_dict(json.loads(json.dumps(model_to_dict(c))))
        assert c == again

    def test_lats_roundtrip(self):
        rng = random.Random(77)
        l1, _ = random_lats_pair(rng, max_states=4, max_conds=4)
        again = model_from_dict(model_to_dict(l1))
        assert l1 == again


class TestConvert:
    def test_cts_to_lats_and_back(self, models_dir):
        c = load_model(models_dir / "routing_basic.json")
        lats = convert_model(c, "lats")
        assert isinstance(lats, Lats)
        back = convert_model(lats, "cts")
        assert back == c

    def test_fts_to_lats_guards_are_config_sets(self, models_dir):
        f = load_model(models_dir / "routing_fts_basic.json")
        lats = convert_model(f, "lats")
        assert lats.guard("unsafe", "e", "ready").members() == ("{enc}",)

    def test_undefined_conversion(self, models_dir):
        c = load_model(models_dir / "routing_basic.json")
        with pytest.raises(ModelError, match="not defined"):
            convert_model(c, "fts")
