import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsmnet.fsm import (BoolType, CyclicDependency, Default, DuplicateVar, EventValue, FiniteSet,
                        FsmDef, FsmPolicy, FsmVar, InitNotInType, MissingLpecField, TypeMismatch,
                        UnknownEvent, UnknownVariable, case, is_true, occurred,
                        topo_order, validate)
from fsmnet.fsm import test_and_true as both_true
from fsmnet.gardenwall import GardenwallConfig, gardenwall_def, redirect_to_gardenwall
from fsmnet.gateway import Event
from fsmnet.packet import FlowSpec, Packet, matches
from fsmnet.policy import Dynamic, IfThenElse, Named, drop, evaluate, identity, render

from oracles import random_packet

H1 = FlowSpec(srcip="10.0.0.1")
H2 = FlowSpec(srcip="10.0.0.2")
REDIRECT = redirect_to_gardenwall(GardenwallConfig())
EV = (case(occurred(), EventValue()),)


def squash(s):
    return "".join(s.split())


# -- validation --------------------------------------------------------------

def test_gardenwall_validates(gw_def):
    validate(gw_def)
    assert topo_order(gw_def)[-1] == "policy"


def test_two_cycle_rejected():
    d = FsmDef((
        FsmVar("a", BoolType(), False, (case(is_true("b"), True),)),
        FsmVar("b", BoolType(), False, (case(is_true("a"), True),)),
    ))
    with pytest.raises(CyclicDependency) as info:
        validate(d)
    assert set(info.value.path) >= {"a", "b"}


def test_init_outside_type_rejected():
    d = FsmDef((
        FsmVar("x", BoolType(), False, EV),
        FsmVar("policy", FiniteSet((drop,)), identity, (case(Default(), drop),)),
    ))
    with pytest.raises(InitNotInType) as info:
        validate(d)
    assert "policy" in str(info.value)


def test_duplicate_and_unknown_refs():
    with pytest.raises(DuplicateVar):
        validate(FsmDef((FsmVar("x", BoolType(), False, EV), FsmVar("x", BoolType(), False, EV))))
    with pytest.raises(UnknownVariable):
        validate(FsmDef((FsmVar("x", BoolType(), False, (case(is_true("nope"), True),)),)))


# -- instances ---------------------------------------------------------------

def test_fresh_instance_has_initial_values(gw):
    inst = gw.get_or_create_instance(H1)
    assert inst.valuation == {"infected": False, "exempt": False, "policy": identity}


def test_same_key_same_instance(gw):
    a = gw.get_or_create_instance(H1)
    gw.apply_event(Event("infected", True, H1))
    b = gw.get_or_create_instance(FlowSpec(srcip="10.0.0.1", dstport=80))
    assert a is b and b.valuation["infected"] is True


def test_missing_lpec_field(gw):
    with pytest.raises(MissingLpecField) as info:
        gw.get_or_create_instance(FlowSpec(dstip="10.0.0.2"))
    assert "srcip" in str(info.value)


def test_unknown_event_and_type_mismatch(gw):
    with pytest.raises(UnknownEvent):
        gw.apply_event(Event("infect", True, H1))
    with pytest.raises(UnknownEvent):
        gw.apply_event(Event("policy", "drop", H1))
    with pytest.raises(TypeMismatch):
        gw.apply_event(Event("infected", "maybe", H1))
    assert gw.snapshot() == {}


def test_observe_packet_creates_instance(gw):
    gw.observe_packet(Packet(srcip="10.0.0.2"))
    gw.observe_packet(Packet(dstip="10.0.0.2"))
    assert list(gw.snapshot()) == [H2.key()]


# -- event traces --------------------------------------------------------------

def test_three_event_trace(gw):
    r1 = gw.apply_event(Event("infected", True, H1))
    assert r1.state_text() == "{'policy': drop, 'infected': True, 'exempt': False}"
    r2 = gw.apply_event(Event("exempt", True, H1))
    assert squash(r2.state_text()) == squash(
        "{'policy': modify: ('dstip', 10.0.0.3) ('dstmac', 00:00:00:00:00:03), "
        "'infected':True, 'exempt': True}")
    r3 = gw.apply_event(Event("infected", False, H1))
    assert r3.state_text() == "{'policy': identity, 'infected': False, 'exempt': True}"


def test_report_lines(gw):
    lines = gw.apply_event(Event("infected", True, H1)).lines()
    assert lines == [
        "Received event infected is True related with flow {'srcip': 10.0.0.1}",
        "fsm_policy:event_name= infected",
        "fsm_policy:event_value= True",
        "fsm_policy:event_state= {'policy': drop, 'infected': True, 'exempt': False}",
    ]


def test_gardenwall_truth_table(gw_def):
    for infected, exempt in itertools.product((False, True), repeat=2):
        fp = FsmPolicy(gw_def)
        fp.apply_event(Event("infected", infected, H1))
        fp.apply_event(Event("exempt", exempt, H1))
        want = REDIRECT if infected and exempt else drop if infected else identity
        assert fp.valuation(H1)["policy"] == want


def test_case_order_matters():
    # with the drop case first the redirect case is unreachable
    swapped = FsmDef((
        FsmVar("infected", BoolType(), False, EV),
        FsmVar("exempt", BoolType(), False, EV),
        FsmVar("policy", FiniteSet((drop, identity, REDIRECT)), identity, (
            case(is_true("infected"), drop),
            case(both_true("exempt", "infected"), REDIRECT),
            case(Default(), identity),
        )),
    ))
    fp = FsmPolicy(swapped)
    fp.apply_event(Event("infected", True, H1))
    fp.apply_event(Event("exempt", True, H1))
    assert fp.valuation(H1)["policy"] == drop


def test_no_default_keeps_value():
    d = FsmDef((
        FsmVar("flag", BoolType(), False, EV),
        FsmVar("policy", FiniteSet((drop, identity)), identity, (case(is_true("flag"), drop),)),
    ))
    fp = FsmPolicy(d)
    fp.apply_event(Event("flag", True, H1))
    fp.apply_event(Event("flag", False, H1))
    assert fp.valuation(H1)["policy"] == drop


def test_chained_endogenous_vars_settle_in_one_pass():
    d = FsmDef((
        FsmVar("policy", FiniteSet((drop, identity)), identity,
               (case(is_true("mid"), drop), case(Default(), identity))),
        FsmVar("mid", BoolType(), False, (case(is_true("src"), True), case(Default(), False))),
        FsmVar("src", BoolType(), False, EV),
    ))
    fp = FsmPolicy(d)
    fp.apply_event(Event("src", True, H1))
    assert fp.valuation(H1) == {"policy": drop, "mid": True, "src": True}


# -- derived policy ------------------------------------------------------------

def test_empty_derived_policy_is_identity(gw):
    assert gw.derived_policy() == identity


def test_single_instance_block(gw):
    gw.apply_event(Event("infected", True, H1))
    text = "fsm_policy:self.policy = " + render(gw.derived_policy())
    assert text.split("\n") == [
        "fsm_policy:self.policy = if",
        "    match: ('srcip', 10.0.0.1)",
        "then",
        "    [DynamicPolicy]",
        "    drop",
        "else",
        "    identity",
    ]


def linear_lookup(fp, p):
    for inst in sorted(fp.instances.values(), key=lambda i: int(i.key["srcip"])):
        if matches(p, inst.key):
            return evaluate(inst.valuation["policy"], p)
    return evaluate(identity, p)


def test_two_instances_match_linear_scan(gw, rng):
    gw.apply_event(Event("infected", True, FlowSpec(srcip="10.0.0.2")))
    gw.apply_event(Event("infected", True, H1))
    gw.apply_event(Event("exempt", True, H1))
    pol = gw.derived_policy()
    assert isinstance(pol, IfThenElse) and isinstance(pol.else_, IfThenElse)
    assert str(pol.guard["srcip"]) == "10.0.0.1"
    for _ in range(300):
        p = random_packet(rng)
        assert evaluate(pol, p) == linear_lookup(gw, p)


# -- properties ----------------------------------------------------------------

event_seqs = st.lists(st.tuples(
    st.sampled_from(["infected", "exempt"]),
    st.booleans(),
    st.sampled_from(["10.0.0.1", "10.0.0.2", "10.0.0.3"]),
), max_size=12)


@settings(max_examples=60)
@given(event_seqs)
def test_exogenous_fidelity_and_fixpoint(seq):
    fp = FsmPolicy(gardenwall_def())
    for name, value, ip in seq:
        report = fp.apply_event(Event(name, value, FlowSpec(srcip=ip)))
        val = dict(report.valuation)
        assert val[name] is value
        assert fp.fsm_def.var("policy").next_value(val) == val["policy"]
        # isolation: other instances unchanged by this event
        assert fp.valuation(FlowSpec(srcip="10.0.0.9"))["policy"] == identity


@settings(max_examples=40)
@given(event_seqs)
def test_replays_are_deterministic(seq):
    runs = []
    for _ in range(2):
        fp = FsmPolicy(gardenwall_def())
        for name, value, ip in seq:
            fp.apply_event(Event(name, value, FlowSpec(srcip=ip)))
        runs.append((fp.snapshot(), render(fp.derived_policy())))
    assert runs[0] == runs[1]
    r = random.Random(len(seq))
    fp = FsmPolicy(gardenwall_def())
    for name, value, ip in seq:
        fp.apply_event(Event(name, value, FlowSpec(srcip=ip)))
    pol = fp.derived_policy()
    for _ in range(20):
        p = random_packet(r)
        assert evaluate(pol, p) == linear_lookup(fp, p)


def test_dynamic_wrapper_is_transparent():
    p = Packet(srcip="10.0.0.1")
    assert evaluate(Dynamic(drop), p) == frozenset()
    assert Named("x", Dynamic(identity)) == Named("x", drop)
