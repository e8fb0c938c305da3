import random

import pytest
from hypothesis import strategies as st

from fsmnet.gardenwall import gardenwall_def, gardenwall_policy
from fsmnet.packet import FlowSpec, Packet
from fsmnet.policy import Drop, Fwd, Identity, IfThenElse, Match, Modify, Parallel, Sequential, flood

from oracles import IPS, MACS, PORTS

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)


@pytest.fixture
def gw_def():
    return gardenwall_def()


@pytest.fixture
def gw():
    return gardenwall_policy()


@pytest.fixture
def rng():
    return random.Random(20261015)


# -- hypothesis strategies ---------------------------------------------------

_FIELD_VALUES = {
    "srcip": st.sampled_from(IPS),
    "dstip": st.sampled_from(IPS),
    "srcmac": st.sampled_from(MACS),
    "dstmac": st.sampled_from(MACS),
    "dstport": st.sampled_from([80, 443]),
    "inport": st.sampled_from(PORTS),
}


@st.composite
def flows(draw, min_size=0):
    names = draw(st.lists(st.sampled_from(sorted(_FIELD_VALUES)), min_size=min_size, max_size=3, unique=True))
    return FlowSpec([(n, draw(_FIELD_VALUES[n])) for n in names])


@st.composite
def packets(draw):
    headers = {"switch": 1}
    for name, values in _FIELD_VALUES.items():
        if name in ("inport", "srcip", "dstip", "srcmac", "dstmac") or draw(st.booleans()):
            headers[name] = draw(values)
    return Packet(headers)


def _leaf(filters_only=False):
    base = [st.just(Drop()), st.just(Identity()), flows().map(Match)]
    if not filters_only:
        base += [flows(min_size=1).map(Modify), st.sampled_from(PORTS).map(Fwd), st.just(flood)]
    return st.one_of(*base)


def policies(filters_only=False):
    def extend(children):
        return st.one_of(
            st.lists(children, min_size=2, max_size=3).map(lambda ps: Sequential(tuple(ps))),
            st.lists(children, min_size=2, max_size=3).map(lambda ps: Parallel(tuple(ps))),
            st.tuples(flows(), children, children).map(lambda t: IfThenElse(*t)),
        )
    return st.recursive(_leaf(filters_only), extend, max_leaves=8)
