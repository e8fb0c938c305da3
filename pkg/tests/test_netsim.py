import pytest

from fsmnet.fsm import FsmPolicy
from fsmnet.gardenwall import gardenwall_def
from fsmnet.gateway import Event
from fsmnet.netsim import (Fabric, MacLearnerState, UnknownHost, UnsupportedTopology,
                           build_topology, mac_learner_step, transport)
from fsmnet.packet import MAC, FlowSpec, Packet
from fsmnet.policy import Drop, Fwd, drop, evaluate, flood, identity, modify

H1 = FlowSpec(srcip="10.0.0.1")


def pkt(src, dst, inport=None, **extra):
    return Packet(switch=1, inport=inport or src, srcmac=MAC(src), dstmac=MAC(dst),
                  srcip=f"10.0.0.{src}", dstip=f"10.0.0.{dst}", **extra)


@pytest.fixture
def t3():
    return build_topology("single,3")


def test_single_three(t3):
    assert sorted(t3.hosts) == ["h1", "h2", "h3"]
    h2 = t3.host("h2")
    assert (str(h2.ip), str(h2.mac), h2.port) == ("10.0.0.2", "00:00:00:00:00:02", 2)
    assert t3.switches == {1: (1, 2, 3)}
    assert t3.describe()[-1] == "(h1, s1) (h2, s1) (h3, s1)"


def test_single_two():
    assert sorted(build_topology("single,2").hosts) == ["h1", "h2"]


@pytest.mark.parametrize("spec", ["mesh,4", "single,1", "single", "linear,3"])
def test_unsupported(spec):
    with pytest.raises(UnsupportedTopology):
        build_topology(spec)


def test_unknown_host(t3):
    with pytest.raises(UnknownHost):
        t3.host("h9")


def test_learner_floods_unknown_then_forwards():
    st = MacLearnerState()
    st, pol = mac_learner_step(st, pkt(1, 2))
    assert pol == flood
    st, pol = mac_learner_step(st, pkt(2, 1))
    assert pol == Fwd(1)
    assert st.table(1) == {MAC(1): 1, MAC(2): 2}


def test_learner_latest_binding_wins():
    st = MacLearnerState()
    st, _ = mac_learner_step(st, pkt(1, 2, inport=1))
    st, _ = mac_learner_step(st, pkt(1, 2, inport=3))
    st, pol = mac_learner_step(st, pkt(2, 1))
    assert pol == Fwd(3)


def test_learner_as_policy_agrees_with_step():
    st = MacLearnerState()
    for a, b in [(1, 2), (2, 1), (3, 1)]:
        st, _ = mac_learner_step(st, pkt(a, b))
    pol = st.as_policy(1)
    for a, b in [(1, 2), (2, 3), (3, 2), (2, 1)]:
        p = pkt(a, b)
        _, step = mac_learner_step(st, p)
        assert evaluate(pol, p, (1, 2, 3)) == evaluate(step, p, (1, 2, 3))


def test_transport(t3):
    p = pkt(1, 2)
    assert transport(t3, Drop(), p) == []
    assert [h for h, _ in transport(t3, flood, p)] == ["h2", "h3"]
    assert [h for h, _ in transport(t3, Fwd(2), p)] == ["h2"]
    redirect = modify(dstip="10.0.0.3", dstmac="00:00:00:00:00:03") >> Fwd(3)
    ((name, q),) = transport(t3, redirect, p)
    assert name == "h3" and str(q["dstip"]) == "10.0.0.3"


def _fabric(t, fp):
    return Fabric(t, fp.derived_policy, observe=fp.observe_packet)


def test_ping_identity(t3):
    fp = FsmPolicy(gardenwall_def())
    r = _fabric(t3, fp).ping("h1", "h2", 2)
    assert (r.transmitted, r.received, r.loss_pct) == (2, 2, 0.0)
    assert r.replier_ips == ["10.0.0.2", "10.0.0.2"]
    assert r.lines[1] == "64 bytes from 10.0.0.2 icmp_req=1 ttl=64 time=0.200 ms"
    assert "2 packets transmitted, 2 received, 0% packet loss, time 1000ms" in r.lines


def test_ping_dropped(t3):
    fp = FsmPolicy(gardenwall_def())
    fp.apply_event(Event("infected", True, H1))
    r = _fabric(t3, fp).ping("h1", "h2", 2)
    assert (r.received, r.loss_pct) == (0, 100.0)
    assert "2 packets transmitted, 0 received, 100% packet loss, time 1000ms" in r.lines
    assert not any(line.startswith("rtt") for line in r.lines)


def test_ping_redirected(t3):
    fp = FsmPolicy(gardenwall_def())
    fp.apply_event(Event("infected", True, H1))
    fp.apply_event(Event("exempt", True, H1))
    r = _fabric(t3, fp).ping("h1", "h2", 2)
    assert r.replier_ips == ["10.0.0.3", "10.0.0.3"]


def test_no_flooding_after_exchange(t3):
    fab = Fabric(t3, lambda: identity)
    fab.ping("h1", "h2", 1)
    fab.decisions.clear()
    fab.ping("h1", "h2", 3)
    assert fab.decisions and all(isinstance(d, Fwd) for _, d in fab.decisions)


def test_packet_conservation(t3):
    fab = Fabric(t3, lambda: identity)
    fab.ping("h1", "h2", 1)
    for a, b in [(1, 2), (2, 1)]:
        assert len(fab.inject(pkt(a, b))) == 1
    # unknown destination floods to every other port
    assert len(fab.inject(pkt(1, 3).replace(dstmac=MAC(9)))) == 2
    assert Fabric(t3, lambda: drop).inject(pkt(1, 2)) == []


def test_ping_rejects_self(t3):
    with pytest.raises(ValueError):
        Fabric(t3, lambda: identity).ping("h1", "h1")
