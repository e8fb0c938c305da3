import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsmnet.gardenwall import (DEFAULT_SPECS, GardenwallConfig, gardenwall_def,
                               gardenwall_policy, redirect_to_gardenwall)
from fsmnet.gateway import Event
from fsmnet.packet import FlowSpec, Packet
from fsmnet.policy import evaluate, render
from fsmnet.verifier import build_model, verify


def test_default_redirect_name():
    assert redirect_to_gardenwall(GardenwallConfig()).name == \
        "modify: ('dstip', 10.0.0.3) ('dstmac', 00:00:00:00:00:03)"


def test_custom_gardenwall_host():
    cfg = GardenwallConfig(gardenwall_ip="10.0.0.9", gardenwall_mac="00:00:00:00:00:09")
    fp = gardenwall_policy(cfg)
    fp.apply_event(Event("infected", True, FlowSpec(srcip="10.0.0.1")))
    fp.apply_event(Event("exempt", True, FlowSpec(srcip="10.0.0.1")))
    text = render(fp.derived_policy())
    assert "modify: ('dstip', 10.0.0.9) ('dstmac', 00:00:00:00:00:09)" in text
    (q,) = evaluate(fp.derived_policy(), Packet(srcip="10.0.0.1", dstip="10.0.0.2"))
    assert str(q["dstip"]) == "10.0.0.9"


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        GardenwallConfig(gardenwall_ip="10.0.0.1")
    with pytest.raises(ValueError):
        GardenwallConfig(gardenwall_ip="10.0.0.300")
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"gardenwall_ip": "10.0.0.7", "gardenwall_mac": "00:00:00:00:00:07"}))
    assert GardenwallConfig.from_file(p).gardenwall_ip == "10.0.0.7"
    p.write_text(json.dumps({"gardenwal_ip": "10.0.0.7"}))
    with pytest.raises(ValueError):
        GardenwallConfig.from_file(p)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 254), st.integers(1, 0xFFFFFFFFFFFF))
def test_specs_hold_for_any_config(last_octet, mac):
    cfg = GardenwallConfig(gardenwall_ip=f"10.0.0.{last_octet}",
                           gardenwall_mac=":".join(f"{(mac >> s) & 0xFF:02x}" for s in range(40, -1, -8)))
    m = build_model(gardenwall_def(cfg))
    assert all(r.result.holds for r in verify(m, DEFAULT_SPECS))
