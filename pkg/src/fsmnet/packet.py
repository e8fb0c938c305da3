"""Packets, header fields and flow specifications.

A ``FlowSpec`` is a partial binding of header fields used both as a match
pattern and as a set of assignments. ``Packet`` is the same kind of binding
plus fabric-internal slots (``outport`` and an opaque ``meta`` tag) that are
never matched on.
"""
from __future__ import annotations

import ipaddress
import re
from typing import Any, Iterable, Iterator, Mapping, Tuple, Union

FIELDS = (
    "switch", "inport", "srcmac", "dstmac", "srcip", "dstip", "srcport",
    "dstport", "ethtype", "protocol", "tos", "vlan_id", "vlan_pcp",
)
FIELD_INDEX = {name: i for i, name in enumerate(FIELDS)}

_INT_RANGES = {
    "switch": (1, 2**64 - 1),
    "inport": (0, 65535),
    "srcport": (0, 65535),
    "dstport": (0, 65535),
    "ethtype": (0, 65535),
    "protocol": (0, 255),
    "tos": (0, 255),
    "vlan_id": (0, 4095),
    "vlan_pcp": (0, 7),
}
_MAC_FIELDS = ("srcmac", "dstmac")
_IP_FIELDS = ("srcip", "dstip")


class FlowError(ValueError):
    pass


class UnknownField(FlowError):
    def __init__(self, name: str):
        super().__init__(f"unknown header field {name!r}")
        self.name = name


class MalformedValue(FlowError):
    def __init__(self, field: str, text: Any):
        super().__init__(f"malformed value {text!r} for field {field!r}")
        self.field = field
        self.text = text


class FlowSyntaxError(FlowError):
    def __init__(self, position: int, message: str = "syntax error"):
        super().__init__(f"{message} at position {position}")
        self.position = position


class MAC:
    """Ethernet address, normalized to lowercase colon-separated octets."""

    __slots__ = ("_octets",)

    def __init__(self, value: Union[str, "MAC", int, bytes]):
        if isinstance(value, MAC):
            octets = value._octets
        elif isinstance(value, int):
            if not 0 <= value < 2**48:
                raise ValueError(f"mac out of range: {value}")
            octets = value.to_bytes(6, "big")
        elif isinstance(value, bytes):
            if len(value) != 6:
                raise ValueError("mac needs 6 octets")
            octets = value
        else:
            parts = re.split(r"[:-]", str(value).strip())
            if len(parts) != 6 or not all(re.fullmatch(r"[0-9a-fA-F]{1,2}", p) for p in parts):
                raise ValueError(f"bad mac {value!r}")
            octets = bytes(int(p, 16) for p in parts)
        self._octets = octets

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self._octets)

    def __repr__(self) -> str:
        return f"MAC('{self}')"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MAC) and other._octets == self._octets

    def __hash__(self) -> int:
        return hash(("mac", self._octets))

    def __int__(self) -> int:
        return int.from_bytes(self._octets, "big")


FieldValue = Union[int, MAC, ipaddress.IPv4Address]


def coerce_value(field: str, value: Any) -> FieldValue:
    """Convert ``value`` into the canonical typed value for ``field``."""
    if field not in FIELD_INDEX:
        raise UnknownField(field)
    try:
        if field in _MAC_FIELDS:
            return MAC(value)
        if field in _IP_FIELDS:
            if isinstance(value, ipaddress.IPv4Address):
                return value
            if isinstance(value, str):
                return ipaddress.IPv4Address(value.strip())
            raise ValueError
        if isinstance(value, bool):
            raise ValueError
        if isinstance(value, str):
            value = int(value.strip(), 0)
        if not isinstance(value, int):
            raise ValueError
        lo, hi = _INT_RANGES[field]
        if not lo <= value <= hi:
            raise ValueError
        return value
    except (ValueError, ipaddress.AddressValueError):
        raise MalformedValue(field, value) from None


def format_value(value: FieldValue) -> str:
    return str(value)


def _canonical_items(items: Iterable[Tuple[str, FieldValue]]) -> Tuple[Tuple[str, FieldValue], ...]:
    return tuple(sorted(items, key=lambda kv: FIELD_INDEX[kv[0]]))


class FlowSpec(Mapping[str, FieldValue]):
    """Partial mapping of header fields to values; absent fields are wildcards.

    Insertion order is kept for display (``modify: ('dstip', ..) ('dstmac', ..)``)
    but equality and hashing ignore it.
    """

    __slots__ = ("_items", "_map")

    def __init__(self, fields: Union[Mapping[str, Any], Iterable[Tuple[str, Any]], None] = None, **kw: Any):
        pairs = list(fields.items() if isinstance(fields, Mapping) else (fields or ()))
        pairs.extend(kw.items())
        mapping: dict[str, FieldValue] = {}
        for name, value in pairs:
            mapping[name] = coerce_value(name, value)
        self._map = mapping
        self._items = tuple(mapping.items())

    def __getitem__(self, key: str) -> FieldValue:
        return self._map[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FlowSpec):
            return self._map == other._map
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._items))

    def __repr__(self) -> str:
        return f"FlowSpec({render_flow_spec(self)})"

    @property
    def items_in_order(self) -> Tuple[Tuple[str, FieldValue], ...]:
        return self._items

    def canonical(self) -> Tuple[Tuple[str, FieldValue], ...]:
        return _canonical_items(self._items)

    def restrict(self, fields: Iterable[str]) -> "FlowSpec":
        keep = set(fields)
        return FlowSpec([(k, v) for k, v in self.canonical() if k in keep])

    def key(self) -> str:
        """Deterministic instance key: values in field order joined with ``|``."""
        return "|".join(format_value(v) for _, v in self.canonical())

    def as_dict_text(self) -> str:
        """``{'srcip': 10.0.0.1}`` as it appears in controller logs."""
        return "{" + ", ".join(f"'{k}': {format_value(v)}" for k, v in self.canonical()) + "}"


_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>'[^']*'|\"[^\"]*\"|[^,}\s]+))\s*")


def parse_flow_spec(text: str) -> FlowSpec:
    """Parse ``{field=value, ...}`` into a FlowSpec."""
    s = text.strip()
    offset = len(text) - len(text.lstrip())
    if not s.startswith("{"):
        raise FlowSyntaxError(offset, "expected '{'")
    if not s.endswith("}"):
        raise FlowSyntaxError(offset + len(s), "expected '}'")
    body = s[1:-1]
    pos = 0
    pairs: list[tuple[str, Any]] = []
    if body.strip() == "":
        return FlowSpec()
    while True:
        m = _TOKEN.match(body, pos)
        if m is None:
            raise FlowSyntaxError(offset + 1 + pos, "expected field=value")
        name, raw = m.group("name"), m.group("value")
        if name not in FIELD_INDEX:
            raise UnknownField(name)
        if raw[0] in "'\"":
            raw = raw[1:-1]
        pairs.append((name, coerce_value(name, raw)))
        pos = m.end()
        if pos == len(body):
            break
        if body[pos] != ",":
            raise FlowSyntaxError(offset + 1 + pos, "expected ','")
        pos += 1
    return FlowSpec(pairs)


def render_flow_spec(flow: FlowSpec) -> str:
    return "{" + ", ".join(f"{k}={format_value(v)}" for k, v in flow.canonical()) + "}"


class MissingLocation(ValueError):
    pass


class Packet:
    """Immutable located packet header record."""

    __slots__ = ("_headers", "outport", "meta", "_hash")

    def __init__(self, headers: Union[Mapping[str, Any], FlowSpec, None] = None,
                 outport: int | None = None, meta: tuple = (), **kw: Any):
        spec = headers if isinstance(headers, FlowSpec) and not kw else FlowSpec(
            dict(headers or {}), **kw)
        object.__setattr__(self, "_headers", spec)
        object.__setattr__(self, "outport", outport)
        object.__setattr__(self, "meta", tuple(meta))
        object.__setattr__(self, "_hash", hash((spec, outport, self.meta)))

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError("Packet is immutable")

    @property
    def headers(self) -> FlowSpec:
        return self._headers

    def get(self, field: str, default: Any = None) -> Any:
        return self._headers.get(field, default)

    def __getitem__(self, field: str) -> FieldValue:
        return self._headers[field]

    def __contains__(self, field: object) -> bool:
        return field in self._headers

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Packet):
            return NotImplemented
        return (self._headers == other._headers and self.outport == other.outport
                and self.meta == other.meta)

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        extra = f", outport={self.outport}" if self.outport is not None else ""
        return f"Packet({render_flow_spec(self._headers)}{extra})"

    def replace(self, outport: Any = ..., meta: Any = ..., **fields: Any) -> "Packet":
        merged = dict(self._headers.canonical())
        for k, v in fields.items():
            if v is None:
                merged.pop(k, None)
            else:
                merged[k] = v
        return Packet(merged,
                      outport=self.outport if outport is ... else outport,
                      meta=self.meta if meta is ... else meta)

    def require_location(self) -> None:
        if "switch" not in self._headers or "inport" not in self._headers:
            raise MissingLocation(f"packet lacks switch/inport: {self!r}")


def matches(p: Packet, f: FlowSpec) -> bool:
    """True iff every field bound in ``f`` is bound in ``p`` to an equal value."""
    headers = p.headers
    for k, v in f.items_in_order:
        if headers.get(k) != v:
            return False
    return True


def rewrite(p: Packet, assignments: FlowSpec) -> Packet:
    return p.replace(**dict(assignments.items_in_order))
