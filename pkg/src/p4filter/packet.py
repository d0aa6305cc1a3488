"""Byte-exact Ethernet II / IPv4 / TCP frame model.

Fixed 20-byte IPv4 and TCP headers (no options, no fragmentation), since
the pipeline only ever filters plain TCP. Values are immutable; every
transformation returns a new object, which keeps packet processing
deterministic and safe to replay.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import NamedTuple

ETHERTYPE_IPV4 = 0x0800
PROTO_TCP = 6

ETH_LEN = 14
IPV4_LEN = 20
TCP_LEN = 20
MIN_FRAME = ETH_LEN + IPV4_LEN + TCP_LEN

# TCP flag bits (low 6 of the flags byte)
FIN = 0x01
SYN = 0x02
RST = 0x04
PSH = 0x08
ACK = 0x10
URG = 0x20

_FLAG_BITS = {"FIN": FIN, "SYN": SYN, "RST": RST, "PSH": PSH, "ACK": ACK, "URG": URG}


class PacketError(Exception):
    """Base class for frame parsing failures."""


class Truncated(PacketError):
    """Frame shorter than the fixed headers, or length fields inconsistent
    with the actual frame size."""


class UnsupportedEthertype(PacketError):
    """Ethertype is not IPv4."""


class UnsupportedProtocol(PacketError):
    """Not plain TCP-in-IPv4 (wrong IP proto, IP/TCP options, or version)."""


class BadChecksum(PacketError):
    """Stored IPv4 header checksum does not match the header contents."""


class TtlExpired(PacketError):
    """TTL is already 0; the packet cannot be forwarded another hop."""


@dataclass(frozen=True)
class MacAddr:
    octets: bytes

    def __post_init__(self):
        if len(self.octets) != 6:
            raise ValueError("MAC address must be 6 octets")

    @classmethod
    def from_text(cls, text: str) -> "MacAddr":
        parts = text.split(":")
        if len(parts) != 6:
            raise ValueError(f"bad MAC address {text!r}")
        return cls(bytes(int(p, 16) for p in parts))

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)


@dataclass(frozen=True)
class Ipv4Address:
    octets: bytes

    def __post_init__(self):
        if len(self.octets) != 4:
            raise ValueError("IPv4 address must be 4 octets")

    @classmethod
    def from_text(cls, text: str) -> "Ipv4Address":
        parts = text.split(".")
        if len(parts) != 4:
            raise ValueError(f"bad IPv4 address {text!r}")
        octets = bytes(int(p) for p in parts)
        return cls(octets)

    def __str__(self) -> str:
        return ".".join(str(b) for b in self.octets)


@dataclass(frozen=True)
class EthernetHeader:
    dst_mac: MacAddr
    src_mac: MacAddr
    ethertype: int = ETHERTYPE_IPV4


@dataclass(frozen=True)
class Ipv4Header:
    src_ip: Ipv4Address
    dst_ip: Ipv4Address
    ttl: int
    protocol: int = PROTO_TCP
    header_checksum: int = 0
    total_length: int = IPV4_LEN + TCP_LEN
    tos: int = 0
    identification: int = 0
    flags_frag: int = 0


@dataclass(frozen=True)
class TcpHeader:
    src_port: int
    dst_port: int
    flags: int = 0
    seq: int = 0
    ack: int = 0
    window: int = 65535
    checksum: int = 0   # carried, never validated; 0 on synthesized frames
    urgent: int = 0

    def __post_init__(self):
        if not 0 <= self.src_port <= 0xFFFF or not 0 <= self.dst_port <= 0xFFFF:
            raise ValueError("TCP port out of range")

    def has(self, bit: int) -> bool:
        return bool(self.flags & bit)

    @property
    def is_pure_syn(self) -> bool:
        """SYN set with ACK clear: a fresh connection attempt (or knock)."""
        return self.has(SYN) and not self.has(ACK)


def tcp_flags(*names: str) -> int:
    """Build a flags byte from names, e.g. tcp_flags("SYN", "ACK")."""
    value = 0
    for name in names:
        value |= _FLAG_BITS[name.upper()]
    return value


@dataclass(frozen=True)
class Packet:
    eth: EthernetHeader
    ip: Ipv4Header
    tcp: TcpHeader
    payload: bytes = b""


class FlowKey(NamedTuple):
    """Direction-normalized 4-tuple; build only via flow_key()."""

    a_ip: Ipv4Address
    b_ip: Ipv4Address
    a_port: int
    b_port: int

    def to_bytes(self) -> bytes:
        return (self.a_ip.octets + self.b_ip.octets
                + self.a_port.to_bytes(2, "big") + self.b_port.to_bytes(2, "big"))


def ipv4_checksum(header: bytes) -> int:
    """Standard one's-complement sum over 16-bit words, checksum field zeroed
    by the caller."""
    total = 0
    for i in range(0, len(header), 2):
        total += (header[i] << 8) | header[i + 1]
    while total > 0xFFFF:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _ipv4_header_bytes(ip: Ipv4Header, checksum: int) -> bytes:
    return struct.pack(
        "!BBHHHBBH4s4s",
        (4 << 4) | 5,
        ip.tos,
        ip.total_length,
        ip.identification,
        ip.flags_frag,
        ip.ttl,
        ip.protocol,
        checksum,
        ip.src_ip.octets,
        ip.dst_ip.octets,
    )


def serialize_packet(p: Packet) -> bytes:
    """Emit the wire frame; the IPv4 checksum is always recomputed."""
    eth = p.eth.dst_mac.octets + p.eth.src_mac.octets + struct.pack("!H", p.eth.ethertype)
    total_length = IPV4_LEN + TCP_LEN + len(p.payload)
    ip = p.ip if p.ip.total_length == total_length else replace(p.ip, total_length=total_length)
    checksum = ipv4_checksum(_ipv4_header_bytes(ip, 0))
    ipv4 = _ipv4_header_bytes(ip, checksum)
    tcp = struct.pack(
        "!HHIIBBHHH",
        p.tcp.src_port,
        p.tcp.dst_port,
        p.tcp.seq,
        p.tcp.ack,
        5 << 4,
        p.tcp.flags,
        p.tcp.window,
        p.tcp.checksum,
        p.tcp.urgent,
    )
    return eth + ipv4 + tcp + p.payload


def parse_packet(frame: bytes) -> Packet:
    """Parse a wire frame, validating layout and the IPv4 checksum.

    Raises Truncated, UnsupportedEthertype, UnsupportedProtocol or
    BadChecksum; a frame that parses cleanly round-trips byte-exactly
    through serialize_packet.
    """
    if len(frame) < MIN_FRAME:
        raise Truncated(f"frame is {len(frame)} bytes, need at least {MIN_FRAME}")
    dst_mac = MacAddr(frame[0:6])
    src_mac = MacAddr(frame[6:12])
    (ethertype,) = struct.unpack("!H", frame[12:14])
    if ethertype != ETHERTYPE_IPV4:
        raise UnsupportedEthertype(f"ethertype 0x{ethertype:04x}")

    (ver_ihl, tos, total_length, ident, flags_frag, ttl, proto, checksum,
     src_ip, dst_ip) = struct.unpack("!BBHHHBBH4s4s", frame[14:34])
    if ver_ihl >> 4 != 4 or ver_ihl & 0x0F != 5:
        raise UnsupportedProtocol(f"IPv4 version/ihl byte 0x{ver_ihl:02x}")
    if proto != PROTO_TCP:
        raise UnsupportedProtocol(f"IP protocol {proto}")
    if len(frame) != ETH_LEN + total_length:
        raise Truncated(
            f"total_length {total_length} inconsistent with frame of {len(frame)} bytes")
    stripped = frame[14:24] + b"\x00\x00" + frame[26:34]
    if ipv4_checksum(stripped) != checksum:
        raise BadChecksum(f"stored 0x{checksum:04x}")

    (sport, dport, seq, ack, offset_byte, flags, window, tcp_sum,
     urgent) = struct.unpack("!HHIIBBHHH", frame[34:54])
    if offset_byte >> 4 != 5:
        raise UnsupportedProtocol(f"TCP data offset {offset_byte >> 4}")

    return Packet(
        eth=EthernetHeader(dst_mac=dst_mac, src_mac=src_mac, ethertype=ethertype),
        ip=Ipv4Header(
            src_ip=Ipv4Address(src_ip), dst_ip=Ipv4Address(dst_ip), ttl=ttl,
            protocol=proto, header_checksum=checksum, total_length=total_length,
            tos=tos, identification=ident, flags_frag=flags_frag),
        tcp=TcpHeader(src_port=sport, dst_port=dport, flags=flags, seq=seq,
                      ack=ack, window=window, checksum=tcp_sum, urgent=urgent),
        payload=frame[54:],
    )


def decrement_ttl(p: Packet) -> Packet:
    """One forwarding hop: ttl - 1 with the checksum recomputed.

    Raises TtlExpired when the incoming ttl is already 0.
    """
    if p.ip.ttl == 0:
        raise TtlExpired("ttl is 0")
    new_ip = replace(p.ip, ttl=p.ip.ttl - 1)
    checksum = ipv4_checksum(_ipv4_header_bytes(new_ip, 0))
    return replace(p, ip=replace(new_ip, header_checksum=checksum))


def flow_key(p: Packet, direction: int) -> FlowKey:
    """4-tuple normalized so both directions of one flow share a key.

    direction 0 (packet from the internal side) keeps (src, dst, sport,
    dport); direction 1 swaps to (dst, src, dport, sport).
    """
    if direction == 0:
        return FlowKey(p.ip.src_ip, p.ip.dst_ip, p.tcp.src_port, p.tcp.dst_port)
    if direction == 1:
        return FlowKey(p.ip.dst_ip, p.ip.src_ip, p.tcp.dst_port, p.tcp.src_port)
    raise ValueError(f"direction must be 0 or 1, got {direction}")


def make_packet(src_ip: str, dst_ip: str, src_mac: str, dst_mac: str,
                sport: int, dport: int, flags: int = SYN, ttl: int = 64,
                payload: bytes = b"", seq: int = 0, ack: int = 0) -> Packet:
    """Convenience constructor used by hosts and tests; checksum fields are
    filled on serialization."""
    return Packet(
        eth=EthernetHeader(dst_mac=MacAddr.from_text(dst_mac),
                           src_mac=MacAddr.from_text(src_mac)),
        ip=Ipv4Header(src_ip=Ipv4Address.from_text(src_ip),
                      dst_ip=Ipv4Address.from_text(dst_ip), ttl=ttl,
                      total_length=IPV4_LEN + TCP_LEN + len(payload)),
        tcp=TcpHeader(src_port=sport, dst_port=dport, flags=flags, seq=seq, ack=ack),
        payload=payload,
    )
