use std::fmt;
use std::net::Ipv4Addr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Tcp,
    Udp,
}

impl Protocol {
    pub fn number(self) -> u8 {
        match self {
            Protocol::Tcp => 6,
            Protocol::Udp => 17,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Endpoint {
    pub addr: Ipv4Addr,
    pub port: u16,
}

impl Endpoint {
    pub fn new(addr: Ipv4Addr, port: u16) -> Self {
        Self { addr, port }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.addr, self.port)
    }
}

/// Bidirectional 5-tuple. The two endpoints are stored in sorted order so a
/// packet and its reply map to the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub a: Endpoint,
    pub b: Endpoint,
    pub protocol: Protocol,
}

impl FlowKey {
    pub fn new(src: Endpoint, dst: Endpoint, protocol: Protocol) -> Self {
        let (a, b) = if src <= dst { (src, dst) } else { (dst, src) };
        Self { a, b, protocol }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.a, self.b, self.protocol.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Backward,
}

/// TCP control bits in wire order (FIN is bit 0, CWR is bit 7).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TcpFlags(pub u8);

impl TcpFlags {
    pub const FIN: u8 = 0x01;
    pub const SYN: u8 = 0x02;
    pub const RST: u8 = 0x04;
    pub const PSH: u8 = 0x08;
    pub const ACK: u8 = 0x10;
    pub const URG: u8 = 0x20;
    pub const ECE: u8 = 0x40;
    pub const CWR: u8 = 0x80;

    pub fn empty() -> Self {
        TcpFlags(0)
    }

    pub fn has(self, bit: u8) -> bool {
        self.0 & bit != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// Per-packet facts the flow features are computed from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PacketSummary {
    pub timestamp_us: u64,
    pub key: FlowKey,
    /// Sender of this packet.
    pub src: Endpoint,
    /// Relative to the first sender seen for `key`; rewritten by flow assembly
    /// relative to the owning flow's forward endpoint.
    pub direction: Direction,
    pub ip_total_len: u32,
    pub l4_header_len: u32,
    pub payload_len: u32,
    pub tcp_flags: TcpFlags,
    /// `None` exactly for UDP.
    pub tcp_window: Option<u16>,
}

impl PacketSummary {
    pub fn protocol(&self) -> Protocol {
        self.key.protocol
    }

    pub fn is_forward(&self) -> bool {
        self.direction == Direction::Forward
    }

    /// Total order over everything except the timestamp, used to make feature
    /// computation independent of the arrival order of same-instant packets.
    pub(crate) fn content_key(&self) -> impl Ord {
        (
            self.direction,
            self.ip_total_len,
            self.l4_header_len,
            self.payload_len,
            self.tcp_flags,
            self.tcp_window,
            self.src,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_symmetric() {
        let x = Endpoint::new(Ipv4Addr::new(10, 0, 0, 2), 5000);
        let y = Endpoint::new(Ipv4Addr::new(10, 0, 0, 1), 443);
        assert_eq!(
            FlowKey::new(x, y, Protocol::Tcp),
            FlowKey::new(y, x, Protocol::Tcp)
        );
        assert_ne!(
            FlowKey::new(x, y, Protocol::Tcp),
            FlowKey::new(x, y, Protocol::Udp)
        );
    }
}
