use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use super::packet::{Direction, Endpoint, FlowKey, PacketSummary, Protocol, TcpFlags};
use crate::error::{Error, Result};

/// Packets may arrive up to this far behind the newest timestamp seen.
pub const REORDER_WINDOW_US: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowConfig {
    pub flow_timeout_us: u64,
    pub activity_timeout_us: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            flow_timeout_us: 600_000_000,
            activity_timeout_us: 5_000_000,
        }
    }
}

impl FlowConfig {
    pub fn from_secs(flow_timeout: f64, activity_timeout: f64) -> Result<Self> {
        let to_us = |s: f64, name: &str| {
            if s.is_finite() && s > 0.0 {
                Ok((s * 1e6).round() as u64)
            } else {
                Err(Error::invalid(format!("{name} must be a positive number of seconds")))
            }
        };
        Ok(Self {
            flow_timeout_us: to_us(flow_timeout, "flow timeout")?,
            activity_timeout_us: to_us(activity_timeout, "activity timeout")?,
        })
    }
}

/// All packets of one bidirectional flow, in timestamp order.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowBuffer {
    pub key: FlowKey,
    pub first_ts: u64,
    pub forward_endpoint: Endpoint,
    pub packets: Vec<PacketSummary>,
    /// Gap that separates active from idle periods when computing features.
    pub activity_timeout_us: u64,
}

impl FlowBuffer {
    pub fn last_ts(&self) -> u64 {
        self.packets.last().map_or(self.first_ts, |p| p.timestamp_us)
    }

    pub fn duration_us(&self) -> u64 {
        self.last_ts() - self.first_ts
    }
}

struct Pending {
    ts: u64,
    seq: u64,
    packet: PacketSummary,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        (self.ts, self.seq) == (other.ts, other.seq)
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.ts, self.seq).cmp(&(other.ts, other.seq))
    }
}

struct OpenFlow {
    order: u64,
    buffer: FlowBuffer,
    fin_fwd: bool,
    fin_bwd: bool,
}

/// Incremental flow assembly over a (nearly) time-ordered packet stream.
pub struct FlowAssembler {
    config: FlowConfig,
    pending: BinaryHeap<Reverse<Pending>>,
    newest: u64,
    arrivals: u64,
    flows_opened: u64,
    open: HashMap<FlowKey, OpenFlow>,
    closed: Vec<(u64, FlowBuffer)>,
}

impl FlowAssembler {
    pub fn new(config: FlowConfig) -> Self {
        Self {
            config,
            pending: BinaryHeap::new(),
            newest: 0,
            arrivals: 0,
            flows_opened: 0,
            open: HashMap::new(),
            closed: Vec::new(),
        }
    }

    pub fn push(&mut self, packet: PacketSummary) -> Result<()> {
        let ts = packet.timestamp_us;
        if ts + REORDER_WINDOW_US < self.newest {
            return Err(Error::OutOfOrder {
                timestamp_us: ts,
                window_us: REORDER_WINDOW_US,
            });
        }
        self.newest = self.newest.max(ts);
        self.pending.push(Reverse(Pending {
            ts,
            seq: self.arrivals,
            packet,
        }));
        self.arrivals += 1;
        while let Some(Reverse(head)) = self.pending.peek() {
            if head.ts + REORDER_WINDOW_US >= self.newest {
                break;
            }
            let Reverse(head) = self.pending.pop().unwrap();
            self.process(head.packet);
        }
        Ok(())
    }

    /// Flushes the reorder buffer and every open flow, in flow-creation order.
    pub fn finish(mut self) -> Vec<FlowBuffer> {
        while let Some(Reverse(head)) = self.pending.pop() {
            self.process(head.packet);
        }
        let mut all = std::mem::take(&mut self.closed);
        all.extend(self.open.drain().map(|(_, f)| (f.order, f.buffer)));
        all.sort_by_key(|(order, _)| *order);
        all.into_iter().map(|(_, b)| b).collect()
    }

    fn process(&mut self, mut packet: PacketSummary) {
        let key = packet.key;
        let ts = packet.timestamp_us;
        if let Some(flow) = self.open.get(&key) {
            if ts - flow.buffer.first_ts > self.config.flow_timeout_us {
                let flow = self.open.remove(&key).unwrap();
                self.closed.push((flow.order, flow.buffer));
            }
        }
        let order = &mut self.flows_opened;
        let activity_timeout_us = self.config.activity_timeout_us;
        let flow = self.open.entry(key).or_insert_with(|| {
            let f = OpenFlow {
                order: *order,
                buffer: FlowBuffer {
                    key,
                    first_ts: ts,
                    forward_endpoint: packet.src,
                    packets: Vec::new(),
                    activity_timeout_us,
                },
                fin_fwd: false,
                fin_bwd: false,
            };
            *order += 1;
            f
        });

        packet.direction = if packet.src == flow.buffer.forward_endpoint {
            Direction::Forward
        } else {
            Direction::Backward
        };
        let mut close = false;
        if key.protocol == Protocol::Tcp {
            let flags = packet.tcp_flags;
            if flags.has(TcpFlags::FIN) {
                match packet.direction {
                    Direction::Forward => flow.fin_fwd = true,
                    Direction::Backward => flow.fin_bwd = true,
                }
            }
            close = flags.has(TcpFlags::RST) || (flow.fin_fwd && flow.fin_bwd);
        }
        flow.buffer.packets.push(packet);
        if close {
            let flow = self.open.remove(&key).unwrap();
            self.closed.push((flow.order, flow.buffer));
        }
    }
}

/// Groups a packet stream into bidirectional flows.
///
/// A packet joins the open flow with its canonical key while it falls within
/// `flow_timeout` of that flow's first packet; otherwise it starts a new flow
/// whose sender becomes the forward endpoint. TCP flows also end (inclusive)
/// on RST or once both directions have sent FIN.
pub fn assemble_flows<I>(packets: I, config: FlowConfig) -> Result<Vec<FlowBuffer>>
where
    I: IntoIterator<Item = PacketSummary>,
{
    let mut asm = FlowAssembler::new(config);
    for p in packets {
        asm.push(p)?;
    }
    Ok(asm.finish())
}

#[cfg(test)]
mod tests {
    use std::net::Ipv4Addr;

    use super::*;

    fn ep(last: u8, port: u16) -> Endpoint {
        Endpoint::new(Ipv4Addr::new(192, 168, 1, last), port)
    }

    pub(crate) fn pkt(ts: u64, src: Endpoint, dst: Endpoint, proto: Protocol, flags: u8) -> PacketSummary {
        let tcp = proto == Protocol::Tcp;
        PacketSummary {
            timestamp_us: ts,
            key: FlowKey::new(src, dst, proto),
            src,
            direction: Direction::Forward,
            ip_total_len: if tcp { 40 } else { 28 },
            l4_header_len: if tcp { 20 } else { 8 },
            payload_len: 0,
            tcp_flags: TcpFlags(flags),
            tcp_window: tcp.then_some(1024),
        }
    }

    #[test]
    fn udp_timeout_splits_flows() {
        let (a, b) = (ep(1, 1000), ep(2, 53));
        let flows = assemble_flows(
            vec![
                pkt(0, a, b, Protocol::Udp, 0),
                pkt(601_000_000, a, b, Protocol::Udp, 0),
            ],
            FlowConfig::default(),
        )
        .unwrap();
        assert_eq!(flows.len(), 2);
        let joined = assemble_flows(
            vec![
                pkt(0, a, b, Protocol::Udp, 0),
                pkt(600_000_000, b, a, Protocol::Udp, 0),
            ],
            FlowConfig::default(),
        )
        .unwrap();
        assert_eq!(joined.len(), 1);
        assert_eq!(joined[0].packets[1].direction, Direction::Backward);
    }

    #[test]
    fn fin_both_ways_then_syn_opens_second_flow() {
        let (a, b) = (ep(1, 40000), ep(2, 80));
        let t = Protocol::Tcp;
        let packets = vec![
            pkt(0, a, b, t, TcpFlags::SYN),
            pkt(10, b, a, t, TcpFlags::SYN | TcpFlags::ACK),
            pkt(20, a, b, t, TcpFlags::ACK),
            pkt(30, a, b, t, TcpFlags::FIN | TcpFlags::ACK),
            pkt(40, b, a, t, TcpFlags::FIN | TcpFlags::ACK),
            pkt(50, a, b, t, TcpFlags::SYN),
        ];
        let flows = assemble_flows(packets, FlowConfig::default()).unwrap();
        assert_eq!(flows.len(), 2);
        assert_eq!(flows[0].packets.len(), 5);
        assert_eq!(flows[1].packets.len(), 1);
    }

    #[test]
    fn rst_closes_flow() {
        let (a, b) = (ep(1, 40000), ep(2, 80));
        let t = Protocol::Tcp;
        let flows = assemble_flows(
            vec![
                pkt(0, a, b, t, TcpFlags::SYN),
                pkt(5, b, a, t, TcpFlags::RST),
                pkt(9, a, b, t, TcpFlags::SYN),
            ],
            FlowConfig::default(),
        )
        .unwrap();
        assert_eq!(flows.len(), 2);
        assert_eq!(flows[0].packets.len(), 2);
    }

    #[test]
    fn reorder_within_window_is_tolerated() {
        let (a, b) = (ep(1, 1), ep(2, 2));
        let flows = assemble_flows(
            vec![
                pkt(500_000, b, a, Protocol::Udp, 0),
                pkt(100_000, a, b, Protocol::Udp, 0),
            ],
            FlowConfig::default(),
        )
        .unwrap();
        assert_eq!(flows.len(), 1);
        assert_eq!(flows[0].first_ts, 100_000);
        assert_eq!(flows[0].forward_endpoint, a);
    }

    #[test]
    fn reorder_beyond_window_is_an_error() {
        let (a, b) = (ep(1, 1), ep(2, 2));
        let err = assemble_flows(
            vec![
                pkt(3_000_000, a, b, Protocol::Udp, 0),
                pkt(1_000_000, a, b, Protocol::Udp, 0),
            ],
            FlowConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::OutOfOrder { .. }));
    }

    #[test]
    fn single_packet_is_a_flow() {
        let flows = assemble_flows(
            vec![pkt(7, ep(1, 1), ep(2, 2), Protocol::Udp, 0)],
            FlowConfig::default(),
        )
        .unwrap();
        assert_eq!(flows.len(), 1);
        assert_eq!(flows[0].duration_us(), 0);
    }
}
