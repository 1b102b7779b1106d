use super::names::{feature_index, FEATURE_NAMES, N_FEATURES};
use crate::pcap::{FlowBuffer, PacketSummary, TcpFlags};

/// Gap between consecutive packets that starts a new subflow.
pub const SUBFLOW_GAP_US: u64 = 1_000_000;
/// Gap between same-direction data packets that breaks a bulk transfer.
pub const BULK_GAP_US: u64 = 1_000_000;
/// Packets needed before a burst counts as a bulk transfer.
pub const BULK_MIN_PACKETS: u64 = 4;

/// One flow's 77 feature values in the fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; N_FEATURES],
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }

    pub fn names() -> &'static [&'static str; N_FEATURES] {
        &FEATURE_NAMES
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Count, extrema and population moments of a sample; all zero when empty.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Summary {
    pub count: usize,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub var: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let sum: f64 = values.iter().sum();
        let mean = sum / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            count: values.len(),
            sum,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            var,
        }
    }

    pub fn std(&self) -> f64 {
        self.var.sqrt()
    }
}

fn gaps(times: &[u64]) -> Vec<f64> {
    times.windows(2).map(|w| (w[1] - w[0]) as f64).collect()
}

#[derive(Default)]
struct BulkState {
    helper_start: u64,
    helper_last: u64,
    helper_count: u64,
    helper_bytes: u64,
    last_data_ts: Option<u64>,
    bulks: u64,
    packets: u64,
    bytes: u64,
    duration_us: u64,
}

impl BulkState {
    fn update(&mut self, ts: u64, payload: u64, other_last_data: Option<u64>) {
        if other_last_data.is_some_and(|o| self.helper_count > 0 && o > self.helper_start) {
            self.helper_count = 0;
        }
        if self.helper_count == 0 || ts - self.helper_last > BULK_GAP_US {
            self.helper_start = ts;
            self.helper_last = ts;
            self.helper_count = 1;
            self.helper_bytes = payload;
        } else {
            let prev = self.helper_last;
            self.helper_count += 1;
            self.helper_bytes += payload;
            self.helper_last = ts;
            if self.helper_count == BULK_MIN_PACKETS {
                self.bulks += 1;
                self.packets += self.helper_count;
                self.bytes += self.helper_bytes;
                self.duration_us += ts - self.helper_start;
            } else if self.helper_count > BULK_MIN_PACKETS {
                self.packets += 1;
                self.bytes += payload;
                self.duration_us += ts - prev;
            }
        }
        self.last_data_ts = Some(ts);
    }

    /// (bytes per bulk, packets per bulk, bytes per second inside bulks)
    fn averages(&self) -> (f64, f64, f64) {
        if self.bulks == 0 {
            return (0.0, 0.0, 0.0);
        }
        let rate = if self.duration_us > 0 {
            self.bytes as f64 / (self.duration_us as f64 / 1e6)
        } else {
            0.0
        };
        (
            self.bytes as f64 / self.bulks as f64,
            self.packets as f64 / self.bulks as f64,
            rate,
        )
    }
}

/// Computes the 77 flow features.
///
/// Packet lengths are transport payload bytes, header lengths are transport
/// header bytes (TCP data offset, 8 for UDP), times are microseconds and
/// rates are per second. Standard deviations are population deviations. Rates
/// are 0 for zero-duration flows; `Init Bwd Win Byts` and `Init Fwd Win Byts`
/// are -1 when no TCP packet exists in that direction.
pub fn compute_features(flow: &FlowBuffer) -> FeatureVector {
    let mut packets: Vec<&PacketSummary> = flow.packets.iter().collect();
    packets.sort_by(|a, b| {
        a.timestamp_us
            .cmp(&b.timestamp_us)
            .then_with(|| a.content_key().cmp(&b.content_key()))
    });
    let is_fwd = |p: &PacketSummary| p.src == flow.forward_endpoint;

    let fwd: Vec<&PacketSummary> = packets.iter().copied().filter(|p| is_fwd(p)).collect();
    let bwd: Vec<&PacketSummary> = packets.iter().copied().filter(|p| !is_fwd(p)).collect();
    let lens = |ps: &[&PacketSummary]| ps.iter().map(|p| p.payload_len as f64).collect::<Vec<_>>();
    let times = |ps: &[&PacketSummary]| ps.iter().map(|p| p.timestamp_us).collect::<Vec<_>>();
    let header_sum = |ps: &[&PacketSummary]| ps.iter().map(|p| p.l4_header_len as f64).sum::<f64>();
    let count_flag = |ps: &[&PacketSummary], bit: u8| ps.iter().filter(|p| p.tcp_flags.has(bit)).count() as f64;

    let all_len = Summary::of(&lens(&packets));
    let fwd_len = Summary::of(&lens(&fwd));
    let bwd_len = Summary::of(&lens(&bwd));
    let all_times = times(&packets);
    let flow_iat = Summary::of(&gaps(&all_times));
    let fwd_iat = Summary::of(&gaps(&times(&fwd)));
    let bwd_iat = Summary::of(&gaps(&times(&bwd)));

    let first_ts = all_times.first().copied().unwrap_or(flow.first_ts);
    let last_ts = all_times.last().copied().unwrap_or(flow.first_ts);
    let duration_us = (last_ts - first_ts) as f64;
    let per_second = |x: f64| {
        if duration_us > 0.0 {
            x / (duration_us / 1e6)
        } else {
            0.0
        }
    };
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };

    let subflows = 1 + all_times
        .windows(2)
        .filter(|w| w[1] - w[0] > SUBFLOW_GAP_US)
        .count();
    let subflows = subflows as f64;

    // Active/idle split.
    let mut active = Vec::new();
    let mut idle = Vec::new();
    let mut start_active = first_ts;
    let mut end_active = first_ts;
    for &t in all_times.iter().skip(1) {
        if t - end_active > flow.activity_timeout_us {
            if end_active > start_active {
                active.push((end_active - start_active) as f64);
            }
            idle.push((t - end_active) as f64);
            start_active = t;
            end_active = t;
        } else {
            end_active = t;
        }
    }
    if end_active > start_active {
        active.push((end_active - start_active) as f64);
    }
    let active = Summary::of(&active);
    let idle = Summary::of(&idle);

    let mut fwd_bulk = BulkState::default();
    let mut bwd_bulk = BulkState::default();
    for p in &packets {
        if p.payload_len == 0 {
            continue;
        }
        let payload = p.payload_len as u64;
        if is_fwd(p) {
            let other = bwd_bulk.last_data_ts;
            fwd_bulk.update(p.timestamp_us, payload, other);
        } else {
            let other = fwd_bulk.last_data_ts;
            bwd_bulk.update(p.timestamp_us, payload, other);
        }
    }
    let (fwd_bulk_bytes, fwd_bulk_pkts, fwd_bulk_rate) = fwd_bulk.averages();
    let (bwd_bulk_bytes, bwd_bulk_pkts, bwd_bulk_rate) = bwd_bulk.averages();

    let init_window = |ps: &[&PacketSummary]| {
        ps.iter()
            .find_map(|p| p.tcp_window)
            .map_or(-1.0, |w| w as f64)
    };
    let fwd_header = header_sum(&fwd);
    let fwd_count = fwd.len() as f64;
    let bwd_count = bwd.len() as f64;

    let values = [
        duration_us,
        fwd_count,
        bwd_count,
        fwd_len.sum,
        bwd_len.sum,
        fwd_len.max,
        fwd_len.min,
        fwd_len.mean,
        fwd_len.std(),
        bwd_len.max,
        bwd_len.min,
        bwd_len.mean,
        bwd_len.std(),
        per_second(all_len.sum),
        per_second(packets.len() as f64),
        flow_iat.mean,
        flow_iat.std(),
        flow_iat.max,
        flow_iat.min,
        fwd_iat.max,
        fwd_iat.min,
        fwd_iat.mean,
        fwd_iat.std(),
        fwd_iat.sum,
        bwd_iat.min,
        bwd_iat.max,
        bwd_iat.mean,
        bwd_iat.std(),
        bwd_iat.sum,
        fwd_header,
        header_sum(&bwd),
        per_second(fwd_count),
        per_second(bwd_count),
        all_len.min,
        all_len.max,
        all_len.mean,
        all_len.std(),
        all_len.var,
        ratio(bwd_count, fwd_count),
        all_len.mean,
        fwd_header,
        fwd_len.mean,
        bwd_len.mean,
        count_flag(&bwd, TcpFlags::PSH),
        count_flag(&packets, TcpFlags::FIN),
        count_flag(&packets, TcpFlags::SYN),
        count_flag(&packets, TcpFlags::RST),
        count_flag(&packets, TcpFlags::PSH),
        count_flag(&packets, TcpFlags::ACK),
        fwd_count / subflows,
        fwd_len.sum / subflows,
        bwd_count / subflows,
        bwd_len.sum / subflows,
        init_window(&bwd),
        fwd.iter().filter(|p| p.payload_len >= 1).count() as f64,
        active.min,
        active.mean,
        active.max,
        active.std(),
        idle.min,
        idle.mean,
        idle.max,
        idle.std(),
        count_flag(&fwd, TcpFlags::PSH),
        count_flag(&fwd, TcpFlags::URG),
        count_flag(&bwd, TcpFlags::URG),
        count_flag(&packets, TcpFlags::URG),
        count_flag(&packets, TcpFlags::CWR),
        count_flag(&packets, TcpFlags::ECE),
        fwd_bulk_bytes,
        fwd_bulk_pkts,
        fwd_bulk_rate,
        bwd_bulk_bytes,
        bwd_bulk_pkts,
        bwd_bulk_rate,
        init_window(&fwd),
        Summary::of(
            &fwd.iter()
                .map(|p| p.l4_header_len as f64)
                .collect::<Vec<_>>(),
        )
        .min,
    ];
    FeatureVector { values }
}

#[cfg(test)]
mod tests {
    use std::net::Ipv4Addr;

    use super::*;
    use crate::pcap::{Direction, Endpoint, FlowKey, Protocol};

    fn flow(packets: Vec<(u64, bool, u32, u8)>, proto: Protocol) -> FlowBuffer {
        let a = Endpoint::new(Ipv4Addr::new(10, 0, 0, 1), 1111);
        let b = Endpoint::new(Ipv4Addr::new(10, 0, 0, 2), 2222);
        let hdr = if proto == Protocol::Tcp { 20 } else { 8 };
        let packets = packets
            .into_iter()
            .map(|(ts, fwd, payload, flags)| {
                let (src, dst) = if fwd { (a, b) } else { (b, a) };
                PacketSummary {
                    timestamp_us: ts,
                    key: FlowKey::new(src, dst, proto),
                    src,
                    direction: if fwd { Direction::Forward } else { Direction::Backward },
                    ip_total_len: 20 + hdr + payload,
                    l4_header_len: hdr,
                    payload_len: payload,
                    tcp_flags: TcpFlags(flags),
                    tcp_window: (proto == Protocol::Tcp).then_some(if fwd { 100 } else { 200 }),
                }
            })
            .collect::<Vec<_>>();
        FlowBuffer {
            key: packets[0].key,
            first_ts: packets[0].timestamp_us,
            forward_endpoint: a,
            packets,
            activity_timeout_us: 5_000_000,
        }
    }

    fn f(v: &FeatureVector, name: &str) -> f64 {
        v.get(name).unwrap_or_else(|| panic!("no feature {name}"))
    }

    #[test]
    fn one_packet_udp_flow_is_degenerate() {
        let v = compute_features(&flow(vec![(1_000, true, 50, 0)], Protocol::Udp));
        for name in [
            "Flow IAT Mean", "Flow IAT Std", "Flow IAT Max", "Flow IAT Min", "Fwd IAT Tot",
            "Bwd IAT Tot", "Down/Up Ratio", "Flow Byts/s", "Flow Pkts/s", "Flow Duration",
        ] {
            assert_eq!(f(&v, name), 0.0, "{name}");
        }
        assert_eq!(f(&v, "Init Bwd Win Byts"), -1.0);
        assert_eq!(f(&v, "Init Fwd Win Byts"), -1.0);
        assert_eq!(f(&v, "Tot Fwd Pkts"), 1.0);
        assert_eq!(f(&v, "TotLen Fwd Pkts"), 50.0);
        assert_eq!(f(&v, "Fwd Header Len"), 8.0);
        assert_eq!(f(&v, "Subflow Fwd Pkts"), 1.0);
    }

    #[test]
    fn forward_only_tcp_has_no_backward_window() {
        let v = compute_features(&flow(
            vec![(0, true, 0, TcpFlags::SYN), (10, true, 0, TcpFlags::SYN)],
            Protocol::Tcp,
        ));
        assert_eq!(f(&v, "Init Bwd Win Byts"), -1.0);
        assert_eq!(f(&v, "Init Fwd Win Byts"), 100.0);
        assert_eq!(f(&v, "SYN Flag Cnt"), 2.0);
    }

    #[test]
    fn rates_and_iat_on_small_exchange() {
        // 0 s fwd 100 B, 0.5 s bwd 300 B, 2 s fwd 0 B
        let v = compute_features(&flow(
            vec![
                (0, true, 100, TcpFlags::PSH | TcpFlags::ACK),
                (500_000, false, 300, TcpFlags::ACK),
                (2_000_000, true, 0, TcpFlags::ACK),
            ],
            Protocol::Tcp,
        ));
        assert_eq!(f(&v, "Flow Duration"), 2_000_000.0);
        assert_eq!(f(&v, "Flow Byts/s"), 200.0);
        assert_eq!(f(&v, "Flow Pkts/s"), 1.5);
        assert_eq!(f(&v, "Fwd Pkts/s"), 1.0);
        assert_eq!(f(&v, "Flow IAT Mean"), 1_000_000.0);
        assert_eq!(f(&v, "Flow IAT Std"), 500_000.0);
        assert_eq!(f(&v, "Flow IAT Min"), 500_000.0);
        assert_eq!(f(&v, "Fwd IAT Tot"), 2_000_000.0);
        assert_eq!(f(&v, "Bwd IAT Tot"), 0.0);
        assert_eq!(f(&v, "Fwd Pkt Len Std"), 50.0);
        assert_eq!(f(&v, "Pkt Len Mean"), 400.0 / 3.0);
        assert_eq!(f(&v, "Down/Up Ratio"), 0.5);
        assert_eq!(f(&v, "Init Bwd Win Byts"), 200.0);
        assert_eq!(f(&v, "Fwd Act Data Pkts"), 1.0);
        // gap 1.5 s > 1 s starts a second subflow
        assert_eq!(f(&v, "Subflow Fwd Pkts"), 1.0);
        assert_eq!(f(&v, "Subflow Bwd Byts"), 150.0);
        assert_eq!(f(&v, "Active Max"), 2_000_000.0);
        assert_eq!(f(&v, "Idle Max"), 0.0);
        assert_eq!(f(&v, "PSH Flag Cnt"), 1.0);
        assert_eq!(f(&v, "Bwd PSH Flags"), 0.0);
        assert_eq!(f(&v, "Fwd PSH Flags"), 1.0);
    }

    #[test]
    fn idle_gap_splits_activity() {
        let v = compute_features(&flow(
            vec![
                (0, true, 1, 0),
                (1_000_000, true, 1, 0),
                (9_000_000, true, 1, 0),
                (9_500_000, true, 1, 0),
            ],
            Protocol::Udp,
        ));
        assert_eq!(f(&v, "Active Min"), 500_000.0);
        assert_eq!(f(&v, "Active Max"), 1_000_000.0);
        assert_eq!(f(&v, "Active Mean"), 750_000.0);
        assert_eq!(f(&v, "Idle Mean"), 8_000_000.0);
        assert_eq!(f(&v, "Idle Std"), 0.0);
    }

    #[test]
    fn bulk_needs_four_data_packets() {
        let v = compute_features(&flow(
            (0..5).map(|i| (i * 100_000, true, 10, 0)).collect(),
            Protocol::Udp,
        ));
        assert_eq!(f(&v, "Fwd Byts/b Avg"), 50.0);
        assert_eq!(f(&v, "Fwd Pkts/b Avg"), 5.0);
        assert_eq!(f(&v, "Fwd Blk Rate Avg"), 125.0);
        let v = compute_features(&flow(
            (0..3).map(|i| (i * 100_000, true, 10, 0)).collect(),
            Protocol::Udp,
        ));
        assert_eq!(f(&v, "Fwd Byts/b Avg"), 0.0);
    }
}
