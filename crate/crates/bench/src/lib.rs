//! Shared inputs for the criterion benches in `benches/`.

use std::net::Ipv4Addr;

use rand::Rng as _;

use camsight_core::models::{train, ModelKind, ModelSpec, TrainedModel};
use camsight_core::pcap::{Direction, Endpoint, FlowKey, PacketSummary, Protocol, TcpFlags};
use camsight_core::pipeline::{split, synth_generate, SynthSpec};
use camsight_core::rng::rng;
use camsight_core::FeatureMatrix;

/// `n_flows` interleaved TCP conversations of `per_flow` packets each.
pub fn packet_stream(n_flows: usize, per_flow: usize, seed: u64) -> Vec<PacketSummary> {
    let mut r = rng(seed);
    let server = Endpoint::new(Ipv4Addr::new(10, 0, 0, 1), 443);
    let mut ts = 1_000_000u64;
    let mut out = Vec::with_capacity(n_flows * per_flow);
    for i in 0..per_flow {
        for f in 0..n_flows {
            let client = Endpoint::new(Ipv4Addr::new(10, 1, (f / 250) as u8, (f % 250) as u8 + 1), 40_000);
            let forward = i % 3 != 1;
            let payload = if i == 0 { 0 } else { r.random_range(0..1400) };
            ts += r.random_range(1..2_000);
            out.push(PacketSummary {
                timestamp_us: ts,
                key: FlowKey::new(client, server, Protocol::Tcp),
                src: if forward { client } else { server },
                direction: Direction::Forward,
                ip_total_len: 40 + payload,
                l4_header_len: 20,
                payload_len: payload,
                tcp_flags: TcpFlags(if i == 0 { TcpFlags::SYN } else { TcpFlags::ACK | TcpFlags::PSH }),
                tcp_window: Some(64_240),
            });
        }
    }
    out
}

/// Training and test halves of a `synth4` corpus with `n` rows per class.
pub fn synth4(n: usize, seed: u64) -> (FeatureMatrix, FeatureMatrix) {
    let mut s = SynthSpec::synth4(seed);
    s.n_per_class = n;
    split(&synth_generate(&s).unwrap(), 0.8, seed, true).unwrap()
}

/// A boosted model over the first `d` active columns of `synth4`.
pub fn small_model(kind: ModelKind, d: usize, n_estimators: usize, depth: usize) -> (TrainedModel, FeatureMatrix) {
    let (train_m, _) = synth4(100, 3);
    let names: Vec<String> = train_m.active_names().into_iter().take(d).collect();
    let m = train_m.select_columns(&names).unwrap();
    let model = train(
        &ModelSpec::new(kind).with_estimators(n_estimators).with_depth(depth),
        &m,
    )
    .unwrap();
    let aligned = model.align(&m).unwrap();
    (model, aligned)
}
