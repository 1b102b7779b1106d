use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use camsight_bench::packet_stream;
use camsight_core::features::compute_features;
use camsight_core::pcap::{assemble_flows, FlowConfig};

fn extraction(c: &mut Criterion) {
    let mut g = c.benchmark_group("extraction");
    for &(flows, per_flow) in &[(100, 50), (1000, 20)] {
        let packets = packet_stream(flows, per_flow, 1);
        g.throughput(Throughput::Elements(packets.len() as u64));
        g.bench_with_input(BenchmarkId::new("assemble+features", format!("{flows}x{per_flow}")), &packets, |b, p| {
            b.iter(|| {
                let flows = assemble_flows(p.clone(), FlowConfig::default()).unwrap();
                flows.iter().map(compute_features).count()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, extraction);
criterion_main!(benches);
