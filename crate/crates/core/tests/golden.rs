//! Hand-built captures against their expected feature CSVs.

use std::path::{Path, PathBuf};

use camsight_core::features::{write_feature_csv, FeatureMatrix};
use camsight_core::pcap::{assemble_flows, read_pcap, FlowConfig};
use camsight_core::pipeline::{extract_pcap, run_report, ReportConfig};

pub const FIXTURES: [&str; 7] = [
    "three_pkt",
    "timeout_split",
    "fin_closure",
    "one_packet",
    "no_backward",
    "bulk_rst",
    "interleaved",
];

fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn csv_of(name: &str) -> String {
    let (v, _) = extract_pcap(dir().join(format!("{name}.pcap")), FlowConfig::default()).unwrap();
    let m = FeatureMatrix::from_vectors(&v, None).unwrap();
    let mut out = Vec::new();
    write_feature_csv(&mut out, &m).unwrap();
    String::from_utf8(out).unwrap()
}

fn meta(name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir().join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn feature_csvs_match_byte_for_byte() {
    for name in FIXTURES {
        let expected = std::fs::read_to_string(dir().join(format!("{name}.csv"))).unwrap();
        let actual = csv_of(name);
        if actual != expected {
            for (i, (a, e)) in actual.lines().zip(expected.lines()).enumerate() {
                for (j, (x, y)) in a.split(',').zip(e.split(',')).enumerate() {
                    assert_eq!(x, y, "{name}: line {i}, column {j}");
                }
            }
            panic!("{name}: line count differs");
        }
    }
}

#[test]
fn capture_counts_match() {
    for name in FIXTURES {
        let m = meta(name);
        let (packets, stats) = read_pcap(dir().join(format!("{name}.pcap"))).unwrap();
        assert_eq!(stats.records, m["records"].as_u64().unwrap(), "{name}");
        assert_eq!(stats.packets, m["packets"].as_u64().unwrap(), "{name}");
        assert_eq!(stats.skipped, m["skipped"].as_u64().unwrap(), "{name}");
        assert!(!stats.truncated);
        let flows = assemble_flows(packets.clone(), FlowConfig::default()).unwrap();
        let sizes: Vec<u64> = flows.iter().map(|f| f.packets.len() as u64).collect();
        let expected: Vec<u64> = m["flow_packets"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect();
        assert_eq!(sizes, expected, "{name}");
        assert_eq!(sizes.iter().sum::<u64>() + stats.skipped, stats.records, "{name}");
        for f in &flows {
            assert!(f.last_ts() - f.first_ts <= FlowConfig::default().flow_timeout_us);
            for p in &f.packets {
                assert_eq!(p.key, f.key);
                assert_eq!(p.is_forward(), p.src == f.forward_endpoint);
            }
        }
    }
}

#[test]
fn three_packet_handshake() {
    let (packets, _) = read_pcap(dir().join("three_pkt.pcap")).unwrap();
    let dirs: Vec<bool> = packets.iter().map(|p| p.is_forward()).collect();
    assert_eq!(dirs, vec![true, false, true]);
    let (v, _) = extract_pcap(dir().join("three_pkt.pcap"), FlowConfig::default()).unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].get("Tot Fwd Pkts"), Some(2.0));
    assert_eq!(v[0].get("Tot Bwd Pkts"), Some(1.0));
    assert_eq!(v[0].get("Flow Duration"), Some(400.0));
}

#[test]
fn sentinel_and_degenerate_flows() {
    let (v, _) = extract_pcap(dir().join("no_backward.pcap"), FlowConfig::default()).unwrap();
    assert_eq!(v[0].get("Init Bwd Win Byts"), Some(-1.0));
    let (v, _) = extract_pcap(dir().join("one_packet.pcap"), FlowConfig::default()).unwrap();
    for name in ["Flow IAT Mean", "Flow IAT Max", "Down/Up Ratio", "Flow Duration"] {
        assert_eq!(v[0].get(name), Some(0.0), "{name}");
    }
    assert_eq!(v[0].get("Init Bwd Win Byts"), Some(-1.0));
}

#[test]
fn per_flow_feature_identities() {
    for name in FIXTURES {
        let (packets, _) = read_pcap(dir().join(format!("{name}.pcap"))).unwrap();
        let flows = assemble_flows(packets, FlowConfig::default()).unwrap();
        for f in &flows {
            let v = camsight_core::features::compute_features(f);
            let get = |n: &str| v.get(n).unwrap();
            let fwd: Vec<_> = f.packets.iter().filter(|p| p.src == f.forward_endpoint).collect();
            assert_eq!(get("Tot Fwd Pkts"), fwd.len() as f64);
            assert_eq!(get("TotLen Fwd Pkts"), fwd.iter().map(|p| p.payload_len as f64).sum::<f64>());
            for p in ["Flow", "Fwd", "Bwd"] {
                let (lo, mean, hi) = (get(&format!("{p} IAT Min")), get(&format!("{p} IAT Mean")), get(&format!("{p} IAT Max")));
                assert!(lo <= mean && mean <= hi, "{name}: {p} IAT");
            }
            let dur = get("Flow Duration");
            if dur > 0.0 {
                let total = f.packets.len() as f64;
                assert!((get("Flow Pkts/s") * dur / 1e6 - total).abs() <= 1e-9 * total);
            }
        }
    }
}

#[test]
fn pcap_report_writes_labeled_row() {
    let out = tempfile::tempdir().unwrap();
    let text = format!(
        "seed = 1\n[data]\nsource = \"pcap\"\npath = \"{}\"\nlabel = \"Others\"\n",
        dir().join("three_pkt.pcap").display()
    );
    let cfg = ReportConfig::parse(&text, out.path(), None).unwrap();
    run_report(&cfg, &text, out.path(), out.path()).unwrap();
    let csv = std::fs::read_to_string(out.path().join("features.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header.len(), 78);
    assert_eq!(header[77], "Label");
    assert!(lines[1].ends_with(",Others"));
    let expected = std::fs::read_to_string(dir().join("three_pkt.csv")).unwrap();
    assert_eq!(format!("{},Others", expected.lines().nth(1).unwrap()), lines[1]);
}
