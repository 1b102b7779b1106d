use std::collections::HashMap;
use std::sync::OnceLock;

pub const N_FEATURES: usize = 77;

/// Column headers in the fixed feature order. The 14 trailing entries
/// (positions 63..77) are the statically discarded features.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "Flow Duration",
    "Tot Fwd Pkts",
    "Tot Bwd Pkts",
    "TotLen Fwd Pkts",
    "TotLen Bwd Pkts",
    "Fwd Pkt Len Max",
    "Fwd Pkt Len Min",
    "Fwd Pkt Len Mean",
    "Fwd Pkt Len Std",
    "Bwd Pkt Len Max",
    "Bwd Pkt Len Min",
    "Bwd Pkt Len Mean",
    "Bwd Pkt Len Std",
    "Flow Byts/s",
    "Flow Pkts/s",
    "Flow IAT Mean",
    "Flow IAT Std",
    "Flow IAT Max",
    "Flow IAT Min",
    "Fwd IAT Max",
    "Fwd IAT Min",
    "Fwd IAT Mean",
    "Fwd IAT Std",
    "Fwd IAT Tot",
    "Bwd IAT Min",
    "Bwd IAT Max",
    "Bwd IAT Mean",
    "Bwd IAT Std",
    "Bwd IAT Tot",
    "Fwd Header Len",
    "Bwd Header Len",
    "Fwd Pkts/s",
    "Bwd Pkts/s",
    "Pkt Len Min",
    "Pkt Len Max",
    "Pkt Len Mean",
    "Pkt Len Std",
    "Pkt Len Var",
    "Down/Up Ratio",
    "Pkt Size Avg",
    "Fwd Header Len.1",
    "Fwd Seg Size Avg",
    "Bwd Seg Size Avg",
    "Bwd PSH Flags",
    "FIN Flag Cnt",
    "SYN Flag Cnt",
    "RST Flag Cnt",
    "PSH Flag Cnt",
    "ACK Flag Cnt",
    "Subflow Fwd Pkts",
    "Subflow Fwd Byts",
    "Subflow Bwd Pkts",
    "Subflow Bwd Byts",
    "Init Bwd Win Byts",
    "Fwd Act Data Pkts",
    "Active Min",
    "Active Mean",
    "Active Max",
    "Active Std",
    "Idle Min",
    "Idle Mean",
    "Idle Max",
    "Idle Std",
    "Fwd PSH Flags",
    "Fwd URG Flags",
    "Bwd URG Flags",
    "URG Flag Cnt",
    "CWE Flag Count",
    "ECE Flag Cnt",
    "Fwd Byts/b Avg",
    "Fwd Pkts/b Avg",
    "Fwd Blk Rate Avg",
    "Bwd Byts/b Avg",
    "Bwd Pkts/b Avg",
    "Bwd Blk Rate Avg",
    "Init Fwd Win Byts",
    "Fwd Seg Size Min",
];

/// First index of the statically discarded block.
pub const RED_LIST_START: usize = 63;

pub fn red_listed(index: usize) -> bool {
    (RED_LIST_START..N_FEATURES).contains(&index)
}

/// Older long-form headers used by other exports of the same feature set,
/// paired with the canonical index they map to.
const ALIASES: &[(&str, usize)] = &[
    ("Total Fwd Packets", 1),
    ("Total Backward Packets", 2),
    ("Total Length of Fwd Packets", 3),
    ("Total Length of Bwd Packets", 4),
    ("Fwd Packet Length Max", 5),
    ("Fwd Packet Length Min", 6),
    ("Fwd Packet Length Mean", 7),
    ("Fwd Packet Length Std", 8),
    ("Bwd Packet Length Max", 9),
    ("Bwd Packet Length Min", 10),
    ("Bwd Packet Length Mean", 11),
    ("Bwd Packet Length Std", 12),
    ("Flow Bytes/s", 13),
    ("Flow Packets/s", 14),
    ("Fwd IAT Total", 23),
    ("Bwd IAT Total", 28),
    ("Fwd Header Length", 29),
    ("Bwd Header Length", 30),
    ("Fwd Packets/s", 31),
    ("Bwd Packets/s", 32),
    ("Min Packet Length", 33),
    ("Max Packet Length", 34),
    ("Packet Length Mean", 35),
    ("Packet Length Std", 36),
    ("Packet Length Variance", 37),
    ("Average Packet Size", 39),
    ("Fwd Header Length.1", 40),
    ("Avg Fwd Segment Size", 41),
    ("Avg Bwd Segment Size", 42),
    ("Bwd PSH Flag", 43),
    ("FIN Flag Count", 44),
    ("SYN Flag Count", 45),
    ("RST Flag Count", 46),
    ("PSH Flag Count", 47),
    ("ACK Flag Count", 48),
    ("Subflow Fwd Packets", 49),
    ("Subflow Fwd Bytes", 50),
    ("Subflow Bwd Packets", 51),
    ("Subflow Bwd Bytes", 52),
    ("Init_Win_bytes_backward", 53),
    ("act_data_pkt_fwd", 54),
    ("Fwd Act Data Packets", 54),
    ("Fwd PSH Flag", 63),
    ("Fwd URG Flag", 64),
    ("Bwd URG Flag", 65),
    ("URG Flag Count", 66),
    ("CWR Flag Count", 67),
    ("ECE Flag Count", 68),
    ("Fwd Avg Bytes/Bulk", 69),
    ("Fwd Avg Packets/Bulk", 70),
    ("Fwd Avg Bulk Rate", 71),
    ("Bwd Avg Bytes/Bulk", 72),
    ("Bwd Avg Packets/Bulk", 73),
    ("Bwd Avg Bulk Rate", 74),
    ("Init_Win_bytes_forward", 75),
    ("min_seg_size_forward", 76),
];

fn normalize(name: &str) -> String {
    name.trim()
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

fn lookup_table() -> &'static HashMap<String, usize> {
    static TABLE: OnceLock<HashMap<String, usize>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut m = HashMap::new();
        for (i, n) in FEATURE_NAMES.iter().enumerate() {
            m.insert(normalize(n), i);
        }
        for (n, i) in ALIASES {
            m.entry(normalize(n)).or_insert(*i);
        }
        m
    })
}

/// Resolves a canonical or alias header (case, spacing and underscores
/// ignored) to its feature index.
pub fn feature_index(name: &str) -> Option<usize> {
    lookup_table().get(&normalize(name)).copied()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_resolve_to_themselves() {
        for (i, n) in FEATURE_NAMES.iter().enumerate() {
            assert_eq!(feature_index(n), Some(i), "{n}");
        }
        assert_eq!((RED_LIST_START..N_FEATURES).count(), 14);
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(feature_index("URG Flag Count"), Some(66));
        assert_eq!(feature_index(" Init_Win_bytes_backward"), Some(53));
        assert_eq!(feature_index("total fwd packets"), Some(1));
        assert_eq!(feature_index("Dst Port"), None);
    }
}
