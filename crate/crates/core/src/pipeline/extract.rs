//! pcap files to labeled feature matrices.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{compute_features, FeatureMatrix, FeatureVector};
use crate::pcap::{assemble_flows, read_pcap, FlowConfig, ReadStats};

/// Feature vectors of every flow in one capture, in flow-start order.
pub fn extract_pcap(path: impl AsRef<Path>, config: FlowConfig) -> Result<(Vec<FeatureVector>, ReadStats)> {
    let (packets, stats) = read_pcap(path)?;
    let flows = assemble_flows(packets, config)?;
    Ok((flows.iter().map(compute_features).collect(), stats))
}

/// `path` itself, or the `.pcap` files directly inside it in name order.
pub fn capture_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::file(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pcap"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::invalid(format!("no .pcap files in {}", path.display())));
    }
    Ok(files)
}

/// Flows of every capture, each labeled with its capture's label.
pub fn extract_labeled(captures: &[(PathBuf, Option<String>)], config: FlowConfig) -> Result<FeatureMatrix> {
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    let labeled = captures.iter().all(|(_, l)| l.is_some());
    for (path, label) in captures {
        for file in capture_files(path)? {
            let (v, stats) = extract_pcap(&file, config)?;
            log::info!(
                "{}: {} records, {} packets, {} skipped, {} flows",
                file.display(),
                stats.records,
                stats.packets,
                stats.skipped,
                v.len()
            );
            labels.extend(std::iter::repeat_n(label.clone().unwrap_or_default(), v.len()));
            vectors.extend(v);
        }
    }
    FeatureMatrix::from_vectors(&vectors, labeled.then_some(labels))
}
