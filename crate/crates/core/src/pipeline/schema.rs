//! Label alphabets for the two classification stages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STAGE1_LABELS: [&str; 4] = ["Conf", "Share", "IoTCam", "Others"];
pub const STAGE2_LABELS: [&str; 6] = ["Netatmo", "SpyClock", "Canary", "D3D", "Ezviz", "V380"];
pub const GATE_LABEL: &str = "IoTCam";

/// Traffic-category and camera-model alphabets. A fine label is either a
/// stage-1 label or a stage-2 label; every stage-2 label maps to the gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub stage1: Vec<String>,
    pub stage2: Vec<String>,
    pub gate: String,
    /// Raw label strings mapped to schema labels before any lookup.
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

impl Default for LabelSchema {
    fn default() -> Self {
        LabelSchema {
            stage1: STAGE1_LABELS.iter().map(|s| s.to_string()).collect(),
            stage2: STAGE2_LABELS.iter().map(|s| s.to_string()).collect(),
            gate: GATE_LABEL.to_string(),
            aliases: BTreeMap::new(),
        }
    }
}

impl LabelSchema {
    pub fn new(stage1: Vec<String>, stage2: Vec<String>, gate: impl Into<String>) -> Result<Self> {
        let s = LabelSchema {
            stage1,
            stage2,
            gate: gate.into(),
            aliases: BTreeMap::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage1.len() < 2 || self.stage2.len() < 2 {
            return Err(Error::invalid("each stage needs at least 2 labels"));
        }
        if !self.stage1.contains(&self.gate) {
            return Err(Error::invalid(format!("gate label `{}` is not a stage-1 label", self.gate)));
        }
        for (what, v) in [("stage-1", &self.stage1), ("stage-2", &self.stage2)] {
            let mut s = v.clone();
            s.sort();
            s.dedup();
            if s.len() != v.len() {
                return Err(Error::invalid(format!("duplicate {what} label")));
            }
        }
        if let Some(l) = self.stage2.iter().find(|l| self.stage1.contains(l)) {
            return Err(Error::invalid(format!("label `{l}` is in both alphabets")));
        }
        for (raw, to) in &self.aliases {
            if !self.stage1.contains(to) && !self.stage2.contains(to) {
                return Err(Error::invalid(format!("alias `{raw}` maps to unknown label `{to}`")));
            }
        }
        Ok(())
    }

    pub fn resolve<'a>(&'a self, raw: &'a str) -> &'a str {
        self.aliases.get(raw).map_or(raw, String::as_str)
    }

    /// Stage-1 label of a fine (or already coarse) label.
    pub fn coarse(&self, raw: &str) -> Result<String> {
        let l = self.resolve(raw);
        if self.stage2.iter().any(|s| s == l) {
            Ok(self.gate.clone())
        } else if self.stage1.iter().any(|s| s == l) {
            Ok(l.to_string())
        } else {
            Err(Error::UnknownLabel(raw.to_string()))
        }
    }

    /// Stage-2 label, if the label names a camera model.
    pub fn fine(&self, raw: &str) -> Option<String> {
        let l = self.resolve(raw);
        self.stage2.iter().find(|s| *s == l).cloned()
    }

    pub fn is_stage2(&self, raw: &str) -> bool {
        self.fine(raw).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_maps_cameras_to_gate() {
        let s = LabelSchema::default();
        s.validate().unwrap();
        assert_eq!(s.coarse("Canary").unwrap(), "IoTCam");
        assert_eq!(s.coarse("Share").unwrap(), "Share");
        assert_eq!(s.fine("Share"), None);
        assert!(matches!(s.coarse("Toaster"), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn overlapping_alphabets_rejected() {
        let l = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(LabelSchema::new(l(&["A", "B"]), l(&["B", "C"]), "A").is_err());
        assert!(LabelSchema::new(l(&["A", "B"]), l(&["C", "D"]), "E").is_err());
        assert!(LabelSchema::new(l(&["A", "B"]), l(&["C", "D"]), "A").is_ok());
    }

    #[test]
    fn aliases_resolve_first() {
        let mut s = LabelSchema::default();
        s.aliases.insert("netatmo-welcome".into(), "Netatmo".into());
        s.validate().unwrap();
        assert_eq!(s.coarse("netatmo-welcome").unwrap(), "IoTCam");
        assert_eq!(s.fine("netatmo-welcome").as_deref(), Some("Netatmo"));
        s.aliases.insert("x".into(), "nowhere".into());
        assert!(s.validate().is_err());
    }
}
