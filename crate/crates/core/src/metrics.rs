//! Confusion-matrix evaluation: per-class and macro-averaged accuracy,
//! precision, recall, F1 and false-negative rate.
//!
//! Rows of the confusion matrix are true labels, columns are predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let l = labels.len();
        if counts.len() != l || counts.iter().any(|r| r.len() != l) {
            return Err(Error::invalid("confusion counts must be l x l"));
        }
        Ok(Self { labels, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Overall fraction correct (trace / total); 0 for an empty matrix.
    pub fn micro_accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.trace() as f64 / t as f64
        }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

pub fn confusion<S: AsRef<str>>(truth: &[S], predicted: &[S], alphabet: &[String]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} true labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let l = alphabet.len();
    let index = |s: &str| {
        alphabet
            .iter()
            .position(|a| a == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    };
    let mut counts = vec![vec![0u64; l]; l];
    for (t, p) in truth.iter().zip(predicted) {
        counts[index(t.as_ref())?][index(p.as_ref())?] += 1;
    }
    Ok(ConfusionMatrix {
        labels: alphabet.to_vec(),
        counts,
    })
}

/// Which ratios hit a zero denominator and were reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroDivision {
    pub accuracy: bool,
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
}

impl ZeroDivision {
    pub fn any(&self) -> bool {
        self.accuracy || self.precision || self.recall || self.f1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// FN / (TP + FN), i.e. `1 - recall`; 0 when the class never occurs.
    pub fn_rate: f64,
    pub zero_division: ZeroDivision,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

pub fn class_metrics(c: &ConfusionMatrix, i: usize) -> Result<ClassMetrics> {
    let l = c.n_classes();
    if i >= l {
        return Err(Error::invalid(format!("class index {i} out of range for {l} classes")));
    }
    let tp = c.counts[i][i];
    let fn_: u64 = (0..l).filter(|&p| p != i).map(|p| c.counts[i][p]).sum();
    let fp: u64 = (0..l).filter(|&t| t != i).map(|t| c.counts[t][i]).sum();
    let total = c.total();
    let tn = total - tp - fn_ - fp;

    let (accuracy, z_acc) = ratio((tp + tn) as f64, total as f64);
    let (precision, z_pr) = ratio(tp as f64, (tp + fp) as f64);
    let (recall, z_rc) = ratio(tp as f64, (tp + fn_) as f64);
    let (f1, z_f1) = ratio(2.0 * precision * recall, precision + recall);
    let (fn_rate, _) = ratio(fn_ as f64, (tp + fn_) as f64);
    Ok(ClassMetrics {
        label: c.labels[i].clone(),
        tp,
        tn,
        fp,
        fn_,
        accuracy,
        precision,
        recall,
        f1,
        fn_rate,
        zero_division: ZeroDivision {
            accuracy: z_acc,
            precision: z_pr,
            recall: z_rc,
            f1: z_f1,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fn_rate: f64,
    pub micro_accuracy: f64,
}

/// Unweighted means of the per-class values.
pub fn macro_metrics(c: &ConfusionMatrix) -> Result<MacroMetrics> {
    let l = c.n_classes();
    if l == 0 || c.total() == 0 {
        return Err(Error::invalid("macro metrics of an empty confusion matrix"));
    }
    let per: Vec<ClassMetrics> = (0..l).map(|i| class_metrics(c, i)).collect::<Result<_>>()?;
    let mean = |f: fn(&ClassMetrics) -> f64| per.iter().map(f).sum::<f64>() / l as f64;
    Ok(MacroMetrics {
        accuracy: mean(|m| m.accuracy),
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        fn_rate: mean(|m| m.fn_rate),
        micro_accuracy: c.micro_accuracy(),
    })
}

/// Full evaluation record: confusion matrix, per-class and macro metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
}

pub fn evaluate<S: AsRef<str>>(truth: &[S], predicted: &[S], alphabet: &[String]) -> Result<Evaluation> {
    let confusion = confusion(truth, predicted, alphabet)?;
    let per_class = (0..confusion.n_classes())
        .map(|i| class_metrics(&confusion, i))
        .collect::<Result<_>>()?;
    let macro_avg = macro_metrics(&confusion)?;
    Ok(Evaluation {
        confusion,
        per_class,
        macro_avg,
    })
}

impl Evaluation {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|m| m.label == label)
    }
}
