//! Confusion matrices and the four reported classification metrics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(num_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != num_classes * num_classes {
            return Err(shape_err(
                "ConfusionMatrix",
                format!("{} counts for {num_classes} classes", counts.len()),
            ));
        }
        Ok(Self {
            num_classes,
            counts,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.num_classes + predicted]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let c = self.num_classes;
        let mut counts = vec![0; c * c];
        for t in 0..c {
            for p in 0..c {
                counts[p * c + t] = self.get(t, p);
            }
        }
        Self {
            num_classes: c,
            counts,
        }
    }
}

/// Tallies `(truth, prediction)` pairs.
pub fn confusion(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if truth.is_empty() {
        return Err(Error::Empty("label list"));
    }
    if truth.len() != predicted.len() {
        return Err(shape_err(
            "confusion",
            format!("{} labels vs {} predictions", truth.len(), predicted.len()),
        ));
    }
    let mut counts = vec![0u64; num_classes * num_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        for label in [t, p] {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: num_classes,
                });
            }
        }
        counts[t * num_classes + p] += 1;
    }
    Ok(ConfusionMatrix {
        num_classes,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub mcc: f64,
}

impl MetricsReport {
    pub const COLUMNS: [&'static str; 4] = ["accuracy", "macro_f1", "weighted_f1", "mcc"];

    pub fn values(&self) -> [f64; 4] {
        [self.accuracy, self.macro_f1, self.weighted_f1, self.mcc]
    }
}

/// Accuracy, macro and support-weighted F1, and multiclass MCC (Gorodkin's
/// R_K). A class whose precision and recall are both zero has F1 0; MCC is 0
/// when either marginal has no variance.
pub fn metrics(conf: &ConfusionMatrix) -> Result<MetricsReport> {
    let c = conf.num_classes;
    let total = conf.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    let mut true_marg = vec![0u64; c];
    let mut pred_marg = vec![0u64; c];
    let mut trace = 0u64;
    for t in 0..c {
        for p in 0..c {
            let n = conf.get(t, p);
            true_marg[t] += n;
            pred_marg[p] += n;
            if t == p {
                trace += n;
            }
        }
    }
    let s = total as f64;

    let mut macro_sum = 0.0;
    let mut weighted_sum = 0.0;
    for k in 0..c {
        let tp = conf.get(k, k) as f64;
        let f1 = if true_marg[k] + pred_marg[k] == 0 {
            0.0
        } else {
            // 2PR/(P+R) simplifies to 2TP/(predicted + actual)
            2.0 * tp / (true_marg[k] + pred_marg[k]) as f64
        };
        macro_sum += f1;
        weighted_sum += f1 * true_marg[k] as f64;
    }

    let cov_tp = trace as f64 * s
        - true_marg
            .iter()
            .zip(&pred_marg)
            .map(|(&t, &p)| t as f64 * p as f64)
            .sum::<f64>();
    let cov_pp = s * s - pred_marg.iter().map(|&p| (p as f64) * (p as f64)).sum::<f64>();
    let cov_tt = s * s - true_marg.iter().map(|&t| (t as f64) * (t as f64)).sum::<f64>();
    let mcc = if cov_pp == 0.0 || cov_tt == 0.0 {
        0.0
    } else {
        cov_tp / libm::sqrt(cov_pp * cov_tt)
    };

    Ok(MetricsReport {
        accuracy: trace as f64 / s,
        macro_f1: macro_sum / c as f64,
        weighted_f1: weighted_sum / s,
        mcc,
    })
}
