//! Confusion matrix and the pixel accuracy / mean accuracy / mean IoU triple.

use crate::error::{check_dim, Error, Result};

/// Rows are ground truth, columns are predictions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub pixel_acc: f64,
    pub mean_acc: f64,
    pub mean_iou: f64,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds every pixel whose truth is not `ignore`.
    pub fn accumulate(&mut self, pred: &[u8], truth: &[u8], ignore: u8) -> Result<()> {
        check_dim("confusion", "prediction length", pred.len(), truth.len())?;
        for (&p, &t) in pred.iter().zip(truth) {
            if t == ignore {
                continue;
            }
            let c = self.classes;
            if t as usize >= c || p as usize >= c {
                return Err(Error::invalid(
                    "confusion",
                    format!("label pair (truth {t}, prediction {p}) outside 0..{c}"),
                ));
            }
            self.counts[t as usize * c + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        check_dim("confusion_merge", "classes", other.classes, self.classes)?;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn metrics(&self) -> Result<Metrics> {
        let total = self.total();
        if total == 0 {
            return Err(Error::invalid("metrics", "confusion matrix is empty"));
        }
        let c = self.classes;
        let row = |t: usize| (0..c).map(|p| self.get(t, p)).sum::<u64>();
        let col = |p: usize| (0..c).map(|t| self.get(t, p)).sum::<u64>();
        let trace: u64 = (0..c).map(|i| self.get(i, i)).sum();
        let (mut acc_sum, mut acc_n, mut iou_sum, mut iou_n) = (0.0, 0usize, 0.0, 0usize);
        for k in 0..c {
            let (r, col_k, diag) = (row(k), col(k), self.get(k, k));
            if r > 0 {
                acc_sum += diag as f64 / r as f64;
                acc_n += 1;
            }
            let union = r + col_k - diag;
            if union > 0 {
                iou_sum += diag as f64 / union as f64;
                iou_n += 1;
            }
        }
        Ok(Metrics {
            pixel_acc: trace as f64 / total as f64,
            mean_acc: acc_sum / acc_n as f64,
            mean_iou: iou_sum / iou_n as f64,
        })
    }
}

pub fn confusion(pred: &[u8], truth: &[u8], classes: usize, ignore: u8) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(classes);
    cm.accumulate(pred, truth, ignore)?;
    Ok(cm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_diagonal() {
        let t = [0u8, 1, 2, 2];
        let cm = confusion(&t, &t, 3, 255).unwrap();
        assert_eq!(cm.get(2, 2), 2);
        assert_eq!(cm.total(), 4);
        let m = cm.metrics().unwrap();
        assert_eq!((m.pixel_acc, m.mean_acc, m.mean_iou), (1.0, 1.0, 1.0));
    }

    #[test]
    fn ignored_and_out_of_range() {
        let cm = confusion(&[0, 1], &[255, 255], 2, 255).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(cm.metrics().is_err());
        assert!(confusion(&[2], &[0], 2, 255).is_err());
    }
}
