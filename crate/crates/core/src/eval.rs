//! Scoring sparse outputs against ground truth, and timing.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::{Masks, Video};

/// Number of thresholds in [`default_thresholds`].
pub const DEFAULT_GRID: usize = 64;

/// Pixels where `|S| > tau`.
pub fn binarize(s: &Video, tau: f64) -> Masks {
    let (m, h, w) = s.dims();
    Masks::new(m, h, w, s.as_slice().iter().map(|v| v.abs() > tau).collect()).expect("same dims")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl Confusion {
    fn tally(pred: &[bool], gt: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&p, &g) in pred.iter().zip(gt) {
            match (p, g) {
                (true, true) => c.true_pos += 1,
                (true, false) => c.false_pos += 1,
                (false, true) => c.false_neg += 1,
                (false, false) => c.true_neg += 1,
            }
        }
        c
    }

    /// Precision, recall and F, with empty denominators scoring 0.
    pub fn scores(&self) -> Scores {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.true_pos, self.true_pos + self.false_pos);
        let recall = ratio(self.true_pos, self.true_pos + self.false_neg);
        let f = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Scores { precision, recall, f }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// How per-frame counts combine into one score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Confusion counts summed over all frames.
    #[default]
    Pooled,
    /// Scores computed per frame, then averaged.
    PerFrame,
}

fn check(masks: &Masks, gt: &Masks) -> Result<()> {
    if masks.dims() != gt.dims() {
        return Err(Error::ShapeMismatch(format!("prediction {:?} vs ground truth {:?}", masks.dims(), gt.dims())));
    }
    Ok(())
}

pub fn confusion(masks: &Masks, gt: &Masks) -> Result<Confusion> {
    check(masks, gt)?;
    Ok(Confusion::tally(masks.as_slice(), gt.as_slice()))
}

/// Pooled precision, recall and F over all frames.
pub fn f_score(masks: &Masks, gt: &Masks) -> Result<Scores> {
    Ok(confusion(masks, gt)?.scores())
}

pub fn f_score_with(masks: &Masks, gt: &Masks, averaging: Averaging) -> Result<Scores> {
    match averaging {
        Averaging::Pooled => f_score(masks, gt),
        Averaging::PerFrame => {
            check(masks, gt)?;
            let frames = masks.dims().0;
            let mut sum = Scores { precision: 0.0, recall: 0.0, f: 0.0 };
            for m in 0..frames {
                let s = Confusion::tally(masks.frame(m), gt.frame(m)).scores();
                sum.precision += s.precision;
                sum.recall += s.recall;
                sum.f += s.f;
            }
            let n = frames as f64;
            Ok(Scores { precision: sum.precision / n, recall: sum.recall / n, f: sum.f / n })
        }
    }
}

/// `n` evenly spaced thresholds from 0 to `max|S|`.
pub fn linear_thresholds(s: &Video, n: usize) -> Vec<f64> {
    let top = s.max_abs();
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn default_thresholds(s: &Video) -> Vec<f64> {
    linear_thresholds(s, DEFAULT_GRID)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FScoreCurve {
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f: Vec<f64>,
}

impl FScoreCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// `(threshold, F)` at the highest F; the lowest such threshold on ties.
    pub fn peak(&self) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for (&t, &f) in self.thresholds.iter().zip(&self.f) {
            if best.is_none_or(|(_, bf)| f > bf) {
                best = Some((t, f));
            }
        }
        best
    }

    pub fn peak_f(&self) -> f64 {
        self.peak().map_or(0.0, |(_, f)| f)
    }

    /// `threshold,precision,recall,f` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall,f\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e}\n",
                self.thresholds[i], self.precision[i], self.recall[i], self.f[i]
            ));
        }
        out
    }
}

/// Scores at every threshold. Thresholds must be ascending.
pub fn f_score_sweep(s: &Video, gt: &Masks, thresholds: &[f64]) -> Result<FScoreCurve> {
    f_score_sweep_with(s, gt, thresholds, Averaging::Pooled)
}

pub fn f_score_sweep_with(s: &Video, gt: &Masks, thresholds: &[f64], averaging: Averaging) -> Result<FScoreCurve> {
    if s.dims() != gt.dims() {
        return Err(Error::ShapeMismatch(format!("sparse {:?} vs ground truth {:?}", s.dims(), gt.dims())));
    }
    if thresholds.windows(2).any(|p| !(p[0] <= p[1])) {
        return Err(Error::InvalidArgument("thresholds must be ascending".into()));
    }
    let scores: Vec<Scores> =
        thresholds.par_iter().map(|&t| f_score_with(&binarize(s, t), gt, averaging)).collect::<Result<_>>()?;
    Ok(FScoreCurve {
        thresholds: thresholds.to_vec(),
        precision: scores.iter().map(|x| x.precision).collect(),
        recall: scores.iter().map(|x| x.recall).collect(),
        f: scores.iter().map(|x| x.f).collect(),
    })
}

/// Wall-clock statistics of repeated runs of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub method: String,
    pub repeats: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub frames: usize,
    pub fps: f64,
}

/// Times `run` over `repeats` calls after one discarded warm-up call. The
/// returned output is the warm-up's, so callers can check that repeated runs
/// agree.
pub fn bench_inference<T>(
    method: &str,
    frames: usize,
    repeats: usize,
    mut run: impl FnMut() -> Result<T>,
) -> Result<(TimingReport, T)> {
    if repeats < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 repeats, got {repeats}")));
    }
    let first = run()?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        std::hint::black_box(run()?);
        times.push(start.elapsed().as_secs_f64().max(1e-9));
    }
    let mean = times.iter().sum::<f64>() / repeats as f64;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (repeats - 1) as f64;
    Ok((
        TimingReport {
            method: method.to_string(),
            repeats,
            mean_seconds: mean,
            std_seconds: var.sqrt(),
            frames,
            fps: frames as f64 / mean,
        },
        first,
    ))
}
