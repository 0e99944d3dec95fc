//! Evaluation metrics at utterance and system level: MSE, Pearson LCC,
//! Spearman SRCC (average ranks for ties), and Kendall tau-b.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;

/// One (ground truth, prediction) pair with its grouping keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePair {
    pub truth: f64,
    pub pred: f64,
    pub utterance_id: String,
    pub system_id: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("need at least {need} pairs, got {got}")]
    TooFewPairs { need: usize, got: usize },
    #[error("degenerate variance in {side} sequence: correlation undefined")]
    DegenerateVariance { side: &'static str },
}

/// Mean squared error.
pub fn mse(pairs: &[ScorePair]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::TooFewPairs { need: 1, got: 0 });
    }
    let sum: f64 = pairs
        .iter()
        .map(|p| (p.truth - p.pred) * (p.truth - p.pred))
        .sum();
    Ok(sum / pairs.len() as f64)
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y.iter()) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(MetricsError::DegenerateVariance { side: "truth" });
    }
    if syy == 0.0 {
        return Err(MetricsError::DegenerateVariance { side: "pred" });
    }
    Ok(sxy / math::sqrt(sxx * syy))
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = alloc::vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank mean
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn correlation_input(pairs: &[ScorePair]) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    if pairs.len() < 2 {
        return Err(MetricsError::TooFewPairs {
            need: 2,
            got: pairs.len(),
        });
    }
    Ok((
        pairs.iter().map(|p| p.truth).collect(),
        pairs.iter().map(|p| p.pred).collect(),
    ))
}

/// Pearson linear correlation coefficient.
pub fn lcc(pairs: &[ScorePair]) -> Result<f64, MetricsError> {
    let (x, y) = correlation_input(pairs)?;
    pearson(&x, &y)
}

/// Spearman rank correlation: Pearson of average ranks.
pub fn srcc(pairs: &[ScorePair]) -> Result<f64, MetricsError> {
    let (x, y) = correlation_input(pairs)?;
    pearson(&average_ranks(&x), &average_ranks(&y))
}

fn tie_pair_count(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let run = (j - i + 1) as u64;
        total += run * (run - 1) / 2;
        i = j + 1;
    }
    total
}

/// Counts inversions (discordant swaps) in `y` via merge sort.
fn count_inversions(y: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = y.len();
    if n <= 1 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = y.split_at_mut(mid);
    let mut inv = count_inversions(left, buf) + count_inversions(right, buf);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            buf[k] = left[i];
            i += 1;
        } else {
            buf[k] = right[j];
            inv += (left.len() - i) as u64;
            j += 1;
        }
        k += 1;
    }
    while i < left.len() {
        buf[k] = left[i];
        i += 1;
        k += 1;
    }
    while j < right.len() {
        buf[k] = right[j];
        j += 1;
        k += 1;
    }
    y.copy_from_slice(&buf[..n]);
    inv
}

/// Kendall tau-b (tie-corrected), computed with the sort/merge approach:
/// `tau_b = (n0 - n1 - n2 + n3 - 2*swaps) / sqrt((n0 - n1)(n0 - n2))`.
pub fn ktau(pairs: &[ScorePair]) -> Result<f64, MetricsError> {
    let (x, y) = correlation_input(pairs)?;
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x[a].partial_cmp(&x[b])
            .expect("finite values")
            .then(y[a].partial_cmp(&y[b]).expect("finite values"))
    });
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tie_pair_count(&xs);
    let mut ys_sorted = ys.clone();
    ys_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n2 = tie_pair_count(&ys_sorted);
    // joint ties: runs of equal (x, y); xs is sorted and ys sorted within runs
    let mut n3 = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[j + 1] == xs[i] && ys[j + 1] == ys[i] {
            j += 1;
        }
        let run = (j - i + 1) as u64;
        n3 += run * (run - 1) / 2;
        i = j + 1;
    }
    let mut buf = alloc::vec![0.0; n];
    let swaps = count_inversions(&mut ys, &mut buf);

    let d1 = n0 - n1;
    let d2 = n0 - n2;
    if d1 == 0 {
        return Err(MetricsError::DegenerateVariance { side: "truth" });
    }
    if d2 == 0 {
        return Err(MetricsError::DegenerateVariance { side: "pred" });
    }
    let num = n0 as i128 - n1 as i128 - n2 as i128 + n3 as i128 - 2 * swaps as i128;
    Ok(num as f64 / math::sqrt(d1 as f64 * d2 as f64))
}

/// Collapses pairs to one pair per system: mean truth and mean prediction
/// over that system's utterances.
pub fn system_aggregate(pairs: &[ScorePair]) -> Vec<ScorePair> {
    let mut acc: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for p in pairs {
        let e = acc.entry(&p.system_id).or_insert((0.0, 0.0, 0));
        e.0 += p.truth;
        e.1 += p.pred;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(sys, (t, p, n))| ScorePair {
            truth: t / n as f64,
            pred: p / n as f64,
            utterance_id: format!("system:{sys}"),
            system_id: String::from(sys),
        })
        .collect()
}

/// All four metrics at one level. Degenerate inputs keep their per-metric
/// error rather than reporting a silent zero.
#[derive(Debug, Clone)]
pub struct LevelMetrics {
    pub mse: Result<f64, MetricsError>,
    pub lcc: Result<f64, MetricsError>,
    pub srcc: Result<f64, MetricsError>,
    pub ktau: Result<f64, MetricsError>,
}

impl LevelMetrics {
    fn compute(pairs: &[ScorePair]) -> Self {
        LevelMetrics {
            mse: mse(pairs),
            lcc: lcc(pairs),
            srcc: srcc(pairs),
            ktau: ktau(pairs),
        }
    }
}

/// Utterance- and system-level metric report.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub utterance: LevelMetrics,
    pub system: LevelMetrics,
}

pub fn evaluate_all(pairs: &[ScorePair]) -> MetricReport {
    let systems = system_aggregate(pairs);
    MetricReport {
        utterance: LevelMetrics::compute(pairs),
        system: LevelMetrics::compute(&systems),
    }
}

fn push_line(out: &mut String, level: &str, metric: &str, v: &Result<f64, MetricsError>) {
    match v {
        Ok(x) => out.push_str(&format!("{level}.{metric}={x}\n")),
        Err(e) => out.push_str(&format!("{level}.{metric}=undefined ({e})\n")),
    }
}

impl MetricReport {
    /// Flat `level.metric=value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (level, m) in [("utterance", &self.utterance), ("system", &self.system)] {
            push_line(&mut out, level, "mse", &m.mse);
            push_line(&mut out, level, "lcc", &m.lcc);
            push_line(&mut out, level, "srcc", &m.srcc);
            push_line(&mut out, level, "ktau", &m.ktau);
        }
        out
    }

    /// CSV with header `level,metric,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,metric,value\n");
        for (level, m) in [("utterance", &self.utterance), ("system", &self.system)] {
            for (name, v) in [("mse", &m.mse), ("lcc", &m.lcc), ("srcc", &m.srcc), ("ktau", &m.ktau)]
            {
                match v {
                    Ok(x) => out.push_str(&format!("{level},{name},{x}\n")),
                    Err(_) => out.push_str(&format!("{level},{name},undefined\n")),
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs_of(truth: &[f64], pred: &[f64]) -> Vec<ScorePair> {
        truth
            .iter()
            .zip(pred.iter())
            .enumerate()
            .map(|(i, (&t, &p))| ScorePair {
                truth: t,
                pred: p,
                utterance_id: format!("u{i}"),
                system_id: format!("s{}", i % 3),
            })
            .collect()
    }

    #[test]
    fn perfect_prediction_is_identity() {
        let p = pairs_of(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mse(&p).unwrap(), 0.0);
        assert_eq!(lcc(&p).unwrap(), 1.0);
        assert_eq!(srcc(&p).unwrap(), 1.0);
        assert_eq!(ktau(&p).unwrap(), 1.0);
    }

    #[test]
    fn reversed_ranking_is_minus_one() {
        let p = pairs_of(&[1.0, 2.0, 3.0, 4.0, 5.0], &[9.0, 7.0, 5.0, 3.0, 1.0]);
        assert_eq!(srcc(&p).unwrap(), -1.0);
        assert_eq!(ktau(&p).unwrap(), -1.0);
    }

    #[test]
    fn degenerate_variance_is_an_error_not_zero() {
        let p = pairs_of(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]);
        assert!(matches!(
            lcc(&p),
            Err(MetricsError::DegenerateVariance { side: "truth" })
        ));
        assert!(matches!(
            srcc(&p),
            Err(MetricsError::DegenerateVariance { side: "truth" })
        ));
        assert!(matches!(
            ktau(&p),
            Err(MetricsError::DegenerateVariance { side: "truth" })
        ));
    }

    #[test]
    fn average_ranks_handle_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), alloc::vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn system_aggregate_means_per_system() {
        let mut p = pairs_of(&[1.0, 3.0], &[2.0, 4.0]);
        p[1].system_id = p[0].system_id.clone();
        let agg = system_aggregate(&p);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].truth, 2.0);
        assert_eq!(agg[0].pred, 3.0);
    }

    #[test]
    fn aggregate_is_order_invariant() {
        let p = pairs_of(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2.0, 1.0, 4.0, 3.0, 6.0, 5.0]);
        let mut rev = p.clone();
        rev.reverse();
        let a = system_aggregate(&p);
        let b = system_aggregate(&rev);
        assert_eq!(a, b);
    }

    #[test]
    fn report_fields_match_direct_calls() {
        let p = pairs_of(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 3.0]);
        let rep = evaluate_all(&p);
        assert_eq!(rep.utterance.srcc.clone().unwrap(), srcc(&p).unwrap());
        assert_eq!(rep.utterance.ktau.clone().unwrap(), ktau(&p).unwrap());
        let text = rep.to_text();
        assert!(text.contains("utterance.mse="));
        assert!(text.contains("system.srcc="));
        assert!(rep.to_csv().starts_with("level,metric,value\n"));
    }
}
