//! Classification metrics: per-class recall, average precision, mAP, accuracy.

use crate::error::{Error, Result};
use crate::math::softmax;
use crate::model::argmax;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMethod {
    /// Mean of precision@k over the ranks of positives.
    #[default]
    RankAverage,
    /// Mean over recall levels 0, 0.1, .., 1 of the best precision at or above that recall.
    ElevenPoint,
}

impl ApMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ApMethod::RankAverage => "rank_average",
            ApMethod::ElevenPoint => "eleven_point",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rank_average" => Ok(ApMethod::RankAverage),
            "eleven_point" => Ok(ApMethod::ElevenPoint),
            _ => Err(Error::Invalid(format!("unknown AP method '{s}'"))),
        }
    }
}

/// What the per-class ranking for AP is computed on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreBasis {
    /// Softmax class probabilities.
    #[default]
    Probability,
    /// Raw class scores.
    Logit,
}

impl ScoreBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreBasis::Probability => "probability",
            ScoreBasis::Logit => "logit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "probability" => Ok(ScoreBasis::Probability),
            "logit" => Ok(ScoreBasis::Logit),
            _ => Err(Error::Invalid(format!("unknown score basis '{s}'"))),
        }
    }

    /// Maps one row of raw scores onto this basis.
    pub fn apply(self, scores: &[f64]) -> Vec<f64> {
        match self {
            ScoreBasis::Logit => scores.to_vec(),
            ScoreBasis::Probability => softmax(scores),
        }
    }
}

/// Class-wise entries are `None` when the class has no samples; such
/// classes are left out of `map`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class_recall: Vec<Option<f64>>,
    pub per_class_ap: Vec<Option<f64>>,
    pub support: Vec<usize>,
    pub map: f64,
    pub accuracy: f64,
    pub samples: usize,
}

/// Sorts indices by descending score; ties keep index order.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// AP of one class. Returns `None` when there are no positives.
pub fn average_precision(scores: &[f64], positive: &[bool], method: ApMethod) -> Result<Option<f64>> {
    if scores.len() != positive.len() {
        return Err(Error::shape(
            "average_precision",
            format!("{} scores", scores.len()),
            format!("{} labels", positive.len()),
        ));
    }
    let total = positive.iter().filter(|&&p| p).count();
    if total == 0 {
        return Ok(None);
    }
    // (recall, precision) at each positive rank
    let mut points = Vec::with_capacity(total);
    let mut hits = 0usize;
    for (k, &i) in ranking(scores).iter().enumerate() {
        if positive[i] {
            hits += 1;
            points.push((hits as f64 / total as f64, hits as f64 / (k + 1) as f64));
        }
    }
    let ap = match method {
        ApMethod::RankAverage => points.iter().map(|p| p.1).sum::<f64>() / total as f64,
        ApMethod::ElevenPoint => {
            (0..=10)
                .map(|t| {
                    let level = t as f64 / 10.0;
                    points
                        .iter()
                        .filter(|p| p.0 >= level - 1e-12)
                        .map(|p| p.1)
                        .fold(0.0, f64::max)
                })
                .sum::<f64>()
                / 11.0
        }
    };
    Ok(Some(ap))
}

/// Metrics for an `n x M` score table in dataset order.
pub fn compute_metrics(scores: &[Vec<f64>], labels: &[usize], classes: usize, method: ApMethod) -> Result<Metrics> {
    if scores.is_empty() {
        return Err(Error::Invalid("cannot evaluate an empty dataset".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::shape(
            "compute_metrics",
            format!("{} score rows", scores.len()),
            format!("{} labels", labels.len()),
        ));
    }
    for (i, (row, &y)) in scores.iter().zip(labels).enumerate() {
        if row.len() != classes {
            return Err(Error::shape("compute_metrics", format!("row {i} has {}", row.len()), format!("{classes} classes")));
        }
        if y >= classes {
            return Err(Error::Index { what: "label", index: y, len: classes });
        }
    }
    let predictions: Vec<usize> = scores.iter().map(|s| argmax(s)).collect();
    let mut support = vec![0usize; classes];
    let mut correct = vec![0usize; classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        support[y] += 1;
        if p == y {
            correct[y] += 1;
        }
    }
    let mut per_class_recall = Vec::with_capacity(classes);
    let mut per_class_ap = Vec::with_capacity(classes);
    let mut column = vec![0.0; scores.len()];
    let mut positive = vec![false; scores.len()];
    for c in 0..classes {
        if support[c] == 0 {
            log::warn!("class {c} has no samples; recall and AP undefined");
            per_class_recall.push(None);
            per_class_ap.push(None);
            continue;
        }
        per_class_recall.push(Some(correct[c] as f64 / support[c] as f64));
        for (i, row) in scores.iter().enumerate() {
            column[i] = row[c];
            positive[i] = labels[i] == c;
        }
        per_class_ap.push(average_precision(&column, &positive, method)?);
    }
    let defined: Vec<f64> = per_class_ap.iter().flatten().copied().collect();
    let map = defined.iter().sum::<f64>() / defined.len() as f64;
    let accuracy = correct.iter().sum::<usize>() as f64 / scores.len() as f64;
    Ok(Metrics {
        per_class_recall,
        per_class_ap,
        support,
        map,
        accuracy,
        samples: scores.len(),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.2}", 100.0 * x))
}

impl Metrics {
    /// Aligned text table in percent.
    pub fn to_table(&self, class_names: &[String]) -> String {
        let width = class_names.iter().map(String::len).max().unwrap_or(5).max(8);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}  {:>7}", "class", "recall", "AP", "support");
        for (c, name) in class_names.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<width$}  {:>8}  {:>8}  {:>7}",
                name,
                cell(self.per_class_recall.get(c).copied().flatten()),
                cell(self.per_class_ap.get(c).copied().flatten()),
                self.support.get(c).copied().unwrap_or(0)
            );
        }
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}  {:>7}", "mAP", "", cell(Some(self.map)), self.samples);
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}  {:>7}", "accuracy", cell(Some(self.accuracy)), "", self.samples);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_ranking_ap() {
        let scores = [0.9, 0.8, 0.7, 0.6];
        let pos = [true, false, true, false];
        let ap = average_precision(&scores, &pos, ApMethod::RankAverage).unwrap().unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((ap - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn ties_break_by_index() {
        let pos = [false, true];
        let ap = average_precision(&[0.5, 0.5], &pos, ApMethod::RankAverage).unwrap().unwrap();
        assert_eq!(ap, 0.5);
        let ap = average_precision(&[0.5, 0.5], &[true, false], ApMethod::RankAverage).unwrap().unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn eleven_point_hand_value() {
        // positives at ranks 1 and 3: (r=0.5, p=1), (r=1, p=2/3)
        let scores = [0.9, 0.8, 0.7, 0.6];
        let pos = [true, false, true, false];
        let ap = average_precision(&scores, &pos, ApMethod::ElevenPoint).unwrap().unwrap();
        let want = (6.0 * 1.0 + 5.0 * (2.0 / 3.0)) / 11.0;
        assert!((ap - want).abs() < 1e-15);
    }

    #[test]
    fn no_positives_is_undefined() {
        assert_eq!(average_precision(&[0.1, 0.2], &[false, false], ApMethod::RankAverage).unwrap(), None);
        assert!(average_precision(&[0.1], &[false, false], ApMethod::RankAverage).is_err());
    }

    #[test]
    fn perfect_scores_give_ones() {
        let labels = [0, 1, 2, 1, 0];
        let scores: Vec<Vec<f64>> = labels
            .iter()
            .map(|&y| (0..3).map(|c| if c == y { 1.0 } else { 0.0 }).collect())
            .collect();
        let m = compute_metrics(&scores, &labels, 3, ApMethod::RankAverage).unwrap();
        assert_eq!(m.map, 1.0);
        assert_eq!(m.accuracy, 1.0);
        assert!(m.per_class_recall.iter().all(|r| *r == Some(1.0)));
        assert!(m.per_class_ap.iter().all(|r| *r == Some(1.0)));
    }

    #[test]
    fn absent_class_is_excluded_from_map() {
        let labels = [0, 0, 2];
        let scores = vec![vec![0.9, 0.0, 0.1], vec![0.2, 0.0, 0.8], vec![0.1, 0.0, 0.9]];
        let m = compute_metrics(&scores, &labels, 3, ApMethod::RankAverage).unwrap();
        assert_eq!(m.per_class_ap[1], None);
        assert_eq!(m.per_class_recall[1], None);
        let ap0 = m.per_class_ap[0].unwrap();
        let ap2 = m.per_class_ap[2].unwrap();
        assert!((m.map - (ap0 + ap2) / 2.0).abs() < 1e-15);
        assert!(m.to_table(&["a".into(), "b".into(), "c".into()]).contains("n/a"));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(compute_metrics(&[], &[], 2, ApMethod::RankAverage).is_err());
        assert!(compute_metrics(&[vec![0.0, 1.0]], &[2], 2, ApMethod::RankAverage).is_err());
        assert!(compute_metrics(&[vec![0.0]], &[0], 2, ApMethod::RankAverage).is_err());
    }

    fn random_table(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let scores = (0..n).map(|_| (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let labels = (0..n).map(|_| rng.gen_range(0..m)).collect();
        (scores, labels)
    }

    #[test]
    fn accuracy_is_support_weighted_recall() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (scores, labels) = random_table(&mut rng, 60, 4);
            let m = compute_metrics(&scores, &labels, 4, ApMethod::RankAverage).unwrap();
            let weighted: f64 = m
                .per_class_recall
                .iter()
                .zip(&m.support)
                .map(|(r, &s)| r.unwrap_or(0.0) * s as f64)
                .sum::<f64>()
                / 60.0;
            assert!((weighted - m.accuracy).abs() < 1e-12);
            for v in m.per_class_ap.iter().chain(&m.per_class_recall).flatten() {
                assert!((0.0..=1.0).contains(v));
            }
            assert!((0.0..=1.0).contains(&m.map));
        }
    }

    #[test]
    fn constant_shift_keeps_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (scores, labels) = random_table(&mut rng, 40, 3);
        let shifted: Vec<Vec<f64>> = scores
            .iter()
            .map(|row| {
                let c = rng.gen_range(-5.0..5.0);
                row.iter().map(|s| s + c).collect()
            })
            .collect();
        let a = compute_metrics(&scores, &labels, 3, ApMethod::RankAverage).unwrap();
        let b = compute_metrics(&shifted, &labels, 3, ApMethod::RankAverage).unwrap();
        assert_eq!(a.per_class_recall, b.per_class_recall);
        assert_eq!(a.accuracy, b.accuracy);
    }

    #[test]
    fn probability_basis_removes_per_sample_offsets() {
        let raw = [vec![10.0, 9.0], vec![0.0, -3.0], vec![1.0, 2.0]];
        let labels = [0, 0, 1];
        let shifted: Vec<Vec<f64>> = raw.iter().enumerate().map(|(i, r)| r.iter().map(|v| v + 7.0 * i as f64).collect()).collect();
        let eval = |rows: &[Vec<f64>], b: ScoreBasis| {
            let t: Vec<Vec<f64>> = rows.iter().map(|r| b.apply(r)).collect();
            compute_metrics(&t, &labels, 2, ApMethod::RankAverage).unwrap()
        };
        assert_eq!(eval(&raw, ScoreBasis::Probability).map, eval(&shifted, ScoreBasis::Probability).map);
        assert_ne!(eval(&raw, ScoreBasis::Logit).map, eval(&shifted, ScoreBasis::Logit).map);
        assert_eq!(ScoreBasis::Logit.apply(&raw[1]), raw[1]);
        for b in [ScoreBasis::Probability, ScoreBasis::Logit] {
            assert_eq!(ScoreBasis::parse(b.as_str()).unwrap(), b);
        }
    }

    #[test]
    fn ap_method_names_round_trip() {
        for m in [ApMethod::RankAverage, ApMethod::ElevenPoint] {
            assert_eq!(ApMethod::parse(m.as_str()).unwrap(), m);
        }
        assert!(ApMethod::parse("voc").is_err());
    }
}
