use super::KnowledgeGraph;
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Per-sample relationship/object joint-presence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceCounts {
    relationships: usize,
    objects: usize,
    counts: Vec<u64>,
    total_samples: u64,
}

impl CooccurrenceCounts {
    pub fn zeros(relationships: usize, objects: usize) -> Self {
        Self {
            relationships,
            objects,
            counts: vec![0; relationships * objects],
            total_samples: 0,
        }
    }

    /// Builds counts from an explicit `M x N` table.
    pub fn from_rows(rows: &[Vec<u64>], total_samples: u64) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("ragged count table".into()));
        }
        let counts: Vec<u64> = rows.iter().flatten().copied().collect();
        if let Some(c) = counts.iter().find(|&&c| c > total_samples) {
            return Err(Error::Invalid(format!(
                "count {c} exceeds total sample count {total_samples}"
            )));
        }
        Ok(Self {
            relationships: m,
            objects: n,
            counts,
            total_samples,
        })
    }

    pub fn get(&self, r: usize, o: usize) -> u64 {
        self.counts[r * self.objects + o]
    }

    pub fn total_samples(&self) -> u64 {
        self.total_samples
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.relationships, self.objects)
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Adds the counts of another partition of the same stream.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "CooccurrenceCounts::merge",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_samples += other.total_samples;
        Ok(())
    }
}

/// Counts, for each relationship `r` and object `o`, the training samples
/// labelled `r` with at least one detection of `o` scoring above `threshold`.
/// Duplicate detections of one object within a sample count once.
pub fn count_cooccurrence<'a, T: Scalar>(
    samples: impl IntoIterator<Item = &'a Sample<T>>,
    relationships: usize,
    objects: usize,
    threshold: f64,
) -> Result<CooccurrenceCounts> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Invalid(format!(
            "co-occurrence threshold {threshold} must lie in (0, 1)"
        )));
    }
    let thr = T::lit(threshold);
    let mut out = CooccurrenceCounts::zeros(relationships, objects);
    let mut seen = vec![false; objects];
    for s in samples {
        if s.label >= relationships {
            return Err(Error::Invalid(format!(
                "sample {}: label {} out of range for {relationships} relationships",
                s.id, s.label
            )));
        }
        seen.iter_mut().for_each(|v| *v = false);
        for d in s.detections_above(thr) {
            if d.object >= objects {
                return Err(Error::Invalid(format!(
                    "sample {}: object {} out of range for {objects} objects",
                    s.id, d.object
                )));
            }
            seen[d.object] = true;
        }
        for (o, _) in seen.iter().enumerate().filter(|(_, &p)| p) {
            out.counts[s.label * objects + o] += 1;
        }
        out.total_samples += 1;
    }
    if out.total_samples == 0 {
        return Err(Error::Invalid("empty sample stream".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide every count by the largest count overall.
    #[default]
    GlobalMax,
    /// Divide each relationship's row by that row's maximum.
    PerRow,
}

/// Normalizes counts to `[0, 1]`, zeroes weights below `prune_threshold`,
/// and mirrors the block into a symmetric bipartite graph.
pub fn normalize_and_prune(
    counts: &CooccurrenceCounts,
    prune_threshold: f64,
    normalization: Normalization,
    relationship_names: Vec<String>,
    object_names: Vec<String>,
) -> Result<KnowledgeGraph> {
    if !(0.0..1.0).contains(&prune_threshold) {
        return Err(Error::Invalid(format!(
            "prune threshold {prune_threshold} must lie in [0, 1)"
        )));
    }
    let (m, n) = counts.shape();
    if m == 0 || n == 0 {
        return Err(Error::Invalid("empty count table".into()));
    }
    if relationship_names.len() != m || object_names.len() != n {
        return Err(Error::shape(
            "normalize_and_prune",
            format!("counts {m}x{n}"),
            format!("names {}x{}", relationship_names.len(), object_names.len()),
        ));
    }
    let global = counts.max();
    if global == 0 {
        return Err(Error::Invalid(
            "all co-occurrence counts are zero; the graph would have no edges".into(),
        ));
    }
    let weights = Matrix::from_fn(m, n, |r, o| {
        let denom = match normalization {
            Normalization::GlobalMax => global,
            Normalization::PerRow => (0..n).map(|k| counts.get(r, k)).max().unwrap_or(0),
        };
        if denom == 0 {
            return 0.0;
        }
        let w = counts.get(r, o) as f64 / denom as f64;
        if w < prune_threshold {
            0.0
        } else {
            w
        }
    });
    KnowledgeGraph::from_bipartite(relationship_names, object_names, &weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Detection;
    use crate::graph::default_names;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(id: u64, label: usize, dets: &[(usize, f64)]) -> Sample<f64> {
        Sample {
            id,
            f_union: vec![],
            f_p1: vec![],
            f_p2: vec![],
            geometry: vec![],
            detections: dets
                .iter()
                .map(|&(object, confidence)| Detection {
                    object,
                    confidence,
                    feature: vec![],
                })
                .collect(),
            label,
        }
    }

    fn graph(counts: &CooccurrenceCounts, t: f64) -> KnowledgeGraph {
        let (m, n) = counts.shape();
        normalize_and_prune(
            counts,
            t,
            Normalization::GlobalMax,
            default_names("r", m),
            default_names("o", n),
        )
        .unwrap()
    }

    #[test]
    fn single_event_count() {
        let s = [sample(0, 0, &[(3, 0.9)])];
        let c = count_cooccurrence(&s, 2, 4, 0.7).unwrap();
        for r in 0..2 {
            for o in 0..4 {
                assert_eq!(c.get(r, o), u64::from(r == 0 && o == 3));
            }
        }
        assert_eq!(c.total_samples(), 1);
    }

    #[test]
    fn duplicates_count_once_and_threshold_is_strict() {
        let s = [sample(0, 1, &[(2, 0.9), (2, 0.95), (0, 0.7), (1, 0.2)])];
        let c = count_cooccurrence(&s, 2, 3, 0.7).unwrap();
        assert_eq!(c.get(1, 2), 1);
        assert_eq!(c.get(1, 0), 0);
        assert_eq!(c.get(1, 1), 0);
    }

    #[test]
    fn counting_errors() {
        let empty: [Sample<f64>; 0] = [];
        assert!(count_cooccurrence(&empty, 2, 2, 0.7).is_err());
        let err = count_cooccurrence(&[sample(42, 5, &[])], 2, 2, 0.7).unwrap_err();
        assert!(err.to_string().contains("sample 42"));
        assert!(count_cooccurrence(&[sample(0, 0, &[])], 2, 2, 1.0).is_err());
    }

    #[test]
    fn counts_match_brute_force_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (m, n) = (4, 7);
        let samples: Vec<Sample<f64>> = (0..100)
            .map(|id| {
                let dets: Vec<(usize, f64)> = (0..rng.gen_range(0..6))
                    .map(|_| (rng.gen_range(0..n), rng.gen::<f64>()))
                    .collect();
                sample(id, rng.gen_range(0..m), &dets)
            })
            .collect();
        let c = count_cooccurrence(&samples, m, n, 0.7).unwrap();
        for r in 0..m {
            for o in 0..n {
                let recount = samples
                    .iter()
                    .filter(|s| s.label == r)
                    .filter(|s| s.detections.iter().any(|d| d.object == o && d.confidence > 0.7))
                    .count() as u64;
                assert_eq!(c.get(r, o), recount);
            }
        }
        // partitioned counting merges to the same table
        let mut a = count_cooccurrence(&samples[..40], m, n, 0.7).unwrap();
        a.merge(&count_cooccurrence(&samples[40..], m, n, 0.7).unwrap()).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn hand_normalization() {
        let c = CooccurrenceCounts::from_rows(&[vec![4, 2], vec![0, 1]], 10).unwrap();
        let g = graph(&c, 0.3);
        // 0.25 < 0.3 is pruned; the zero entry stays zero
        assert_eq!(g.weight(0, 0), 1.0);
        assert_eq!(g.weight(0, 1), 0.5);
        assert_eq!(g.weight(1, 0), 0.0);
        assert_eq!(g.weight(1, 1), 0.0);

        let g = graph(&c, 0.2);
        assert_eq!(g.weight(1, 1), 0.25);

        let g = graph(&c, 0.0);
        assert_eq!(
            [g.weight(0, 0), g.weight(0, 1), g.weight(1, 0), g.weight(1, 1)],
            [1.0, 0.5, 0.0, 0.25]
        );
        g.check_invariants().unwrap();
    }

    #[test]
    fn per_row_normalization() {
        let c = CooccurrenceCounts::from_rows(&[vec![4, 2], vec![0, 1]], 10).unwrap();
        let g = normalize_and_prune(
            &c,
            0.0,
            Normalization::PerRow,
            default_names("r", 2),
            default_names("o", 2),
        )
        .unwrap();
        assert_eq!(g.weight(1, 1), 1.0);
        assert_eq!(g.weight(0, 1), 0.5);
    }

    #[test]
    fn all_zero_counts_rejected() {
        let c = CooccurrenceCounts::from_rows(&[vec![0, 0]], 3).unwrap();
        assert!(normalize_and_prune(
            &c,
            0.0,
            Normalization::GlobalMax,
            default_names("r", 1),
            default_names("o", 2)
        )
        .is_err());
        assert!(CooccurrenceCounts::from_rows(&[vec![4]], 3).is_err());
    }

    proptest::proptest! {
        #[test]
        fn pruning_is_monotone(
            table in proptest::collection::vec(0u64..50, 12),
            t1 in 0.0f64..0.99,
            t2 in 0.0f64..0.99,
        ) {
            proptest::prop_assume!(table.iter().any(|&c| c > 0));
            let rows: Vec<Vec<u64>> = table.chunks(4).map(<[u64]>::to_vec).collect();
            let c = CooccurrenceCounts::from_rows(&rows, 50).unwrap();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let g_lo = graph(&c, lo);
            let g_hi = graph(&c, hi);
            proptest::prop_assert!(g_hi.edge_count() <= g_lo.edge_count());
            for r in 0..3 {
                for o in 0..4 {
                    if g_hi.weight(r, o) != 0.0 {
                        proptest::prop_assert!(g_lo.weight(r, o) != 0.0);
                    }
                }
            }
            g_lo.check_invariants().unwrap();
        }
    }
}
