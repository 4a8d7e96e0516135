use super::{CrfError, CrfModel};
use crate::features::FeatureVector;

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check(model: &CrfModel, xs: &[FeatureVector]) -> Result<(), CrfError> {
    if xs.is_empty() {
        return Err(CrfError::EmptySequence);
    }
    let bound = model.num_features();
    for fv in xs {
        if let Some(&f) = fv.indices().iter().find(|&&f| f as usize >= bound) {
            return Err(CrfError::IndexOutOfRange {
                what: "feature",
                index: f as usize,
                bound,
            });
        }
    }
    Ok(())
}

fn check_labels(model: &CrfModel, xs: &[FeatureVector], ys: &[usize]) -> Result<(), CrfError> {
    if xs.len() != ys.len() {
        return Err(CrfError::LengthMismatch {
            features: xs.len(),
            labels: ys.len(),
        });
    }
    check(model, xs)?;
    let bound = model.num_labels();
    if let Some(&y) = ys.iter().find(|&&y| y >= bound) {
        return Err(CrfError::IndexOutOfRange {
            what: "label",
            index: y,
            bound,
        });
    }
    Ok(())
}

/// Emission scores, `T × L` row-major.
pub(crate) fn emissions(model: &CrfModel, xs: &[FeatureVector]) -> Vec<f64> {
    let l = model.num_labels();
    let mut e = vec![0.0; xs.len() * l];
    for (t, fv) in xs.iter().enumerate() {
        let row = &mut e[t * l..(t + 1) * l];
        for &f in fv.indices() {
            let w = &model.weights[f as usize * l..(f as usize + 1) * l];
            for (r, w) in row.iter_mut().zip(w) {
                *r += w;
            }
        }
    }
    e
}

pub fn sequence_score(model: &CrfModel, xs: &[FeatureVector], ys: &[usize]) -> Result<f64, CrfError> {
    check_labels(model, xs, ys)?;
    Ok(score_unchecked(model, xs, ys))
}

pub(crate) fn score_unchecked(model: &CrfModel, xs: &[FeatureVector], ys: &[usize]) -> f64 {
    let mut score = 0.0;
    for (t, (fv, &y)) in xs.iter().zip(ys).enumerate() {
        score += fv.indices().iter().map(|&f| model.emission(f as usize, y)).sum::<f64>();
        if t > 0 {
            score += model.transition(ys[t - 1], y);
        }
    }
    score
}

/// Forward log-potentials `alpha` (`T × L`) and `log Z`.
pub(crate) fn forward(model: &CrfModel, e: &[f64], len: usize) -> (Vec<f64>, f64) {
    let l = model.num_labels();
    let trans = model.transitions();
    let mut alpha = vec![0.0; len * l];
    alpha[..l].copy_from_slice(&e[..l]);
    for t in 1..len {
        for y in 0..l {
            let prev = &alpha[(t - 1) * l..t * l];
            let lse = log_sum_exp((0..l).map(|p| prev[p] + trans[p * l + y]));
            alpha[t * l + y] = e[t * l + y] + lse;
        }
    }
    let log_z = log_sum_exp(alpha[(len - 1) * l..].iter().copied());
    (alpha, log_z)
}

pub(crate) fn backward(model: &CrfModel, e: &[f64], len: usize) -> Vec<f64> {
    let l = model.num_labels();
    let trans = model.transitions();
    let mut beta = vec![0.0; len * l];
    for t in (0..len.saturating_sub(1)).rev() {
        for y in 0..l {
            let next = &beta[(t + 1) * l..(t + 2) * l];
            let em = &e[(t + 1) * l..(t + 2) * l];
            beta[t * l + y] = log_sum_exp((0..l).map(|n| trans[y * l + n] + em[n] + next[n]));
        }
    }
    beta
}

pub fn log_partition(model: &CrfModel, xs: &[FeatureVector]) -> Result<f64, CrfError> {
    check(model, xs)?;
    let e = emissions(model, xs);
    Ok(forward(model, &e, xs.len()).1)
}

/// Posterior label distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub num_labels: usize,
    /// `T × L`: `P(y_t = y)`.
    pub node: Vec<f64>,
    /// `(T-1) × L × L`: `P(y_{t} = a, y_{t+1} = b)` at `[t][a][b]`.
    pub edge: Vec<f64>,
    pub log_z: f64,
}

impl Marginals {
    pub fn len(&self) -> usize {
        self.node.len() / self.num_labels
    }

    pub fn is_empty(&self) -> bool {
        self.node.is_empty()
    }

    pub fn node(&self, t: usize, y: usize) -> f64 {
        self.node[t * self.num_labels + y]
    }

    pub fn edge(&self, t: usize, a: usize, b: usize) -> f64 {
        let l = self.num_labels;
        self.edge[(t * l + a) * l + b]
    }
}

pub fn marginals(model: &CrfModel, xs: &[FeatureVector]) -> Result<Marginals, CrfError> {
    check(model, xs)?;
    let e = emissions(model, xs);
    Ok(marginals_from(model, &e, xs.len()))
}

pub(crate) fn marginals_from(model: &CrfModel, e: &[f64], len: usize) -> Marginals {
    let l = model.num_labels();
    let trans = model.transitions();
    let (alpha, log_z) = forward(model, e, len);
    let beta = backward(model, e, len);
    // per-position normalizers equal log Z up to rounding
    let mut node = vec![0.0; len * l];
    for t in 0..len {
        let s: Vec<f64> = (0..l).map(|y| alpha[t * l + y] + beta[t * l + y]).collect();
        let z = log_sum_exp(s.iter().copied());
        for y in 0..l {
            node[t * l + y] = (s[y] - z).exp();
        }
    }
    let mut edge = vec![0.0; len.saturating_sub(1) * l * l];
    let mut s = vec![0.0; l * l];
    for t in 0..len.saturating_sub(1) {
        for a in 0..l {
            for b in 0..l {
                s[a * l + b] = alpha[t * l + a] + trans[a * l + b] + e[(t + 1) * l + b] + beta[(t + 1) * l + b];
            }
        }
        let z = log_sum_exp(s.iter().copied());
        for (out, v) in edge[t * l * l..(t + 1) * l * l].iter_mut().zip(&s) {
            *out = (v - z).exp();
        }
    }
    Marginals {
        num_labels: l,
        node,
        edge,
        log_z,
    }
}

/// Highest-scoring labeling; among ties, the lexicographically first.
///
/// Best suffix scores are computed right to left, then the path is chosen
/// left to right taking the lowest label that still attains the optimum.
pub fn viterbi(model: &CrfModel, xs: &[FeatureVector]) -> Result<Vec<usize>, CrfError> {
    check(model, xs)?;
    let l = model.num_labels();
    let len = xs.len();
    let trans = model.transitions();
    let e = emissions(model, xs);
    // suffix[t][y]: best score of positions t.. given y_t = y
    let mut suffix = e.clone();
    for t in (0..len - 1).rev() {
        for y in 0..l {
            let next = &suffix[(t + 1) * l..(t + 2) * l];
            let best = (0..l).map(|n| trans[y * l + n] + next[n]).fold(f64::NEG_INFINITY, f64::max);
            suffix[t * l + y] += best;
        }
    }
    let argmax_first = |scores: &mut dyn Iterator<Item = f64>| {
        let mut best = (0, f64::NEG_INFINITY);
        for (y, s) in scores.enumerate() {
            if s > best.1 {
                best = (y, s);
            }
        }
        best.0
    };
    let mut path = Vec::with_capacity(len);
    path.push(argmax_first(&mut suffix[..l].iter().copied()));
    for t in 1..len {
        let p = path[t - 1];
        let row = &suffix[t * l..(t + 1) * l];
        path.push(argmax_first(&mut (0..l).map(|y| trans[p * l + y] + row[y])));
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::testing::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn fv(indices: &[u32]) -> FeatureVector {
        FeatureVector::new(indices.to_vec())
    }

    #[test]
    fn zero_weights() {
        let model = CrfModel::zeros(labels(6), table(4));
        let xs = vec![fv(&[0]), fv(&[1, 2]), fv(&[])];
        assert_eq!(sequence_score(&model, &xs, &[1, 2, 3]).unwrap(), 0.0);
        assert_relative_eq!(log_partition(&model, &xs).unwrap(), 3.0 * 6f64.ln(), max_relative = 1e-12);
        let m = marginals(&model, &xs).unwrap();
        for p in &m.node {
            assert_relative_eq!(*p, 1.0 / 6.0, max_relative = 1e-12);
        }
        assert_eq!(viterbi(&model, &xs).unwrap(), [0, 0, 0]);
    }

    #[test]
    fn single_token() {
        let mut model = CrfModel::zeros(labels(3), table(2));
        model.set_emission(1, 2, 2.0);
        model.set_emission(1, 0, -1.0);
        let xs = vec![fv(&[1])];
        assert_eq!(sequence_score(&model, &xs, &[2]).unwrap(), 2.0);
        let expected = ((-1f64).exp() + 1.0 + 2f64.exp()).ln();
        assert_relative_eq!(log_partition(&model, &xs).unwrap(), expected, max_relative = 1e-12);
        let m = marginals(&model, &xs).unwrap();
        assert_relative_eq!(m.node(0, 2), 2f64.exp() / expected.exp(), max_relative = 1e-12);
        assert_eq!(viterbi(&model, &xs).unwrap(), [2]);
    }

    #[test]
    fn hospital_favoured_by_two() {
        let mut model = CrfModel::zeros(crate::crf::LabelSet::phi(), table(1));
        model.set_emission(0, 2, 2.0);
        assert_eq!(viterbi(&model, &[fv(&[0])]).unwrap(), [2]);
    }

    #[test]
    fn errors() {
        let model = CrfModel::zeros(labels(2), table(2));
        assert!(matches!(log_partition(&model, &[]), Err(CrfError::EmptySequence)));
        assert!(matches!(viterbi(&model, &[fv(&[5])]), Err(CrfError::IndexOutOfRange { what: "feature", .. })));
        assert!(matches!(
            sequence_score(&model, &[fv(&[0])], &[0, 1]),
            Err(CrfError::LengthMismatch { features: 1, labels: 2 })
        ));
        assert!(matches!(
            sequence_score(&model, &[fv(&[0])], &[2]),
            Err(CrfError::IndexOutOfRange { what: "label", .. })
        ));
    }

    #[test]
    fn score_matches_summation_oracle() {
        let mut rng = seeded(11);
        for _ in 0..20 {
            let model = random_model(&mut rng, 6, 4, 2.0);
            let xs = random_sequence(&mut rng, 5, 6);
            let ys: Vec<usize> = (0..5).map(|_| rng.random_range(0..4)).collect();
            assert_relative_eq!(
                sequence_score(&model, &xs, &ys).unwrap(),
                oracle_score(&model, &xs, &ys),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn brute_force_partition_and_viterbi() {
        let mut rng = seeded(12);
        for _ in 0..100 {
            let l = rng.random_range(1..=4);
            let t = rng.random_range(1..=6);
            let model = random_model(&mut rng, 5, l, 2.0);
            let xs = random_sequence(&mut rng, t, 5);
            let mut total = 0.0;
            let mut best: Option<(Vec<usize>, f64)> = None;
            for ys in all_labelings(t, l) {
                let s = oracle_score(&model, &xs, &ys);
                total += s.exp();
                if best.as_ref().is_none_or(|(_, b)| s > *b) {
                    best = Some((ys, s));
                }
            }
            assert_relative_eq!(log_partition(&model, &xs).unwrap(), total.ln(), max_relative = 1e-9);
            assert_eq!(viterbi(&model, &xs).unwrap(), best.unwrap().0);
        }
    }

    #[test]
    fn tie_break_prefers_lexicographically_first() {
        // Two optimal paths: [1, 0] and [0, 1]; backtracking from the end
        // would pick [1, 0].
        let mut model = CrfModel::zeros(labels(2), table(1));
        model.set_transition(0, 1, 1.0);
        model.set_transition(1, 0, 1.0);
        let xs = vec![fv(&[]), fv(&[])];
        assert_eq!(viterbi(&model, &xs).unwrap(), [0, 1]);
    }

    #[test]
    fn marginals_normalized_and_consistent() {
        let mut rng = seeded(13);
        for _ in 0..100 {
            let l = rng.random_range(1..=4);
            let t = rng.random_range(1..=6);
            let model = random_model(&mut rng, 5, l, 2.0);
            let xs = random_sequence(&mut rng, t, 5);
            let m = marginals(&model, &xs).unwrap();
            for i in 0..t {
                let sum: f64 = (0..l).map(|y| m.node(i, y)).sum();
                assert!((sum - 1.0).abs() <= 1e-10);
            }
            for i in 0..t - 1 {
                for a in 0..l {
                    let row: f64 = (0..l).map(|b| m.edge(i, a, b)).sum();
                    assert!((row - m.node(i, a)).abs() <= 1e-9);
                    let col: f64 = (0..l).map(|b| m.edge(i, b, a)).sum();
                    assert!((col - m.node(i + 1, a)).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn partition_dominates_every_score() {
        let mut rng = seeded(14);
        let model = random_model(&mut rng, 5, 3, 2.0);
        let xs = random_sequence(&mut rng, 4, 5);
        let z = log_partition(&model, &xs).unwrap();
        for ys in all_labelings(4, 3) {
            assert!(z >= sequence_score(&model, &xs, &ys).unwrap());
        }
    }

    #[test]
    fn emission_shift_moves_partition_by_constant() {
        let mut rng = seeded(15);
        for _ in 0..20 {
            let mut model = random_model(&mut rng, 4, 3, 2.0);
            // feature 3 only ever fires at position 2
            let mut xs = random_sequence(&mut rng, 5, 3);
            xs[2] = FeatureVector::new([xs[2].indices(), &[3]].concat());
            let z = log_partition(&model, &xs).unwrap();
            let path = viterbi(&model, &xs).unwrap();
            for y in 0..3 {
                let w = model.emission(3, y);
                model.set_emission(3, y, w + 0.7);
            }
            assert_relative_eq!(log_partition(&model, &xs).unwrap(), z + 0.7, max_relative = 1e-12);
            assert_eq!(viterbi(&model, &xs).unwrap(), path);
        }
    }

    #[test]
    fn long_sequences_with_large_weights_stay_finite() {
        let mut rng = seeded(16);
        let model = random_model(&mut rng, 50, 6, 50.0);
        let xs = random_sequence(&mut rng, 10_000, 50);
        let z = log_partition(&model, &xs).unwrap();
        assert!(z.is_finite());
        let m = marginals(&model, &xs).unwrap();
        assert!(m.node.iter().chain(&m.edge).all(|p| p.is_finite()));
        for t in [0, 5000, 9999] {
            let sum: f64 = (0..6).map(|y| m.node(t, y)).sum();
            assert!((sum - 1.0).abs() <= 1e-10);
        }
        let path = viterbi(&model, &xs).unwrap();
        assert!(sequence_score(&model, &xs, &path).unwrap() <= z);
    }
}
