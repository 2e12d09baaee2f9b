//! Linear-chain CRF over `B`/`I`/`O` tags.
//!
//! A path `l_1..l_n` scores
//! `start[l_1] + Σ emissions[i][l_i] + Σ T[l_i][l_{i+1}] + end[l_n]`.
//! All normalizer and decoding math runs in log space.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, Graph, ParamId, ParamStore, Tensor, Var};

pub const NUM_TAGS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    B = 0,
    I = 1,
    O = 2,
}

impl Tag {
    pub const ALL: [Tag; NUM_TAGS] = [Tag::B, Tag::I, Tag::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Tag::ALL.get(i).copied()
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tag::B => "B",
            Tag::I => "I",
            Tag::O => "O",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BioSequence(pub Vec<Tag>);

impl BioSequence {
    pub fn new(tags: Vec<Tag>) -> Self {
        BioSequence(tags)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tags(&self) -> &[Tag] {
        &self.0
    }

    /// Parses a compact string such as `"OBIO"`.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'B' => Ok(Tag::B),
                'I' => Ok(Tag::I),
                'O' => Ok(Tag::O),
                _ => Err(Error::InvalidArgument(format!("bad tag `{}` in {:?}", c, s))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BioSequence)
    }
}

impl fmt::Display for BioSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.0 {
            write!(f, "{}", t)?;
        }
        Ok(())
    }
}

/// Plain-valued transition, start and end scores.
#[derive(Clone, Debug, PartialEq)]
pub struct CrfScores {
    /// `transitions[a][b]`: score of tag `a` followed by tag `b`.
    pub transitions: [[f64; NUM_TAGS]; NUM_TAGS],
    pub start: [f64; NUM_TAGS],
    pub end: [f64; NUM_TAGS],
}

impl CrfScores {
    pub fn zeros() -> Self {
        CrfScores {
            transitions: [[0.0; NUM_TAGS]; NUM_TAGS],
            start: [0.0; NUM_TAGS],
            end: [0.0; NUM_TAGS],
        }
    }
}

fn check_emissions(emissions: &Tensor) -> Result<usize> {
    if emissions.rank() != 2 || emissions.cols() != NUM_TAGS {
        return Err(Error::shape(
            "crf",
            format!("emissions {:?}, expected n x {}", emissions.shape(), NUM_TAGS),
        ));
    }
    Ok(emissions.rows())
}

fn check_nonempty(emissions: &Tensor) -> Result<usize> {
    let n = check_emissions(emissions)?;
    if n == 0 {
        return Err(Error::InvalidArgument("crf over an empty sequence".into()));
    }
    Ok(n)
}

pub fn path_score(emissions: &Tensor, tags: &BioSequence, scores: &CrfScores) -> Result<f64> {
    let n = check_nonempty(emissions)?;
    if tags.len() != n {
        return Err(Error::shape(
            "path_score",
            format!("{} tags for {} emission rows", tags.len(), n),
        ));
    }
    let t = tags.tags();
    let mut s = scores.start[t[0].index()] + scores.end[t[n - 1].index()];
    for i in 0..n {
        s += emissions.row(i)[t[i].index()];
        if i + 1 < n {
            s += scores.transitions[t[i].index()][t[i + 1].index()];
        }
    }
    Ok(s)
}

/// Forward log-messages: `alpha[i][l]` = log-sum of all prefixes ending in `l` at `i`.
fn forward_messages(emissions: &Tensor, scores: &CrfScores) -> Vec<[f64; NUM_TAGS]> {
    let n = emissions.rows();
    let mut alpha = vec![[0.0; NUM_TAGS]; n];
    for l in 0..NUM_TAGS {
        alpha[0][l] = scores.start[l] + emissions.row(0)[l];
    }
    for i in 1..n {
        for b in 0..NUM_TAGS {
            let incoming: [f64; NUM_TAGS] =
                std::array::from_fn(|a| alpha[i - 1][a] + scores.transitions[a][b]);
            alpha[i][b] = log_sum_exp(&incoming) + emissions.row(i)[b];
        }
    }
    alpha
}

/// Backward log-messages: `beta[i][l]` = log-sum of all suffixes after `l` at `i`, end score included.
fn backward_messages(emissions: &Tensor, scores: &CrfScores) -> Vec<[f64; NUM_TAGS]> {
    let n = emissions.rows();
    let mut beta = vec![[0.0; NUM_TAGS]; n];
    beta[n - 1] = scores.end;
    for i in (0..n - 1).rev() {
        for a in 0..NUM_TAGS {
            let outgoing: [f64; NUM_TAGS] = std::array::from_fn(|b| {
                scores.transitions[a][b] + emissions.row(i + 1)[b] + beta[i + 1][b]
            });
            beta[i][a] = log_sum_exp(&outgoing);
        }
    }
    beta
}

pub fn log_partition(emissions: &Tensor, scores: &CrfScores) -> Result<f64> {
    let n = check_nonempty(emissions)?;
    let alpha = forward_messages(emissions, scores);
    let last: [f64; NUM_TAGS] = std::array::from_fn(|l| alpha[n - 1][l] + scores.end[l]);
    Ok(log_sum_exp(&last))
}

pub fn nll(emissions: &Tensor, gold: &BioSequence, scores: &CrfScores) -> Result<f64> {
    let gold_score = path_score(emissions, gold, scores)?;
    Ok(log_partition(emissions, scores)? - gold_score)
}

/// Gradient of the negative log-likelihood w.r.t. every score.
#[derive(Clone, Debug)]
pub struct CrfGradients {
    pub emissions: Tensor,
    pub transitions: [[f64; NUM_TAGS]; NUM_TAGS],
    pub start: [f64; NUM_TAGS],
    pub end: [f64; NUM_TAGS],
}

/// NLL plus its gradient: expected feature counts under the model minus gold counts.
pub fn nll_with_gradients(
    emissions: &Tensor,
    gold: &BioSequence,
    scores: &CrfScores,
) -> Result<(f64, CrfGradients)> {
    let n = check_nonempty(emissions)?;
    let gold_score = path_score(emissions, gold, scores)?;
    let alpha = forward_messages(emissions, scores);
    let beta = backward_messages(emissions, scores);
    let last: [f64; NUM_TAGS] = std::array::from_fn(|l| alpha[n - 1][l] + scores.end[l]);
    let log_z = log_sum_exp(&last);

    let mut d_em = vec![0.0; n * NUM_TAGS];
    for i in 0..n {
        for l in 0..NUM_TAGS {
            d_em[i * NUM_TAGS + l] = (alpha[i][l] + beta[i][l] - log_z).exp();
        }
    }
    let mut d_start: [f64; NUM_TAGS] = std::array::from_fn(|l| d_em[l]);
    let mut d_end: [f64; NUM_TAGS] = std::array::from_fn(|l| d_em[(n - 1) * NUM_TAGS + l]);
    let mut d_trans = [[0.0; NUM_TAGS]; NUM_TAGS];
    for i in 0..n - 1 {
        for a in 0..NUM_TAGS {
            for b in 0..NUM_TAGS {
                d_trans[a][b] += (alpha[i][a]
                    + scores.transitions[a][b]
                    + emissions.row(i + 1)[b]
                    + beta[i + 1][b]
                    - log_z)
                    .exp();
            }
        }
    }

    let t = gold.tags();
    for i in 0..n {
        d_em[i * NUM_TAGS + t[i].index()] -= 1.0;
        if i + 1 < n {
            d_trans[t[i].index()][t[i + 1].index()] -= 1.0;
        }
    }
    d_start[t[0].index()] -= 1.0;
    d_end[t[n - 1].index()] -= 1.0;

    Ok((
        log_z - gold_score,
        CrfGradients {
            emissions: Tensor::matrix(n, NUM_TAGS, d_em)?,
            transitions: d_trans,
            start: d_start,
            end: d_end,
        },
    ))
}

/// MAP path. At every backtracking choice the lowest tag index wins ties.
pub fn viterbi(emissions: &Tensor, scores: &CrfScores) -> Result<BioSequence> {
    let n = check_nonempty(emissions)?;
    let mut delta = vec![[0.0; NUM_TAGS]; n];
    let mut back = vec![[0usize; NUM_TAGS]; n];
    for l in 0..NUM_TAGS {
        delta[0][l] = scores.start[l] + emissions.row(0)[l];
    }
    for i in 1..n {
        for b in 0..NUM_TAGS {
            let mut best = 0;
            let mut best_score = delta[i - 1][0] + scores.transitions[0][b];
            for a in 1..NUM_TAGS {
                let s = delta[i - 1][a] + scores.transitions[a][b];
                if s > best_score {
                    best = a;
                    best_score = s;
                }
            }
            delta[i][b] = best_score + emissions.row(i)[b];
            back[i][b] = best;
        }
    }
    let mut last = 0;
    let mut last_score = delta[n - 1][0] + scores.end[0];
    for l in 1..NUM_TAGS {
        let s = delta[n - 1][l] + scores.end[l];
        if s > last_score {
            last = l;
            last_score = s;
        }
    }
    let mut path = vec![Tag::B; n];
    let mut cur = last;
    for i in (0..n).rev() {
        path[i] = Tag::ALL[cur];
        cur = back[i][cur];
    }
    Ok(BioSequence(path))
}

pub const ORACLE_MAX_LEN: usize = 8;

/// Exhaustive enumeration of all `3^n` paths (`n ≤ 8`): the exact log-partition
/// and the best path, ties resolved toward the lexicographically smallest path.
pub fn brute_force_oracle(emissions: &Tensor, scores: &CrfScores) -> Result<(f64, BioSequence)> {
    let n = check_nonempty(emissions)?;
    if n > ORACLE_MAX_LEN {
        return Err(Error::InvalidArgument(format!(
            "enumeration over {} positions exceeds the limit of {}",
            n, ORACLE_MAX_LEN
        )));
    }
    let total = NUM_TAGS.pow(n as u32);
    let mut all = Vec::with_capacity(total);
    let mut best: Option<(f64, BioSequence)> = None;
    for code in 0..total {
        // most significant digit first, so codes run in lexicographic order
        let mut tags = vec![Tag::B; n];
        let mut c = code;
        for i in (0..n).rev() {
            tags[i] = Tag::ALL[c % NUM_TAGS];
            c /= NUM_TAGS;
        }
        let path = BioSequence(tags);
        let s = path_score(emissions, &path, scores)?;
        all.push(s);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, path));
        }
    }
    let (_, path) = best.expect("at least one path");
    Ok((log_sum_exp(&all), path))
}

/// Trainable CRF: emission projection from word representations plus scores.
#[derive(Clone, Debug)]
pub struct CrfParams {
    pub input_dim: usize,
    pub emission_w: ParamId,
    pub emission_b: ParamId,
    pub transitions: ParamId,
    pub start: ParamId,
    pub end: ParamId,
}

impl CrfParams {
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, input_dim: usize, rng: &mut R) -> Result<Self> {
        Ok(CrfParams {
            input_dim,
            emission_w: store.add_glorot(format!("{prefix}.emission_w"), NUM_TAGS, input_dim, rng)?,
            emission_b: store.add_zeros(format!("{prefix}.emission_b"), &[NUM_TAGS])?,
            transitions: store.add_zeros(format!("{prefix}.transitions"), &[NUM_TAGS, NUM_TAGS])?,
            start: store.add_zeros(format!("{prefix}.start"), &[NUM_TAGS])?,
            end: store.add_zeros(format!("{prefix}.end"), &[NUM_TAGS])?,
        })
    }

    pub fn scores(&self, store: &ParamStore) -> CrfScores {
        let t = store.value(self.transitions).data();
        CrfScores {
            transitions: std::array::from_fn(|a| std::array::from_fn(|b| t[a * NUM_TAGS + b])),
            start: std::array::from_fn(|l| store.value(self.start).data()[l]),
            end: std::array::from_fn(|l| store.value(self.end).data()[l]),
        }
    }

    /// Projects an `n × input_dim` matrix of word representations to `n × 3` tag scores.
    pub fn emissions(&self, g: &mut Graph<'_>, reps: Var) -> Result<Var> {
        let (w, b) = (g.param(self.emission_w), g.param(self.emission_b));
        let rows = g.rows(reps)?;
        let out = rows
            .into_iter()
            .map(|r| g.affine(w, r, b))
            .collect::<Result<Vec<_>>>()?;
        g.stack_rows(&out)
    }

    /// CRF negative log-likelihood as a differentiable graph node.
    pub fn nll(&self, g: &mut Graph<'_>, emissions: Var, gold: &BioSequence) -> Result<Var> {
        let scores = self.scores(g.store());
        let (value, grads) = nll_with_gradients(g.value(emissions), gold, &scores)?;
        let (t, s, e) = (g.param(self.transitions), g.param(self.start), g.param(self.end));
        g.fused_scalar(
            value,
            vec![
                (emissions, grads.emissions),
                (
                    t,
                    Tensor::matrix(
                        NUM_TAGS,
                        NUM_TAGS,
                        grads.transitions.iter().flatten().copied().collect(),
                    )?,
                ),
                (s, Tensor::vector(grads.start.to_vec())),
                (e, Tensor::vector(grads.end.to_vec())),
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{forward_backward, grad_check, rng_from_seed, GradCheckOptions};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_instance(n: usize, seed: u64) -> (Tensor, CrfScores) {
        let mut rng = rng_from_seed(seed);
        let mut u = || rng.random_range(-2.0..2.0);
        let em = Tensor::matrix(n, 3, (0..3 * n).map(|_| u()).collect()).unwrap();
        let scores = CrfScores {
            transitions: std::array::from_fn(|_| std::array::from_fn(|_| u())),
            start: std::array::from_fn(|_| u()),
            end: std::array::from_fn(|_| u()),
        };
        (em, scores)
    }

    #[test]
    fn path_score_examples() {
        let z = CrfScores::zeros();
        let em = Tensor::zeros(&[3, 3]);
        assert_eq!(path_score(&em, &BioSequence::parse("BIO").unwrap(), &z).unwrap(), 0.0);
        let em = Tensor::matrix(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(path_score(&em, &BioSequence::parse("O").unwrap(), &z).unwrap(), 3.0);
        let mut s = CrfScores::zeros();
        s.transitions[Tag::B.index()][Tag::I.index()] = 0.7;
        let em = Tensor::zeros(&[2, 3]);
        assert_eq!(path_score(&em, &BioSequence::parse("BI").unwrap(), &s).unwrap(), 0.7);
        assert!(path_score(&em, &BioSequence::parse("B").unwrap(), &s).is_err());
    }

    #[test]
    fn uniform_partition() {
        let z = CrfScores::zeros();
        let lz1 = log_partition(&Tensor::zeros(&[1, 3]), &z).unwrap();
        let lz2 = log_partition(&Tensor::zeros(&[2, 3]), &z).unwrap();
        assert!((lz1 - 3f64.ln()).abs() < 1e-12);
        assert!((lz2 - 9f64.ln()).abs() < 1e-12);
        let gold = BioSequence::parse("I").unwrap();
        assert!((nll(&Tensor::zeros(&[1, 3]), &gold, &z).unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dominant_gold_path_has_near_zero_nll() {
        let gold = BioSequence::parse("OBIIO").unwrap();
        let mut em = Tensor::zeros(&[5, 3]);
        for (i, t) in gold.tags().iter().enumerate() {
            em.data_mut()[i * 3 + t.index()] = 100.0;
        }
        let v = nll(&em, &gold, &CrfScores::zeros()).unwrap();
        assert!(v >= 0.0 && v < 1e-3, "{}", v);
    }

    #[test]
    fn viterbi_examples() {
        let z = CrfScores::zeros();
        assert_eq!(viterbi(&Tensor::zeros(&[4, 3]), &z).unwrap().to_string(), "BBBB");
        let em = Tensor::matrix(1, 3, vec![0.0, 0.0, 5.0]).unwrap();
        assert_eq!(viterbi(&em, &z).unwrap().to_string(), "O");
    }

    #[test]
    fn oracle_guard() {
        let z = CrfScores::zeros();
        let (lz, p) = brute_force_oracle(&Tensor::zeros(&[1, 3]), &z).unwrap();
        assert!((lz - 3f64.ln()).abs() < 1e-12);
        assert_eq!(p.to_string(), "B");
        assert!(brute_force_oracle(&Tensor::zeros(&[8, 3]), &z).is_ok());
        assert!(brute_force_oracle(&Tensor::zeros(&[9, 3]), &z).is_err());
    }

    #[test]
    fn agrees_with_enumeration_on_random_instances() {
        for seed in 0..200u64 {
            let n = 1 + (seed as usize % 6);
            let (em, s) = random_instance(n, seed);
            let (lz, best) = brute_force_oracle(&em, &s).unwrap();
            assert!((log_partition(&em, &s).unwrap() - lz).abs() < 1e-8);
            assert_eq!(viterbi(&em, &s).unwrap(), best);
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut store = ParamStore::new();
        let mut rng = rng_from_seed(5);
        let crf = CrfParams::new(&mut store, "crf", 4, &mut rng).unwrap();
        for id in [crf.transitions, crf.start, crf.end, crf.emission_b] {
            for v in store.value_mut(id).data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let reps = Tensor::matrix(5, 4, (0..20).map(|i| ((i * 7 % 11) as f64 - 5.0) / 4.0).collect()).unwrap();
        let gold = BioSequence::parse("BIOOB").unwrap();
        let r = grad_check(
            &mut store,
            |g| {
                let x = g.input(reps.clone());
                let em = crf.emissions(g, x)?;
                crf.nll(g, em, &gold)
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(r.max_relative_error < 1e-6, "{:?}", r);
        let loss = forward_backward(&mut store, |g| {
            let x = g.input(reps.clone());
            let em = crf.emissions(g, x)?;
            crf.nll(g, em, &gold)
        })
        .unwrap();
        assert!(loss > 0.0);
    }

    proptest! {
        #[test]
        fn path_probabilities_sum_to_one(n in 1usize..6, seed in 0u64..10_000) {
            let (em, s) = random_instance(n, seed);
            let lz = log_partition(&em, &s).unwrap();
            let total: f64 = (0..3usize.pow(n as u32)).map(|code| {
                let mut c = code;
                let tags = (0..n).map(|_| { let t = Tag::ALL[c % 3]; c /= 3; t }).collect();
                (path_score(&em, &BioSequence(tags), &s).unwrap() - lz).exp()
            }).sum();
            prop_assert!((total - 1.0).abs() < 1e-8);
        }

        #[test]
        fn nll_is_non_negative(n in 1usize..7, seed in 0u64..10_000, gold_code in 0usize..729) {
            let (em, s) = random_instance(n, seed);
            let mut c = gold_code;
            let gold = BioSequence((0..n).map(|_| { let t = Tag::ALL[c % 3]; c /= 3; t }).collect());
            prop_assert!(nll(&em, &gold, &s).unwrap() >= 0.0);
        }

        #[test]
        fn constant_emission_shift(n in 1usize..7, seed in 0u64..10_000, c in -5.0f64..5.0) {
            let (em, s) = random_instance(n, seed);
            let shifted = em.map(|x| x + c);
            let d = log_partition(&shifted, &s).unwrap() - log_partition(&em, &s).unwrap();
            prop_assert!((d - n as f64 * c).abs() < 1e-9);
            prop_assert_eq!(viterbi(&shifted, &s).unwrap(), viterbi(&em, &s).unwrap());
        }
    }
}
