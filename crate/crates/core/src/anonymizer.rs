//! Pseudo-speaker composition from an external vector pool.
//!
//! For a source vector, the `farthest_k` pool vectors by cosine distance are
//! found, `select_n` of them are drawn uniformly without replacement, and
//! their arithmetic mean becomes the anonymized vector.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed;
use crate::store::{SpeakerVector, VectorSet, ANON_SUFFIX};

pub const DEFAULT_FARTHEST_K: usize = 200;
pub const DEFAULT_SELECT_N: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnonymizationPolicy {
    pub farthest_k: usize,
    pub select_n: usize,
    pub seed: u64,
}

impl AnonymizationPolicy {
    pub fn new(farthest_k: usize, select_n: usize, seed: u64) -> Self {
        Self {
            farthest_k,
            select_n,
            seed,
        }
    }

    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.select_n == 0 {
            return Err(Error::Policy("select_n must be positive".into()));
        }
        if self.select_n > self.farthest_k {
            return Err(Error::Policy(format!(
                "select_n ({}) exceeds farthest_k ({})",
                self.select_n, self.farthest_k
            )));
        }
        if self.farthest_k > pool_size {
            return Err(Error::Policy(format!(
                "farthest_k ({}) exceeds pool size ({pool_size})",
                self.farthest_k
            )));
        }
        Ok(())
    }
}

/// Which identity a per-vector seed is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedScope {
    /// `derive_seed_str(base, utterance_id)`: a fresh draw per utterance.
    #[default]
    Utterance,
    /// `derive_seed_str(base, speaker_id)`: one draw reused for a speaker.
    Speaker,
}

impl fmt::Display for SeedScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeedScope::Utterance => "utterance",
            SeedScope::Speaker => "speaker",
        })
    }
}

impl FromStr for SeedScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "utterance" => Ok(SeedScope::Utterance),
            "speaker" => Ok(SeedScope::Speaker),
            other => Err(Error::Config(format!(
                "seed scope must be `utterance` or `speaker`, got `{other}`"
            ))),
        }
    }
}

fn dot_norms(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    (dot, na.sqrt(), nb.sqrt())
}

/// `a.b / (|a| |b|)`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (dot, na, nb) = dot_norms(a, b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidVector("zero-norm vector in cosine".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - cosine_similarity(a, b)`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

/// Indices of the `k` pool vectors farthest from `source`, sorted by
/// distance descending then index ascending.
pub fn select_farthest(source: &[f64], pool: &VectorSet, k: usize) -> Result<Vec<usize>> {
    if k > pool.len() {
        return Err(Error::Policy(format!(
            "k ({k}) exceeds pool size ({})",
            pool.len()
        )));
    }
    let mut scored = pool
        .iter()
        .enumerate()
        .map(|(i, p)| cosine_distance(source, p.values()).map(|d| (d, i)))
        .collect::<Result<Vec<_>>>()?;
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if k < scored.len() && k > 0 {
        scored.select_nth_unstable_by(k - 1, by_rank);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_rank);
    scored.truncate(k);
    Ok(scored.into_iter().map(|(_, i)| i).collect())
}

/// Pool indices chosen for `source` under `policy`, ascending.
pub fn selected_indices(
    source: &[f64],
    pool: &VectorSet,
    policy: &AnonymizationPolicy,
) -> Result<Vec<usize>> {
    policy.validate(pool.len())?;
    let farthest = select_farthest(source, pool, policy.farthest_k)?;
    let mut rng = seed::rng_from_seed(policy.seed);
    let mut chosen: Vec<usize> = index::sample(&mut rng, farthest.len(), policy.select_n)
        .into_iter()
        .map(|i| farthest[i])
        .collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Replaces `source` by the mean of a random subset of its farthest pool
/// vectors. `policy.seed` seeds the draw directly.
///
/// The output keeps the speaker id, appends [`ANON_SUFFIX`] to the utterance
/// id and takes the pool's domain label.
pub fn anonymize(
    source: &SpeakerVector,
    pool: &VectorSet,
    policy: &AnonymizationPolicy,
) -> Result<SpeakerVector> {
    if source.dimension() != pool.dimension() {
        return Err(Error::DimensionMismatch {
            expected: pool.dimension(),
            actual: source.dimension(),
        });
    }
    let chosen = selected_indices(source.values(), pool, policy)?;
    let d = pool.dimension();
    let mut mean = vec![0.0; d];
    for &i in &chosen {
        let v = pool.vectors()[i].values();
        if v.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidVector(format!(
                "zero vector `{}` in pool",
                pool.vectors()[i].utterance_id
            )));
        }
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let n = chosen.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    SpeakerVector::new(
        format!("{}{ANON_SUFFIX}", source.utterance_id),
        source.speaker_id.clone(),
        pool.domain_label(),
        mean,
    )
}

/// Seed used for one member of a set anonymized with `base_seed`.
pub fn member_seed(base_seed: u64, v: &SpeakerVector, scope: SeedScope) -> u64 {
    match scope {
        SeedScope::Utterance => seed::derive_seed_str(base_seed, &v.utterance_id),
        SeedScope::Speaker => seed::derive_seed_str(base_seed, &v.speaker_id),
    }
}

/// Anonymizes every member of `set` with per-member derived seeds.
pub fn anonymize_set(
    set: &VectorSet,
    pool: &VectorSet,
    policy: &AnonymizationPolicy,
    scope: SeedScope,
) -> Result<VectorSet> {
    policy.validate(pool.len())?;
    let out = set
        .iter()
        .map(|v| {
            let p = AnonymizationPolicy {
                seed: member_seed(policy.seed, v, scope),
                ..*policy
            };
            anonymize(v, pool, &p)
        })
        .collect::<Result<Vec<_>>>()?;
    VectorSet::from_vectors(set.dimension(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(rows: &[Vec<f64>]) -> VectorSet {
        VectorSet::from_vectors(
            rows[0].len(),
            rows.iter()
                .enumerate()
                .map(|(i, r)| SpeakerVector::new(format!("p{i}"), format!("ps{i}"), "english", r.clone()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn cosine_reference_points() {
        assert!(cosine_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap().abs() < 1e-15);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_distance(&[1.0, -2.0], &[-1.0, 2.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(cosine_distance(&[0.0, 0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn farthest_of_three() {
        // distances to (1, 0): 0.1, 0.9, 0.5
        let angle = |d: f64| {
            let c: f64 = 1.0 - d;
            vec![c, (1.0 - c * c).sqrt()]
        };
        let p = pool(&[angle(0.1), angle(0.9), angle(0.5)]);
        assert_eq!(select_farthest(&[1.0, 0.0], &p, 2).unwrap(), vec![1, 2]);
        assert_eq!(select_farthest(&[1.0, 0.0], &p, 3).unwrap(), vec![1, 2, 0]);
        assert!(select_farthest(&[1.0, 0.0], &p, 4).is_err());
    }

    #[test]
    fn ties_prefer_lower_index() {
        let p = pool(&[vec![0.0, 1.0], vec![0.0, 2.0], vec![-1.0, 0.0], vec![0.0, -1.0]]);
        assert_eq!(select_farthest(&[1.0, 0.0], &p, 3).unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn full_selection_is_seed_independent() {
        let p = pool(&[vec![1.0, 2.0], vec![-3.0, 0.5]]);
        let s = SpeakerVector::new("u", "s", "mandarin", vec![0.3, 0.3]).unwrap();
        let a = anonymize(&s, &p, &AnonymizationPolicy::new(2, 2, 1)).unwrap();
        let b = anonymize(&s, &p, &AnonymizationPolicy::new(2, 2, 999)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values(), &[-1.0, 1.25]);
        assert_eq!(a.utterance_id, "u.anon");
        assert_eq!(a.speaker_id, "s");
        assert_eq!(a.domain, "english");
    }

    #[test]
    fn seeds_matter_when_subsampling() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64).cos(), (i as f64 * 1.7).sin(), 0.1 * i as f64 + 0.5])
            .collect();
        let p = pool(&rows);
        let s = SpeakerVector::new("u", "s", "m", vec![1.0, 0.0, 0.0]).unwrap();
        let a = anonymize(&s, &p, &AnonymizationPolicy::new(20, 5, 1)).unwrap();
        let a2 = anonymize(&s, &p, &AnonymizationPolicy::new(20, 5, 1)).unwrap();
        let b = anonymize(&s, &p, &AnonymizationPolicy::new(20, 5, 2)).unwrap();
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }

    #[test]
    fn policy_validation() {
        assert!(AnonymizationPolicy::new(5, 6, 0).validate(10).is_err());
        assert!(AnonymizationPolicy::new(11, 6, 0).validate(10).is_err());
        assert!(AnonymizationPolicy::new(5, 0, 0).validate(10).is_err());
        assert!(AnonymizationPolicy::new(10, 10, 0).validate(10).is_ok());
    }

    #[test]
    fn speaker_scope_reuses_draw() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64).cos(), (i as f64 * 1.7).sin(), 0.1 * i as f64 + 0.5])
            .collect();
        let p = pool(&rows);
        let set = VectorSet::from_vectors(
            3,
            vec![
                SpeakerVector::new("a1", "A", "m", vec![1.0, 0.0, 0.0]).unwrap(),
                SpeakerVector::new("a2", "A", "m", vec![1.0, 0.01, 0.0]).unwrap(),
            ],
        )
        .unwrap();
        let policy = AnonymizationPolicy::new(20, 5, 3);
        let chosen = |v: &SpeakerVector, scope| {
            let pol = AnonymizationPolicy { seed: member_seed(3, v, scope), ..policy };
            selected_indices(v.values(), &p, &pol).unwrap()
        };
        let (a1, a2) = (&set.vectors()[0], &set.vectors()[1]);
        // Both utterances share a farthest-20 set, so one speaker seed picks one subset.
        assert_eq!(select_farthest(a1.values(), &p, 20).unwrap().iter().collect::<std::collections::BTreeSet<_>>(),
                   select_farthest(a2.values(), &p, 20).unwrap().iter().collect::<std::collections::BTreeSet<_>>());
        assert_eq!(chosen(a1, SeedScope::Speaker), chosen(a2, SeedScope::Speaker));
        assert_ne!(member_seed(3, a1, SeedScope::Utterance), member_seed(3, a2, SeedScope::Utterance));
        let out = anonymize_set(&set, &p, &policy, SeedScope::Speaker).unwrap();
        assert_eq!(out.len(), 2);
    }
}
