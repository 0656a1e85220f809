#![allow(dead_code)]

use anonvec_core::anonymizer::{AnonymizationPolicy, SeedScope};
use anonvec_core::coral::DenormMode;
use anonvec_core::harness::{CoralSpec, PartyPolicy, Scenario, ScenarioConfig};
use anonvec_core::seed::rng_from_seed;
use anonvec_core::synth::{generate, CovarianceShape, DomainSpec, MeanShift, SynthSpec};
use anonvec_core::trials::{generate_trials, split_enroll_test, ImpostorPolicy};
use anonvec_core::{SpeakerVector, VectorSet};
use rand::Rng;

/// English pool (250 speakers x 4), Mandarin-like test domain
/// (44 speakers x 10: 2 enroll + 8 test), and a general target domain.
pub struct Corpus {
    pub english: VectorSet,
    pub mandarin: VectorSet,
    pub general: VectorSet,
}

pub fn corpus_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        dimension: 192,
        domains: vec![
            DomainSpec::new("english", MeanShift::Magnitude(2.0), CovarianceShape::Isotropic(1.0))
                .with_counts(250, 4),
            DomainSpec::new(
                "mandarin",
                MeanShift::Magnitude(-2.0),
                CovarianceShape::RandomSpd { seed: 5, condition_cap: 10.0 },
            )
            .with_counts(44, 10),
            DomainSpec::new(
                "general",
                MeanShift::Magnitude(1.0),
                CovarianceShape::RandomSpd { seed: 6, condition_cap: 5.0 },
            )
            .with_counts(100, 2),
        ],
        speakers_per_domain: 1,
        utterances_per_speaker: 1,
        between_speaker_std: 1.0,
        within_speaker_std: 0.2,
        seed,
    }
}

pub fn corpus(seed: u64) -> Corpus {
    let mut sets = generate(&corpus_spec(seed)).unwrap().into_iter().map(|(_, s)| s);
    Corpus {
        english: sets.next().unwrap(),
        mandarin: sets.next().unwrap(),
        general: sets.next().unwrap(),
    }
}

fn coral(c: &Corpus, n: usize, seed: u64) -> CoralSpec {
    CoralSpec {
        source: c.english.clone(),
        target: c.general.clone(),
        n_fit: n,
        lambda: 1.0,
        denorm: DenormMode::Target,
        seed,
    }
}

/// Lazy-informed config; `user_n` / `attacker_n` are CORAL fit sizes
/// (`None` disables CORAL for that party).
pub fn lazy_config(c: &Corpus, user_n: Option<usize>, attacker_n: Option<usize>) -> ScenarioConfig {
    let (e, t) = split_enroll_test(&c.mandarin, 2);
    let trials = generate_trials(&c.mandarin, &e, &t, ImpostorPolicy::Exhaustive).unwrap();
    ScenarioConfig {
        scenario: Scenario::LazyInformed,
        enroll: c.mandarin.clone(),
        test: c.mandarin.clone(),
        trials,
        pool: c.english.clone(),
        user: PartyPolicy {
            anonymization: AnonymizationPolicy::new(200, 100, 11),
            seed_scope: SeedScope::Utterance,
            coral: user_n.map(|n| coral(c, n, 12)),
            pool: None,
        },
        attacker: Some(PartyPolicy {
            anonymization: AnonymizationPolicy::new(200, 100, 21),
            seed_scope: SeedScope::Utterance,
            coral: attacker_n.map(|n| coral(c, n, 22)),
            pool: None,
        }),
        runs: 5,
        freeze_anonymization: false,
        freeze_coral: false,
        allow_equal_seeds: false,
        provenance: Vec::new(),
    }
}

pub fn random_set(seed: u64, n: usize, d: usize) -> VectorSet {
    let mut rng = rng_from_seed(seed);
    let mut set = VectorSet::new(d).unwrap();
    for i in 0..n {
        let values: Vec<f64> = (0..d)
            .map(|_| {
                let mag: f64 = 10f64.powf(rng.random_range(-8.0..8.0));
                if rng.random_bool(0.5) { mag } else { -mag * rng.random::<f64>() }
            })
            .collect();
        set.push(
            SpeakerVector::new(format!("utt{i}"), format!("spk{}", i % 7), ["en", "zh"][i % 2], values)
                .unwrap(),
        )
        .unwrap();
    }
    set
}

/// Plain-loop covariance (denominator n - 1) of the rows.
pub fn empirical_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for row in cov.iter_mut() {
        for x in row.iter_mut() {
            *x /= (n - 1) as f64;
        }
    }
    cov
}

/// Threshold sweep at every midpoint between consecutive distinct scores plus
/// one point below and above the range; linear interpolation at the first
/// sign change of FAR - FRR.
pub fn brute_force_eer(genuine: &[f64], impostor: &[f64]) -> f64 {
    let mut all: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut thresholds = vec![all[0] - 1.0];
    for w in all.windows(2) {
        thresholds.push(0.5 * (w[0] + w[1]));
    }
    thresholds.push(all[all.len() - 1] + 1.0);
    let rates = |t: f64| {
        let far = impostor.iter().filter(|&&s| s >= t).count() as f64 / impostor.len() as f64;
        let frr = genuine.iter().filter(|&&s| s < t).count() as f64 / genuine.len() as f64;
        (far, frr)
    };
    let mut prev = rates(thresholds[0]);
    for &t in &thresholds[1..] {
        let cur = rates(t);
        let d = cur.0 - cur.1;
        if d <= 0.0 {
            if d == 0.0 {
                return cur.0;
            }
            let pd = prev.0 - prev.1;
            let a = pd / (pd - d);
            return prev.0 + a * (cur.0 - prev.0);
        }
        prev = cur;
    }
    unreachable!()
}

/// Cosine distance evaluated with plain loops.
pub fn oracle_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    1.0 - (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Full stable sort by (distance desc, index asc), truncated to `k`.
pub fn oracle_farthest(source: &[f64], pool: &VectorSet, k: usize) -> Vec<usize> {
    let mut idx: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .map(|(i, p)| (oracle_distance(source, p.values()), i))
        .collect();
    idx.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    idx.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Random pool of up to 64 vectors with deliberate exact duplicates (ties).
pub fn random_pool(rng: &mut impl Rng, d: usize) -> VectorSet {
    let size = rng.random_range(2..=64);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for _ in 0..size {
        if !rows.is_empty() && rng.random_bool(0.25) {
            let j = rng.random_range(0..rows.len());
            rows.push(rows[j].clone());
        } else {
            rows.push((0..d).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
    }
    VectorSet::from_vectors(
        d,
        rows.into_iter()
            .enumerate()
            .map(|(i, r)| SpeakerVector::new(format!("p{i}"), format!("ps{i}"), "pool", r).unwrap())
            .collect(),
    )
    .unwrap()
}
