//! Synthetic multi-domain speaker-embedding corpora.
//!
//! Each domain has a mean and a covariance shape `S`. Speaker means are drawn
//! as `mu + between_std * L g` with `L L^T = S` and `g ~ N(0, I)`; every
//! utterance adds isotropic noise `within_std * N(0, I)` to its speaker mean.
//! The population covariance of a domain is therefore
//! `between_std^2 S + within_std^2 I`.
//!
//! Spec files use flat `key = value` lines:
//!
//! ```text
//! dim = 32
//! seed = 7
//! speakers_per_domain = 44
//! utterances_per_speaker = 10
//! between_speaker_std = 1.0
//! within_speaker_std = 0.3
//! domains = english, mandarin
//! domain.english.shift = 2.0            # scalar s -> s * (1,...,1) / sqrt(d)
//! domain.english.covariance = isotropic:1.0
//! domain.mandarin.shift = 0.5,-1,...    # explicit d-vector
//! domain.mandarin.covariance = random_spd:11:20
//! domain.mandarin.speakers = 100        # optional overrides
//! domain.mandarin.utterances = 5
//! ```
//!
//! Covariance shapes: `isotropic:<sigma>` (`S = sigma^2 I`),
//! `diagonal:<v1,...,vd>` (per-dimension variances), and
//! `random_spd:<seed>:<condition_cap>` (`Q diag(e) Q^T` with a seeded random
//! orthogonal `Q` and eigenvalues log-uniform in `[1, condition_cap]`).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::io;
use crate::kv::KvFile;
use crate::seed::{self, derive_seed_str};
use crate::store::{SpeakerVector, VectorSet};

#[derive(Debug, Clone, PartialEq)]
pub enum MeanShift {
    /// `s * (1, ..., 1) / sqrt(d)`
    Magnitude(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceShape {
    Isotropic(f64),
    Diagonal(Vec<f64>),
    RandomSpd { seed: u64, condition_cap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub label: String,
    pub mean_shift: MeanShift,
    pub covariance: CovarianceShape,
    pub speakers: Option<usize>,
    pub utterances: Option<usize>,
}

impl DomainSpec {
    pub fn new(label: impl Into<String>, mean_shift: MeanShift, covariance: CovarianceShape) -> Self {
        Self {
            label: label.into(),
            mean_shift,
            covariance,
            speakers: None,
            utterances: None,
        }
    }

    pub fn with_counts(mut self, speakers: usize, utterances: usize) -> Self {
        self.speakers = Some(speakers);
        self.utterances = Some(utterances);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub dimension: usize,
    pub domains: Vec<DomainSpec>,
    pub speakers_per_domain: usize,
    pub utterances_per_speaker: usize,
    pub between_speaker_std: f64,
    pub within_speaker_std: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dimension == 0 {
            return bad("dimension must be positive".into());
        }
        if self.domains.is_empty() {
            return bad("at least one domain is required".into());
        }
        if !(self.between_speaker_std > 0.0 && self.between_speaker_std.is_finite()) {
            return bad("between_speaker_std must be positive".into());
        }
        if !(self.within_speaker_std > 0.0 && self.within_speaker_std.is_finite()) {
            return bad("within_speaker_std must be positive".into());
        }
        for (i, dom) in self.domains.iter().enumerate() {
            if dom.label.is_empty() || dom.label.contains(char::is_whitespace) {
                return bad(format!("invalid domain label `{}`", dom.label));
            }
            if self.domains[..i].iter().any(|o| o.label == dom.label) {
                return bad(format!("duplicate domain `{}`", dom.label));
            }
            if self.speakers(dom) == 0 || self.utterances(dom) == 0 {
                return bad(format!("domain `{}` has no vectors", dom.label));
            }
            match &dom.mean_shift {
                MeanShift::Magnitude(s) if !s.is_finite() => {
                    return bad(format!("domain `{}`: non-finite shift", dom.label))
                }
                MeanShift::Vector(v) if v.len() != self.dimension || v.iter().any(|x| !x.is_finite()) => {
                    return bad(format!("domain `{}`: shift must have {} finite values", dom.label, self.dimension))
                }
                _ => {}
            }
            match &dom.covariance {
                CovarianceShape::Isotropic(s) if !(*s > 0.0 && s.is_finite()) => {
                    return bad(format!("domain `{}`: isotropic sigma must be positive", dom.label))
                }
                CovarianceShape::Diagonal(v)
                    if v.len() != self.dimension || v.iter().any(|x| !(*x > 0.0 && x.is_finite())) =>
                {
                    return bad(format!("domain `{}`: diagonal needs {} positive variances", dom.label, self.dimension))
                }
                CovarianceShape::RandomSpd { condition_cap, .. } if !(*condition_cap >= 1.0 && condition_cap.is_finite()) => {
                    return bad(format!("domain `{}`: condition_cap must be >= 1", dom.label))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn speakers(&self, dom: &DomainSpec) -> usize {
        dom.speakers.unwrap_or(self.speakers_per_domain)
    }

    pub fn utterances(&self, dom: &DomainSpec) -> usize {
        dom.utterances.unwrap_or(self.utterances_per_speaker)
    }

    fn domain(&self, label: &str) -> Result<&DomainSpec> {
        self.domains
            .iter()
            .find(|d| d.label == label)
            .ok_or_else(|| Error::Config(format!("unknown domain `{label}`")))
    }

    pub fn domain_mean(&self, label: &str) -> Result<DVector<f64>> {
        let d = self.dimension;
        Ok(match &self.domain(label)?.mean_shift {
            MeanShift::Magnitude(s) => DVector::from_element(d, s / (d as f64).sqrt()),
            MeanShift::Vector(v) => DVector::from_column_slice(v),
        })
    }

    /// The shape matrix `S`.
    pub fn shape_matrix(&self, label: &str) -> Result<DMatrix<f64>> {
        let d = self.dimension;
        Ok(match &self.domain(label)?.covariance {
            CovarianceShape::Isotropic(s) => DMatrix::identity(d, d) * (s * s),
            CovarianceShape::Diagonal(v) => DMatrix::from_diagonal(&DVector::from_column_slice(v)),
            CovarianceShape::RandomSpd { seed, condition_cap } => {
                let (q, e) = random_spd_factors(d, *seed, *condition_cap);
                &q * DMatrix::from_diagonal(&e) * q.transpose()
            }
        })
    }

    /// `between_std^2 S + within_std^2 I`.
    pub fn population_covariance(&self, label: &str) -> Result<DMatrix<f64>> {
        let d = self.dimension;
        Ok(self.shape_matrix(label)? * self.between_speaker_std.powi(2)
            + DMatrix::identity(d, d) * self.within_speaker_std.powi(2))
    }

    /// Expected ratio of total between-speaker to total within-speaker variance.
    pub fn variance_ratio(&self, label: &str) -> Result<f64> {
        let between = self.shape_matrix(label)?.trace() * self.between_speaker_std.powi(2);
        Ok(between / (self.dimension as f64 * self.within_speaker_std.powi(2)))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = KvFile::parse(text)?;
        let labels: Vec<String> = kv
            .require("domains")?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let dimension: usize = kv.parse_req("dim")?;
        kv.check_keys(|k| {
            matches!(
                k,
                "dim" | "seed" | "speakers_per_domain" | "utterances_per_speaker"
                    | "between_speaker_std" | "within_speaker_std" | "domains"
            ) || k
                .strip_prefix("domain.")
                .and_then(|rest| rest.rsplit_once('.'))
                .is_some_and(|(label, field)| {
                    labels.iter().any(|l| l == label)
                        && matches!(field, "shift" | "covariance" | "speakers" | "utterances")
                })
        })?;

        let mut domains = Vec::new();
        for label in &labels {
            let key = |f: &str| format!("domain.{label}.{f}");
            let shift_text = kv.get(&key("shift")).unwrap_or("0");
            let mean_shift = if shift_text.contains(',') {
                MeanShift::Vector(io::parse_f64_list(shift_text, 0).map_err(|_| {
                    Error::Config(format!("invalid shift for domain `{label}`"))
                })?)
            } else {
                MeanShift::Magnitude(shift_text.parse().map_err(|_| {
                    Error::Config(format!("invalid shift for domain `{label}`"))
                })?)
            };
            let covariance = parse_shape(kv.get(&key("covariance")).unwrap_or("isotropic:1"))
                .map_err(|m| Error::Config(format!("domain `{label}`: {m}")))?;
            domains.push(DomainSpec {
                label: label.clone(),
                mean_shift,
                covariance,
                speakers: kv.parse_opt(&key("speakers"))?,
                utterances: kv.parse_opt(&key("utterances"))?,
            });
        }
        let spec = SynthSpec {
            dimension,
            domains,
            speakers_per_domain: kv.parse_req("speakers_per_domain")?,
            utterances_per_speaker: kv.parse_req("utterances_per_speaker")?,
            between_speaker_std: kv.parse_req("between_speaker_std")?,
            within_speaker_std: kv.parse_req("within_speaker_std")?,
            seed: kv.parse_req("seed")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Canonical spec text; parses back to an equal spec.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "dim = {}\nseed = {}\nspeakers_per_domain = {}\nutterances_per_speaker = {}\nbetween_speaker_std = {}\nwithin_speaker_std = {}\ndomains = {}\n",
            self.dimension,
            self.seed,
            self.speakers_per_domain,
            self.utterances_per_speaker,
            io::fmt_f64(self.between_speaker_std),
            io::fmt_f64(self.within_speaker_std),
            self.domains.iter().map(|d| d.label.as_str()).collect::<Vec<_>>().join(", ")
        );
        for d in &self.domains {
            let shift = match &d.mean_shift {
                MeanShift::Magnitude(s) => io::fmt_f64(*s),
                MeanShift::Vector(v) => io::join_f64(v),
            };
            let cov = match &d.covariance {
                CovarianceShape::Isotropic(s) => format!("isotropic:{}", io::fmt_f64(*s)),
                CovarianceShape::Diagonal(v) => format!("diagonal:{}", io::join_f64(v)),
                CovarianceShape::RandomSpd { seed, condition_cap } => {
                    format!("random_spd:{seed}:{}", io::fmt_f64(*condition_cap))
                }
            };
            out.push_str(&format!("domain.{}.shift = {shift}\ndomain.{}.covariance = {cov}\n", d.label, d.label));
            if let Some(s) = d.speakers {
                out.push_str(&format!("domain.{}.speakers = {s}\n", d.label));
            }
            if let Some(u) = d.utterances {
                out.push_str(&format!("domain.{}.utterances = {u}\n", d.label));
            }
        }
        out
    }
}

fn parse_shape(text: &str) -> std::result::Result<CovarianceShape, String> {
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| format!("covariance `{text}` must be `<kind>:<params>`"))?;
    let bad = || format!("invalid covariance `{text}`");
    match kind.trim() {
        "isotropic" => Ok(CovarianceShape::Isotropic(rest.trim().parse().map_err(|_| bad())?)),
        "diagonal" => Ok(CovarianceShape::Diagonal(
            io::parse_f64_list(rest, 0).map_err(|_| bad())?,
        )),
        "random_spd" => {
            let (s, c) = rest.split_once(':').ok_or_else(bad)?;
            Ok(CovarianceShape::RandomSpd {
                seed: s.trim().parse().map_err(|_| bad())?,
                condition_cap: c.trim().parse().map_err(|_| bad())?,
            })
        }
        other => Err(format!("unknown covariance kind `{other}`")),
    }
}

/// Seeded orthogonal basis (QR of a Gaussian matrix, sign-fixed) and
/// eigenvalues log-uniform in `[1, condition_cap]`.
fn random_spd_factors(d: usize, seed: u64, condition_cap: f64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = seed::rng_from_seed(seed);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let log_cap = condition_cap.ln();
    let e = DVector::from_fn(d, |_, _| (rng.random::<f64>() * log_cap).exp());
    (q, e)
}

/// Generates one vector set per domain, in spec order.
///
/// Speaker ids are `<label>-spk<NNNN>` and utterance ids
/// `<label>-spk<NNNN>-utt<NNN>`, so namespaces never collide across domains.
/// Each domain draws from its own seed, `derive_seed_str(seed, label)`.
pub fn generate(spec: &SynthSpec) -> Result<Vec<(String, VectorSet)>> {
    spec.validate()?;
    let d = spec.dimension;
    let mut out = Vec::with_capacity(spec.domains.len());
    for dom in &spec.domains {
        let mean = spec.domain_mean(&dom.label)?;
        let factor = match &dom.covariance {
            CovarianceShape::Isotropic(s) => DMatrix::identity(d, d) * *s,
            CovarianceShape::Diagonal(v) => {
                DMatrix::from_diagonal(&DVector::from_iterator(d, v.iter().map(|x| x.sqrt())))
            }
            CovarianceShape::RandomSpd { seed, condition_cap } => {
                let (q, e) = random_spd_factors(d, *seed, *condition_cap);
                q * DMatrix::from_diagonal(&e.map(f64::sqrt))
            }
        };
        let mut rng = seed::rng_from_seed(derive_seed_str(spec.seed, &dom.label));
        let mut set = VectorSet::new(d)?;
        for s in 0..spec.speakers(dom) {
            let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let speaker_mean = &mean + &factor * g * spec.between_speaker_std;
            let speaker_id = format!("{}-spk{s:04}", dom.label);
            for u in 0..spec.utterances(dom) {
                let values = loop {
                    let v: Vec<f64> = (0..d)
                        .map(|j| {
                            speaker_mean[j]
                                + spec.within_speaker_std * rng.sample::<f64, _>(StandardNormal)
                        })
                        .collect();
                    if v.iter().any(|&x| x != 0.0) {
                        break v;
                    }
                };
                set.push(SpeakerVector::new(
                    format!("{speaker_id}-utt{u:03}"),
                    speaker_id.clone(),
                    dom.label.clone(),
                    values,
                )?)?;
            }
        }
        out.push((dom.label.clone(), set));
    }
    Ok(out)
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<SynthSpec> {
    SynthSpec::parse(&io::read_to_string(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anonymizer::cosine_distance;

    fn base() -> SynthSpec {
        SynthSpec {
            dimension: 4,
            domains: vec![DomainSpec::new("a", MeanShift::Magnitude(1.0), CovarianceShape::Isotropic(1.0))],
            speakers_per_domain: 3,
            utterances_per_speaker: 2,
            between_speaker_std: 1.0,
            within_speaker_std: 0.5,
            seed: 1,
        }
    }

    #[test]
    fn near_zero_within_noise() {
        let mut spec = base();
        spec.speakers_per_domain = 1;
        spec.utterances_per_speaker = 3;
        spec.within_speaker_std = 1e-9;
        let sets = generate(&spec).unwrap();
        let v = sets[0].1.vectors();
        for i in 0..3 {
            for j in 0..3 {
                assert!(cosine_distance(v[i].values(), v[j].values()).unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn deterministic_and_namespaced() {
        let mut spec = base();
        spec.domains.push(DomainSpec::new("b", MeanShift::Magnitude(-1.0), CovarianceShape::RandomSpd { seed: 3, condition_cap: 10.0 }));
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[1].1.vectors()[0].utterance_id, "b-spk0000-utt000");
        let spk_a: std::collections::HashSet<_> = a[0].1.iter().map(|v| v.speaker_id.clone()).collect();
        assert!(a[1].1.iter().all(|v| !spk_a.contains(&v.speaker_id)));
    }

    #[test]
    fn validation() {
        let mut spec = base();
        spec.within_speaker_std = 0.0;
        assert!(generate(&spec).is_err());
        let mut spec = base();
        spec.domains[0].covariance = CovarianceShape::RandomSpd { seed: 0, condition_cap: 0.5 };
        assert!(spec.validate().is_err());
        let mut spec = base();
        spec.domains[0].mean_shift = MeanShift::Vector(vec![1.0]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn random_spd_spectrum_is_capped() {
        let mut spec = base();
        spec.dimension = 6;
        spec.domains[0].covariance = CovarianceShape::RandomSpd { seed: 5, condition_cap: 20.0 };
        let s = spec.shape_matrix("a").unwrap();
        let (vals, _) = crate::stats::sorted_eigen(&s).unwrap();
        assert!(vals[0] <= 20.0 + 1e-9);
        assert!(vals[5] >= 1.0 - 1e-9);
    }

    #[test]
    fn spec_text_round_trip() {
        let mut spec = base();
        spec.domains.push(
            DomainSpec::new("b", MeanShift::Vector(vec![1.0, 0.5, -2.0, 0.0]), CovarianceShape::Diagonal(vec![1.0, 2.0, 3.0, 4.0]))
                .with_counts(7, 3),
        );
        spec.domains.push(DomainSpec::new("c", MeanShift::Magnitude(2.5), CovarianceShape::RandomSpd { seed: 4, condition_cap: 8.0 }));
        assert_eq!(SynthSpec::parse(&spec.to_text()).unwrap(), spec);
        assert!(SynthSpec::parse(&format!("{}bogus = 1\n", spec.to_text())).is_err());
    }
}
