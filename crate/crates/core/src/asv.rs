//! Cosine scoring of trial lists and equal error rate.

use std::path::Path;

use crate::anonymizer::cosine_similarity;
use crate::error::{Error, Result};
use crate::io;
use crate::store::VectorSet;
use crate::trials::{Label, TrialSet};

pub const SCORING_BACKEND: &str = "cosine";

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrial {
    pub enroll: String,
    pub test: String,
    pub label: Label,
    pub score: f64,
}

/// Scores each trial as the cosine similarity of its enroll and test vectors.
///
/// Ids resolve exactly or through their anonymized form (see
/// [`VectorSet::resolve`]).
pub fn score_trials(enroll: &VectorSet, test: &VectorSet, trials: &TrialSet) -> Result<Vec<ScoredTrial>> {
    trials
        .pairs()
        .iter()
        .map(|t| {
            let e = enroll
                .resolve(&t.enroll)
                .ok_or_else(|| Error::UnknownId(t.enroll.clone()))?;
            let s = test
                .resolve(&t.test)
                .ok_or_else(|| Error::UnknownId(t.test.clone()))?;
            Ok(ScoredTrial {
                enroll: t.enroll.clone(),
                test: t.test.clone(),
                label: t.label,
                score: cosine_similarity(e.values(), s.values())?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eer {
    pub eer: f64,
    pub threshold: f64,
}

/// Equal error rate with linear interpolation at the FAR/FRR crossing.
///
/// Thresholds sweep the sorted distinct scores plus one point above the
/// maximum. At threshold `t`, FAR is the fraction of impostor scores `>= t`
/// and FRR the fraction of genuine scores `< t`. The first sweep point where
/// `FAR - FRR <= 0` is located; an exact zero is returned as is, otherwise
/// both rates and the threshold are interpolated linearly between it and the
/// previous point.
pub fn compute_eer(scores: &[ScoredTrial]) -> Result<Eer> {
    let genuine: Vec<f64> = scores
        .iter()
        .filter(|s| s.label == Label::Genuine)
        .map(|s| s.score)
        .collect();
    let impostor: Vec<f64> = scores
        .iter()
        .filter(|s| s.label == Label::Impostor)
        .map(|s| s.score)
        .collect();
    eer_from_scores(&genuine, &impostor)
}

pub fn eer_from_scores(genuine: &[f64], impostor: &[f64]) -> Result<Eer> {
    if genuine.is_empty() {
        return Err(Error::EmptyClass("genuine"));
    }
    if impostor.is_empty() {
        return Err(Error::EmptyClass("impostor"));
    }
    if genuine.iter().chain(impostor).any(|s| !s.is_finite()) {
        return Err(Error::Config("non-finite score".into()));
    }

    let mut all: Vec<(f64, Label)> = genuine
        .iter()
        .map(|&s| (s, Label::Genuine))
        .chain(impostor.iter().map(|&s| (s, Label::Impostor)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let ng = genuine.len() as f64;
    let ni = impostor.len() as f64;
    // At the lowest score: every impostor accepted, no genuine rejected.
    let mut gen_below = 0usize;
    let mut imp_below = 0usize;
    let mut prev = (all[0].0, 1.0, 0.0);
    let mut i = 0;
    loop {
        let (t, far, frr) = if i < all.len() {
            let t = all[i].0;
            (t, 1.0 - imp_below as f64 / ni, gen_below as f64 / ng)
        } else {
            (all[all.len() - 1].0, 0.0, 1.0)
        };
        let diff = far - frr;
        if diff <= 0.0 {
            if diff == 0.0 {
                return Ok(Eer { eer: far, threshold: t });
            }
            let prev_diff = prev.1 - prev.2;
            let alpha = prev_diff / (prev_diff - diff);
            return Ok(Eer {
                eer: prev.1 + alpha * (far - prev.1),
                threshold: prev.0 + alpha * (t - prev.0),
            });
        }
        prev = (t, far, frr);
        if i == all.len() {
            unreachable!("FAR - FRR is -1 past the last score");
        }
        while i < all.len() && all[i].0 == t {
            match all[i].1 {
                Label::Genuine => gen_below += 1,
                Label::Impostor => imp_below += 1,
            }
            i += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub scores: Vec<ScoredTrial>,
    pub eer: f64,
    pub threshold: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
}

impl ScoreReport {
    pub fn from_scores(scores: Vec<ScoredTrial>) -> Result<Self> {
        let Eer { eer, threshold } = compute_eer(&scores)?;
        let n_genuine = scores.iter().filter(|s| s.label == Label::Genuine).count();
        Ok(Self {
            n_impostor: scores.len() - n_genuine,
            n_genuine,
            eer,
            threshold,
            scores,
        })
    }

    pub fn summary_line(&self) -> String {
        format!(
            "eer={} threshold={} n_genuine={} n_impostor={} scoring={SCORING_BACKEND}",
            io::fmt_f64(self.eer),
            io::fmt_f64(self.threshold),
            self.n_genuine,
            self.n_impostor
        )
    }

    /// Score lines `enroll<TAB>test<TAB>label<TAB>score`, then the summary.
    pub fn to_text(&self, comments: &[String]) -> String {
        let mut out = io::comment_block(comments);
        out.push_str("# eer_method=linear-interpolation-at-crossing\n");
        for s in &self.scores {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                s.enroll,
                s.test,
                s.label,
                io::fmt_f64(s.score)
            ));
        }
        out.push_str(&self.summary_line());
        out.push('\n');
        out
    }

    pub fn save(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        io::write_atomic(path.as_ref(), &self.to_text(comments))
    }
}
