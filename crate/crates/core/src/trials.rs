//! Enrollment/test trial lists.
//!
//! Trial file format: one `enroll_utt<TAB>test_utt<TAB>genuine|impostor` per
//! line; `#` lines are ignored.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::io;
use crate::seed;
use crate::store::VectorSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Genuine,
    Impostor,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Genuine => "genuine",
            Label::Impostor => "impostor",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "genuine" => Ok(Label::Genuine),
            "impostor" => Ok(Label::Impostor),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trial {
    pub enroll: String,
    pub test: String,
    pub label: Label,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrialSet {
    pairs: Vec<Trial>,
}

impl TrialSet {
    pub fn from_pairs(pairs: Vec<Trial>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &pairs {
            if !seen.insert((t.enroll.as_str(), t.test.as_str())) {
                return Err(Error::Config(format!(
                    "duplicate trial ({}, {})",
                    t.enroll, t.test
                )));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[Trial] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.pairs.iter().filter(|t| t.label == label).count()
    }

    /// Both label classes must be present before EER can be computed.
    pub fn check_both_classes(&self) -> Result<()> {
        if self.count(Label::Genuine) == 0 {
            return Err(Error::EmptyClass("genuine"));
        }
        if self.count(Label::Impostor) == 0 {
            return Err(Error::EmptyClass("impostor"));
        }
        Ok(())
    }

    /// Distinct enrollment ids in first-appearance order.
    pub fn enroll_ids(&self) -> Vec<&str> {
        distinct(self.pairs.iter().map(|t| t.enroll.as_str()))
    }

    pub fn test_ids(&self) -> Vec<&str> {
        distinct(self.pairs.iter().map(|t| t.test.as_str()))
    }

    pub fn to_text(&self, comments: &[String]) -> String {
        let mut out = io::comment_block(comments);
        for t in &self.pairs {
            out.push_str(&format!("{}\t{}\t{}\n", t.enroll, t.test, t.label));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields[0].is_empty() || fields[1].is_empty() {
                return Err(Error::parse(line_no, "expected `enroll<TAB>test<TAB>label`"));
            }
            let label = fields[2]
                .parse()
                .map_err(|e: String| Error::parse(line_no, e))?;
            pairs.push(Trial {
                enroll: fields[0].to_string(),
                test: fields[1].to_string(),
                label,
            });
        }
        Self::from_pairs(pairs)
    }
}

fn distinct<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    ids.filter(|id| seen.insert(*id)).collect()
}

pub fn load_trials(path: impl AsRef<Path>) -> Result<TrialSet> {
    TrialSet::parse(&io::read_to_string(path.as_ref())?)
}

pub fn save_trials(trials: &TrialSet, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
    io::write_atomic(path.as_ref(), &trials.to_text(comments))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpostorPolicy {
    Exhaustive,
    /// `count` impostor pairs drawn uniformly without replacement; all of
    /// them when fewer exist.
    Sampled { count: usize, seed: u64 },
}

/// Pairs every enrollment id with every test id.
///
/// Same-speaker pairs are genuine and always kept; impostor pairs follow
/// `policy`. Ids are canonicalized to set order first, so the output does not
/// depend on the order of `enroll_ids` / `test_ids`.
pub fn generate_trials(
    set: &VectorSet,
    enroll_ids: &[&str],
    test_ids: &[&str],
    policy: ImpostorPolicy,
) -> Result<TrialSet> {
    let enroll = canonical_positions(set, enroll_ids)?;
    let test = canonical_positions(set, test_ids)?;
    if let Some(&shared) = enroll.iter().find(|p| test.binary_search(p).is_ok()) {
        return Err(Error::Config(format!(
            "utterance `{}` is in both enroll and test lists",
            set.vectors()[shared].utterance_id
        )));
    }

    let vectors = set.vectors();
    let mut all = Vec::with_capacity(enroll.len() * test.len());
    for &e in &enroll {
        for &t in &test {
            let label = if vectors[e].speaker_id == vectors[t].speaker_id {
                Label::Genuine
            } else {
                Label::Impostor
            };
            all.push((e, t, label));
        }
    }

    let impostor_positions: Vec<usize> = all
        .iter()
        .enumerate()
        .filter(|(_, p)| p.2 == Label::Impostor)
        .map(|(i, _)| i)
        .collect();
    if impostor_positions.len() == all.len() {
        return Err(Error::EmptyClass("genuine"));
    }
    if impostor_positions.is_empty() {
        return Err(Error::EmptyClass("impostor"));
    }

    let keep_impostor: HashSet<usize> = match policy {
        ImpostorPolicy::Exhaustive => impostor_positions.iter().copied().collect(),
        ImpostorPolicy::Sampled { count, seed } => {
            if count == 0 {
                return Err(Error::EmptyClass("impostor"));
            }
            let amount = count.min(impostor_positions.len());
            let mut rng = seed::rng_from_seed(seed);
            index::sample(&mut rng, impostor_positions.len(), amount)
                .into_iter()
                .map(|i| impostor_positions[i])
                .collect()
        }
    };

    let pairs = all
        .into_iter()
        .enumerate()
        .filter(|(i, p)| p.2 == Label::Genuine || keep_impostor.contains(i))
        .map(|(_, (e, t, label))| Trial {
            enroll: vectors[e].utterance_id.clone(),
            test: vectors[t].utterance_id.clone(),
            label,
        })
        .collect();
    TrialSet::from_pairs(pairs)
}

fn canonical_positions(set: &VectorSet, ids: &[&str]) -> Result<Vec<usize>> {
    let mut positions = ids
        .iter()
        .map(|id| {
            set.index_of(id)
                .ok_or_else(|| Error::UnknownId((*id).to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    positions.sort_unstable();
    positions.dedup();
    Ok(positions)
}

/// Splits a set into enrollment and test ids: the first `per_speaker`
/// utterances of each speaker (set order) enroll, the rest test.
pub fn split_enroll_test(set: &VectorSet, per_speaker: usize) -> (Vec<&str>, Vec<&str>) {
    let mut seen: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    let mut enroll = Vec::new();
    let mut test = Vec::new();
    for v in set {
        let c = seen.entry(v.speaker_id.as_str()).or_insert(0);
        if *c < per_speaker {
            enroll.push(v.utterance_id.as_str());
        } else {
            test.push(v.utterance_id.as_str());
        }
        *c += 1;
    }
    (enroll, test)
}
