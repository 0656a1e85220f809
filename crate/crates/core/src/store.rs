//! Speaker vectors, vector sets and the text dataset format.
//!
//! Dataset files are UTF-8 text. The first non-comment line is `dim=<d>`;
//! every following non-empty line is
//! `utterance_id<TAB>speaker_id<TAB>domain<TAB>v1,v2,...,vd`.
//! Lines starting with `#` are ignored anywhere in the file.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;

/// Default embedding dimension (ECAPA-style speaker encoders).
pub const DEFAULT_DIMENSION: usize = 192;

/// Suffix appended to the utterance id of an anonymized vector.
pub const ANON_SUFFIX: &str = ".anon";

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerVector {
    pub utterance_id: String,
    pub speaker_id: String,
    pub domain: String,
    values: Vec<f64>,
}

impl SpeakerVector {
    pub fn new(
        utterance_id: impl Into<String>,
        speaker_id: impl Into<String>,
        domain: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let v = Self {
            utterance_id: utterance_id.into(),
            speaker_id: speaker_id.into(),
            domain: domain.into(),
            values,
        };
        v.validate()?;
        Ok(v)
    }

    fn validate(&self) -> Result<()> {
        for (name, field) in [
            ("utterance_id", &self.utterance_id),
            ("speaker_id", &self.speaker_id),
            ("domain", &self.domain),
        ] {
            if field.is_empty() {
                return Err(Error::InvalidVector(format!("empty {name}")));
            }
            if field.contains(['\t', '\n', '\r']) {
                return Err(Error::InvalidVector(format!(
                    "{name} `{field}` contains a tab or newline"
                )));
            }
        }
        if self.values.is_empty() {
            return Err(Error::InvalidVector(format!(
                "`{}` has no values",
                self.utterance_id
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidVector(format!(
                "`{}` has a non-finite value",
                self.utterance_id
            )));
        }
        if self.values.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidVector(format!(
                "`{}` is the zero vector",
                self.utterance_id
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    /// Same identity, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.utterance_id.clone(),
            self.speaker_id.clone(),
            self.domain.clone(),
            values,
        )
    }
}

/// Ordered collection of speaker vectors sharing one dimension.
#[derive(Debug, Clone)]
pub struct VectorSet {
    dimension: usize,
    vectors: Vec<SpeakerVector>,
    index: HashMap<String, usize>,
}

impl PartialEq for VectorSet {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension && self.vectors == other.vectors
    }
}

impl VectorSet {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidVector("dimension must be positive".into()));
        }
        Ok(Self {
            dimension,
            vectors: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn from_vectors(dimension: usize, vectors: Vec<SpeakerVector>) -> Result<Self> {
        let mut set = Self::new(dimension)?;
        for v in vectors {
            set.push(v)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, v: SpeakerVector) -> Result<()> {
        if v.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: v.dimension(),
            });
        }
        if self.index.contains_key(&v.utterance_id) {
            return Err(Error::DuplicateId(v.utterance_id));
        }
        self.index.insert(v.utterance_id.clone(), self.vectors.len());
        self.vectors.push(v);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[SpeakerVector] {
        &self.vectors
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SpeakerVector> {
        self.vectors.iter()
    }

    pub fn get(&self, utterance_id: &str) -> Option<&SpeakerVector> {
        self.index_of(utterance_id).map(|i| &self.vectors[i])
    }

    pub fn index_of(&self, utterance_id: &str) -> Option<usize> {
        self.index.get(utterance_id).copied()
    }

    /// Looks up `utterance_id`, falling back to its anonymized form
    /// (`utterance_id` + [`ANON_SUFFIX`]).
    pub fn resolve(&self, utterance_id: &str) -> Option<&SpeakerVector> {
        self.get(utterance_id)
            .or_else(|| self.get(&format!("{utterance_id}{ANON_SUFFIX}")))
    }

    /// Members at the given positions, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let picked = indices
            .iter()
            .map(|&i| self.vectors[i].clone())
            .collect();
        Self::from_vectors(self.dimension, picked)
    }

    /// Members whose utterance ids appear in `ids`, kept in set order.
    pub fn select_ids<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut positions = Vec::new();
        for id in ids {
            let pos = self
                .index_of(id)
                .ok_or_else(|| Error::UnknownId(id.to_string()))?;
            positions.push(pos);
        }
        positions.sort_unstable();
        positions.dedup();
        self.subset(&positions)
    }

    /// Distinct domain labels in first-appearance order.
    pub fn domains(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for v in &self.vectors {
            if !out.contains(&v.domain.as_str()) {
                out.push(&v.domain);
            }
        }
        out
    }

    /// Single label describing the set's domain; mixed sets join labels with `+`.
    pub fn domain_label(&self) -> String {
        let mut labels = self.domains();
        labels.sort_unstable();
        if labels.is_empty() {
            "unknown".to_string()
        } else {
            labels.join("+")
        }
    }

    pub fn to_text(&self, comments: &[String]) -> String {
        let mut out = format!("dim={}\n", self.dimension);
        out.push_str(&io::comment_block(comments));
        for v in &self.vectors {
            out.push_str(&v.utterance_id);
            out.push('\t');
            out.push_str(&v.speaker_id);
            out.push('\t');
            out.push_str(&v.domain);
            out.push('\t');
            out.push_str(&io::join_f64(v.values()));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut set: Option<VectorSet> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some(current) = set.as_mut() else {
                let dim = line
                    .trim()
                    .strip_prefix("dim=")
                    .ok_or_else(|| Error::parse(line_no, "expected header `dim=<d>`"))?;
                let dim: usize = dim
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("invalid dimension `{dim}`")))?;
                set = Some(
                    VectorSet::new(dim).map_err(|e| Error::parse(line_no, e.to_string()))?,
                );
                continue;
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    line_no,
                    format!("expected 4 tab-separated fields, found {}", fields.len()),
                ));
            }
            let values = io::parse_f64_list(fields[3], line_no)?;
            if values.len() != current.dimension {
                return Err(Error::parse(
                    line_no,
                    format!(
                        "expected {} values, found {}",
                        current.dimension,
                        values.len()
                    ),
                ));
            }
            let v = SpeakerVector::new(fields[0], fields[1], fields[2], values)
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
            current
                .push(v)
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
        }
        set.ok_or_else(|| Error::parse(0, "missing header `dim=<d>`"))
    }
}

impl<'a> IntoIterator for &'a VectorSet {
    type Item = &'a SpeakerVector;
    type IntoIter = std::slice::Iter<'a, SpeakerVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.vectors.iter()
    }
}

pub fn load_vector_set(path: impl AsRef<Path>) -> Result<VectorSet> {
    let path = path.as_ref();
    let text = io::read_to_string(path)?;
    VectorSet::parse(&text).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn save_vector_set(set: &VectorSet, path: impl AsRef<Path>) -> Result<()> {
    save_vector_set_with_comments(set, path, &[])
}

/// Writes `set` with `comments` as `#` lines directly after the header.
pub fn save_vector_set_with_comments(
    set: &VectorSet,
    path: impl AsRef<Path>,
    comments: &[String],
) -> Result<()> {
    io::write_atomic(path.as_ref(), &set.to_text(comments))
}
