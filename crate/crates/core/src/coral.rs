//! Correlation alignment between a source and a target embedding domain.
//!
//! Both samples are z-normalized with their own statistics. With `C_S` and
//! `C_T` the (regularized) covariances of the normalized samples, the transfer
//! matrix minimizing `||A^T C_S A - C_T||_F^2` is
//!
//! ```text
//! A* = C_S^(-1/2) C_T^(1/2)
//! ```
//!
//! which whitens the source covariance and recolors it with the target's.
//! A row vector `z` in source-normalized space maps to `z A*`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::io;
use crate::seed;
use crate::stats::{self, DomainStats, Exponent, DEFAULT_EIGEN_FLOOR};
use crate::store::{SpeakerVector, VectorSet};

/// Regularization added to both covariances unless overridden.
pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DenormMode {
    /// Leave the output in the target's normalized space.
    None,
    /// Map the output back to the target's scale and location.
    #[default]
    Target,
}

impl fmt::Display for DenormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenormMode::None => "none",
            DenormMode::Target => "target",
        })
    }
}

impl FromStr for DenormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DenormMode::None),
            "target" => Ok(DenormMode::Target),
            other => Err(Error::Config(format!(
                "denorm mode must be `none` or `target`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoralTransform {
    pub matrix: DMatrix<f64>,
    pub source_stats: DomainStats,
    pub target_stats: DomainStats,
    pub lambda: f64,
    pub target_domain: String,
    /// Seed that drew the fit samples, when they were sampled.
    pub seed: Option<u64>,
}

impl CoralTransform {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn fit_sample_count(&self) -> (usize, usize) {
        (
            self.source_stats.sample_count,
            self.target_stats.sample_count,
        )
    }

    /// Transformed values of `v`; may be the zero vector.
    pub fn apply_values(&self, v: &[f64], mode: DenormMode) -> Result<DVector<f64>> {
        let z = stats::znorm(v, &self.source_stats)?;
        let u = self.matrix.tr_mul(&z);
        match mode {
            DenormMode::None => Ok(u),
            DenormMode::Target => stats::denorm(u.as_slice(), &self.target_stats),
        }
    }
}

/// `C_S^(-1/2) C_T^(1/2)`, the minimizer of `||A^T C_S A - C_T||_F`.
pub fn transfer_matrix(c_source: &DMatrix<f64>, c_target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c_source.shape() != c_target.shape() {
        return Err(Error::DimensionMismatch {
            expected: c_source.nrows(),
            actual: c_target.nrows(),
        });
    }
    let whiten = stats::sym_power(c_source, Exponent::NegHalf, DEFAULT_EIGEN_FLOOR)?;
    let recolor = stats::sym_power(c_target, Exponent::Half, DEFAULT_EIGEN_FLOOR)?;
    let matrix = whiten * recolor;
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("transfer matrix has non-finite entries".into()));
    }
    Ok(matrix)
}

/// Fits the closed-form transfer matrix between two samples.
pub fn coral_fit(source: &VectorSet, target: &VectorSet, lambda: f64) -> Result<CoralTransform> {
    if source.dimension() != target.dimension() {
        return Err(Error::DimensionMismatch {
            expected: source.dimension(),
            actual: target.dimension(),
        });
    }
    let source_stats = stats::fit_stats(source, lambda)?;
    let target_stats = stats::fit_stats(target, lambda)?;
    let matrix = transfer_matrix(&source_stats.covariance, &target_stats.covariance)?;
    Ok(CoralTransform {
        matrix,
        source_stats,
        target_stats,
        lambda,
        target_domain: target.domain_label(),
        seed: None,
    })
}

/// Draws `n` members of `set` uniformly without replacement, kept in set order.
pub fn draw_fit_sample(set: &VectorSet, n: usize, seed: u64) -> Result<VectorSet> {
    if n > set.len() {
        return Err(Error::TooFewVectors {
            required: n,
            actual: set.len(),
        });
    }
    let mut rng = seed::rng_from_seed(seed);
    let mut picked = index::sample(&mut rng, set.len(), n).into_vec();
    picked.sort_unstable();
    set.subset(&picked)
}

/// Fits on `n` vectors drawn from each domain. Source and target draws use
/// seeds derived from `seed` with salts `"source"` and `"target"`.
pub fn coral_fit_sampled(
    source: &VectorSet,
    target: &VectorSet,
    n: usize,
    lambda: f64,
    seed: u64,
) -> Result<CoralTransform> {
    let s = draw_fit_sample(source, n, seed::derive_seed_str(seed, "source"))?;
    let t = draw_fit_sample(target, n, seed::derive_seed_str(seed, "target"))?;
    let mut transform = coral_fit(&s, &t, lambda)?;
    transform.target_domain = target.domain_label();
    transform.seed = Some(seed);
    Ok(transform)
}

/// Maps `v` through the transform; identity fields are kept and the domain
/// becomes the transform's target label.
pub fn coral_apply(t: &CoralTransform, v: &SpeakerVector, mode: DenormMode) -> Result<SpeakerVector> {
    let u = t.apply_values(v.values(), mode)?;
    SpeakerVector::new(
        v.utterance_id.clone(),
        v.speaker_id.clone(),
        t.target_domain.clone(),
        u.as_slice().to_vec(),
    )
}

pub fn coral_apply_set(t: &CoralTransform, set: &VectorSet, mode: DenormMode) -> Result<VectorSet> {
    if set.dimension() != t.dimension() {
        return Err(Error::DimensionMismatch {
            expected: t.dimension(),
            actual: set.dimension(),
        });
    }
    let out = set
        .iter()
        .map(|v| coral_apply(t, v, mode))
        .collect::<Result<Vec<_>>>()?;
    VectorSet::from_vectors(set.dimension(), out)
}

/// `||A^T C_S A - C_T||_F`.
pub fn coral_objective(a: &DMatrix<f64>, c_source: &DMatrix<f64>, c_target: &DMatrix<f64>) -> f64 {
    (a.transpose() * c_source * a - c_target).norm()
}

// Text form:
//   dim=<d> lambda=<l> n_source=<n> n_target=<n>
//   target_domain<TAB><label>
//   seed<TAB><u64>            (optional)
//   source_mean / source_std / target_mean / target_std<TAB>v1,...,vd
//   source_cov, target_cov, matrix: d rows each, `<name><TAB>row`
impl CoralTransform {
    pub fn to_text(&self, comments: &[String]) -> String {
        let d = self.dimension();
        let (ns, nt) = self.fit_sample_count();
        let mut out = format!(
            "dim={d} lambda={} n_source={ns} n_target={nt}\n",
            io::fmt_f64(self.lambda)
        );
        out.push_str(&io::comment_block(comments));
        out.push_str(&format!("target_domain\t{}\n", self.target_domain));
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed\t{seed}\n"));
        }
        let vec_row = |name: &str, v: &DVector<f64>| format!("{name}\t{}\n", io::join_f64(v.iter()));
        out.push_str(&vec_row("source_mean", &self.source_stats.mean));
        out.push_str(&vec_row("source_std", &self.source_stats.std));
        out.push_str(&vec_row("target_mean", &self.target_stats.mean));
        out.push_str(&vec_row("target_std", &self.target_stats.std));
        for (name, m) in [
            ("source_cov", &self.source_stats.covariance),
            ("target_cov", &self.target_stats.covariance),
            ("matrix", &self.matrix),
        ] {
            for row in m.row_iter() {
                out.push_str(&format!("{name}\t{}\n", io::join_f64(row.iter())));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));

        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "empty transform file"))?;
        let mut d = None;
        let mut lambda = None;
        let mut ns = None;
        let mut nt = None;
        for tok in header.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::parse(hline, format!("bad header token `{tok}`")))?;
            let bad = || Error::parse(hline, format!("bad value in `{tok}`"));
            match k {
                "dim" => d = Some(v.parse::<usize>().map_err(|_| bad())?),
                "lambda" => lambda = Some(v.parse::<f64>().map_err(|_| bad())?),
                "n_source" => ns = Some(v.parse::<usize>().map_err(|_| bad())?),
                "n_target" => nt = Some(v.parse::<usize>().map_err(|_| bad())?),
                _ => return Err(Error::parse(hline, format!("unknown header key `{k}`"))),
            }
        }
        let missing = |k: &str| Error::parse(hline, format!("header lacks `{k}`"));
        let d = d.filter(|&d| d > 0).ok_or_else(|| missing("dim"))?;
        let lambda = lambda.ok_or_else(|| missing("lambda"))?;
        let ns = ns.ok_or_else(|| missing("n_source"))?;
        let nt = nt.ok_or_else(|| missing("n_target"))?;

        let mut target_domain = None;
        let mut seed = None;
        let mut vectors: [Option<DVector<f64>>; 4] = Default::default();
        let mut rows: [Vec<Vec<f64>>; 3] = Default::default();
        for (no, line) in lines {
            let (name, rest) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(no, "expected `<name><TAB><values>`"))?;
            match name {
                "target_domain" => target_domain = Some(rest.to_string()),
                "seed" => {
                    seed = Some(
                        rest.parse::<u64>()
                            .map_err(|_| Error::parse(no, format!("bad seed `{rest}`")))?,
                    )
                }
                _ => {
                    let values = io::parse_f64_list(rest, no)?;
                    if values.len() != d {
                        return Err(Error::parse(
                            no,
                            format!("expected {d} values, found {}", values.len()),
                        ));
                    }
                    let vslot = ["source_mean", "source_std", "target_mean", "target_std"]
                        .iter()
                        .position(|n| *n == name);
                    let mslot = ["source_cov", "target_cov", "matrix"]
                        .iter()
                        .position(|n| *n == name);
                    if let Some(i) = vslot {
                        if vectors[i].is_some() {
                            return Err(Error::parse(no, format!("repeated `{name}`")));
                        }
                        vectors[i] = Some(DVector::from_vec(values));
                    } else if let Some(i) = mslot {
                        if rows[i].len() == d {
                            return Err(Error::parse(no, format!("too many `{name}` rows")));
                        }
                        rows[i].push(values);
                    } else {
                        return Err(Error::parse(no, format!("unknown row `{name}`")));
                    }
                }
            }
        }

        let [sm, ss, tm, ts] = vectors;
        let need = |v: Option<DVector<f64>>, name: &str| {
            v.ok_or_else(|| Error::parse(0, format!("transform lacks `{name}`")))
        };
        let sm = need(sm, "source_mean")?;
        let ss = need(ss, "source_std")?;
        let tm = need(tm, "target_mean")?;
        let ts = need(ts, "target_std")?;
        let to_mat = |r: &[Vec<f64>], name: &str| -> Result<DMatrix<f64>> {
            if r.len() != d {
                return Err(Error::parse(
                    0,
                    format!("expected {d} `{name}` rows, found {}", r.len()),
                ));
            }
            Ok(DMatrix::from_fn(d, d, |i, j| r[i][j]))
        };
        let [sc, tc, m] = &rows;
        Ok(CoralTransform {
            matrix: to_mat(m, "matrix")?,
            source_stats: DomainStats {
                mean: sm,
                std: ss,
                covariance: to_mat(sc, "source_cov")?,
                sample_count: ns,
            },
            target_stats: DomainStats {
                mean: tm,
                std: ts,
                covariance: to_mat(tc, "target_cov")?,
                sample_count: nt,
            },
            lambda,
            target_domain: target_domain
                .ok_or_else(|| Error::parse(0, "transform lacks `target_domain`"))?,
            seed,
        })
    }
}

pub fn save_transform(t: &CoralTransform, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
    io::write_atomic(path.as_ref(), &t.to_text(comments))
}

pub fn load_transform(path: impl AsRef<Path>) -> Result<CoralTransform> {
    CoralTransform::parse(&io::read_to_string(path.as_ref())?)
}
