//! Two-dimensional linear projection of pooled vector sets for plotting.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io;
use crate::stats::sorted_eigen;
use crate::store::VectorSet;

/// Eigenvalues below `RANK_TOL * largest` count as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoint {
    pub utterance_id: String,
    pub domain: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub points: Vec<ProjectedPoint>,
    pub mean: DVector<f64>,
    /// `d x 2` principal axes; the largest-magnitude loading of each is positive.
    pub axes: DMatrix<f64>,
    /// Covariance eigenvalues (denominator `n - 1`), descending.
    pub eigenvalues: DVector<f64>,
}

/// Projects the pooled, mean-centred vectors onto their top two principal axes.
pub fn project_2d(sets: &[&VectorSet]) -> Result<Projection> {
    let d = sets.first().map(|s| s.dimension()).unwrap_or(0);
    for s in sets {
        if s.dimension() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: s.dimension(),
            });
        }
    }
    let rows: Vec<_> = sets.iter().flat_map(|s| s.iter()).collect();
    let n = rows.len();
    if n < 3 {
        return Err(Error::TooFewVectors {
            required: 3,
            actual: n,
        });
    }

    let data = DMatrix::from_fn(n, d, |i, j| rows[i].values()[j]);
    let mean = DVector::from_fn(d, |j, _| data.column(j).sum() / n as f64);
    let centred = DMatrix::from_fn(n, d, |i, j| data[(i, j)] - mean[j]);
    let cov = crate::stats::symmetrize(&(centred.transpose() * &centred / (n - 1) as f64));

    let (eigenvalues, vectors) = sorted_eigen(&cov)?;
    let top = eigenvalues[0];
    let rank = if top <= 0.0 {
        0
    } else {
        eigenvalues.iter().filter(|&&l| l > RANK_TOL * top).count()
    };
    if rank < 2 {
        return Err(Error::Degenerate(rank));
    }

    let mut axes = vectors.columns(0, 2).into_owned();
    for mut col in axes.column_iter_mut() {
        let lead = col.iter().copied().fold(0.0f64, |best, x| {
            if x.abs() > best.abs() {
                x
            } else {
                best
            }
        });
        if lead < 0.0 {
            col.neg_mut();
        }
    }

    let coords = &centred * &axes;
    let points = rows
        .iter()
        .enumerate()
        .map(|(i, v)| ProjectedPoint {
            utterance_id: v.utterance_id.clone(),
            domain: v.domain.clone(),
            x: coords[(i, 0)],
            y: coords[(i, 1)],
        })
        .collect();
    Ok(Projection {
        points,
        mean,
        axes,
        eigenvalues,
    })
}

impl Projection {
    /// `utterance_id<TAB>domain<TAB>x<TAB>y` lines.
    pub fn to_tsv(&self, comments: &[String]) -> String {
        let mut out = io::comment_block(comments);
        for p in &self.points {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                p.utterance_id,
                p.domain,
                io::fmt_f64(p.x),
                io::fmt_f64(p.y)
            ));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        io::write_atomic(path.as_ref(), &self.to_tsv(comments))
    }
}
