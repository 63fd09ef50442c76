//! Fusion of dimension scores into a single quality score: per-dimension
//! z-scores projected onto the first principal component.

use serde::{Deserialize, Serialize};

use crate::dimensions::{score_all_or_sentinel, DimensionInputs, QualityVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::windowing::DataWindow;

/// Relative eigengap below which the leading eigenvector is flagged.
pub const DEGENERACY_GAP: f64 = 1e-6;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Column means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Standardizer<T: Scalar> {
    pub means: Vec<T>,
    pub stds: Vec<T>,
}

fn check_matrix<T: Scalar>(rows: &[Vec<T>], what: &str) -> Result<usize> {
    if rows.len() < 2 {
        return Err(Error::Fit(format!("{what} needs at least 2 rows, got {}", rows.len())));
    }
    let width = rows[0].len();
    if width == 0 || rows.iter().any(|r| r.len() != width) {
        return Err(Error::Fit(format!("{what}: ragged or empty rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Fit(format!("{what}: non-finite entry")));
    }
    Ok(width)
}

fn column_means<T: Scalar>(rows: &[Vec<T>], width: usize) -> Vec<T> {
    let n = T::from_count(rows.len());
    (0..width)
        .map(|j| rows.iter().fold(T::zero(), |acc, r| acc + r[j]) / n)
        .collect()
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(rows: &[Vec<T>]) -> Result<Self> {
        let width = check_matrix(rows, "standardizer")?;
        let n = T::from_count(rows.len());
        let means = column_means(rows, width);
        let stds = (0..width)
            .map(|j| {
                let ss = rows.iter().fold(T::zero(), |acc, r| {
                    let d = r[j] - means[j];
                    acc + d * d
                });
                (ss / n).sqrt()
            })
            .collect();
        Ok(Self { means, stds })
    }

    /// z-scores; a zero-variance column maps to 0.
    pub fn transform(&self, v: &[T]) -> Vec<T> {
        v.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&x, (&m, &s))| if s > T::zero() { (x - m) / s } else { T::zero() })
            .collect()
    }

    pub fn zero_variance(&self) -> Vec<bool> {
        self.stds.iter().map(|s| *s == T::zero()).collect()
    }
}

pub fn fit_standardizer<T: Scalar>(rows: &[Vec<T>]) -> Result<Standardizer<T>> {
    Standardizer::fit(rows)
}

pub fn standardize<T: Scalar>(v: &QualityVector<T>, s: &Standardizer<T>) -> Vec<T> {
    s.transform(&v.to_array())
}

/// How the eigenvector sign is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignConvention {
    /// Component forced to be `<= 0`.
    pub nonpositive_on: usize,
    /// Higher-is-better flags; used when the anchored component is zero.
    pub orientation: Vec<bool>,
}

impl SignConvention {
    /// Skewness loading non-positive, so a higher score reads as better quality.
    pub fn quality() -> Self {
        Self {
            nonpositive_on: crate::dimensions::Dimension::Skewness.index(),
            orientation: QualityVector::<f64>::ORIENTATION.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PcaModel<T: Scalar> {
    /// Unit-norm first principal axis.
    pub loadings: Vec<T>,
    pub explained_variance_ratio: T,
    /// All covariance eigenvalues, descending.
    pub eigenvalues: Vec<T>,
    /// Leading eigenvalue is (near) tied, so the axis is not unique.
    pub degenerate: bool,
    pub sign: SignConvention,
}

impl<T: Scalar> PcaModel<T> {
    pub fn fit(rows: &[Vec<T>], sign: SignConvention) -> Result<Self> {
        let width = check_matrix(rows, "pca")?;
        if sign.nonpositive_on >= width || sign.orientation.len() != width {
            return Err(Error::Fit("sign convention does not match matrix width".into()));
        }
        let cov = covariance(rows, width);
        let (values, vectors) = symmetric_eigen(&cov)?;

        let mut order: Vec<usize> = (0..width).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
        let eigenvalues: Vec<T> = order.iter().map(|&k| values[k].max(T::zero())).collect();
        let top = order[0];
        let mut loadings: Vec<T> = (0..width).map(|i| vectors[i][top]).collect();
        let norm = loadings.iter().fold(T::zero(), |a, x| a + *x * *x).sqrt();
        loadings.iter_mut().for_each(|x| *x = *x / norm);
        apply_sign(&mut loadings, &sign);

        let total: T = eigenvalues.iter().copied().sum();
        let lead = eigenvalues[0];
        let second = eigenvalues.get(1).copied().unwrap_or(T::zero());
        let degenerate = !(lead > T::zero()) || (lead - second) / lead < T::lit(DEGENERACY_GAP);
        let explained_variance_ratio = if total > T::zero() {
            (lead / total).min(T::one())
        } else {
            T::zero()
        };
        Ok(Self {
            loadings,
            explained_variance_ratio,
            eigenvalues,
            degenerate,
            sign,
        })
    }

    pub fn project(&self, z: &[T]) -> T {
        self.loadings.iter().zip(z).fold(T::zero(), |acc, (l, x)| acc + *l * *x)
    }
}

fn apply_sign<T: Scalar>(loadings: &mut [T], sign: &SignConvention) {
    let tiny = T::lit(1e-12);
    let anchor = loadings[sign.nonpositive_on];
    let flip = if anchor.abs() > tiny {
        anchor > T::zero()
    } else {
        let oriented = loadings
            .iter()
            .zip(&sign.orientation)
            .fold(T::zero(), |acc, (l, up)| if *up { acc + *l } else { acc - *l });
        if oriented.abs() > tiny {
            oriented < T::zero()
        } else {
            loadings
                .iter()
                .find(|l| l.abs() > tiny)
                .is_some_and(|l| *l < T::zero())
        }
    };
    if flip {
        loadings.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn fit_pca<T: Scalar>(rows: &[Vec<T>]) -> Result<PcaModel<T>> {
    PcaModel::fit(rows, SignConvention::quality())
}

pub fn project_score<T: Scalar>(z: &[T], pca: &PcaModel<T>) -> T {
    pca.project(z)
}

/// Population covariance.
fn covariance<T: Scalar>(rows: &[Vec<T>], width: usize) -> Vec<Vec<T>> {
    let n = T::from_count(rows.len());
    let means = column_means(rows, width);
    let mut cov = vec![vec![T::zero(); width]; width];
    for r in rows {
        for i in 0..width {
            let di = r[i] - means[i];
            for j in i..width {
                cov[i][j] = cov[i][j] + di * (r[j] - means[j]);
            }
        }
    }
    for i in 0..width {
        for j in i..width {
            cov[i][j] = cov[i][j] / n;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Returns eigenvalues and a matrix whose columns are the eigenvectors.
pub fn symmetric_eigen<T: Scalar>(a: &[Vec<T>]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let n = a.len();
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let frob = m.iter().flatten().fold(T::zero(), |acc, x| acc + *x * *x).sqrt();
    if frob == T::zero() {
        return Ok((vec![T::zero(); n], v));
    }
    let tol = T::epsilon() * frob;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .fold(T::zero(), |acc, (i, j)| acc + m[i][j] * m[i][j])
            .sqrt();
        if off <= tol {
            return Ok(((0..n).map(|i| m[i][i]).collect(), v));
        }
        for p in 0..n {
            for q in p + 1..n {
                // Entries below rounding level are set to zero, not rotated.
                if m[p][q].abs() <= T::epsilon() * frob / T::from_count(n * n) {
                    m[p][q] = T::zero();
                    m[q][p] = T::zero();
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (T::lit(2.0) * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta.is_infinite() { T::zero() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
                // The rotation annihilates this pair; drop the rounding residue.
                m[p][q] = T::zero();
                m[q][p] = T::zero();
            }
        }
    }
    Err(Error::Fit(format!(
        "eigen-solver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
    )))
}

/// Non-model artifacts needed for standard scoring.
#[derive(Debug, Clone, Copy)]
pub struct StandardScorer<'a, T: Scalar> {
    pub dimensions: DimensionInputs<'a, T>,
    pub standardizer: &'a Standardizer<T>,
    pub pca: &'a PcaModel<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StandardScore<T: Scalar> {
    pub quality: QualityVector<T>,
    pub unified: T,
}

/// Dimensions, then z-scores, then projection on the first principal axis.
pub fn score_window_standard<T: Scalar>(window: &DataWindow<T>, scorer: &StandardScorer<'_, T>) -> Result<StandardScore<T>> {
    let quality = score_all_or_sentinel(window, &scorer.dimensions)?;
    Ok(StandardScore {
        quality,
        unified: unify(&quality, scorer.standardizer, scorer.pca),
    })
}

pub fn unify<T: Scalar>(quality: &QualityVector<T>, standardizer: &Standardizer<T>, pca: &PcaModel<T>) -> T {
    pca.project(&standardize(quality, standardizer))
}

/// Fits standardizer and PCA on a quality matrix and returns both with the
/// unified score of every row.
pub fn fit_aggregation<T: Scalar>(qualities: &[QualityVector<T>]) -> Result<(Standardizer<T>, PcaModel<T>, Vec<T>)> {
    let rows: Vec<Vec<T>> = qualities.iter().map(|q| q.to_array().to_vec()).collect();
    let standardizer = Standardizer::fit(&rows)?;
    let z: Vec<Vec<T>> = rows.iter().map(|r| standardizer.transform(r)).collect();
    let pca = fit_pca(&z)?;
    let scores = z.iter().map(|r| pca.project(r)).collect();
    Ok((standardizer, pca, scores))
}
