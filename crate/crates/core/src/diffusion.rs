//! Feature-space diffusion: initial feature distances, the density-normalized
//! Gaussian kernel, the column-stochastic operator `P`, and its dyadic
//! fractional powers.
//!
//! `P = Q̂ D̂⁻¹` is not symmetric, but it is similar to the symmetric matrix
//! `S = D̂^{-1/2} Q̂ D̂^{-1/2}`. All powers are taken through the eigenpairs
//! of `S`:
//!
//! ```text
//! P^t = D̂^{1/2} V Λ^t Vᵀ D̂^{-1/2}
//! ```

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{format_f64, DataMatrix};
use crate::error::{Error, Result};

/// Eigenvalues are clamped into `[EIGENVALUE_FLOOR, 1]`.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Negative mass removed from a density column above which a warning is kept.
pub const CLAMP_WARNING_MASS: f64 = 1e-6;

pub const DEFAULT_EPSILON_FACTOR: f64 = 2.0;

/// Symmetric, zero-diagonal, nonnegative `m × m` distances between features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDistanceMatrix(DMatrix<f64>);

impl FeatureDistanceMatrix {
    pub fn new(d: DMatrix<f64>) -> Result<Self> {
        let m = d.nrows();
        if d.ncols() != m {
            return Err(Error::Dimension(format!("distance matrix is {}x{}", m, d.ncols())));
        }
        for i in 0..m {
            if d[(i, i)] != 0.0 {
                return Err(Error::Domain(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = d[(i, j)];
                if !(v.is_finite() && v >= 0.0) || v != d[(j, i)] {
                    return Err(Error::Domain(format!(
                        "entry ({i},{j}) is not a symmetric nonnegative distance"
                    )));
                }
            }
        }
        Ok(Self(d))
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Median of the strictly-upper-triangle entries.
    pub fn off_diagonal_median(&self) -> f64 {
        let m = self.len();
        let mut vals = Vec::with_capacity(m * (m - 1) / 2);
        for j in 1..m {
            for i in 0..j {
                vals.push(self.0[(i, j)]);
            }
        }
        median(&mut vals)
    }
}

fn median(vals: &mut [f64]) -> f64 {
    if vals.is_empty() {
        return 0.0;
    }
    vals.sort_by(f64::total_cmp);
    let mid = vals.len() / 2;
    if vals.len() % 2 == 1 {
        vals[mid]
    } else {
        0.5 * (vals[mid - 1] + vals[mid])
    }
}

/// Squared column norms; taking one square root of their product keeps
/// identical columns at distance exactly 0.
fn column_sq_norms(x: &DataMatrix) -> Result<Vec<f64>> {
    x.values()
        .column_iter()
        .enumerate()
        .map(|(j, c)| {
            let n = c.norm_squared();
            if n > 0.0 {
                Ok(n)
            } else {
                Err(Error::Domain(format!("feature {:?} has a zero column", x.col_ids()[j])))
            }
        })
        .collect()
}

fn cosine(x: &DataMatrix, norms: &[f64], a: usize, b: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let v = x.values();
    let dot = v.column(a).dot(&v.column(b));
    (1.0 - dot / (norms[a] * norms[b]).sqrt()).max(0.0)
}

/// `d(j, j') = 1 − cos(X[:, j], X[:, j'])`, clamped at 0 against rounding.
pub fn cosine_distance_matrix(x: &DataMatrix) -> Result<FeatureDistanceMatrix> {
    let norms = column_sq_norms(x)?;
    let m = x.ncols();
    let mut d = DMatrix::zeros(m, m);
    for j in 1..m {
        for i in 0..j {
            let v = cosine(x, &norms, i, j);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(FeatureDistanceMatrix(d))
}

/// Spectral factorization of a column-stochastic diffusion operator.
///
/// `eigvecs` has one column per retained eigenpair; it is square for the
/// dense construction and `m × m'` for the landmark one.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    d_hat: DVector<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
    epsilon: f64,
}

impl DiffusionOperator {
    pub fn num_features(&self) -> usize {
        self.d_hat.len()
    }

    pub fn d_hat(&self) -> &DVector<f64> {
        &self.d_hat
    }

    /// Clamped eigenvalues, descending.
    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `P^t` from the spectral formula, with no entrywise clamping.
    pub fn power(&self, t: f64) -> DMatrix<f64> {
        let sqrt_d = self.d_hat.map(f64::sqrt);
        let mut left = self.eigvecs.clone();
        for (c, mut col) in left.column_iter_mut().enumerate() {
            col *= self.eigvals[c].powf(t);
        }
        for (r, mut row) in left.row_iter_mut().enumerate() {
            row *= sqrt_d[r];
        }
        let mut right = self.eigvecs.transpose();
        for (c, mut col) in right.column_iter_mut().enumerate() {
            col /= sqrt_d[c];
        }
        left * right
    }

    /// The operator itself, `P = P^1`.
    pub fn operator(&self) -> DMatrix<f64> {
        self.power(1.0)
    }

    /// Debug dump: one row per eigenpair (`index,eigval,v_1..v_m`) followed by a `d_hat` row.
    pub fn write_spectrum<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "index,eigval")?;
        for j in 0..self.num_features() {
            write!(out, ",v{}", j + 1)?;
        }
        writeln!(out)?;
        for (c, col) in self.eigvecs.column_iter().enumerate() {
            write!(out, "{c},{}", format_f64(self.eigvals[c]))?;
            for v in col.iter() {
                write!(out, ",{}", format_f64(*v))?;
            }
            writeln!(out)?;
        }
        write!(out, "d_hat,")?;
        for v in self.d_hat.iter() {
            write!(out, ",{}", format_f64(*v))?;
        }
        writeln!(out)
    }
}

fn symmetric_eigen(s: DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::try_new(s, f64::EPSILON, 1_000_000)
        .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))?;
    Ok(sort_descending(eig.eigenvalues, eig.eigenvectors))
}

fn sort_descending(vals: DVector<f64>, vecs: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let sorted_vals = DVector::from_iterator(vals.len(), order.iter().map(|&i| vals[i]));
    let sorted_vecs = DMatrix::from_columns(&order.iter().map(|&i| vecs.column(i)).collect::<Vec<_>>());
    (sorted_vals, sorted_vecs)
}

fn clamp_eigvals(vals: DVector<f64>) -> DVector<f64> {
    vals.map(|v| v.clamp(EIGENVALUE_FLOOR, 1.0))
}

fn check_epsilon(median: f64, epsilon_factor: f64) -> Result<f64> {
    if !(epsilon_factor > 0.0 && epsilon_factor.is_finite()) {
        return Err(Error::Parameter(format!(
            "epsilon factor must be positive, got {epsilon_factor}"
        )));
    }
    let eps = epsilon_factor * median;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Domain(
            "degenerate kernel: median feature distance is zero".into(),
        ));
    }
    Ok(eps)
}

/// Gaussian kernel with bandwidth `ε = factor × median(d)`, density
/// normalization `Q̂ = D⁻¹ Q D⁻¹`, and the symmetric conjugate eigenpairs.
pub fn build_diffusion_operator(d: &FeatureDistanceMatrix, epsilon_factor: f64) -> Result<DiffusionOperator> {
    let m = d.len();
    if m < 2 {
        return Err(Error::Dimension(format!("need at least 2 features, got {m}")));
    }
    let epsilon = check_epsilon(d.off_diagonal_median(), epsilon_factor)?;

    let q = d.matrix().map(|v| (-v * v / epsilon).exp());
    let deg: Vec<f64> = q.row_iter().map(|r| r.sum()).collect();
    let q_hat = DMatrix::from_fn(m, m, |i, j| q[(i, j)] / (deg[i] * deg[j]));
    let d_hat = DVector::from_iterator(m, q_hat.row_iter().map(|r| r.sum()));
    let s = DMatrix::from_fn(m, m, |i, j| {
        let a = q_hat[(i, j)] / (d_hat[i] * d_hat[j]).sqrt();
        let b = q_hat[(j, i)] / (d_hat[i] * d_hat[j]).sqrt();
        0.5 * (a + b)
    });
    let (vals, vecs) = symmetric_eigen(s)?;
    Ok(DiffusionOperator {
        d_hat,
        eigvals: clamp_eigvals(vals),
        eigvecs: vecs,
        epsilon,
    })
}

/// Negative mass removed from one density column.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampWarning {
    pub scale: usize,
    pub feature: usize,
    pub clamped_mass: f64,
}

/// Densities `φ_j^k = P^{2^{-k}} e_j` for `k = 0..=max_scale`, one matrix per
/// scale with feature `j` in column `j`.
#[derive(Debug, Clone)]
pub struct MultiScaleDensities {
    densities: Vec<DMatrix<f64>>,
    warnings: Vec<ClampWarning>,
}

impl MultiScaleDensities {
    /// Wraps precomputed densities, checking nonnegativity and unit column mass.
    pub fn from_matrices(densities: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = densities.first() else {
            return Err(Error::Parameter("no scales".into()));
        };
        let m = first.nrows();
        for (k, p) in densities.iter().enumerate() {
            if p.shape() != (m, m) {
                return Err(Error::Dimension(format!("scale {k} has shape {:?}", p.shape())));
            }
            for (j, col) in p.column_iter().enumerate() {
                if col.iter().any(|v| v.is_nan() || *v < 0.0) || (col.sum() - 1.0).abs() > 1e-8 {
                    return Err(Error::Domain(format!("scale {k}, feature {j} is not a density")));
                }
            }
        }
        Ok(Self {
            densities,
            warnings: Vec::new(),
        })
    }

    pub fn max_scale(&self) -> usize {
        self.densities.len() - 1
    }

    pub fn num_features(&self) -> usize {
        self.densities[0].nrows()
    }

    pub fn scale(&self, k: usize) -> &DMatrix<f64> {
        &self.densities[k]
    }

    pub fn scales(&self) -> &[DMatrix<f64>] {
        &self.densities
    }

    /// Columns that lost more than [`CLAMP_WARNING_MASS`] to clamping.
    pub fn warnings(&self) -> &[ClampWarning] {
        &self.warnings
    }
}

/// Dyadic-time densities with negative entries clamped to zero and columns
/// renormalized.
pub fn multiscale_densities(op: &DiffusionOperator, max_scale: usize) -> MultiScaleDensities {
    let mut densities = Vec::with_capacity(max_scale + 1);
    let mut warnings = Vec::new();
    for k in 0..=max_scale {
        let t = (-(k as f64)).exp2();
        let mut p = op.power(t);
        for (j, mut col) in p.column_iter_mut().enumerate() {
            let mut lost = 0.0;
            for v in col.iter_mut() {
                if *v < 0.0 {
                    lost -= *v;
                    *v = 0.0;
                }
            }
            if lost > CLAMP_WARNING_MASS {
                warnings.push(ClampWarning {
                    scale: k,
                    feature: j,
                    clamped_mass: lost,
                });
            }
            let total = col.sum();
            col /= total;
        }
        densities.push(p);
    }
    MultiScaleDensities { densities, warnings }
}

/// Landmark-accelerated operator: the kernel is evaluated only between all
/// features and `round(m^tau)` random landmark features, and the spectrum of
/// `D̃^{-1/2} K Kᵀ D̃^{-1/2}` is read off the SVD of `D̃^{-1/2} K`.
///
/// Landmark indices are drawn without replacement from a ChaCha8 stream
/// seeded by `seed`.
pub fn landmark_diffusion(x: &DataMatrix, tau: f64, epsilon_factor: f64, seed: u64) -> Result<DiffusionOperator> {
    let m = x.ncols();
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Parameter(format!(
            "landmark exponent must be in (0, 1], got {tau}"
        )));
    }
    let count = (m as f64).powf(tau).round() as usize;
    if count < 2 {
        return Err(Error::Parameter(format!(
            "round({m}^{tau}) = {count} landmarks; need at least 2"
        )));
    }
    let landmarks = select_landmarks(m, count, seed);
    let norms = column_sq_norms(x)?;

    let dist = DMatrix::from_fn(m, count, |j, l| cosine(x, &norms, j, landmarks[l]));
    let mut off: Vec<f64> = (0..m)
        .flat_map(|j| (0..count).map(move |l| (j, l)))
        .filter(|&(j, l)| j != landmarks[l])
        .map(|(j, l)| dist[(j, l)])
        .collect();
    let epsilon = check_epsilon(median(&mut off), epsilon_factor)?;

    let k = dist.map(|v| (-v * v / epsilon).exp());
    let d_tilde = &k * (k.transpose() * DVector::from_element(m, 1.0));
    let mut scaled = k.clone();
    for (r, mut row) in scaled.row_iter_mut().enumerate() {
        row /= d_tilde[r].sqrt();
    }
    let svd = scaled.svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("landmark SVD produced no left singular vectors".into()))?;
    let (vals, vecs) = sort_descending(svd.singular_values.map(|s| s * s), u);
    Ok(DiffusionOperator {
        d_hat: d_tilde,
        eigvals: clamp_eigvals(vals),
        eigvecs: vecs,
        epsilon,
    })
}

/// Sorted, duplicate-free landmark indices.
pub fn select_landmarks(m: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, m, count.min(m)).into_vec();
    idx.sort_unstable();
    idx
}
