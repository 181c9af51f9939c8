//! Poincaré half-space points and the multi-scale feature embedding.
//!
//! Feature `j` at scale `k` sits at `z_j^k = [ψ_j^k ; 2^{k/2-2}]`, where `ψ`
//! is the elementwise square root of the diffusion density. All points of a
//! scale share one height, which is what makes the LCA closed forms work.

use nalgebra::DMatrix;

use crate::diffusion::MultiScaleDensities;
use crate::error::{Error, Result};

/// Relative tolerance when deciding whether two heights are "the same".
const HEIGHT_TOL: f64 = 1e-12;

/// A point of the upper half-space; the last coordinate is the height.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpacePoint {
    coords: Vec<f64>,
}

impl HalfSpacePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        match coords.last() {
            Some(&h) if h > 0.0 && h.is_finite() => {}
            Some(&h) => return Err(Error::Domain(format!("half-space height must be positive, got {h}"))),
            None => return Err(Error::Dimension("empty half-space point".into())),
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite half-space coordinate".into()));
        }
        Ok(Self { coords })
    }

    /// `[horizontal ; height]`.
    pub fn from_parts(horizontal: &[f64], height: f64) -> Result<Self> {
        let mut coords = Vec::with_capacity(horizontal.len() + 1);
        coords.extend_from_slice(horizontal);
        coords.push(height);
        Self::new(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn height(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn horizontal(&self) -> &[f64] {
        &self.coords[..self.coords.len() - 1]
    }
}

/// Geodesic distance `2 asinh(‖x − y‖ / (2 sqrt(x_h y_h)))`.
pub fn halfspace_distance(x: &HalfSpacePoint, y: &HalfSpacePoint) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!(
            "points of dimension {} and {}",
            x.dim(),
            y.dim()
        )));
    }
    let sq: f64 = x.coords.iter().zip(&y.coords).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(halfspace_distance_raw(sq.sqrt(), x.height(), y.height()))
}

#[inline]
pub(crate) fn halfspace_distance_raw(euclid: f64, hx: f64, hy: f64) -> f64 {
    2.0 * (euclid / (2.0 * (hx * hy).sqrt())).asinh()
}

/// Height `2^{k/2 - 2}` of the scale-`k` sheet.
pub fn scale_height(k: usize) -> f64 {
    (k as f64 / 2.0 - 2.0).exp2()
}

/// `proj` for two same-height points given `‖ψ1 − ψ2‖²` and the height.
#[inline]
pub(crate) fn projection_from_sq(sq_diff: f64, height: f64) -> f64 {
    (0.25 * sq_diff + height * height).sqrt()
}

/// Height of the top of the geodesic semicircle joining two same-height points.
pub fn lca_projection(z1: &HalfSpacePoint, z2: &HalfSpacePoint) -> Result<f64> {
    check_same_height(z1, z2)?;
    let sq: f64 = z1
        .horizontal()
        .iter()
        .zip(z2.horizontal())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(projection_from_sq(sq, z1.height()))
}

/// Fréchet mean of two same-height points: midpoint horizontally, `proj` vertically.
pub fn hyperbolic_lca(z1: &HalfSpacePoint, z2: &HalfSpacePoint) -> Result<HalfSpacePoint> {
    let proj = lca_projection(z1, z2)?;
    let mid: Vec<f64> = z1
        .horizontal()
        .iter()
        .zip(z2.horizontal())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    HalfSpacePoint::from_parts(&mid, proj)
}

fn check_same_height(z1: &HalfSpacePoint, z2: &HalfSpacePoint) -> Result<()> {
    if z1.dim() != z2.dim() {
        return Err(Error::Dimension(format!(
            "points of dimension {} and {}",
            z1.dim(),
            z2.dim()
        )));
    }
    let (a, b) = (z1.height(), z2.height());
    if (a - b).abs() > HEIGHT_TOL * a.max(b) {
        return Err(Error::Domain(format!("points must share a height, got {a} and {b}")));
    }
    Ok(())
}

/// `ψ_j^k` for every feature and scale.
#[derive(Debug, Clone)]
pub struct MultiScaleEmbedding {
    /// `psi[k]` holds `ψ_j^k` in column `j`.
    psi: Vec<DMatrix<f64>>,
}

impl MultiScaleEmbedding {
    pub fn max_scale(&self) -> usize {
        self.psi.len() - 1
    }

    pub fn num_scales(&self) -> usize {
        self.psi.len()
    }

    pub fn num_features(&self) -> usize {
        self.psi[0].ncols()
    }

    pub fn height(&self, k: usize) -> f64 {
        scale_height(k)
    }

    pub fn psi(&self, k: usize, j: usize) -> &[f64] {
        let m = self.psi[k].nrows();
        &self.psi[k].as_slice()[j * m..(j + 1) * m]
    }

    pub fn point(&self, k: usize, j: usize) -> HalfSpacePoint {
        HalfSpacePoint::from_parts(self.psi(k, j), self.height(k)).expect("embedding heights are positive")
    }

    /// `‖ψ_j^k − ψ_{j'}^k‖²`.
    pub fn sq_diff(&self, k: usize, j: usize, jp: usize) -> f64 {
        self.psi(k, j)
            .iter()
            .zip(self.psi(k, jp))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// `proj(z_j^k ∨ z_{j'}^k)`.
    pub fn projection(&self, k: usize, j: usize, jp: usize) -> f64 {
        projection_from_sq(self.sq_diff(k, j, jp), self.height(k))
    }

    /// Single-scale geodesic distance between `z_j^k` and `z_{j'}^k`.
    pub fn scale_distance(&self, k: usize, j: usize, jp: usize) -> f64 {
        let h = self.height(k);
        halfspace_distance_raw(self.sq_diff(k, j, jp).sqrt(), h, h)
    }
}

/// Places each density on its scale's sheet via the Hellinger map `ψ = sqrt(φ)`.
pub fn embed(densities: &MultiScaleDensities) -> Result<MultiScaleEmbedding> {
    let mut psi = Vec::with_capacity(densities.max_scale() + 1);
    for (k, phi) in densities.scales().iter().enumerate() {
        if let Some(pos) = phi.iter().position(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Internal(format!(
                "negative density entry at scale {k}, flat index {pos}"
            )));
        }
        psi.push(phi.map(f64::sqrt));
    }
    Ok(MultiScaleEmbedding { psi })
}

/// Geometric mean of the per-scale projections, evaluated in log space.
pub fn hd_lca_depth(emb: &MultiScaleEmbedding, j: usize, jp: usize) -> f64 {
    let scales = emb.num_scales();
    let log_sum: f64 = (0..scales).map(|k| emb.projection(k, j, jp).ln()).sum();
    (log_sum / scales as f64).exp()
}

/// `Σ_k 2 asinh(2^{1-k/2} ‖z_j^k − z_{j'}^k‖)`; heights cancel in the difference.
pub fn product_manifold_distance(emb: &MultiScaleEmbedding, j: usize, jp: usize) -> f64 {
    (0..emb.num_scales())
        .map(|k| {
            let scale = (1.0 - k as f64 / 2.0).exp2();
            2.0 * (scale * emb.sq_diff(k, j, jp).sqrt()).asinh()
        })
        .sum()
}

/// All pairwise HD-LCA depths; the diagonal holds the self-depth.
pub fn depth_matrix(emb: &MultiScaleEmbedding) -> DMatrix<f64> {
    let m = emb.num_features();
    let mut a = DMatrix::zeros(m, m);
    for j in 0..m {
        for jp in j..m {
            let v = hd_lca_depth(emb, j, jp);
            a[(j, jp)] = v;
            a[(jp, j)] = v;
        }
    }
    a
}

/// Which pair of a triple is joined first.
///
/// Returns `Some((a, b, c))` meaning `[a ∨ b ∼ c]` when the depth of `(a, b)` is
/// the strict minimum of the three; `None` on a tie.
pub fn lca_relation(depth: impl Fn(usize, usize) -> f64, triple: [usize; 3]) -> Option<(usize, usize, usize)> {
    let [x, y, z] = triple;
    let cands = [((x, y), z), ((x, z), y), ((y, z), x)];
    let vals = cands.map(|((a, b), _)| depth(a, b));
    let best = (0..3).min_by(|&i, &k| vals[i].total_cmp(&vals[k]))?;
    let tied = (0..3).filter(|&i| i != best).any(|i| vals[i] == vals[best]);
    if tied {
        None
    } else {
        let ((a, b), c) = cands[best];
        Some((a, b, c))
    }
}
