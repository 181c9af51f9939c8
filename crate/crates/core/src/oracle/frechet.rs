//! Derivative-free Fréchet means in the half-space, for checking the closed
//! forms.

use crate::error::{Error, Result};
use crate::hyperbolic::{halfspace_distance, HalfSpacePoint};

/// Search space of the numeric Fréchet mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrechetConstraint {
    /// Any point of the half-space.
    Free,
    /// Points `[0, …, 0, a]` on the vertical axis.
    VerticalAxis,
}

const GOLDEN: f64 = 1.618_033_988_749_895;
const MAX_SWEEPS: usize = 20_000;

/// Minimizes a unimodal-near-`x0` function of one variable: bracket by
/// expansion from `x0 ± step`, then golden-section down to `tol`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, x0: f64, step: f64, tol: f64) -> f64 {
    let (mut a, mut b) = (x0, x0 + step);
    let (mut fa, mut fb) = (f(a), f(b));
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut guard = 0;
    while fc < fb && guard < 200 {
        a = b;
        b = c;
        fb = fc;
        c = b + GOLDEN * (b - a);
        fc = f(c);
        guard += 1;
    }
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let inv = 1.0 / GOLDEN;
    let mut x1 = hi - inv * (hi - lo);
    let mut x2 = lo + inv * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..300 {
        if hi - lo <= tol * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(f(mid), mid), (f1, x1), (f2, x2)]
        .into_iter()
        .min_by(|p, q| p.0.total_cmp(&q.0))
        .map(|(_, x)| x)
        .unwrap_or(mid)
}

/// Parameters are the horizontal coordinates followed by `ln(height)`.
fn to_point(params: &[f64]) -> HalfSpacePoint {
    let mut coords = params.to_vec();
    let last = coords.len() - 1;
    coords[last] = coords[last].exp();
    HalfSpacePoint::new(coords).expect("exp keeps the height positive")
}

fn objective(points: &[HalfSpacePoint], z: &HalfSpacePoint) -> f64 {
    points
        .iter()
        .map(|p| {
            let d = halfspace_distance(z, p).expect("dimensions checked");
            d * d
        })
        .sum()
}

/// Minimizer of `Σ d²(z, p_i)` found by coordinate-wise golden-section
/// search plus a pattern move along each sweep's net displacement.
pub fn frechet_mean_numeric(points: &[HalfSpacePoint], constraint: FrechetConstraint) -> Result<HalfSpacePoint> {
    let Some(first) = points.first() else {
        return Err(Error::Parameter("Fréchet mean of no points".into()));
    };
    let dim = first.dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::Dimension("points of differing dimension".into()));
    }
    let n = points.len() as f64;

    if constraint == FrechetConstraint::VerticalAxis {
        if points.iter().any(|p| p.horizontal().iter().any(|&c| c != 0.0)) {
            return Err(Error::Domain("vertical-axis mode needs points on the axis".into()));
        }
        let start = points.iter().map(|p| p.height().ln()).sum::<f64>() / n;
        let f = |s: f64| {
            let mut z = vec![0.0; dim];
            z[dim - 1] = s;
            objective(points, &to_point(&z))
        };
        let s = golden_section_min(f, start, 0.1, 1e-15);
        let mut coords = vec![0.0; dim];
        coords[dim - 1] = s.exp();
        return HalfSpacePoint::new(coords);
    }

    let mut params: Vec<f64> = (0..dim - 1)
        .map(|i| points.iter().map(|p| p.coords()[i]).sum::<f64>() / n)
        .collect();
    params.push(points.iter().map(|p| p.height().ln()).sum::<f64>() / n);
    let eval = |x: &[f64]| objective(points, &to_point(x));

    let mut step = 0.1;
    for _ in 0..MAX_SWEEPS {
        let before = params.clone();
        let f_before = eval(&params);
        for i in 0..dim {
            let best = golden_section_min(
                |x| {
                    let mut trial = params.clone();
                    trial[i] = x;
                    eval(&trial)
                },
                params[i],
                step,
                1e-14,
            );
            params[i] = best;
        }
        // Pattern move along the sweep displacement.
        let dir: Vec<f64> = params.iter().zip(&before).map(|(a, b)| a - b).collect();
        let dir_norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if dir_norm > 0.0 {
            let base = params.clone();
            let t = golden_section_min(
                |t| {
                    let trial: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + t * d).collect();
                    eval(&trial)
                },
                0.0,
                1.0,
                1e-14,
            );
            let moved: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + t * d).collect();
            if eval(&moved) <= eval(&params) {
                params = moved;
            }
        }
        let change = params
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let f_after = eval(&params);
        if change < 1e-12 || (f_before - f_after).abs() <= 1e-16 * f_before.max(1e-300) && change < 1e-9 {
            return Ok(to_point(&params));
        }
        step = (2.0 * change).clamp(1e-8, 0.1);
    }
    Err(Error::Numerical("Fréchet mean search did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let p = HalfSpacePoint::new(vec![0.3, -0.1, 0.7]).unwrap();
        let m = frechet_mean_numeric(std::slice::from_ref(&p), FrechetConstraint::Free).unwrap();
        for (a, b) in m.coords().iter().zip(p.coords()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn vertical_geometric_mean() {
        let pts = [
            HalfSpacePoint::new(vec![0.0, 0.0, 0.25]).unwrap(),
            HalfSpacePoint::new(vec![0.0, 0.0, 0.5]).unwrap(),
        ];
        let m = frechet_mean_numeric(&pts, FrechetConstraint::VerticalAxis).unwrap();
        assert!((m.height() - 0.125f64.sqrt()).abs() < 1e-9);
        assert!(frechet_mean_numeric(
            &[HalfSpacePoint::new(vec![1.0, 0.5]).unwrap()],
            FrechetConstraint::VerticalAxis
        )
        .is_err());
    }

    #[test]
    fn golden_on_parabola() {
        let x = golden_section_min(|x| (x - 3.0) * (x - 3.0), 0.0, 0.1, 1e-14);
        assert!((x - 3.0).abs() < 1e-7);
    }
}
