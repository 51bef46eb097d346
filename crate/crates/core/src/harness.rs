//! One-dimensional disc-map harness: Fuller-style iterate sums for interval
//! maps, used to exercise the weighted index bookkeeping on a family whose
//! fixed points are known in closed form on both sides of a flip.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{EquifullerError, Result};
use crate::group::{enumerate_subgroup_classes, FiniteGroup, IsotropyLattice};
use crate::tomdieck::TomDieckVector;

pub type MapFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct MapFamily {
    pub f: MapFn,
    pub name: String,
}

/// The flip normal-form family y -> -(1 + lambda) y + y^3: a period-doubling
/// at lambda = 0 with the 2-cycle at +-sqrt(lambda).
pub fn flip_family() -> MapFamily {
    MapFamily {
        f: Arc::new(|y, lam| -(1.0 + lam) * y + y * y * y),
        name: "flip".into(),
    }
}

fn iterate(map: &MapFamily, lambda: f64, n: usize, y: f64) -> f64 {
    let mut z = y;
    for _ in 0..n {
        z = (map.f)(z, lambda);
    }
    z
}

/// Derivative of the n-th iterate by the chain rule over a central-difference
/// derivative of the map.
fn iterate_derivative(map: &MapFamily, lambda: f64, n: usize, y: f64) -> f64 {
    let h = 1e-6;
    let mut z = y;
    let mut prod = 1.0;
    for _ in 0..n {
        prod *= ((map.f)(z + h, lambda) - (map.f)(z - h, lambda)) / (2.0 * h);
        z = (map.f)(z, lambda);
    }
    prod
}

const GRID: usize = 2000;
const DEDUP_TOL: f64 = 1e-8;

/// All fixed points of the n-th iterate inside [-radius, radius], located by
/// a sign-change scan plus bisection and a Newton polish.
pub fn fixed_points_of_iterate(
    map: &MapFamily,
    lambda: f64,
    n: usize,
    radius: f64,
) -> Result<Vec<f64>> {
    let g = |y: f64| iterate(map, lambda, n, y) - y;
    let mut roots: Vec<f64> = vec![];
    let mut push = |y: f64| {
        if y.abs() <= radius && !roots.iter().any(|r| (r - y).abs() < DEDUP_TOL) {
            roots.push(y);
        }
    };
    let mut prev_y = -radius;
    let mut prev_g = g(prev_y);
    for i in 1..=GRID {
        let y = -radius + 2.0 * radius * i as f64 / GRID as f64;
        let gy = g(y);
        if prev_g == 0.0 {
            push(prev_y);
        } else if prev_g * gy < 0.0 {
            // bisection bracket, then Newton
            let (mut lo, mut hi) = (prev_y, y);
            let (mut glo, _) = (prev_g, gy);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let gm = g(mid);
                if glo * gm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            let mut root = 0.5 * (lo + hi);
            for _ in 0..8 {
                let d = iterate_derivative(map, lambda, n, root) - 1.0;
                if d.abs() < 1e-12 {
                    break;
                }
                root -= g(root) / d;
            }
            push(root);
        }
        prev_y = y;
        prev_g = gy;
    }
    if prev_g == 0.0 {
        push(prev_y);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(roots)
}

/// Fixed point index sum of the n-th iterate over the interval.
pub fn iterate_index(map: &MapFamily, lambda: f64, n: usize, radius: f64) -> Result<i64> {
    let mut total = 0i64;
    for y in fixed_points_of_iterate(map, lambda, n, radius)? {
        let det = 1.0 - iterate_derivative(map, lambda, n, y);
        if det.abs() < 1e-8 {
            return Err(EquifullerError::DegenerateFixedPoint(det));
        }
        total += if det > 0.0 { 1 } else { -1 };
    }
    Ok(total)
}

/// Trivial-group lattice used to express scalar map indices in the same
/// value type as the flow-level indices.
pub fn scalar_lattice() -> Arc<IsotropyLattice> {
    Arc::new(enumerate_subgroup_classes(&FiniteGroup::trivial()).expect("trivial group"))
}

/// The weighted iterate sum sum_{n=1..n_max} (1/n) i(Q_lambda^n, D).
pub fn fuller_sum(
    map: &MapFamily,
    lambda: f64,
    n_max: usize,
    radius: f64,
    lattice: &Arc<IsotropyLattice>,
) -> Result<TomDieckVector> {
    let mut total = TomDieckVector::zero(lattice);
    for n in 1..=n_max {
        let idx = iterate_index(map, lambda, n, radius)?;
        let q = BigRational::new(BigInt::from(idx), BigInt::from(n as i64));
        total = total.add(&TomDieckVector::single(lattice, 0, q))?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomdieck::rat;

    #[test]
    fn flip_fixed_point_counts() {
        let map = flip_family();
        // before the flip only the origin; after it the 2-cycle joins Q^2
        assert_eq!(fixed_points_of_iterate(&map, -0.2, 1, 0.5).unwrap().len(), 1);
        assert_eq!(fixed_points_of_iterate(&map, 0.2, 1, 0.5).unwrap().len(), 1);
        assert_eq!(fixed_points_of_iterate(&map, -0.2, 2, 0.5).unwrap().len(), 1);
        let after = fixed_points_of_iterate(&map, 0.2, 2, 0.5).unwrap();
        assert_eq!(after.len(), 3);
        assert!((after[2] - 0.2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn iterate_indices_across_the_flip() {
        let map = flip_family();
        for lam in [-0.2, 0.2] {
            assert_eq!(iterate_index(&map, lam, 1, 0.5).unwrap(), 1, "n=1, lam={lam}");
            assert_eq!(iterate_index(&map, lam, 2, 0.5).unwrap(), 1, "n=2, lam={lam}");
        }
    }

    #[test]
    fn weighted_sum_is_invariant_across_the_flip() {
        let map = flip_family();
        let lat = scalar_lattice();
        let before = fuller_sum(&map, -0.2, 2, 0.5, &lat).unwrap();
        let after = fuller_sum(&map, 0.2, 2, 0.5, &lat).unwrap();
        assert_eq!(before, after);
        assert_eq!(before.project(0), rat(3, 2));
    }

    #[test]
    fn degenerate_parameter_is_flagged() {
        let map = flip_family();
        // at lambda = 0 the second iterate has a unit multiplier at the origin
        assert!(matches!(
            iterate_index(&map, 0.0, 2, 0.5),
            Err(EquifullerError::DegenerateFixedPoint(_))
        ));
    }
}
