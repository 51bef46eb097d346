//! Invariant regions: centered balls, axis-aligned boxes and spherical shells.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::group::OrthogonalAction;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Ball { radius: f64 },
    Box { half_widths: Vec<f64> },
    Shell { inner: f64, outer: f64 },
}

impl Region {
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        match self {
            Region::Ball { radius } => x.norm() <= *radius,
            Region::Box { half_widths } => x
                .iter()
                .zip(half_widths)
                .all(|(xi, w)| xi.abs() <= *w),
            Region::Shell { inner, outer } => {
                let r = x.norm();
                *inner <= r && r <= *outer
            }
        }
    }

    /// Distance from x to the region boundary (positive inside).
    pub fn boundary_margin(&self, x: &DVector<f64>) -> f64 {
        match self {
            Region::Ball { radius } => radius - x.norm(),
            Region::Box { half_widths } => x
                .iter()
                .zip(half_widths)
                .map(|(xi, w)| w - xi.abs())
                .fold(f64::INFINITY, f64::min),
            Region::Shell { inner, outer } => {
                let r = x.norm();
                (outer - r).min(r - inner)
            }
        }
    }

    /// Check invariance under the action by sampling orbit images of probe points.
    pub fn is_invariant_under(&self, action: &OrthogonalAction) -> bool {
        match self {
            // balls and shells are invariant under any orthogonal action
            Region::Ball { .. } | Region::Shell { .. } => true,
            Region::Box { half_widths } => {
                if half_widths.len() != action.dim() {
                    return false;
                }
                // vertices must map to vertices of the same box
                let dim = action.dim();
                let n_vertices = 1usize << dim;
                for v in 0..n_vertices {
                    let vertex = DVector::from_fn(dim, |i, _| {
                        if v & (1 << i) != 0 { half_widths[i] } else { -half_widths[i] }
                    });
                    for g in action.group().elements() {
                        let image = action.apply(g, &vertex);
                        let ok = image
                            .iter()
                            .zip(half_widths)
                            .all(|(xi, w)| (xi.abs() - w).abs() < 1e-9);
                        if !ok {
                            return false;
                        }
                    }
                }
                true
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_membership() {
        let shell = Region::Shell { inner: 1.0, outer: 2.0 };
        assert!(shell.contains(&DVector::from_vec(vec![1.5, 0.0])));
        assert!(!shell.contains(&DVector::from_vec(vec![0.5, 0.0])));
        assert!(!shell.contains(&DVector::from_vec(vec![2.5, 0.0])));
    }

    #[test]
    fn box_invariance() {
        let action = OrthogonalAction::antipodal(2);
        assert!(Region::Box { half_widths: vec![2.0, 3.0] }.is_invariant_under(&action));
        let refl = OrthogonalAction::reflection_last_axis(2);
        assert!(Region::Box { half_widths: vec![2.0, 3.0] }.is_invariant_under(&refl));
    }
}
