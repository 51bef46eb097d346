//! Builtin equivariant systems selectable by name. Each bundle carries the
//! action, lattice, a default region and period window at which its periodic
//! orbits are documented.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{JacFn, RhsFn, VectorFieldSystem};
use crate::error::{EquifullerError, Result};
use crate::group::{enumerate_subgroup_classes, FiniteGroup, IsotropyLattice, OrthogonalAction};
use crate::region::Region;

#[derive(Clone)]
pub struct BuiltinSystem {
    pub system: VectorFieldSystem,
    pub lattice: Arc<IsotropyLattice>,
    pub region: Region,
    /// Documented period window (a, b) containing the known orbits once.
    pub window: (f64, f64),
    pub default_lambda: Vec<f64>,
    /// Spatial scale for seed grids.
    pub seed_radius: f64,
    pub notes: &'static str,
}

pub const BUILTIN_NAMES: &[&str] = &[
    "hopf", "hopf_z2", "hopf_param", "axis_z2", "vdp", "vdp_z2", "ring_z2", "ring_z3", "ring_z4",
    "two_cycles",
];

/// Planar field u(r^2, lambda) * (x, y) + (-y, x) and its Jacobian, the shape
/// shared by the radial builtins.
fn radial_rhs(
    u: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    du: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
) -> (RhsFn, JacFn) {
    let u = Arc::new(u);
    let u2 = u.clone();
    let rhs: RhsFn = Arc::new(move |x, lam| {
        let q = x[0] * x[0] + x[1] * x[1];
        let s = u(q, lam);
        DVector::from_vec(vec![x[0] * s - x[1], x[1] * s + x[0]])
    });
    let jac: JacFn = Arc::new(move |x, lam| {
        let q = x[0] * x[0] + x[1] * x[1];
        let s = u2(q, lam);
        let ds = du(q, lam);
        DMatrix::from_row_slice(
            2,
            2,
            &[
                s + 2.0 * x[0] * x[0] * ds,
                2.0 * x[0] * x[1] * ds - 1.0,
                2.0 * x[0] * x[1] * ds + 1.0,
                s + 2.0 * x[1] * x[1] * ds,
            ],
        )
    });
    (rhs, jac)
}

fn lattice_of(group: &FiniteGroup) -> Arc<IsotropyLattice> {
    Arc::new(enumerate_subgroup_classes(group).expect("builtin group within cap"))
}

pub fn builtin(name: &str) -> Result<BuiltinSystem> {
    match name {
        "hopf" => {
            let action = OrthogonalAction::trivial(FiniteGroup::trivial(), 2);
            let lattice = lattice_of(action.group());
            let (rhs, jac) = radial_rhs(|q, _| 1.0 - q, |_, _| -1.0);
            Ok(BuiltinSystem {
                system: VectorFieldSystem::new(action, rhs, Some(jac), 0, "hopf"),
                lattice,
                region: Region::Ball { radius: 3.0 },
                window: (4.0, 8.0),
                default_lambda: vec![],
                seed_radius: 2.0,
                notes: "planar Hopf normal form; attracting cycle r=1, period 2*pi",
            })
        }
        "hopf_z2" => {
            let action = OrthogonalAction::antipodal(2);
            let lattice = lattice_of(action.group());
            let (rhs, jac) = radial_rhs(|q, _| 1.0 - q, |_, _| -1.0);
            Ok(BuiltinSystem {
                system: VectorFieldSystem::new(action, rhs, Some(jac), 0, "hopf_z2"),
                lattice,
                region: Region::Ball { radius: 3.0 },
                window: (4.0, 8.0),
                default_lambda: vec![],
                seed_radius: 2.0,
                notes: "odd planar Hopf field under the antipodal Z2 action",
            })
        }
        "hopf_param" => {
            let action = OrthogonalAction::antipodal(2);
            let lattice = lattice_of(action.group());
            let (rhs, jac) = radial_rhs(|q, lam| lam[0] - q, |_, _| -1.0);
            Ok(BuiltinSystem {
                system: VectorFieldSystem::new(action, rhs, Some(jac), 1, "hopf_param"),
                lattice,
                region: Region::Ball { radius: 3.0 },
                window: (4.0, 8.0),
                default_lambda: vec![1.0],
                seed_radius: 2.0,
                notes: "dr/dt = r(lambda - r^2); cycle at r = sqrt(lambda), period 2*pi",
            })
        }
        "two_cycles" => {
            let action = OrthogonalAction::trivial(FiniteGroup::trivial(), 2);
            let lattice = lattice_of(action.group());
            let (rhs, jac) = radial_rhs(
                |q, _| (1.0 - q) * (4.0 - q) / 24.0,
                |q, _| (2.0 * q - 5.0) / 24.0,
            );
            Ok(BuiltinSystem {
                system: VectorFieldSystem::new(action, rhs, Some(jac), 0, "two_cycles"),
                lattice,
                region: Region::Ball { radius: 3.0 },
                window: (4.0, 8.0),
                default_lambda: vec![],
                seed_radius: 2.5,
                notes: "nested cycles: r=1 attracting (index +1), r=2 repelling (index -1)",
            })
        }
        "axis_z2" => {
            let action = OrthogonalAction::reflection_last_axis(3);
            let lattice = lattice_of(action.group());
            let rhs: RhsFn = Arc::new(|x, _| {
                let q = x[0] * x[0] + x[1] * x[1];
                DVector::from_vec(vec![
                    x[0] * (1.0 - q) - x[1],
                    x[1] * (1.0 - q) + x[0],
                    -x[2],
                ])
            });
            let jac: JacFn = Arc::new(|x, _| {
                let q = x[0] * x[0] + x[1] * x[1];
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        1.0 - q - 2.0 * x[0] * x[0],
                        -2.0 * x[0] * x[1] - 1.0,
                        0.0,
                        -2.0 * x[0] * x[1] + 1.0,
                        1.0 - q - 2.0 * x[1] * x[1],
                        0.0,
                        0.0,
                        0.0,
                        -1.0,
                    ],
                )
            });
            Ok(BuiltinSystem {
                system: VectorFieldSystem::new(action, rhs, Some(jac), 0, "axis_z2"),
                lattice,
                region: Region::Ball { radius: 3.0 },
                window: (4.0, 8.0),
                default_lambda: vec![],
                seed_radius: 1.8,
                notes: "attracting cycle inside the reflection-fixed plane z = 0; isotropy Z2",
            })
        }
        "vdp" | "vdp_z2" => {
            let action = if name == "vdp" {
                OrthogonalAction::trivial(FiniteGroup::trivial(), 2)
            } else {
                OrthogonalAction::antipodal(2)
            };
            let lattice = lattice_of(action.group());
            let mu = 1.0;
            let rhs: RhsFn = Arc::new(move |x, _| {
                DVector::from_vec(vec![x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0]])
            });
            let jac: JacFn = Arc::new(move |x, _| {
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[0.0, 1.0, -2.0 * mu * x[0] * x[1] - 1.0, mu * (1.0 - x[0] * x[0])],
                )
            });
            Ok(BuiltinSystem {
                system: VectorFieldSystem::new(action, rhs, Some(jac), 0, name),
                lattice,
                region: Region::Ball { radius: 4.0 },
                window: (5.0, 8.0),
                default_lambda: vec![],
                seed_radius: 2.5,
                notes: "van der Pol (mu = 1); relaxation cycle with period about 6.66",
            })
        }
        "ring_z2" | "ring_z3" | "ring_z4" => {
            let n: usize = name.trim_start_matches("ring_z").parse().unwrap();
            let action = OrthogonalAction::cyclic_block_shift(n)?;
            let lattice = lattice_of(action.group());
            let c = 0.1;
            let rhs: RhsFn = Arc::new(move |x, _| {
                let mut out = DVector::zeros(2 * n);
                for i in 0..n {
                    let (xi, yi) = (x[2 * i], x[2 * i + 1]);
                    let q = xi * xi + yi * yi;
                    let prev = (i + n - 1) % n;
                    let next = (i + 1) % n;
                    out[2 * i] = xi * (1.0 - q) - yi
                        + c * (x[2 * prev] - 2.0 * xi + x[2 * next]);
                    out[2 * i + 1] = yi * (1.0 - q) + xi
                        + c * (x[2 * prev + 1] - 2.0 * yi + x[2 * next + 1]);
                }
                out
            });
            let jac: JacFn = Arc::new(move |x, _| {
                let mut j = DMatrix::zeros(2 * n, 2 * n);
                for i in 0..n {
                    let (xi, yi) = (x[2 * i], x[2 * i + 1]);
                    let q = xi * xi + yi * yi;
                    j[(2 * i, 2 * i)] = 1.0 - q - 2.0 * xi * xi - 2.0 * c;
                    j[(2 * i, 2 * i + 1)] = -2.0 * xi * yi - 1.0;
                    j[(2 * i + 1, 2 * i)] = -2.0 * xi * yi + 1.0;
                    j[(2 * i + 1, 2 * i + 1)] = 1.0 - q - 2.0 * yi * yi - 2.0 * c;
                    let prev = (i + n - 1) % n;
                    let next = (i + 1) % n;
                    j[(2 * i, 2 * prev)] += c;
                    j[(2 * i, 2 * next)] += c;
                    j[(2 * i + 1, 2 * prev + 1)] += c;
                    j[(2 * i + 1, 2 * next + 1)] += c;
                }
                j
            });
            Ok(BuiltinSystem {
                system: VectorFieldSystem::new(action, rhs, Some(jac), 0, name),
                lattice,
                region: Region::Ball { radius: 1.2 + (n as f64).sqrt() },
                window: (4.0, 8.0),
                default_lambda: vec![],
                seed_radius: 1.5,
                notes: "diffusively coupled Stuart-Landau ring; synchronous cycle with full cyclic isotropy",
            })
        }
        other => Err(EquifullerError::Config(format!("unknown builtin system {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_are_equivariant() {
        for name in BUILTIN_NAMES {
            let b = builtin(name).unwrap();
            let lam = b.default_lambda.clone();
            let residual = b.system.check_equivariance(&lam, 12);
            assert!(residual < 1e-12, "{name}: residual {residual:.3e}");
            assert!(b.region.is_invariant_under(b.system.action()), "{name}: region");
        }
    }

    #[test]
    fn builtin_jacobians_match_finite_differences() {
        use crate::ode::fd_jacobian;
        for name in BUILTIN_NAMES {
            let b = builtin(name).unwrap();
            let lam = b.default_lambda.clone();
            let x = DVector::from_fn(b.system.dim(), |i, _| 0.3 + 0.17 * i as f64);
            let analytic = b.system.jac(&x, &lam);
            let sys = b.system.clone();
            let fd = fd_jacobian(&move |y: &DVector<f64>| sys.rhs(y, &lam), &x);
            assert!((analytic - fd).amax() < 1e-6, "{name}");
        }
    }

    #[test]
    fn unknown_name_is_config_error() {
        assert!(matches!(builtin("nope"), Err(EquifullerError::Config(_))));
    }
}
