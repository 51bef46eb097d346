//! The equivariant Fuller index of a field on a region: locate every
//! periodic orbit whose period falls in an essential window, compute the
//! equivariant fixed point index of the return map around each group orbit
//! of cycles, and sum with weights 1/k over multiplicities.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;

use crate::dynamics::{
    build_poincare_system, return_map_jacobian, JacobianScheme, PoincareOptions, PoincareSystem,
    VectorFieldSystem,
};
use crate::error::Result;
use crate::group::IsotropyLattice;
use crate::index::{equivariant_index, FixedPoint, StratumIndexReport};
use crate::orbits::{distance_to_orbit, find_orbits, OrbitWithPeriod, PeriodicOrbit, SearchOptions};
use crate::region::Region;
use crate::tomdieck::TomDieckVector;

#[derive(Debug, Clone)]
pub struct FullerOptions {
    pub search: SearchOptions,
    pub poincare: PoincareOptions,
    pub scheme: JacobianScheme,
    /// Disc radius as a fraction of (1 + |anchor|); shrunk further by the
    /// section builder when copies would overlap.
    pub radius_factor: f64,
}

impl Default for FullerOptions {
    fn default() -> Self {
        Self {
            search: SearchOptions::default(),
            poincare: PoincareOptions::default(),
            scheme: JacobianScheme::Variational,
            radius_factor: 0.08,
        }
    }
}

/// One group orbit of cycles at one multiplicity, with its index data.
#[derive(Debug, Clone)]
pub struct OrbitContribution {
    pub orbit: PeriodicOrbit,
    pub multiplicity: usize,
    pub period: f64,
    /// Integer-coefficient equivariant fixed point index of the k-th iterate.
    pub index: TomDieckVector,
    /// index scaled by 1/k, the actual Fuller summand.
    pub weighted: TomDieckVector,
    pub strata: Vec<StratumIndexReport>,
    /// Eigenvalues of the k-th iterate return-map Jacobian at the anchor.
    pub multipliers: Vec<nalgebra::Complex<f64>>,
}

#[derive(Debug, Clone)]
pub struct FullerIndexResult {
    pub total: TomDieckVector,
    pub contributions: Vec<OrbitContribution>,
}

impl FullerIndexResult {
    /// Report form: index as a {class: rational} map plus one object per
    /// contributing group orbit.
    pub fn to_json(&self, lattice: &IsotropyLattice) -> serde_json::Value {
        serde_json::json!({
            "index": self.total.to_json(lattice),
            "contributions": self
                .contributions
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "anchor": c.orbit.anchor.iter().copied().collect::<Vec<f64>>(),
                        "period": c.orbit.minimal_period,
                        "multiplicity": c.multiplicity,
                        "isotropy": lattice.class(c.orbit.isotropy_class).name,
                        "boundary_margin": c.orbit.boundary_margin,
                        "iterate_index": c.index.to_json(lattice),
                        "weighted": c.weighted.to_json(lattice),
                        "strata": c.strata,
                        "multipliers": c
                            .multipliers
                            .iter()
                            .map(|z| serde_json::json!([z.re, z.im]))
                            .collect::<Vec<_>>(),
                    })
                })
                .collect::<Vec<_>>(),
        })
    }
}

/// Group the found orbits into group-translation classes and keep one
/// representative per class: the equivariant section around a representative
/// already carries discs around all of its translates, so counting the
/// translates separately would double-count.
fn group_orbit_representatives(
    system: &VectorFieldSystem,
    entries: &[OrbitWithPeriod],
    lambda: &[f64],
    opts: &FullerOptions,
) -> Result<Vec<OrbitWithPeriod>> {
    let action = system.action();
    let tols = opts.poincare.tols;
    let mut reps: Vec<OrbitWithPeriod> = vec![];
    'outer: for e in entries {
        for r in &reps {
            if r.multiplicity != e.multiplicity
                || (r.period - e.period).abs() > 1e-7 * (1.0 + e.period)
            {
                continue;
            }
            for g in action.group().elements() {
                let translated = action.matrix(g) * &e.orbit.anchor;
                let d = distance_to_orbit(system, &r.orbit, &translated, lambda, tols)?;
                if d < 1e-6 * (1.0 + translated.norm()) {
                    continue 'outer;
                }
            }
        }
        reps.push(e.clone());
    }
    Ok(reps)
}

/// Fixed points of the k-th iterate of the pointwise return map near the
/// group orbit of the cycle: one per disc copy, with the Jacobian conjugated
/// from the start copy by the disc-coordinate action.
fn copy_center_fixed_points(
    psys: &PoincareSystem,
    system: &VectorFieldSystem,
    dp_start_pow: &DMatrix<f64>,
    isotropy_tol: f64,
) -> Result<Vec<FixedPoint>> {
    let action = system.action();
    let mut out = vec![];
    for (c, copy) in psys.copies.iter().enumerate() {
        let conj = psys.disc_action(action, copy.group_elem, 0, c);
        let dp = &conj * dp_start_pow * conj.transpose();
        let stabilizer = action.isotropy_of_point(&copy.center, isotropy_tol)?;
        out.push(FixedPoint {
            point: copy.center.clone(),
            copy_index: c,
            dp,
            stabilizer,
        });
    }
    Ok(out)
}

/// Equivariant fixed point index of the k-th return map iterate around one
/// group orbit of cycles.
pub fn orbit_index(
    system: &VectorFieldSystem,
    lattice: &Arc<IsotropyLattice>,
    entry: &OrbitWithPeriod,
    region: &Region,
    lambda: &[f64],
    opts: &FullerOptions,
) -> Result<(TomDieckVector, Vec<StratumIndexReport>, Vec<nalgebra::Complex<f64>>)> {
    let anchor = &entry.orbit.anchor;
    let radius = opts.radius_factor * (1.0 + anchor.norm());
    let mut popts = opts.poincare.clone();
    popts.region = Some(region.clone());
    popts.t_max = Some(4.0 * entry.period.max(entry.orbit.minimal_period));
    let psys = build_poincare_system(
        system,
        lattice,
        anchor,
        lambda,
        radius,
        0.5 * radius,
        &popts,
    )?;
    let dp = return_map_jacobian(&psys, system, anchor, lambda, opts.scheme, popts.tols)?;
    let mut dp_pow = DMatrix::identity(dp.nrows(), dp.ncols());
    for _ in 0..entry.multiplicity {
        dp_pow = &dp_pow * &dp;
    }
    let fps = copy_center_fixed_points(&psys, system, &dp_pow, popts.isotropy_tol)?;
    let multipliers = dp_pow.complex_eigenvalues().iter().copied().collect();
    let (vector, strata) = equivariant_index(lattice, system.action(), &psys, &fps)?;
    Ok((vector, strata, multipliers))
}

/// The equivariant Fuller index of the field over `region` in the open
/// period window.
pub fn fuller_index(
    system: &VectorFieldSystem,
    lattice: &Arc<IsotropyLattice>,
    region: &Region,
    window: (f64, f64),
    lambda: &[f64],
    seed_radius: f64,
    opts: &FullerOptions,
) -> Result<FullerIndexResult> {
    let entries = find_orbits(system, lattice, region, window, lambda, seed_radius, &opts.search)?;
    fuller_index_from_entries(system, lattice, region, lambda, &entries, opts)
}

/// The Fuller sum over an already-located list of orbit-with-period entries.
pub fn fuller_index_from_entries(
    system: &VectorFieldSystem,
    lattice: &Arc<IsotropyLattice>,
    region: &Region,
    lambda: &[f64],
    entries: &[OrbitWithPeriod],
    opts: &FullerOptions,
) -> Result<FullerIndexResult> {
    let reps = group_orbit_representatives(system, entries, lambda, opts)?;
    let mut total = TomDieckVector::zero(lattice);
    let mut contributions = vec![];
    for entry in reps {
        let (index, strata, multipliers) = orbit_index(system, lattice, &entry, region, lambda, opts)?;
        let weight = BigRational::new(BigInt::from(1), BigInt::from(entry.multiplicity as i64));
        let weighted = index.scale(&weight);
        total = total.add(&weighted)?;
        contributions.push(OrbitContribution {
            orbit: entry.orbit.clone(),
            multiplicity: entry.multiplicity,
            period: entry.period,
            index,
            weighted,
            strata,
            multipliers,
        });
    }
    Ok(FullerIndexResult { total, contributions })
}

/// Sum over iterates sum_{k=1..k_max} (1/k) i_G(P^k) around one minimal
/// orbit, the flow-level side of the iterate identity.
pub fn iterate_index_sum(
    system: &VectorFieldSystem,
    lattice: &Arc<IsotropyLattice>,
    orbit: &PeriodicOrbit,
    region: &Region,
    k_max: usize,
    lambda: &[f64],
    opts: &FullerOptions,
) -> Result<TomDieckVector> {
    let mut total = TomDieckVector::zero(lattice);
    for k in 1..=k_max {
        let entry = OrbitWithPeriod {
            orbit: orbit.clone(),
            multiplicity: k,
            period: orbit.minimal_period * k as f64,
        };
        let (index, _, _) = orbit_index(system, lattice, &entry, region, lambda, opts)?;
        let weight = BigRational::new(BigInt::from(1), BigInt::from(k as i64));
        total = total.add(&index.scale(&weight))?;
    }
    Ok(total)
}

/// Exact additivity audit: the index over a disjoint union must equal the
/// sum over the parts.
pub fn additivity_check(
    parts: &[&FullerIndexResult],
    whole: &FullerIndexResult,
) -> Result<bool> {
    let mut sum: Option<TomDieckVector> = None;
    for p in parts {
        sum = Some(match sum {
            None => p.total.clone(),
            Some(s) => s.add(&p.total)?,
        });
    }
    Ok(sum.map_or(whole.total.is_zero(), |s| s == whole.total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;
    use crate::tomdieck::{rat, rat_int};

    fn run(name: &str) -> (systems::BuiltinSystem, FullerIndexResult) {
        let b = systems::builtin(name).unwrap();
        let lam = b.default_lambda.clone();
        let res = fuller_index(
            &b.system,
            &b.lattice,
            &b.region,
            b.window,
            &lam,
            b.seed_radius,
            &FullerOptions::default(),
        )
        .unwrap();
        (b, res)
    }

    #[test]
    fn hopf_index_is_one_free_class() {
        let (b, res) = run("hopf");
        assert_eq!(res.contributions.len(), 1);
        assert_eq!(res.total.project(b.lattice.class_of_trivial()), rat_int(1));
    }

    #[test]
    fn hopf_z2_index_is_one_free_orbit() {
        let (b, res) = run("hopf_z2");
        assert_eq!(res.total.project(b.lattice.class_of_trivial()), rat_int(1));
        assert!(res.total.project(b.lattice.class_of_group()).is_integer());
        assert_eq!(res.total.project(b.lattice.class_of_group()), rat_int(0));
    }

    #[test]
    fn axis_z2_index_lives_on_the_fixed_class() {
        let (b, res) = run("axis_z2");
        assert_eq!(res.total.project(b.lattice.class_of_group()), rat_int(1));
        assert_eq!(res.total.project(b.lattice.class_of_trivial()), rat_int(0));
    }

    #[test]
    fn two_cycles_cancel() {
        let (_b, res) = run("two_cycles");
        assert_eq!(res.contributions.len(), 2);
        assert!(res.total.is_zero());
    }

    #[test]
    fn double_cover_adds_half() {
        // window wide enough for k = 1 and k = 2 of the Hopf cycle
        let b = systems::builtin("hopf").unwrap();
        let res = fuller_index(
            &b.system,
            &b.lattice,
            &b.region,
            (4.0, 14.0),
            &[],
            b.seed_radius,
            &FullerOptions::default(),
        )
        .unwrap();
        assert_eq!(res.contributions.len(), 2);
        assert_eq!(res.total.project(0), rat(3, 2));
    }

    #[test]
    fn jacobian_schemes_agree_on_the_index() {
        let b = systems::builtin("axis_z2").unwrap();
        let mut fd = FullerOptions::default();
        fd.scheme = JacobianScheme::FiniteDifference;
        let res_fd = fuller_index(
            &b.system, &b.lattice, &b.region, b.window, &[], b.seed_radius, &fd,
        )
        .unwrap();
        let res_var = fuller_index(
            &b.system,
            &b.lattice,
            &b.region,
            b.window,
            &[],
            b.seed_radius,
            &FullerOptions::default(),
        )
        .unwrap();
        assert_eq!(res_fd.total, res_var.total);
    }

    #[test]
    fn additivity_over_disjoint_shells() {
        let b = systems::builtin("two_cycles").unwrap();
        let opts = FullerOptions::default();
        let inner = Region::Ball { radius: 1.5 };
        let outer = Region::Shell { inner: 1.5, outer: 2.5 };
        let res_inner = fuller_index(
            &b.system, &b.lattice, &inner, b.window, &[], 1.2, &opts,
        )
        .unwrap();
        let res_outer = fuller_index(
            &b.system, &b.lattice, &outer, b.window, &[], b.seed_radius, &opts,
        )
        .unwrap();
        let res_whole = fuller_index(
            &b.system, &b.lattice, &b.region, b.window, &[], b.seed_radius, &opts,
        )
        .unwrap();
        assert_eq!(res_inner.total.project(0), rat_int(1));
        assert_eq!(res_outer.total.project(0), rat_int(-1));
        assert!(additivity_check(&[&res_inner, &res_outer], &res_whole).unwrap());
    }
}
