//! Parameter sweeps: trace the Fuller index of a one-parameter family across
//! a grid, continue orbits between grid points, flag inadmissible parameters
//! (orbits touching the region boundary or the period window), and localize
//! and classify structural events.

use std::sync::Arc;

use nalgebra::DVector;

use crate::dynamics::VectorFieldSystem;
use crate::error::{EquifullerError, Result};
use crate::fuller::{fuller_index_from_entries, FullerIndexResult, FullerOptions};
use crate::group::IsotropyLattice;
use crate::orbits::{find_orbits_seeded, OrbitWithPeriod};
use crate::region::Region;
use crate::tomdieck::TomDieckVector;

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub n_grid: usize,
    /// Run a full seed search every this many grid steps; in between, orbits
    /// are continued from the previous parameter value.
    pub reseed_every: usize,
    /// Width to which event parameter brackets are refined.
    pub event_tol: f64,
    /// Orbits closer to the region boundary than this (relative) are
    /// inadmissible.
    pub margin_tol: f64,
    pub fuller: FullerOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            n_grid: 101,
            reseed_every: 10,
            event_tol: 1e-4,
            margin_tol: 1e-3,
            fuller: FullerOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub lambda: f64,
    /// None when the index computation failed at this parameter.
    pub index: Option<TomDieckVector>,
    pub n_contributions: usize,
    pub admissible: bool,
    pub note: Option<String>,
    /// One record per contributing group orbit, for CSV emission.
    pub branches: Vec<BranchRecord>,
}

/// Flat per-orbit summary of one sweep grid point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BranchRecord {
    pub anchor: Vec<f64>,
    pub period: f64,
    pub multiplicity: usize,
    pub isotropy: String,
    /// Return-map multipliers as (re, im) pairs, largest modulus first.
    pub multipliers: Vec<(f64, f64)>,
    /// Stratumwise fixed point indices I_K in lattice class order.
    pub stratum_indices: Vec<i64>,
}

pub fn branch_records(result: &FullerIndexResult, lattice: &IsotropyLattice) -> Vec<BranchRecord> {
    result
        .contributions
        .iter()
        .map(|c| {
            let mut mults: Vec<(f64, f64)> =
                c.multipliers.iter().map(|z| (z.re, z.im)).collect();
            mults.sort_by(|a, b| {
                let (ma, mb) = (a.0.hypot(a.1), b.0.hypot(b.1));
                mb.partial_cmp(&ma).unwrap()
            });
            let mut strata = vec![0i64; lattice.len()];
            for s in &c.strata {
                strata[s.class_id] = s.index;
            }
            BranchRecord {
                anchor: c.orbit.anchor.iter().copied().collect(),
                period: c.orbit.minimal_period,
                multiplicity: c.multiplicity,
                isotropy: lattice.class(c.orbit.isotropy_class).name.clone(),
                multipliers: mults,
                stratum_indices: strata,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// A cycle count change with a multiplier leaving through +1.
    Fold,
    /// A cycle count change with a multiplier leaving through -1.
    Flip,
    /// An orbit left through the region boundary or the period window;
    /// the index trace is allowed to jump here.
    BoundaryLoss,
    Unclassified,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepEvent {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub kind: EventKind,
    /// Whether the total index differs across the event.
    pub index_jump: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub events: Vec<SweepEvent>,
    /// True when every admissible grid point carries the same index.
    pub invariant: bool,
}

impl SweepResult {
    /// Report form: index trace, events, invariance verdict.
    pub fn to_json(&self, lattice: &IsotropyLattice) -> serde_json::Value {
        serde_json::json!({
            "invariant": self.invariant,
            "events": self.events,
            "trace": self
                .points
                .iter()
                .map(|p| {
                    serde_json::json!({
                        "lambda": p.lambda,
                        "index": p.index.as_ref().map(|v| v.to_json(lattice)),
                        "n_contributions": p.n_contributions,
                        "admissible": p.admissible,
                        "note": p.note,
                        "branches": p.branches,
                    })
                })
                .collect::<Vec<_>>(),
        })
    }
}

struct Evaluation {
    result: Option<FullerIndexResult>,
    entries: Vec<OrbitWithPeriod>,
    admissible: bool,
    note: Option<String>,
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    system: &VectorFieldSystem,
    lattice: &Arc<IsotropyLattice>,
    region: &Region,
    window: (f64, f64),
    lambda: f64,
    seed_radius: f64,
    opts: &SweepOptions,
    guesses: &[(DVector<f64>, f64)],
    full_search: bool,
) -> Evaluation {
    let lam = [lambda];
    let entries = match find_orbits_seeded(
        system,
        lattice,
        region,
        window,
        &lam,
        seed_radius,
        &opts.fuller.search,
        guesses,
        full_search,
    ) {
        Ok(e) => e,
        Err(err) => {
            return Evaluation {
                result: None,
                entries: vec![],
                admissible: false,
                note: Some(err.to_string()),
            }
        }
    };
    let mut admissible = true;
    let mut note = None;
    for e in &entries {
        let scale = 1.0 + e.orbit.anchor.norm();
        if e.orbit.boundary_margin < opts.margin_tol * scale {
            admissible = false;
            note = Some(format!(
                "orbit with period {:.6} within {:.2e} of the region boundary",
                e.period, e.orbit.boundary_margin
            ));
        }
    }
    match fuller_index_from_entries(system, lattice, region, &lam, &entries, &opts.fuller) {
        Ok(result) => Evaluation { result: Some(result), entries, admissible, note },
        Err(err) => Evaluation {
            result: None,
            entries,
            admissible: false,
            note: Some(err.to_string()),
        },
    }
}

fn guesses_from(entries: &[OrbitWithPeriod]) -> Vec<(DVector<f64>, f64)> {
    let mut out: Vec<(DVector<f64>, f64)> = vec![];
    for e in entries {
        if e.multiplicity == 1 || !out.iter().any(|(_, t)| (t - e.orbit.minimal_period).abs() < 1e-9)
        {
            out.push((e.orbit.anchor.clone(), e.orbit.minimal_period));
        }
    }
    out.dedup_by(|a, b| (a.1 - b.1).abs() < 1e-9 && (&a.0 - &b.0).norm() < 1e-9);
    out
}

/// Trace the family over an inclusive parameter range.
#[allow(clippy::too_many_arguments)]
pub fn sweep_family(
    system: &VectorFieldSystem,
    lattice: &Arc<IsotropyLattice>,
    region: &Region,
    window: (f64, f64),
    lambda_range: (f64, f64),
    seed_radius: f64,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if opts.n_grid < 2 || !(lambda_range.1 > lambda_range.0) {
        return Err(EquifullerError::Config("sweep needs an increasing range and >= 2 grid points".into()));
    }
    let grid: Vec<f64> = (0..opts.n_grid)
        .map(|i| {
            lambda_range.0
                + (lambda_range.1 - lambda_range.0) * i as f64 / (opts.n_grid - 1) as f64
        })
        .collect();

    let mut points = vec![];
    let mut evals: Vec<Evaluation> = vec![];
    let mut guesses: Vec<(DVector<f64>, f64)> = vec![];
    let mut since_reseed = 0usize;
    for (i, &lam) in grid.iter().enumerate() {
        let full = i == 0 || since_reseed >= opts.reseed_every || guesses.is_empty();
        let ev = evaluate(
            system, lattice, region, window, lam, seed_radius, opts, &guesses, full,
        );
        since_reseed = if full { 1 } else { since_reseed + 1 };
        guesses = guesses_from(&ev.entries);
        points.push(SweepPoint {
            lambda: lam,
            index: ev.result.as_ref().map(|r| r.total.clone()),
            n_contributions: ev.result.as_ref().map_or(0, |r| r.contributions.len()),
            admissible: ev.admissible,
            note: ev.note.clone(),
            branches: ev
                .result
                .as_ref()
                .map_or_else(Vec::new, |r| branch_records(r, lattice)),
        });
        evals.push(ev);
    }

    // localize structural changes between consecutive grid points
    let mut events = vec![];
    for i in 1..grid.len() {
        let (lo, hi) = (&evals[i - 1], &evals[i]);
        let count_change = lo.result.as_ref().map(|r| r.contributions.len())
            != hi.result.as_ref().map(|r| r.contributions.len());
        let index_jump = match (&lo.result, &hi.result) {
            (Some(a), Some(b)) => a.total != b.total,
            _ => true,
        };
        if !(count_change || index_jump) {
            continue;
        }
        let evaluate_at = |lam: f64| {
            evaluate(
                system, lattice, region, window, lam, seed_radius, opts, &[], true,
            )
        };
        let target = |ev: &Evaluation| {
            (
                ev.result.as_ref().map(|r| r.contributions.len()),
                ev.result.as_ref().map(|r| r.total.clone()),
            )
        };
        let lo_sig = target(lo);
        let (mut a, mut b) = (grid[i - 1], grid[i]);
        let mut hi_eval: Option<Evaluation> = None;
        while b - a > opts.event_tol {
            let mid = 0.5 * (a + b);
            let ev = evaluate_at(mid);
            if target(&ev) == lo_sig {
                a = mid;
            } else {
                b = mid;
                hi_eval = Some(ev);
            }
        }
        let kind = classify_event(
            lo,
            hi_eval.as_ref().unwrap_or(hi),
            opts.margin_tol,
        );
        events.push(SweepEvent { lambda_lo: a, lambda_hi: b, kind, index_jump });
    }

    // an index jump means an inadmissible parameter sits inside the bracket;
    // flag the grid points on either side of it
    for e in &events {
        if e.index_jump {
            for p in points.iter_mut() {
                if p.lambda >= e.lambda_lo - (grid[1] - grid[0]) - 1e-12
                    && p.lambda <= e.lambda_hi + (grid[1] - grid[0]) + 1e-12
                {
                    p.admissible = false;
                    p.note.get_or_insert_with(|| {
                        format!(
                            "inadmissible parameter localized in [{:.6}, {:.6}]",
                            e.lambda_lo, e.lambda_hi
                        )
                    });
                }
            }
        }
    }

    let admissible_indices: Vec<&TomDieckVector> = points
        .iter()
        .filter(|p| p.admissible)
        .filter_map(|p| p.index.as_ref())
        .collect();
    let invariant = admissible_indices.windows(2).all(|w| w[0] == w[1]);
    Ok(SweepResult { points, events, invariant })
}

fn classify_event(lo: &Evaluation, hi: &Evaluation, margin_tol: f64) -> EventKind {
    // an orbit grazing the boundary on either side marks a loss through the
    // domain rather than a bifurcation
    for ev in [lo, hi] {
        for e in &ev.entries {
            let scale = 1.0 + e.orbit.anchor.norm();
            if e.orbit.boundary_margin < 10.0 * margin_tol * scale {
                return EventKind::BoundaryLoss;
            }
        }
    }
    // otherwise look at the side with more contributions: the colliding or
    // doubling cycles carry a multiplier near +1 or -1
    let richer = match (&lo.result, &hi.result) {
        (Some(a), Some(b)) => {
            if a.contributions.len() >= b.contributions.len() {
                a
            } else {
                b
            }
        }
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => return EventKind::Unclassified,
    };
    let mut best: Option<(f64, bool)> = None;
    for c in &richer.contributions {
        for mu in &c.multipliers {
            let d_fold = (mu - nalgebra::Complex::new(1.0, 0.0)).norm();
            let d_flip = (mu - nalgebra::Complex::new(-1.0, 0.0)).norm();
            let (d, is_fold) = if d_fold <= d_flip { (d_fold, true) } else { (d_flip, false) };
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, is_fold));
            }
        }
    }
    match best {
        Some((d, true)) if d < 0.5 => EventKind::Fold,
        Some((d, false)) if d < 0.5 => EventKind::Flip,
        _ => EventKind::Unclassified,
    }
}

/// Fail with an invariance violation if the index jumps between two
/// admissible neighbouring grid points (an admissible homotopy cannot change
/// the index; a jump means the sweep missed an inadmissible parameter).
pub fn verify_invariance(result: &SweepResult) -> Result<()> {
    for w in result.points.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        if p.admissible && q.admissible {
            if let (Some(a), Some(b)) = (&p.index, &q.index) {
                if a != b {
                    return Err(EquifullerError::InvarianceViolation(p.lambda, q.lambda));
                }
            }
        }
    }
    Ok(())
}

/// Expected local dimension of a branch of symmetric periodic solutions:
/// parameter count minus the codimension data of the stratum.
pub fn predicted_branch_dimension(s: usize, dim_m_h: usize, dim_p_h: usize) -> isize {
    s as isize - dim_m_h as isize + dim_p_h as isize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RhsFn;
    use crate::group::{enumerate_subgroup_classes, FiniteGroup, OrthogonalAction};
    use crate::systems;
    use crate::tomdieck::rat_int;

    fn small_opts() -> SweepOptions {
        let mut o = SweepOptions::default();
        o.n_grid = 21;
        o.fuller.search.n_random_seeds = 8;
        o.fuller.search.n_period_seeds = 4;
        o
    }

    #[test]
    fn hopf_param_trace_is_constant() {
        let b = systems::builtin("hopf_param").unwrap();
        let res = sweep_family(
            &b.system,
            &b.lattice,
            &b.region,
            b.window,
            (0.5, 1.5),
            b.seed_radius,
            &small_opts(),
        )
        .unwrap();
        assert!(res.invariant);
        assert!(res.events.is_empty());
        for p in &res.points {
            assert!(p.admissible, "lambda = {}", p.lambda);
            assert_eq!(
                p.index.as_ref().unwrap().project(b.lattice.class_of_trivial()),
                rat_int(1)
            );
        }
        verify_invariance(&res).unwrap();
    }

    #[test]
    fn shrunk_region_makes_the_sweep_inadmissible() {
        let b = systems::builtin("hopf_param").unwrap();
        let tight = Region::Ball { radius: 1.1 };
        let res = sweep_family(
            &b.system,
            &b.lattice,
            &tight,
            b.window,
            (0.5, 1.5),
            1.0,
            &small_opts(),
        )
        .unwrap();
        // the cycle radius sqrt(lambda) crosses the boundary at lambda = 1.21
        assert!(!res.invariant);
        assert!(res.points.iter().any(|p| !p.admissible));
        assert!(res
            .events
            .iter()
            .any(|e| e.index_jump && e.lambda_lo > 1.15 && e.lambda_hi < 1.3));
        assert!(res
            .events
            .iter()
            .all(|e| e.kind == EventKind::BoundaryLoss || e.kind == EventKind::Unclassified));
    }

    /// dr/dt = r (lambda - (r^2 - 1)^2): a fold of cycles at lambda = 0.
    fn fold_family() -> (VectorFieldSystem, Arc<IsotropyLattice>) {
        let action = OrthogonalAction::trivial(FiniteGroup::trivial(), 2);
        let lattice =
            Arc::new(enumerate_subgroup_classes(action.group()).unwrap());
        let rhs: RhsFn = std::sync::Arc::new(|x: &DVector<f64>, lam: &[f64]| {
            let q = x[0] * x[0] + x[1] * x[1];
            let s = lam[0] - (q - 1.0) * (q - 1.0);
            DVector::from_vec(vec![x[0] * s - x[1], x[1] * s + x[0]])
        });
        (VectorFieldSystem::new(action, rhs, None, 1, "fold_param"), lattice)
    }

    #[test]
    fn fold_event_is_localized_and_classified() {
        let (system, lattice) = fold_family();
        let region = Region::Ball { radius: 2.0 };
        let mut opts = small_opts();
        opts.n_grid = 11;
        let res = sweep_family(
            &system,
            &lattice,
            &region,
            (4.0, 8.0),
            (-0.24, 0.26),
            1.5,
            &opts,
        )
        .unwrap();
        // index stays zero through the fold: the two cycles cancel
        assert!(res.invariant);
        verify_invariance(&res).unwrap();
        let fold: Vec<_> = res.events.iter().filter(|e| e.kind == EventKind::Fold).collect();
        assert_eq!(fold.len(), 1);
        assert!(fold[0].lambda_lo > -0.05 && fold[0].lambda_hi < 0.05);
        assert!(fold[0].lambda_hi - fold[0].lambda_lo <= opts.event_tol);
        assert!(!fold[0].index_jump);
    }

    #[test]
    fn branch_dimension_formula() {
        assert_eq!(predicted_branch_dimension(1, 0, 0), 1);
        assert_eq!(predicted_branch_dimension(1, 2, 0), -1);
        assert_eq!(predicted_branch_dimension(2, 1, 1), 2);
    }
}
