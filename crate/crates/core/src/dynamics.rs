//! Equivariant vector fields, flow integration, and equivariant Poincare
//! systems: disc construction, first returns, pointwise return maps and
//! their linearizations.

use std::ops::ControlFlow;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{EquifullerError, Result};
use crate::group::{ElementSet, IsotropyLattice, OrthogonalAction};
use crate::ode;
use crate::region::Region;

pub type RhsFn = Arc<dyn Fn(&DVector<f64>, &[f64]) -> DVector<f64> + Send + Sync>;
pub type JacFn = Arc<dyn Fn(&DVector<f64>, &[f64]) -> DMatrix<f64> + Send + Sync>;

/// Integration tolerances used throughout.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-11, atol: 1e-12 }
    }
}

/// A parametrized equivariant vector field on R^n.
#[derive(Clone)]
pub struct VectorFieldSystem {
    action: OrthogonalAction,
    rhs: RhsFn,
    jac: Option<JacFn>,
    param_dim: usize,
    name: String,
}

impl VectorFieldSystem {
    pub fn new(
        action: OrthogonalAction,
        rhs: RhsFn,
        jac: Option<JacFn>,
        param_dim: usize,
        name: impl Into<String>,
    ) -> Self {
        Self { action, rhs, jac, param_dim, name: name.into() }
    }

    pub fn action(&self) -> &OrthogonalAction {
        &self.action
    }

    pub fn dim(&self) -> usize {
        self.action.dim()
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rhs(&self, x: &DVector<f64>, lambda: &[f64]) -> DVector<f64> {
        (self.rhs)(x, lambda)
    }

    pub fn rhs_fn(&self) -> RhsFn {
        self.rhs.clone()
    }

    pub fn jac(&self, x: &DVector<f64>, lambda: &[f64]) -> DMatrix<f64> {
        match &self.jac {
            Some(j) => j(x, lambda),
            None => {
                let rhs = self.rhs.clone();
                let lam: Vec<f64> = lambda.to_vec();
                ode::fd_jacobian(&move |y: &DVector<f64>| rhs(y, &lam), x)
            }
        }
    }

    /// Replace the field by rhs + eps * |x|^2 x, equivariant under any
    /// orthogonal action. Used to nudge degenerate configurations.
    pub fn perturbed(&self, eps: f64) -> Self {
        let rhs = self.rhs.clone();
        let new_rhs: RhsFn = Arc::new(move |x, lam| {
            let r2 = x.norm_squared();
            rhs(x, lam) + x * (eps * r2)
        });
        let new_jac: Option<JacFn> = self.jac.as_ref().map(|jac| {
            let jac = jac.clone();
            let f: JacFn = Arc::new(move |x: &DVector<f64>, lam: &[f64]| {
                let n = x.len();
                let r2 = x.norm_squared();
                jac(x, lam) + DMatrix::identity(n, n) * (eps * r2) + (x * x.transpose()) * (2.0 * eps)
            });
            f
        });
        Self {
            action: self.action.clone(),
            rhs: new_rhs,
            jac: new_jac,
            param_dim: self.param_dim,
            name: format!("{}+perturbation", self.name),
        }
    }

    /// Max over a fixed pseudo-random sample set and all group elements of
    /// |M(g) rhs(x) - rhs(M(g) x)|.
    pub fn check_equivariance(&self, lambda: &[f64], n_samples: usize) -> f64 {
        assert!(n_samples >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c0de);
        let mut worst = 0.0f64;
        for _ in 0..n_samples {
            let x = DVector::from_fn(self.dim(), |_, _| rng.gen_range(-2.0..2.0));
            let fx = self.rhs(&x, lambda);
            for g in self.action.group().elements() {
                let lhs = self.action.apply(g, &fx);
                let rhs = self.rhs(&self.action.apply(g, &x), lambda);
                worst = worst.max((lhs - rhs).amax());
            }
        }
        worst
    }

    fn frozen_rhs(&self, lambda: &[f64]) -> impl Fn(&DVector<f64>) -> DVector<f64> + '_ {
        let lam: Vec<f64> = lambda.to_vec();
        move |x: &DVector<f64>| self.rhs(x, &lam)
    }

    /// Flow endpoint phi(x0, t).
    pub fn flow(
        &self,
        x0: &DVector<f64>,
        t_final: f64,
        lambda: &[f64],
        tols: Tolerances,
    ) -> Result<DVector<f64>> {
        ode::propagate(&self.frozen_rhs(lambda), x0, t_final, tols.rtol, tols.atol)
    }

    /// Flow with dense output.
    pub fn flow_trajectory(
        &self,
        x0: &DVector<f64>,
        t_final: f64,
        lambda: &[f64],
        tols: Tolerances,
    ) -> Result<ode::Trajectory> {
        ode::integrate(&self.frozen_rhs(lambda), x0, t_final, tols.rtol, tols.atol)
    }

    /// Flow endpoint together with the variational matrix D_x phi(x0, t).
    pub fn flow_variational(
        &self,
        x0: &DVector<f64>,
        t_final: f64,
        lambda: &[f64],
        tols: Tolerances,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let lam: Vec<f64> = lambda.to_vec();
        let f = self.frozen_rhs(lambda);
        let jac = move |x: &DVector<f64>| self.jac(x, &lam);
        ode::propagate_variational(&f, &jac, x0, t_final, tols.rtol, tols.atol)
    }
}

/// One translated copy of the local affine section.
#[derive(Debug, Clone)]
pub struct DiscCopy {
    pub center: DVector<f64>,
    /// Unit normal, equal to the flow direction at the center.
    pub normal: DVector<f64>,
    /// n x (n-1) orthonormal basis of the disc plane.
    pub basis: DMatrix<f64>,
    /// Group element translating the base copy here.
    pub group_elem: usize,
}

impl DiscCopy {
    pub fn disc_coords(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * (x - &self.center)
    }

    pub fn normal_coord(&self, x: &DVector<f64>) -> f64 {
        self.normal.dot(&(x - &self.center))
    }

    pub fn ambient_point(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.basis * u
    }
}

/// Quantitative transversality margin required of the flow against every disc.
pub const TRANSVERSALITY_MARGIN: f64 = 0.1;
const SHRINK_RETRIES: usize = 6;
const ORBIT_POINT_TOL: f64 = 1e-9;

/// An equivariant Poincare system: the G-orbit of a local affine section.
#[derive(Debug, Clone)]
pub struct PoincareSystem {
    pub base_point: DVector<f64>,
    pub isotropy_class: usize,
    pub isotropy_set: ElementSet,
    pub flow_dir: DVector<f64>,
    pub copies: Vec<DiscCopy>,
    pub radius_d: f64,
    pub radius_d_sub: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub region: Option<Region>,
    pub lattice: Arc<IsotropyLattice>,
}

/// Knobs for disc construction; defaults follow the module contract.
#[derive(Debug, Clone)]
pub struct PoincareOptions {
    pub isotropy_tol: f64,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub region: Option<Region>,
    pub tols: Tolerances,
}

impl Default for PoincareOptions {
    fn default() -> Self {
        Self {
            isotropy_tol: 1e-7,
            t_min: None,
            t_max: None,
            region: None,
            tols: Tolerances::default(),
        }
    }
}

impl PoincareSystem {
    /// Copy whose subdisc contains x (tangential distance, with the point near
    /// the disc plane).
    pub fn locate_copy(&self, x: &DVector<f64>, slack: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, copy) in self.copies.iter().enumerate() {
            let tangential = copy.disc_coords(x).norm();
            let normal = copy.normal_coord(x).abs();
            if tangential <= self.radius_d_sub + slack && normal <= 0.05 * self.radius_d + slack {
                if best.map_or(true, |(_, d)| tangential < d) {
                    best = Some((i, tangential));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    /// The group action expressed in disc coordinates: the map taking copy
    /// `from`'s coordinates to copy `to`'s coordinates under element g.
    pub fn disc_action(&self, action: &OrthogonalAction, g: usize, from: usize, to: usize) -> DMatrix<f64> {
        self.copies[to].basis.transpose() * action.matrix(g) * &self.copies[from].basis
    }
}

/// Build an equivariant Poincare system at a non-equilibrium point x0.
pub fn build_poincare_system(
    system: &VectorFieldSystem,
    lattice: &Arc<IsotropyLattice>,
    x0: &DVector<f64>,
    lambda: &[f64],
    radius_d: f64,
    radius_d_sub: f64,
    opts: &PoincareOptions,
) -> Result<PoincareSystem> {
    assert!(radius_d_sub > 0.0 && radius_d_sub < radius_d);
    let action = system.action();
    let speed0 = system.rhs(x0, lambda).norm();
    if speed0 <= 1e-8 {
        return Err(EquifullerError::EquilibriumPoint(speed0));
    }
    let isotropy_set = action.isotropy_of_point(x0, opts.isotropy_tol)?;
    let isotropy_class = lattice
        .class_of_subgroup(isotropy_set)
        .ok_or(EquifullerError::AmbiguousIsotropy { residual: opts.isotropy_tol, tol: opts.isotropy_tol })?;
    let flow_dir = system.rhs(x0, lambda).normalize();

    // Equivariance forces the flow direction into the fixed space of the isotropy.
    let fixed = action.fixed_subspace(isotropy_set);
    let residual = (&flow_dir - &fixed * (fixed.transpose() * &flow_dir)).norm();
    if residual > 1e-8 {
        return Err(EquifullerError::InvalidAction(format!(
            "flow direction leaves the isotropy-fixed subspace (residual {residual:.3e})"
        )));
    }

    let base_basis = orthonormal_complement(&flow_dir);

    // one disc copy per orbit point of x0
    let mut copies: Vec<DiscCopy> = vec![];
    for g in action.group().elements() {
        let center = action.apply(g, x0);
        if copies.iter().any(|c| (&c.center - &center).norm() < ORBIT_POINT_TOL) {
            continue;
        }
        copies.push(DiscCopy {
            normal: action.apply(g, &flow_dir),
            basis: action.matrix(g) * &base_basis,
            center,
            group_elem: g,
        });
    }

    // keep copies disjoint
    let mut min_dist = f64::INFINITY;
    for i in 0..copies.len() {
        for j in (i + 1)..copies.len() {
            min_dist = min_dist.min((&copies[i].center - &copies[j].center).norm());
        }
    }
    let mut radius_d = radius_d;
    let mut radius_d_sub = radius_d_sub;
    if copies.len() > 1 && radius_d > 0.4 * min_dist {
        let shrink = 0.4 * min_dist / radius_d;
        radius_d *= shrink;
        radius_d_sub *= shrink;
    }

    // transversality with shrink-and-retry
    let mut margin = 0.0;
    let mut ok = false;
    for _retry in 0..=SHRINK_RETRIES {
        margin = transversality_margin(system, lambda, &copies, radius_d);
        if margin >= TRANSVERSALITY_MARGIN {
            ok = true;
            break;
        }
        radius_d *= 0.5;
        radius_d_sub *= 0.5;
    }
    if !ok {
        return Err(EquifullerError::TransversalityFailure { margin, retries: SHRINK_RETRIES });
    }

    // crude recurrence scale: one revolution at the base point's speed
    let recurrence = 2.0 * std::f64::consts::PI * x0.norm().max(1.0) / speed0;
    let t_min = opts.t_min.unwrap_or(0.05 * recurrence);
    let t_max = opts.t_max.unwrap_or(40.0 * recurrence);

    Ok(PoincareSystem {
        base_point: x0.clone(),
        isotropy_class,
        isotropy_set,
        flow_dir,
        copies,
        radius_d,
        radius_d_sub,
        t_min,
        t_max,
        region: opts.region.clone(),
        lattice: lattice.clone(),
    })
}

/// Smallest |<rhs(y), n>| / |rhs(y)| over sample points of every disc copy.
fn transversality_margin(
    system: &VectorFieldSystem,
    lambda: &[f64],
    copies: &[DiscCopy],
    radius_d: f64,
) -> f64 {
    let mut worst = f64::INFINITY;
    let dim_disc = copies[0].basis.ncols();
    for copy in copies {
        let mut samples = vec![copy.center.clone()];
        for j in 0..dim_disc {
            let dir = copy.basis.column(j).into_owned();
            samples.push(&copy.center + &dir * radius_d);
            samples.push(&copy.center - &dir * radius_d);
            samples.push(&copy.center + &dir * (0.5 * radius_d));
        }
        for y in samples {
            let v = system.rhs(&y, lambda);
            let speed = v.norm();
            if speed < 1e-12 {
                return 0.0;
            }
            worst = worst.min(copy.normal.dot(&v).abs() / speed);
        }
    }
    worst
}

/// Orthonormal basis of the hyperplane orthogonal to a unit vector.
pub fn orthonormal_complement(unit: &DVector<f64>) -> DMatrix<f64> {
    let n = unit.len();
    let mut m = DMatrix::zeros(n, n);
    m.set_column(0, unit);
    for j in 1..n {
        m[(j % n, j)] = 1.0; // arbitrary columns to orthogonalize against
    }
    let qr = m.qr();
    let q = qr.q();
    // re-sign so column 0 equals the flow direction, then drop it
    let sign = if q.column(0).dot(unit) < 0.0 { -1.0 } else { 1.0 };
    let mut out = DMatrix::zeros(n, n - 1);
    for j in 1..n {
        out.set_column(j - 1, &(q.column(j) * sign));
    }
    out
}

/// One first-return event.
#[derive(Debug, Clone)]
pub struct ReturnRecord {
    pub start: DVector<f64>,
    pub landing: DVector<f64>,
    pub copy_index: usize,
    pub time: f64,
}

const SUBSAMPLES: usize = 8;

/// First crossing of any disc copy after t_min, starting on a disc point y.
pub fn first_return(
    psys: &PoincareSystem,
    system: &VectorFieldSystem,
    y: &DVector<f64>,
    lambda: &[f64],
    tols: Tolerances,
) -> Result<ReturnRecord> {
    psys.locate_copy(y, 1e-7).ok_or_else(|| {
        let dist = psys
            .copies
            .iter()
            .map(|c| c.disc_coords(y).norm())
            .fold(f64::INFINITY, f64::min);
        EquifullerError::OutsideSubdisc { dist, radius: psys.radius_d_sub }
    })?;

    let lam: Vec<f64> = lambda.to_vec();
    let f = {
        let system = system.clone();
        let lam = lam.clone();
        move |x: &DVector<f64>| system.rhs(x, &lam)
    };

    let mut found: Option<ReturnRecord> = None;
    let mut failure: Option<EquifullerError> = None;
    let result = ode::integrate_with(&f, y, psys.t_max, tols.rtol, tols.atol, |step| {
        // region escape check on subsamples
        if let Some(region) = &psys.region {
            for s in 0..=SUBSAMPLES {
                let t = step.t0 + (step.t1 - step.t0) * s as f64 / SUBSAMPLES as f64;
                if !region.contains(&step.interpolate(t)) {
                    failure = Some(EquifullerError::EscapedTube { t });
                    return ControlFlow::Break(());
                }
            }
        }
        // candidate crossings per copy, localized on subsample sign changes
        let mut candidates: Vec<(f64, f64, usize)> = vec![];
        for (ci, copy) in psys.copies.iter().enumerate() {
            let mut prev_t = step.t0;
            let mut prev_s = copy.normal_coord(&step.x0);
            for s in 1..=SUBSAMPLES {
                let t = step.t0 + (step.t1 - step.t0) * s as f64 / SUBSAMPLES as f64;
                let x = step.interpolate(t);
                let sv = copy.normal_coord(&x);
                if prev_s.signum() != sv.signum() && prev_s != 0.0 && t > psys.t_min {
                    // loose tube test; the refined point is re-checked below
                    let near = copy.disc_coords(&x).norm() <= 1.5 * psys.radius_d
                        || copy.disc_coords(&step.interpolate(prev_t)).norm() <= 1.5 * psys.radius_d;
                    if near {
                        candidates.push((prev_t, t, ci));
                    }
                }
                prev_t = t;
                prev_s = sv;
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (t_lo, t_hi, ci) in candidates {
            match refine_crossing(system, &lam, psys, step, ci, t_lo, t_hi, tols) {
                Ok(Some(record)) => {
                    if record.time > psys.t_min {
                        found = Some(record);
                        return ControlFlow::Break(());
                    }
                }
                Ok(None) => {} // crossed the plane outside the disc; keep going
                Err(e) => {
                    failure = Some(e);
                    return ControlFlow::Break(());
                }
            }
        }
        ControlFlow::Continue(())
    });

    if let Some(e) = failure {
        return Err(e);
    }
    result?;
    match found {
        Some(mut record) => {
            record.start = y.clone();
            Ok(record)
        }
        None => Err(EquifullerError::NoReturn { t_max: psys.t_max }),
    }
}

/// Newton-polish a bracketed plane crossing, re-integrating from the step start
/// so the localized time is integrator-accurate.
#[allow(clippy::too_many_arguments)]
fn refine_crossing(
    system: &VectorFieldSystem,
    lambda: &[f64],
    psys: &PoincareSystem,
    step: &ode::Step,
    copy_index: usize,
    t_lo: f64,
    t_hi: f64,
    tols: Tolerances,
) -> Result<Option<ReturnRecord>> {
    let copy = &psys.copies[copy_index];
    // bisection on the interpolant to tighten the bracket
    let (mut a, mut b) = (t_lo, t_hi);
    let mut sa = copy.normal_coord(&step.interpolate(a));
    for _ in 0..40 {
        let mid = 0.5 * (a + b);
        let sm = copy.normal_coord(&step.interpolate(mid));
        if sa.signum() == sm.signum() {
            a = mid;
            sa = sm;
        } else {
            b = mid;
        }
        if b - a < 1e-13 * b.abs().max(1.0) {
            break;
        }
    }
    // Newton from the bracket midpoint, states by short re-integration
    let mut t = 0.5 * (a + b);
    let eval = |t: f64| -> Result<DVector<f64>> {
        if t <= step.t0 {
            return Ok(step.x0.clone());
        }
        system.flow(&step.x0, t - step.t0, lambda, tols)
    };
    let mut x = eval(t)?;
    for _ in 0..30 {
        let g = copy.normal_coord(&x);
        let dg = copy.normal.dot(&system.rhs(&x, lambda));
        if dg.abs() < 1e-14 {
            break;
        }
        let dt = g / dg;
        t -= dt;
        t = t.clamp(step.t0, step.t1 + (step.t1 - step.t0));
        x = eval(t)?;
        if dt.abs() < 1e-12 * t.abs().max(1.0) {
            break;
        }
    }
    let tangential = copy.disc_coords(&x).norm();
    if tangential > psys.radius_d {
        return Ok(None);
    }
    Ok(Some(ReturnRecord {
        start: step.x0.clone(),
        landing: x,
        copy_index,
        time: t,
    }))
}

/// Result of composing first returns until the start copy is hit again.
#[derive(Debug, Clone)]
pub struct PointwiseReturn {
    /// Landing point in the start copy's disc coordinates.
    pub landing_coords: DVector<f64>,
    pub landing: DVector<f64>,
    pub t_total: f64,
    pub hops: usize,
    pub start_copy: usize,
}

/// Smallest iterate of the first-return map sending the start copy to itself.
pub fn pointwise_return_map(
    psys: &PoincareSystem,
    system: &VectorFieldSystem,
    y: &DVector<f64>,
    lambda: &[f64],
    tols: Tolerances,
) -> Result<PointwiseReturn> {
    let start_copy = psys.locate_copy(y, 1e-7).ok_or(EquifullerError::OutsideSubdisc {
        dist: f64::INFINITY,
        radius: psys.radius_d_sub,
    })?;
    let hop_limit = psys.lattice.group().order() * 4;
    let mut current = y.clone();
    let mut t_total = 0.0;
    let mut hops = 0;
    loop {
        let record = first_return(psys, system, &current, lambda, tols)?;
        t_total += record.time;
        hops += 1;
        current = record.landing;
        if record.copy_index == start_copy {
            let landing_coords = psys.copies[start_copy].disc_coords(&current);
            return Ok(PointwiseReturn {
                landing_coords,
                landing: current,
                t_total,
                hops,
                start_copy,
            });
        }
        if hops >= hop_limit {
            return Err(EquifullerError::HopLimit(hop_limit));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianScheme {
    FiniteDifference,
    Variational,
}

/// Jacobian of the pointwise return map in disc coordinates.
pub fn return_map_jacobian(
    psys: &PoincareSystem,
    system: &VectorFieldSystem,
    y: &DVector<f64>,
    lambda: &[f64],
    scheme: JacobianScheme,
    tols: Tolerances,
) -> Result<DMatrix<f64>> {
    let base = pointwise_return_map(psys, system, y, lambda, tols)?;
    let copy = &psys.copies[base.start_copy];
    let d = copy.basis.ncols();
    match scheme {
        JacobianScheme::FiniteDifference => {
            // strongly expanding return maps force a small probe step to stay
            // in the linear regime, so the probes integrate at tightened
            // tolerances to keep the noise term of the quotient down; one
            // Richardson pass then removes the O(h^2) truncation term
            let h = 5e-5 * psys.radius_d;
            let probe_tols = Tolerances {
                rtol: (tols.rtol * 1e-2).max(1e-13),
                atol: (tols.atol * 1e-2).max(1e-14),
            };
            let mut jac = DMatrix::zeros(d, d);
            for j in 0..d {
                let dir = copy.basis.column(j).into_owned();
                let central = |step: f64| -> Result<DVector<f64>> {
                    let plus =
                        pointwise_return_map(psys, system, &(y + &dir * step), lambda, probe_tols)?;
                    let minus =
                        pointwise_return_map(psys, system, &(y - &dir * step), lambda, probe_tols)?;
                    Ok((plus.landing_coords - minus.landing_coords) / (2.0 * step))
                };
                let coarse = central(h)?;
                let fine = central(0.5 * h)?;
                jac.set_column(j, &((fine * 4.0 - coarse) / 3.0));
            }
            Ok(jac)
        }
        JacobianScheme::Variational => {
            let (z, phi) = system.flow_variational(y, base.t_total, lambda, tols)?;
            let v = system.rhs(&z, lambda);
            let denom = copy.normal.dot(&v);
            let n = y.len();
            // project out the return-time variation along the flow
            let projector = DMatrix::identity(n, n) - (&v * copy.normal.transpose()) / denom;
            Ok(copy.basis.transpose() * projector * phi * &copy.basis)
        }
    }
}
