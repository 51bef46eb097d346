//! Locating periodic orbits by single shooting, classifying their minimal
//! periods, and enumerating all orbit-with-period pairs inside a period
//! window.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{Tolerances, VectorFieldSystem};
use crate::error::{EquifullerError, Result};
use crate::group::IsotropyLattice;
use crate::region::Region;

/// A periodic orbit found by shooting, anchored at a canonical point.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub anchor: DVector<f64>,
    pub minimal_period: f64,
    /// Pointwise isotropy class of the anchor in the ambient lattice.
    pub isotropy_class: usize,
    /// Dense samples over one minimal period, used for geometric dedup.
    pub samples: Vec<DVector<f64>>,
    /// Smallest distance from the orbit to the region boundary.
    pub boundary_margin: f64,
}

/// An orbit together with a multiplicity k, representing the period-kT point
/// of the k-fold cover of the minimal orbit.
#[derive(Debug, Clone)]
pub struct OrbitWithPeriod {
    pub orbit: PeriodicOrbit,
    pub multiplicity: usize,
    pub period: f64,
}

#[derive(Debug, Clone)]
pub struct ShootOptions {
    pub max_iters: usize,
    pub residual_tol: f64,
    pub tols: Tolerances,
    /// Reject converged periods below this floor (guards equilibria).
    pub period_floor: f64,
    pub period_cap: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            max_iters: 40,
            residual_tol: 1e-10,
            tols: Tolerances::default(),
            period_floor: 0.05,
            period_cap: 200.0,
        }
    }
}

/// Newton single shooting for F(y, T) = (phi(y, T) - y, <xi(y_seed), y - y_seed>).
///
/// The phase condition pins y to the hyperplane through the seed orthogonal to
/// the flow there, removing the time-shift degeneracy.
pub fn shoot_periodic(
    system: &VectorFieldSystem,
    y_seed: &DVector<f64>,
    t_seed: f64,
    lambda: &[f64],
    opts: &ShootOptions,
) -> Result<(DVector<f64>, f64)> {
    let n = y_seed.len();
    let phase_dir = system.rhs(y_seed, lambda);
    if phase_dir.norm() < 1e-10 {
        return Err(EquifullerError::EquilibriumPoint(phase_dir.norm()));
    }
    let mut y = y_seed.clone();
    let mut t = t_seed;
    let mut prev_res = f64::INFINITY;
    let mut growth_strikes = 0usize;

    for iter in 0..opts.max_iters {
        if !(t.is_finite() && t > opts.period_floor && t < opts.period_cap) {
            return Err(EquifullerError::NotFound("period left admissible range".into()));
        }
        // coarse tolerances far from the root, tight ones for the endgame
        let tols = if prev_res > 1e-6 {
            Tolerances { rtol: 1e-9, atol: 1e-10 }
        } else {
            opts.tols
        };
        let (z, phi) = system.flow_variational(&y, t, lambda, tols)?;
        let gap = &z - &y;
        let phase = phase_dir.dot(&(&y - y_seed));
        let res = (gap.norm_squared() + phase * phase).sqrt();
        let scale = 1.0 + y.norm();
        if res <= opts.residual_tol * scale {
            if system.rhs(&y, lambda).norm() < 1e-8 {
                return Err(EquifullerError::EquilibriumPoint(0.0));
            }
            return Ok((y, t));
        }
        if !res.is_finite() || res > 1e6 * scale {
            return Err(EquifullerError::NotFound(format!(
                "shooting diverged at iteration {iter}"
            )));
        }
        if res > 1.2 * prev_res {
            growth_strikes += 1;
            if growth_strikes >= 3 {
                return Err(EquifullerError::NotFound("shooting residual stagnated".into()));
            }
        } else {
            growth_strikes = 0;
        }
        prev_res = res;

        // bordered Newton system [[Phi - I, xi(z)]; [xi(y_seed)^T, 0]]
        let mut j = DMatrix::zeros(n + 1, n + 1);
        j.view_mut((0, 0), (n, n))
            .copy_from(&(&phi - DMatrix::identity(n, n)));
        let v_end = system.rhs(&z, lambda);
        for i in 0..n {
            j[(i, n)] = v_end[i];
            j[(n, i)] = phase_dir[i];
        }
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = -gap[i];
        }
        rhs[n] = -phase;
        let delta = j
            .lu()
            .solve(&rhs)
            .ok_or(EquifullerError::DegenerateFixedPoint(0.0))?;
        let mut dy = delta.rows(0, n).into_owned();
        let mut dt = delta[n];
        // trust-region style clamp, Newton steps far out are unreliable
        let max_dy = 0.5 * scale;
        if dy.norm() > max_dy {
            dy *= max_dy / dy.norm();
        }
        dt = dt.clamp(-0.3 * t, 0.3 * t);
        y += dy;
        t += dt;
    }
    Err(EquifullerError::NotFound("shooting did not converge".into()))
}

/// The same field run in reversed time; periodic orbits coincide, but
/// repelling ones become attracting so shooting integrations stay bounded.
fn reversed(system: &VectorFieldSystem) -> VectorFieldSystem {
    let f = system.rhs_fn();
    let sys = system.clone();
    VectorFieldSystem::new(
        system.action().clone(),
        Arc::new(move |x: &DVector<f64>, l: &[f64]| -f(x, l)),
        Some(Arc::new(move |x: &DVector<f64>, l: &[f64]| -sys.jac(x, l))),
        system.param_dim(),
        system.name(),
    )
}

const MULTIPLICITY_CAP: usize = 24;
const PERIOD_MATCH_TOL: f64 = 1e-7;
const PERIOD_AMBIGUITY_BAND: f64 = 100.0;

/// Minimal period and multiplicity of a converged (y, T) pair: the largest
/// k with phi(y, T/k) = y, with a guard band flagging near-misses.
pub fn classify_multiplicity(
    system: &VectorFieldSystem,
    y: &DVector<f64>,
    t: f64,
    lambda: &[f64],
    tols: Tolerances,
) -> Result<(f64, usize)> {
    let scale = 1.0 + y.norm();
    let mut best_k = 1usize;
    for k in (2..=MULTIPLICITY_CAP).rev() {
        let t_k = t / k as f64;
        if t_k < 0.02 {
            continue;
        }
        let z = system.flow(y, t_k, lambda, tols)?;
        let err = (&z - y).norm();
        if err < PERIOD_MATCH_TOL * scale {
            best_k = k;
            break;
        }
        if err < PERIOD_AMBIGUITY_BAND * PERIOD_MATCH_TOL * scale {
            return Err(EquifullerError::AmbiguousPeriod {
                ratio: err / (PERIOD_MATCH_TOL * scale),
            });
        }
    }
    Ok((t / best_k as f64, best_k))
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub n_random_seeds: usize,
    pub rng_seed: u64,
    pub n_period_seeds: usize,
    pub shoot: ShootOptions,
    pub dedup_tol: f64,
    /// Relative distance from the window boundary below which the window is
    /// rejected as inessential.
    pub boundary_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            n_random_seeds: 24,
            rng_seed: 0x0f11_5eed,
            n_period_seeds: 6,
            shoot: ShootOptions::default(),
            dedup_tol: 1e-5,
            boundary_tol: 1e-6,
        }
    }
}

const DEDUP_SAMPLES: usize = 64;

fn orbit_samples(
    system: &VectorFieldSystem,
    y: &DVector<f64>,
    t: f64,
    lambda: &[f64],
    tols: Tolerances,
    count: usize,
) -> Result<Vec<DVector<f64>>> {
    let traj = system.flow_trajectory(y, t, lambda, tols)?;
    Ok((0..count)
        .map(|i| traj.sample(t * i as f64 / count as f64))
        .collect())
}

/// Distance from a point to a stored periodic orbit: coarse pass over the
/// dense samples, then a golden-section refinement of min_t |phi(t) - y|
/// along the trajectory span bracketing the best sample.
pub fn distance_to_orbit(
    system: &VectorFieldSystem,
    orbit: &PeriodicOrbit,
    y: &DVector<f64>,
    lambda: &[f64],
    tols: Tolerances,
) -> Result<f64> {
    let m = orbit.samples.len();
    let mut i_best = 0;
    let mut d_best = f64::INFINITY;
    for (i, q) in orbit.samples.iter().enumerate() {
        let d = (q - y).norm();
        if d < d_best {
            d_best = d;
            i_best = i;
        }
    }
    // the minimizing time lies within one sample spacing of the best sample;
    // re-integrate from its predecessor and search the two-spacing span
    let h = orbit.minimal_period / m as f64;
    let start = &orbit.samples[(i_best + m - 1) % m];
    let traj = system.flow_trajectory(start, 2.0 * h, lambda, tols)?;
    let f = |s: f64| (traj.sample(s) - y).norm();
    let (mut lo, mut hi) = (0.0f64, 2.0 * h);
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    Ok(d_best.min(fc.min(fd)))
}

/// Find all periodic orbits of the field inside `region` whose periods (as
/// multiples of the minimal period) fall inside the open window (a, b).
///
/// The window must be essential: any orbit whose period lands on a boundary
/// within `boundary_tol` causes a `WindowRejected` error.
pub fn find_orbits(
    system: &VectorFieldSystem,
    lattice: &Arc<IsotropyLattice>,
    region: &Region,
    window: (f64, f64),
    lambda: &[f64],
    seed_radius: f64,
    opts: &SearchOptions,
) -> Result<Vec<OrbitWithPeriod>> {
    find_orbits_seeded(system, lattice, region, window, lambda, seed_radius, opts, &[], true)
}

/// Like `find_orbits`, trying explicit (point, period) guesses first; when
/// `full_search` is false only the guesses are used (continuation steps).
#[allow(clippy::too_many_arguments)]
pub fn find_orbits_seeded(
    system: &VectorFieldSystem,
    lattice: &Arc<IsotropyLattice>,
    region: &Region,
    window: (f64, f64),
    lambda: &[f64],
    seed_radius: f64,
    opts: &SearchOptions,
    guesses: &[(DVector<f64>, f64)],
    full_search: bool,
) -> Result<Vec<OrbitWithPeriod>> {
    let (a, b) = window;
    if !(a > 0.0 && b > a) {
        return Err(EquifullerError::Config(format!("bad period window ({a}, {b})")));
    }
    let n = system.dim();
    let tols = opts.shoot.tols;

    let mut spatial: Vec<DVector<f64>> = vec![];
    if full_search {
        // axis seeds at three radii catch nested radial structures
        for axis in 0..n {
            for r in [0.33, 0.66, 1.0] {
                let mut v = DVector::zeros(n);
                v[axis] = r * seed_radius;
                spatial.push(v);
            }
        }
        // all-blocks-equal seeds for product-like symmetric systems
        if n % 2 == 0 && n > 2 {
            for r in [0.5, 1.0] {
                let mut v = DVector::zeros(n);
                for blk in 0..n / 2 {
                    v[2 * blk] = r;
                }
                spatial.push(v);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
        for _ in 0..opts.n_random_seeds {
            let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0) * seed_radius);
            spatial.push(v);
        }
        spatial.retain(|v| region.contains(v));
    }

    let mut period_seeds = vec![];
    let lo = a.max(0.5);
    for i in 0..opts.n_period_seeds {
        let frac = (i as f64 + 0.5) / opts.n_period_seeds as f64;
        period_seeds.push(lo * (b / lo).powf(frac));
    }

    let mut attempts: Vec<(DVector<f64>, f64)> = guesses.to_vec();
    for seed in &spatial {
        if system.rhs(seed, lambda).norm() < 1e-3 {
            continue;
        }
        for &t0 in &period_seeds {
            attempts.push((seed.clone(), t0));
        }
    }

    let rev = reversed(system);
    let mut orbits: Vec<PeriodicOrbit> = vec![];
    {
        let mut converged: Vec<(DVector<f64>, f64)> = vec![];
        for (seed, t0) in &attempts {
            let (seed, t0) = (seed, *t0);
            // both time directions: Newton from a given seed tends to land on
            // the same orbit regardless of stability, but integration blows up
            // in the direction that repels, so each direction covers different
            // orbits
            for dir in [system, &rev] {
                if let Ok(p) = shoot_periodic(dir, seed, t0, lambda, &opts.shoot) {
                    converged.push(p);
                }
            }
        }
        for (y, t) in converged {
            let (t_min, _) = classify_multiplicity(system, &y, t, lambda, tols)?;
            // polish at the minimal period so the stored period is sharp
            let (y, t_min) = shoot_periodic(system, &y, t_min, lambda, &opts.shoot)
                .or_else(|_| shoot_periodic(&rev, &y, t_min, lambda, &opts.shoot))
                .unwrap_or((y, t_min));
            let samples = orbit_samples(system, &y, t_min, lambda, tols, DEDUP_SAMPLES)?;
            if samples.iter().any(|p| !region.contains(p)) {
                continue;
            }
            let scale = 1.0 + y.norm();
            let mut duplicate = false;
            for o in &orbits {
                if (o.minimal_period - t_min).abs() < opts.dedup_tol * (1.0 + t_min)
                    && distance_to_orbit(system, o, &y, lambda, tols)? < opts.dedup_tol * scale
                {
                    duplicate = true;
                    break;
                }
            }
            if duplicate {
                continue;
            }
            let anchor = canonical_anchor(&samples);
            let isotropy_class = system
                .action()
                .isotropy_class_of_point(lattice, &anchor, 1e-7)?;
            let boundary_margin = samples
                .iter()
                .map(|p| region.boundary_margin(p))
                .fold(f64::INFINITY, f64::min);
            orbits.push(PeriodicOrbit {
                anchor,
                minimal_period: t_min,
                isotropy_class,
                samples,
                boundary_margin,
            });
        }
    }

    // expand each minimal orbit into all its orbit-with-period pairs in (a, b)
    let mut out: Vec<OrbitWithPeriod> = vec![];
    for orbit in orbits {
        for k in 1..=MULTIPLICITY_CAP {
            let period = orbit.minimal_period * k as f64;
            let guard = opts.boundary_tol * (1.0 + period);
            if (period - a).abs() < guard || (period - b).abs() < guard {
                return Err(EquifullerError::WindowRejected { period, a, b });
            }
            if period > b {
                break;
            }
            if period > a {
                out.push(OrbitWithPeriod { orbit: orbit.clone(), multiplicity: k, period });
            }
        }
    }
    out.sort_by(|x, y| {
        x.period
            .partial_cmp(&y.period)
            .unwrap()
            .then(x.multiplicity.cmp(&y.multiplicity))
            .then(x.orbit.isotropy_class.cmp(&y.orbit.isotropy_class))
    });
    Ok(out)
}

/// Deterministic anchor: the orbit sample that is lexicographically maximal.
fn canonical_anchor(samples: &[DVector<f64>]) -> DVector<f64> {
    let mut best = &samples[0];
    for s in samples.iter().skip(1) {
        for i in 0..s.len() {
            let d = s[i] - best[i];
            if d > 1e-9 {
                best = s;
                break;
            }
            if d < -1e-9 {
                break;
            }
        }
    }
    best.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn search(name: &str) -> (systems::BuiltinSystem, SearchOptions) {
        (systems::builtin(name).unwrap(), SearchOptions::default())
    }

    #[test]
    fn hopf_shooting_converges_from_rough_seed() {
        let (b, opts) = search("hopf");
        let seed = DVector::from_vec(vec![1.3, 0.2]);
        let (y, t) = shoot_periodic(&b.system, &seed, 5.5, &[], &opts.shoot).unwrap();
        assert_relative_eq!(t, 2.0 * PI, epsilon = 1e-9);
        assert_relative_eq!(y.norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn hopf_single_orbit_in_window() {
        let (b, opts) = search("hopf");
        let found = find_orbits(
            &b.system, &b.lattice, &b.region, b.window, &[], b.seed_radius, &opts,
        )
        .unwrap();
        assert_eq!(found.len(), 1);
        assert_relative_eq!(found[0].period, 2.0 * PI, epsilon = 1e-8);
        assert_eq!(found[0].multiplicity, 1);
        assert_relative_eq!(found[0].orbit.anchor.norm(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn wide_window_counts_the_double_cover() {
        let (b, opts) = search("hopf");
        let found = find_orbits(
            &b.system, &b.lattice, &b.region, (4.0, 14.0), &[], b.seed_radius, &opts,
        )
        .unwrap();
        assert_eq!(found.len(), 2);
        assert_eq!(found[0].multiplicity, 1);
        assert_eq!(found[1].multiplicity, 2);
        assert_relative_eq!(found[1].period, 4.0 * PI, epsilon = 1e-8);
    }

    #[test]
    fn multiplicity_of_double_period() {
        let (b, _) = search("hopf");
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let (t_min, k) =
            classify_multiplicity(&b.system, &y, 4.0 * PI, &[], Tolerances::default()).unwrap();
        assert_eq!(k, 2);
        assert_relative_eq!(t_min, 2.0 * PI, epsilon = 1e-9);
    }

    #[test]
    fn two_cycles_finds_both_radii() {
        let (b, opts) = search("two_cycles");
        let found = find_orbits(
            &b.system, &b.lattice, &b.region, b.window, &[], b.seed_radius, &opts,
        )
        .unwrap();
        assert_eq!(found.len(), 2);
        let mut radii: Vec<f64> = found.iter().map(|o| o.orbit.anchor.norm()).collect();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(radii[0], 1.0, epsilon = 1e-7);
        assert_relative_eq!(radii[1], 2.0, epsilon = 1e-7);
        for o in &found {
            assert_relative_eq!(o.period, 2.0 * PI, epsilon = 1e-7);
        }
    }

    #[test]
    fn vdp_period_matches_reference() {
        let (b, opts) = search("vdp");
        let found = find_orbits(
            &b.system, &b.lattice, &b.region, b.window, &[], b.seed_radius, &opts,
        )
        .unwrap();
        assert_eq!(found.len(), 1);
        // classical value for the mu = 1 relaxation oscillation
        assert_relative_eq!(found[0].period, 6.663286859323, epsilon = 1e-6);
    }

    #[test]
    fn ring_z3_synchronous_orbit_has_full_isotropy() {
        let (b, opts) = search("ring_z3");
        let found = find_orbits(
            &b.system, &b.lattice, &b.region, b.window, &[], b.seed_radius, &opts,
        )
        .unwrap();
        let sync: Vec<_> = found
            .iter()
            .filter(|o| o.orbit.isotropy_class == b.lattice.class_of_group())
            .collect();
        assert!(!sync.is_empty());
        assert_relative_eq!(sync[0].period, 2.0 * PI, epsilon = 1e-6);
    }

    #[test]
    fn boundary_period_rejects_the_window() {
        let (b, opts) = search("hopf");
        let err = find_orbits(
            &b.system,
            &b.lattice,
            &b.region,
            (2.0 * PI, 8.0),
            &[],
            b.seed_radius,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, EquifullerError::WindowRejected { .. }));
    }

    #[test]
    fn hopf_param_orbit_radius_tracks_lambda() {
        let (b, opts) = search("hopf_param");
        for lam in [0.6, 1.0, 1.4] {
            let found = find_orbits(
                &b.system, &b.lattice, &b.region, b.window, &[lam], b.seed_radius, &opts,
            )
            .unwrap();
            assert_eq!(found.len(), 1);
            assert_relative_eq!(found[0].orbit.anchor.norm(), lam.sqrt(), epsilon = 1e-8);
        }
    }
}
