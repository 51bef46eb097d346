//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)) for
//! autonomous fields, with per-step dense output used for event localization,
//! and variational equations for flow linearizations.

use nalgebra::{DMatrix, DVector};
use std::ops::ControlFlow;

use crate::error::{EquifullerError, Result};

// Dormand-Prince 5(4) tableau. Stage times are not needed: fields are autonomous.
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th order solution weights equal the last A row; 4th order embedded weights:
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MIN_STEP_FACTOR: f64 = 1e-14;
const MAX_STEPS: usize = 2_000_000;

/// One accepted integration step with endpoint data for Hermite interpolation.
#[derive(Debug, Clone)]
pub struct Step {
    pub t0: f64,
    pub t1: f64,
    pub x0: DVector<f64>,
    pub x1: DVector<f64>,
    pub f0: DVector<f64>,
    pub f1: DVector<f64>,
}

impl Step {
    /// Cubic Hermite interpolant at t in [t0, t1].
    pub fn interpolate(&self, t: f64) -> DVector<f64> {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        &self.x0 * h00 + &self.f0 * (h10 * h) + &self.x1 * h01 + &self.f1 * (h11 * h)
    }
}

/// A stored trajectory over [0, t_final].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn t_final(&self) -> f64 {
        self.steps.last().map(|s| s.t1).unwrap_or(0.0)
    }

    pub fn final_state(&self) -> &DVector<f64> {
        &self.steps.last().expect("empty trajectory").x1
    }

    pub fn sample(&self, t: f64) -> DVector<f64> {
        let step = self
            .steps
            .iter()
            .find(|s| t <= s.t1)
            .unwrap_or_else(|| self.steps.last().expect("empty trajectory"));
        step.interpolate(t.max(step.t0).min(step.t1))
    }
}

/// Integrate dx/dt = f(x) from x0 over [0, t_final], invoking `on_step` for
/// every accepted step. Returning `Break` stops the integration early.
pub fn integrate_with<F, C>(
    f: &F,
    x0: &DVector<f64>,
    t_final: f64,
    rtol: f64,
    atol: f64,
    mut on_step: C,
) -> Result<(f64, DVector<f64>)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    C: FnMut(&Step) -> ControlFlow<()>,
{
    assert!(t_final > 0.0 && rtol > 0.0 && atol > 0.0);
    let mut t = 0.0;
    let mut x = x0.clone();
    let mut fx = f(&x);
    let mut h = initial_step(&x, &fx, t_final);
    let mut k: Vec<DVector<f64>> = vec![DVector::zeros(x.len()); 7];

    for _ in 0..MAX_STEPS {
        if t >= t_final {
            return Ok((t, x));
        }
        h = h.min(t_final - t);
        if h < MIN_STEP_FACTOR * t.abs().max(1.0) {
            return Err(EquifullerError::StepFailure {
                t,
                state: x.iter().copied().collect(),
            });
        }
        k[0] = fx.clone();
        for i in 1..7 {
            let mut xi = x.clone();
            for (j, kj) in k.iter().enumerate().take(i) {
                if A[i][j] != 0.0 {
                    xi += kj * (h * A[i][j]);
                }
            }
            k[i] = f(&xi);
        }
        // 5th order solution is stage 7's state
        let mut x5 = x.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            if A[6][j] != 0.0 {
                x5 += kj * (h * A[6][j]);
            }
        }
        // embedded 4th order for the error estimate
        let mut x4 = x.clone();
        for (j, kj) in k.iter().enumerate() {
            if B4[j] != 0.0 {
                x4 += kj * (h * B4[j]);
            }
        }
        let mut err = 0.0f64;
        for i in 0..x.len() {
            let sc = atol + rtol * x[i].abs().max(x5[i].abs());
            err += ((x5[i] - x4[i]) / sc).powi(2);
        }
        err = (err / x.len() as f64).sqrt();

        if err <= 1.0 {
            // FSAL: k7 = f(x5)
            let f1 = k[6].clone();
            let step = Step {
                t0: t,
                t1: t + h,
                x0: x.clone(),
                x1: x5.clone(),
                f0: fx.clone(),
                f1: f1.clone(),
            };
            t += h;
            x = x5;
            fx = f1;
            if let ControlFlow::Break(()) = on_step(&step) {
                return Ok((t, x));
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Err(EquifullerError::StepFailure {
        t,
        state: x.iter().copied().collect(),
    })
}

fn initial_step(x0: &DVector<f64>, f0: &DVector<f64>, t_final: f64) -> f64 {
    let d0 = x0.norm().max(1e-5);
    let d1 = f0.norm();
    let h = if d1 > 1e-12 { 0.01 * d0 / d1 } else { 1e-3 * t_final };
    h.min(0.1 * t_final).max(1e-10 * t_final)
}

/// Integrate and keep every accepted step for later interpolation.
pub fn integrate(
    f: &impl Fn(&DVector<f64>) -> DVector<f64>,
    x0: &DVector<f64>,
    t_final: f64,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory> {
    let mut steps = vec![];
    integrate_with(f, x0, t_final, rtol, atol, |s| {
        steps.push(s.clone());
        ControlFlow::Continue(())
    })?;
    Ok(Trajectory { steps })
}

/// Endpoint of the flow map phi(x0, t_final).
pub fn propagate(
    f: &impl Fn(&DVector<f64>) -> DVector<f64>,
    x0: &DVector<f64>,
    t_final: f64,
    rtol: f64,
    atol: f64,
) -> Result<DVector<f64>> {
    let (_, x) = integrate_with(f, x0, t_final, rtol, atol, |_| ControlFlow::Continue(()))?;
    Ok(x)
}

/// Integrate the flow together with its variational equations
/// d/dt Phi = J(x) Phi, Phi(0) = I. Returns (x(t), Phi(t)).
pub fn propagate_variational(
    f: &impl Fn(&DVector<f64>) -> DVector<f64>,
    jac: &impl Fn(&DVector<f64>) -> DMatrix<f64>,
    x0: &DVector<f64>,
    t_final: f64,
    rtol: f64,
    atol: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = x0.len();
    let mut z0 = DVector::zeros(n + n * n);
    z0.rows_mut(0, n).copy_from(x0);
    for i in 0..n {
        z0[n + i * n + i] = 1.0;
    }
    let aug = |z: &DVector<f64>| -> DVector<f64> {
        let x = z.rows(0, n).into_owned();
        let fx = f(&x);
        let j = jac(&x);
        let mut out = DVector::zeros(n + n * n);
        out.rows_mut(0, n).copy_from(&fx);
        // columns of Phi evolve by J Phi
        for col in 0..n {
            let phi_col = z.rows(n + col * n, n).into_owned();
            out.rows_mut(n + col * n, n).copy_from(&(&j * phi_col));
        }
        out
    };
    let z = propagate(&aug, &z0, t_final, rtol, atol)?;
    let x = z.rows(0, n).into_owned();
    let mut phi = DMatrix::zeros(n, n);
    for col in 0..n {
        phi.set_column(col, &z.rows(n + col * n, n));
    }
    Ok((x, phi))
}

/// Central finite-difference Jacobian of an autonomous field.
pub fn fd_jacobian(
    f: &impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
) -> DMatrix<f64> {
    let n = x.len();
    let mut j = DMatrix::zeros(n, n);
    for col in 0..n {
        let h = 6e-6 * (1.0 + x[col].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[col] += h;
        xm[col] -= h;
        let df = (f(&xp) - f(&xm)) / (2.0 * h);
        j.set_column(col, &df);
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_field_stays_put() {
        let f = |_: &DVector<f64>| DVector::from_vec(vec![0.0, 0.0]);
        let x0 = DVector::from_vec(vec![1.0, -2.0]);
        let x = propagate(&f, &x0, 1.0, 1e-10, 1e-12).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn exponential_growth() {
        let f = |x: &DVector<f64>| x.clone();
        let x0 = DVector::from_vec(vec![1.0]);
        let x = propagate(&f, &x0, 1.0, 1e-12, 1e-14).unwrap();
        assert_relative_eq!(x[0], std::f64::consts::E, epsilon = 1e-8);
    }

    #[test]
    fn hopf_attracts_to_unit_circle() {
        let f = |x: &DVector<f64>| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            DVector::from_vec(vec![x[0] * (1.0 - r2) - x[1], x[1] * (1.0 - r2) + x[0]])
        };
        let x0 = DVector::from_vec(vec![2.0, 0.0]);
        let x = propagate(&f, &x0, 30.0, 1e-10, 1e-12).unwrap();
        assert_relative_eq!(x.norm(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn dense_output_matches_closed_form() {
        let f = |x: &DVector<f64>| x.clone();
        let x0 = DVector::from_vec(vec![1.0]);
        let traj = integrate(&f, &x0, 1.0, 1e-10, 1e-12).unwrap();
        for &t in &[0.1, 0.33, 0.77, 0.95] {
            assert_relative_eq!(traj.sample(t)[0], t.exp(), epsilon = 1e-6);
        }
    }

    #[test]
    fn variational_matches_linear_flow() {
        // dx/dt = A x with rotation generator: Phi(t) = rotation matrix
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let f = {
            let a = a.clone();
            move |x: &DVector<f64>| &a * x
        };
        let jac = move |_: &DVector<f64>| a.clone();
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        let t = 0.7;
        let (_, phi) = propagate_variational(&f, &jac, &x0, t, 1e-12, 1e-14).unwrap();
        assert_relative_eq!(phi[(0, 0)], t.cos(), epsilon = 1e-9);
        assert_relative_eq!(phi[(1, 0)], t.sin(), epsilon = 1e-9);
        assert_relative_eq!(phi[(0, 1)], -t.sin(), epsilon = 1e-9);
    }

    #[test]
    fn fd_jacobian_of_polynomial_field() {
        let f = |x: &DVector<f64>| DVector::from_vec(vec![x[0] * x[0] + x[1], 3.0 * x[1]]);
        let x = DVector::from_vec(vec![2.0, -1.0]);
        let j = fd_jacobian(&f, &x);
        assert_relative_eq!(j[(0, 0)], 4.0, epsilon = 1e-7);
        assert_relative_eq!(j[(0, 1)], 1.0, epsilon = 1e-7);
        assert_relative_eq!(j[(1, 1)], 3.0, epsilon = 1e-7);
    }

    #[test]
    fn blow_up_reports_step_failure() {
        // dx/dt = x^2 from 1 blows up at t = 1
        let f = |x: &DVector<f64>| DVector::from_vec(vec![x[0] * x[0]]);
        let x0 = DVector::from_vec(vec![1.0]);
        let r = propagate(&f, &x0, 2.0, 1e-8, 1e-10);
        assert!(matches!(r, Err(EquifullerError::StepFailure { .. })));
    }
}
