//! Closed-form non-degeneracy checkers for equivariant branching on the two
//! classical low-dimensional actions: the reflection on the line and the
//! rotation action on the plane. The checkers decide whether a branch of
//! symmetric fixed points through the origin is forced to be non-degenerate
//! by the value or parameter derivatives of the reduced coefficient
//! functions.

use serde::Serialize;

pub const VALUE_TOL: f64 = 1e-8;
pub const DERIV_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Z2Verdict {
    /// h(0, lambda0) differs from 1: the branch is hyperbolic outright.
    #[serde(rename = "nondeg_via_h_ne_1")]
    NondegViaHNe1,
    /// h(0, lambda0) = 1 but some parameter derivative moves it.
    NondegViaParameter,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum S1Verdict {
    /// (a, b)(0, lambda0) differs from (1, 0): the linearization is not the
    /// identity rotation.
    NondegViaLinearization,
    /// Identity linearization, but the parameter Jacobian of (a, b) has a
    /// non-vanishing 2x2 minor.
    NondegViaRank2,
    Degenerate,
}

/// Richardson-refined central difference in the i-th parameter direction.
fn partial(f: &impl Fn(&[f64]) -> f64, lambda0: &[f64], i: usize, h: f64) -> f64 {
    let eval = |step: f64| {
        let mut lp = lambda0.to_vec();
        let mut lm = lambda0.to_vec();
        lp[i] += step;
        lm[i] -= step;
        (f(&lp) - f(&lm)) / (2.0 * step)
    };
    let d_h = eval(h);
    let d_h2 = eval(0.5 * h);
    // one Richardson step cancels the O(h^2) error of the central difference
    (4.0 * d_h2 - d_h) / 3.0
}

/// Criterion for the reflection action v -> -v on the line, for odd families
/// f(v, lambda) = v * h(v, lambda): the trivial branch v = 0 is
/// non-degenerate when h != 1 at the base parameter, or when the parameter
/// gradient of h is nonzero there.
pub fn z2_nondegenerate(
    h: impl Fn(f64, &[f64]) -> f64,
    lambda0: &[f64],
    fd_step: f64,
) -> Z2Verdict {
    assert!(fd_step > 0.0);
    let at_zero = |lam: &[f64]| h(0.0, lam);
    if (at_zero(lambda0) - 1.0).abs() > VALUE_TOL {
        return Z2Verdict::NondegViaHNe1;
    }
    let mut grad_norm2 = 0.0;
    for i in 0..lambda0.len() {
        let d = partial(&at_zero, lambda0, i, fd_step);
        grad_norm2 += d * d;
    }
    if grad_norm2.sqrt() > DERIV_TOL {
        Z2Verdict::NondegViaParameter
    } else {
        Z2Verdict::Degenerate
    }
}

/// Criterion for the rotation action on the plane, for families spanned by
/// the radial and angular generators with coefficients a and b: the origin
/// branch is non-degenerate when (a, b) != (1, 0) at the base parameter, or
/// when the s x 2 parameter Jacobian of (a, b) has a non-vanishing 2x2 minor
/// (which requires at least two parameters).
pub fn s1_nondegenerate(
    a_fn: impl Fn(f64, f64, &[f64]) -> f64,
    b_fn: impl Fn(f64, f64, &[f64]) -> f64,
    lambda0: &[f64],
    s: usize,
    fd_step: f64,
) -> S1Verdict {
    assert!(fd_step > 0.0);
    assert_eq!(s, lambda0.len());
    let a0 = |lam: &[f64]| a_fn(0.0, 0.0, lam);
    let b0 = |lam: &[f64]| b_fn(0.0, 0.0, lam);
    if (a0(lambda0) - 1.0).abs() > VALUE_TOL || b0(lambda0).abs() > VALUE_TOL {
        return S1Verdict::NondegViaLinearization;
    }
    if s < 2 {
        // a single parameter can never span the two transversality directions
        return S1Verdict::Degenerate;
    }
    let da: Vec<f64> = (0..s).map(|i| partial(&a0, lambda0, i, fd_step)).collect();
    let db: Vec<f64> = (0..s).map(|i| partial(&b0, lambda0, i, fd_step)).collect();
    for i in 0..s {
        for j in (i + 1)..s {
            let minor = da[i] * db[j] - da[j] * db[i];
            if minor.abs() > DERIV_TOL {
                return S1Verdict::NondegViaRank2;
            }
        }
    }
    S1Verdict::Degenerate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z2_parameter_unfolding() {
        let v = z2_nondegenerate(|_, lam| 1.0 + lam[0], &[0.0], 1e-4);
        assert_eq!(v, Z2Verdict::NondegViaParameter);
    }

    #[test]
    fn z2_flat_family_is_degenerate() {
        let v = z2_nondegenerate(|_, _| 1.0, &[0.0], 1e-4);
        assert_eq!(v, Z2Verdict::Degenerate);
    }

    #[test]
    fn z2_value_criterion() {
        let v = z2_nondegenerate(|_, _| 2.0, &[0.0], 1e-4);
        assert_eq!(v, Z2Verdict::NondegViaHNe1);
    }

    #[test]
    fn z2_verdict_is_reflection_invariant() {
        // replacing h(v, .) by h(-v, .) cannot change any verdict: the
        // checker only samples v = 0
        let h = |v: f64, lam: &[f64]| 1.0 + lam[0] + v * v;
        let direct = z2_nondegenerate(h, &[0.3], 1e-4);
        let pulled = z2_nondegenerate(|v, lam| h(-v, lam), &[0.3], 1e-4);
        assert_eq!(direct, pulled);
    }

    #[test]
    fn z2_nondegenerate_branch_admits_newton_continuation() {
        // f(v, lam) = v h(v, lam) with h = 1 + lam: for lam != 0 near 0 the
        // root v = 0 of f(v) - v has a non-singular 1-D Jacobian h - 1 != 0
        let h = |_v: f64, lam: &[f64]| 1.0 + lam[0];
        assert_eq!(z2_nondegenerate(h, &[0.0], 1e-4), Z2Verdict::NondegViaParameter);
        for lam in [-1e-2, 1e-2] {
            let f = |v: f64| v * h(v, &[lam]) - v;
            let df = (f(1e-6) - f(-1e-6)) / 2e-6;
            assert!(df.abs() > 1e-3, "singular continuation Jacobian at {lam}");
            // one Newton step from a perturbed start lands back on the branch
            let mut v = 1e-3;
            for _ in 0..6 {
                v -= f(v) / df;
            }
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn s1_single_parameter_identity_is_degenerate() {
        let v = s1_nondegenerate(|_, _, _| 1.0, |_, _, _| 0.0, &[0.0], 1, 1e-4);
        assert_eq!(v, S1Verdict::Degenerate);
    }

    #[test]
    fn s1_rank2_unfolding() {
        let v = s1_nondegenerate(
            |_, _, lam| 1.0 + lam[0],
            |_, _, lam| lam[1],
            &[0.0, 0.0],
            2,
            1e-4,
        );
        assert_eq!(v, S1Verdict::NondegViaRank2);
    }

    #[test]
    fn s1_linearization_criterion() {
        let v = s1_nondegenerate(|_, _, _| 0.5, |_, _, _| 0.0, &[0.0], 1, 1e-4);
        assert_eq!(v, S1Verdict::NondegViaLinearization);
    }

    #[test]
    fn s1_two_parameters_without_rank_stay_degenerate() {
        // both coefficient gradients parallel: every minor vanishes
        let v = s1_nondegenerate(
            |_, _, lam| 1.0 + lam[0] + lam[1],
            |_, _, lam| 2.0 * (lam[0] + lam[1]),
            &[0.0, 0.0],
            2,
            1e-4,
        );
        assert_eq!(v, S1Verdict::Degenerate);
    }

    #[test]
    fn richardson_refined_difference_accuracy() {
        // quartic test function: refined central difference error ~1e-9
        let f = |lam: &[f64]| (1.0 + lam[0]).powi(4);
        let d = partial(&f, &[0.2], 0, 1e-3);
        assert!((d - 4.0 * 1.2f64.powi(3)).abs() < 1e-9);
    }
}
