//! Equivariant fixed point indices of disc return maps: stratumwise signs of
//! det(I - DP) and the normalization through the table of marks that turns
//! the stratum counts into Burnside-module coordinates.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::dynamics::PoincareSystem;
use crate::error::{EquifullerError, Result};
use crate::group::{bits, ElementSet, IsotropyLattice, OrthogonalAction};
use crate::tomdieck::TomDieckVector;

/// Determinants closer to zero than this are treated as degenerate.
pub const TOL_DET: f64 = 1e-8;

/// A fixed point of the pointwise return map, with its local data.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    /// Ambient coordinates of the fixed point.
    pub point: DVector<f64>,
    /// Disc copy containing it.
    pub copy_index: usize,
    /// Jacobian of the pointwise return map in that copy's disc coordinates.
    pub dp: DMatrix<f64>,
    /// Pointwise isotropy of the ambient point.
    pub stabilizer: ElementSet,
}

/// Per-class diagnostic emitted alongside the normalized index.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StratumIndexReport {
    pub class_id: usize,
    pub class_name: String,
    /// Fixed points on the (K)-fixed stratum.
    pub fixed_count: usize,
    /// Stratumwise fixed point index I_K.
    pub index: i64,
    /// Normalized Burnside coordinate n_K.
    pub coefficient: String,
}

/// Index sign det(I - A) of a hyperbolic fixed point restricted to an
/// invariant subspace spanned by the orthonormal columns of `basis`.
pub fn local_index_on_stratum(dp: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<i64> {
    let d = basis.ncols();
    if d == 0 {
        // zero-dimensional stratum: the empty determinant is +1
        return Ok(1);
    }
    let n = dp.nrows();
    let restricted = basis.transpose() * (DMatrix::identity(n, n) - dp) * basis;
    let det = restricted.determinant();
    if det.abs() < TOL_DET {
        return Err(EquifullerError::DegenerateFixedPoint(det));
    }
    Ok(if det > 0.0 { 1 } else { -1 })
}

/// Orthonormal basis of the subspace fixed by a set of orthogonal matrices,
/// via the spectral projector of their average.
pub fn fixed_subspace_of(mats: &[DMatrix<f64>], dim: usize) -> DMatrix<f64> {
    if mats.is_empty() {
        return DMatrix::identity(dim, dim);
    }
    let mut avg = DMatrix::zeros(dim, dim);
    for m in mats {
        avg += m;
    }
    avg /= mats.len() as f64;
    // symmetrize before the eigensolve; the average of orthogonal matrices
    // over a group is already a projector but carries roundoff
    let sym = (&avg + avg.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let cols: Vec<_> = (0..dim)
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    DMatrix::from_columns(&cols.iter().map(|c| c.clone()).collect::<Vec<_>>())
}

/// Disc-coordinate matrices of the subgroup `k_rep` on the copy, valid when
/// every element of `k_rep` maps the copy to itself.
fn disc_matrices(
    psys: &PoincareSystem,
    action: &OrthogonalAction,
    copy_index: usize,
    k_rep: ElementSet,
) -> Vec<DMatrix<f64>> {
    bits(k_rep)
        .map(|h| psys.disc_action(action, h, copy_index, copy_index))
        .collect()
}

/// Stratumwise fixed point counts I_K for every class, computed with the
/// fixed class representative (fixed points whose stabilizer does not contain
/// the representative belong to a conjugate stratum and are skipped; the
/// counts are conjugation invariant).
pub fn stratum_indices(
    lattice: &IsotropyLattice,
    action: &OrthogonalAction,
    psys: &PoincareSystem,
    fixed_points: &[FixedPoint],
) -> Result<Vec<(i64, usize)>> {
    let mut out = Vec::with_capacity(lattice.len());
    for class in lattice.classes() {
        let k_rep = class.representative;
        let mut total = 0i64;
        let mut count = 0usize;
        for fp in fixed_points {
            if k_rep & fp.stabilizer != k_rep {
                continue;
            }
            let mats = disc_matrices(psys, action, fp.copy_index, k_rep);
            let basis = fixed_subspace_of(&mats, fp.dp.nrows());
            total += local_index_on_stratum(&fp.dp, &basis)?;
            count += 1;
        }
        out.push((total, count));
    }
    Ok(out)
}

/// Solve the mark-homomorphism system sum_L n_L m[K][L] = I_K over exact
/// rationals. The marks matrix is triangular in the class order (largest
/// subgroups first) with Weyl orders on the diagonal, so forward elimination
/// from the trivial class upward suffices.
pub fn normalize_by_marks(lattice: &IsotropyLattice, stratum: &[i64]) -> Result<TomDieckVector> {
    let n = lattice.len();
    assert_eq!(stratum.len(), n);
    let marks = lattice.marks();
    let mut coeffs = vec![BigRational::zero(); n];
    // row K only involves columns L with (K) <= (L), i.e. L <= K in the sort,
    // so each row introduces exactly one new unknown
    for k in 0..n {
        let mut acc = BigRational::from(BigInt::from(stratum[k]));
        for l in 0..k {
            if marks[k][l] != 0 {
                acc -= BigRational::from(BigInt::from(marks[k][l])) * &coeffs[l];
            }
        }
        coeffs[k] = acc / BigRational::from(BigInt::from(marks[k][k]));
    }
    for (k, c) in coeffs.iter().enumerate() {
        if !c.is_integer() {
            return Err(EquifullerError::NonIntegralSolution {
                class: lattice.class(k).name.clone(),
                value: format!("{c}"),
            });
        }
    }
    let pairs: Vec<(usize, BigRational)> = coeffs
        .into_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .collect();
    Ok(TomDieckVector::from_coeffs(lattice, pairs))
}

/// Full equivariant fixed point index of the return map from its fixed point
/// data: stratum counts, marks normalization, and per-class diagnostics.
pub fn equivariant_index(
    lattice: &Arc<IsotropyLattice>,
    action: &OrthogonalAction,
    psys: &PoincareSystem,
    fixed_points: &[FixedPoint],
) -> Result<(TomDieckVector, Vec<StratumIndexReport>)> {
    let stratum = stratum_indices(lattice, action, psys, fixed_points)?;
    let counts: Vec<i64> = stratum.iter().map(|s| s.0).collect();
    let vector = normalize_by_marks(lattice, &counts)?;
    let reports = lattice
        .classes()
        .iter()
        .enumerate()
        .map(|(k, class)| StratumIndexReport {
            class_id: k,
            class_name: class.name.clone(),
            fixed_count: stratum[k].1,
            index: stratum[k].0,
            coefficient: crate::tomdieck::rational_string(&vector.project(k)),
        })
        .collect();
    Ok((vector, reports))
}
