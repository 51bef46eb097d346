//! Exact-rational coefficient vectors over isotropy classes, the value type
//! of all indices. Only the additive Q-module structure is provided; the
//! Burnside ring product is deliberately absent.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{EquifullerError, Result};
use crate::group::IsotropyLattice;

/// A formal Q-linear combination of isotropy classes of a fixed lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TomDieckVector {
    lattice_fingerprint: u64,
    /// class_id -> coefficient; zero coefficients are never stored.
    coeffs: BTreeMap<usize, BigRational>,
}

impl TomDieckVector {
    pub fn zero(lattice: &IsotropyLattice) -> Self {
        Self {
            lattice_fingerprint: lattice.fingerprint(),
            coeffs: BTreeMap::new(),
        }
    }

    pub fn from_coeffs<I>(lattice: &IsotropyLattice, coeffs: I) -> Self
    where
        I: IntoIterator<Item = (usize, BigRational)>,
    {
        let mut v = Self::zero(lattice);
        for (class, q) in coeffs {
            assert!(class < lattice.len(), "class id out of range");
            if !q.is_zero() {
                v.coeffs.insert(class, q);
            }
        }
        v
    }

    pub fn single(lattice: &IsotropyLattice, class: usize, q: BigRational) -> Self {
        Self::from_coeffs(lattice, [(class, q)])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn lattice_fingerprint(&self) -> u64 {
        self.lattice_fingerprint
    }

    /// Coefficient of class (H), zero if absent.
    pub fn project(&self, class: usize) -> BigRational {
        self.coeffs.get(&class).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BigRational)> {
        self.coeffs.iter().map(|(&c, q)| (c, q))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.lattice_fingerprint != other.lattice_fingerprint {
            return Err(EquifullerError::LatticeMismatch);
        }
        let mut coeffs = self.coeffs.clone();
        for (&class, q) in &other.coeffs {
            let entry = coeffs.entry(class).or_insert_with(BigRational::zero);
            *entry += q;
            if entry.is_zero() {
                coeffs.remove(&class);
            }
        }
        Ok(Self {
            lattice_fingerprint: self.lattice_fingerprint,
            coeffs,
        })
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Self {
                lattice_fingerprint: self.lattice_fingerprint,
                coeffs: BTreeMap::new(),
            };
        }
        Self {
            lattice_fingerprint: self.lattice_fingerprint,
            coeffs: self.coeffs.iter().map(|(&c, v)| (c, v * q)).collect(),
        }
    }

    /// JSON object {"(class name)": "p/q"} with canonical sign on the numerator.
    pub fn to_json(&self, lattice: &IsotropyLattice) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (class, q) in &self.coeffs {
            map.insert(lattice.class(*class).name.clone(), serde_json::Value::String(rational_string(q)));
        }
        serde_json::Value::Object(map)
    }

    pub fn display<'a>(&'a self, lattice: &'a IsotropyLattice) -> TomDieckDisplay<'a> {
        TomDieckDisplay { vector: self, lattice }
    }
}

pub fn rational_string(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> BigRational {
    BigRational::from(BigInt::from(n))
}

pub fn is_integral(q: &BigRational) -> bool {
    q.denom().abs() == BigInt::from(1)
}

pub struct TomDieckDisplay<'a> {
    vector: &'a TomDieckVector,
    lattice: &'a IsotropyLattice,
}

impl fmt::Display for TomDieckDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.vector.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (class, q) in self.vector.iter() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}\u{b7}{}", q, self.lattice.class(class).name)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{enumerate_subgroup_classes, FiniteGroup};
    use proptest::prelude::*;

    fn z2_lattice() -> IsotropyLattice {
        enumerate_subgroup_classes(&FiniteGroup::cyclic(2).unwrap()).unwrap()
    }

    #[test]
    fn add_and_cancel() {
        let lat = z2_lattice();
        let e = lat.class_of_trivial();
        let one_e = TomDieckVector::single(&lat, e, rat_int(1));
        let two_e = one_e.add(&one_e).unwrap();
        assert_eq!(two_e.project(e), rat_int(2));

        let half = TomDieckVector::single(&lat, e, rat(1, 2));
        let neg_half = TomDieckVector::single(&lat, e, rat(-1, 2));
        assert!(half.add(&neg_half).unwrap().is_zero());
    }

    #[test]
    fn mixed_classes() {
        let lat = z2_lattice();
        let z2 = lat.class_of_group();
        let e = lat.class_of_trivial();
        let a = TomDieckVector::single(&lat, z2, rat_int(1));
        let b = TomDieckVector::single(&lat, e, rat(1, 3));
        let sum = a.add(&b).unwrap();
        assert_eq!(sum.project(z2), rat_int(1));
        assert_eq!(sum.project(e), rat(1, 3));
    }

    #[test]
    fn scale_cases() {
        let lat = z2_lattice();
        let e = lat.class_of_trivial();
        let two_e = TomDieckVector::single(&lat, e, rat_int(2));
        assert_eq!(two_e.scale(&rat(1, 2)).project(e), rat_int(1));
        assert!(two_e.scale(&BigRational::zero()).is_zero());
        let z2 = lat.class_of_group();
        let v = TomDieckVector::single(&lat, z2, rat_int(1));
        assert_eq!(v.scale(&rat(1, 3)).project(z2), rat(1, 3));
    }

    #[test]
    fn lattice_mismatch_is_an_error() {
        let lat2 = z2_lattice();
        let lat3 = enumerate_subgroup_classes(&FiniteGroup::cyclic(3).unwrap()).unwrap();
        let a = TomDieckVector::single(&lat2, 0, rat_int(1));
        let b = TomDieckVector::single(&lat3, 0, rat_int(1));
        assert!(matches!(a.add(&b), Err(EquifullerError::LatticeMismatch)));
    }

    #[test]
    fn project_absent_is_zero() {
        let lat = z2_lattice();
        let v = TomDieckVector::single(&lat, lat.class_of_trivial(), rat(1, 2));
        assert!(v.project(lat.class_of_group()).is_zero());
        assert!(TomDieckVector::zero(&lat).project(0).is_zero());
    }

    fn arb_vector() -> impl Strategy<Value = TomDieckVector> {
        proptest::collection::vec((0usize..2, -20i64..20, 1i64..10), 0..4).prop_map(|entries| {
            let lat = z2_lattice();
            let mut v = TomDieckVector::zero(&lat);
            for (c, n, d) in entries {
                v = v.add(&TomDieckVector::single(&lat, c, rat(n, d))).unwrap();
            }
            v
        })
    }

    proptest! {
        #[test]
        fn addition_abelian_group(a in arb_vector(), b in arb_vector(), c in arb_vector()) {
            let lat = z2_lattice();
            let ab_c = a.add(&b).unwrap().add(&c).unwrap();
            let a_bc = a.add(&b.add(&c).unwrap()).unwrap();
            prop_assert_eq!(&ab_c, &a_bc);
            prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
            prop_assert_eq!(a.add(&TomDieckVector::zero(&lat)).unwrap(), a.clone());
            prop_assert!(a.add(&a.scale(&rat_int(-1))).unwrap().is_zero());
        }
    }
}
