//! Finite group structure, orthogonal actions, the isotropy-class lattice
//! and table-of-marks combinatorics.

use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{EquifullerError, Result};

/// Default cap on the group order accepted by the subgroup enumerator.
pub const GROUP_ORDER_CAP: usize = 64;

/// A subgroup given as a bitset of element indices (order <= 64).
pub type ElementSet = u64;

/// A finite group given by an explicit multiplication table.
#[derive(Debug, Clone)]
pub struct FiniteGroup {
    order: usize,
    mul: Vec<Vec<usize>>,
    identity: usize,
    inv: Vec<usize>,
    names: Vec<String>,
}

impl FiniteGroup {
    /// Build a group from a multiplication table, checking the axioms exhaustively.
    pub fn from_table(mul: Vec<Vec<usize>>, names: Option<Vec<String>>) -> Result<Self> {
        let order = mul.len();
        if order == 0 {
            return Err(EquifullerError::InvalidGroup("empty table".into()));
        }
        for row in &mul {
            if row.len() != order || row.iter().any(|&x| x >= order) {
                return Err(EquifullerError::InvalidGroup(
                    "table is not square or has out-of-range entries".into(),
                ));
            }
        }
        // two-sided identity
        let identity = (0..order)
            .find(|&e| (0..order).all(|g| mul[e][g] == g && mul[g][e] == g))
            .ok_or_else(|| EquifullerError::InvalidGroup("no two-sided identity".into()))?;
        // inverses
        let mut inv = vec![usize::MAX; order];
        for g in 0..order {
            match (0..order).find(|&h| mul[g][h] == identity && mul[h][g] == identity) {
                Some(h) => inv[g] = h,
                None => {
                    return Err(EquifullerError::InvalidGroup(format!(
                        "element {g} has no inverse"
                    )))
                }
            }
        }
        // associativity
        for a in 0..order {
            for b in 0..order {
                for c in 0..order {
                    if mul[mul[a][b]][c] != mul[a][mul[b][c]] {
                        return Err(EquifullerError::InvalidGroup(format!(
                            "associativity fails at ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        let names = names.unwrap_or_else(|| (0..order).map(|g| format!("g{g}")).collect());
        if names.len() != order {
            return Err(EquifullerError::InvalidGroup(
                "names length does not match order".into(),
            ));
        }
        Ok(Self {
            order,
            mul,
            identity,
            inv,
            names,
        })
    }

    pub fn trivial() -> Self {
        Self::from_table(vec![vec![0]], Some(vec!["e".into()])).unwrap()
    }

    /// Cyclic group Z_n, element i acting as rotation by i steps.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(EquifullerError::InvalidGroup("cyclic(0)".into()));
        }
        let mul = (0..n).map(|i| (0..n).map(|j| (i + j) % n).collect()).collect();
        let names = (0..n)
            .map(|i| if i == 0 { "e".into() } else { format!("r{i}") })
            .collect();
        Self::from_table(mul, Some(names))
    }

    /// Dihedral group D_n of order 2n. Elements 0..n are rotations r^i,
    /// elements n..2n are reflections s r^i.
    pub fn dihedral(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(EquifullerError::InvalidGroup("dihedral(0)".into()));
        }
        let order = 2 * n;
        let mut mul = vec![vec![0usize; order]; order];
        for i in 0..order {
            for j in 0..order {
                let (ri, fi) = (i % n, i >= n);
                let (rj, fj) = (j % n, j >= n);
                // (s^fi r^ri)(s^fj r^rj) = s^(fi+fj) r^(±ri + rj)
                let r = if fj { (n + rj - ri % n) % n } else { (ri + rj) % n };
                let f = fi ^ fj;
                mul[i][j] = if f { n + r } else { r };
            }
        }
        let names = (0..order)
            .map(|i| {
                let (r, f) = (i % n, i >= n);
                match (f, r) {
                    (false, 0) => "e".into(),
                    (false, r) => format!("r{r}"),
                    (true, 0) => "s".into(),
                    (true, r) => format!("sr{r}"),
                }
            })
            .collect();
        Self::from_table(mul, Some(names))
    }

    /// Symmetric group S_n for n <= 4, elements are permutations in lexicographic order.
    pub fn symmetric(n: usize) -> Result<Self> {
        if n == 0 || n > 4 {
            return Err(EquifullerError::InvalidGroup(format!(
                "symmetric({n}) unsupported (need 1 <= n <= 4)"
            )));
        }
        let perms = permutations(n);
        let index: HashMap<Vec<usize>, usize> =
            perms.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let order = perms.len();
        let mut mul = vec![vec![0usize; order]; order];
        for (i, p) in perms.iter().enumerate() {
            for (j, q) in perms.iter().enumerate() {
                // (p ∘ q)(x) = p(q(x))
                let comp: Vec<usize> = (0..n).map(|x| p[q[x]]).collect();
                mul[i][j] = index[&comp];
            }
        }
        let names = perms
            .iter()
            .map(|p| {
                let s: Vec<String> = p.iter().map(|x| (x + 1).to_string()).collect();
                format!("[{}]", s.join(""))
            })
            .collect();
        Self::from_table(mul, Some(names))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.mul[g][h]
    }

    pub fn inv(&self, g: usize) -> usize {
        self.inv[g]
    }

    pub fn name(&self, g: usize) -> &str {
        &self.names[g]
    }

    pub fn elements(&self) -> impl Iterator<Item = usize> {
        0..self.order
    }

    /// Closure of a generating bitset under multiplication.
    pub fn closure(&self, generators: ElementSet) -> ElementSet {
        let mut set = generators | (1 << self.identity);
        loop {
            let mut next = set;
            for a in bits(set) {
                for b in bits(set) {
                    next |= 1 << self.mul[a][b];
                }
            }
            if next == set {
                return set;
            }
            set = next;
        }
    }

    /// Conjugate subgroup g H g^{-1}.
    pub fn conjugate_set(&self, h: ElementSet, g: usize) -> ElementSet {
        let mut out = 0u64;
        for x in bits(h) {
            out |= 1 << self.mul[self.mul[g][x]][self.inv[g]];
        }
        out
    }

    /// Is the bitset closed under multiplication and inverse (and contains e)?
    pub fn is_subgroup(&self, h: ElementSet) -> bool {
        if h & (1 << self.identity) == 0 {
            return false;
        }
        for a in bits(h) {
            if h & (1 << self.inv[a]) == 0 {
                return false;
            }
            for b in bits(h) {
                if h & (1 << self.mul[a][b]) == 0 {
                    return false;
                }
            }
        }
        true
    }

    /// Normalizer N(H) = {g : gHg^{-1} = H} as a bitset.
    pub fn normalizer(&self, h: ElementSet) -> ElementSet {
        let mut out = 0u64;
        for g in self.elements() {
            if self.conjugate_set(h, g) == h {
                out |= 1 << g;
            }
        }
        out
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut items: Vec<usize> = (0..n).collect();
    permute(&mut items, 0, &mut out);
    out.sort();
    out
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Iterate the set bits of a bitset.
pub fn bits(set: ElementSet) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| set & (1 << i) != 0)
}

pub fn set_len(set: ElementSet) -> usize {
    set.count_ones() as usize
}

/// One conjugacy class of subgroups.
#[derive(Debug, Clone)]
pub struct SubgroupClass {
    pub class_id: usize,
    /// Representative subgroup as a bitset of element indices.
    pub representative: ElementSet,
    pub subgroup_order: usize,
    pub normalizer_order: usize,
    pub weyl_order: usize,
    pub name: String,
    /// All subgroups in the class.
    pub members: Vec<ElementSet>,
}

/// The lattice of conjugacy classes of subgroups with partial order and marks.
#[derive(Debug, Clone)]
pub struct IsotropyLattice {
    group: FiniteGroup,
    classes: Vec<SubgroupClass>,
    /// leq[h][k] <=> (H_h) <= (K_k).
    leq: Vec<Vec<bool>>,
    /// marks[k][l] = |(G/L_l)^{K_k}|.
    marks: Vec<Vec<i64>>,
    /// Subgroup bitset -> class id.
    class_of: HashMap<ElementSet, usize>,
    fingerprint: u64,
}

impl IsotropyLattice {
    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn classes(&self) -> &[SubgroupClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class(&self, id: usize) -> &SubgroupClass {
        &self.classes[id]
    }

    /// (H) <= (K): some conjugate of H is contained in K.
    pub fn class_leq(&self, h: usize, k: usize) -> bool {
        self.leq[h][k]
    }

    pub fn marks(&self) -> &Vec<Vec<i64>> {
        &self.marks
    }

    /// Class of a subgroup bitset, if it is one of the enumerated subgroups.
    pub fn class_of_subgroup(&self, h: ElementSet) -> Option<usize> {
        self.class_of.get(&h).copied()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Class id of the full group G.
    pub fn class_of_group(&self) -> usize {
        // full group sorts first
        debug_assert_eq!(self.classes[0].subgroup_order, self.group.order());
        0
    }

    /// Class id of the trivial subgroup.
    pub fn class_of_trivial(&self) -> usize {
        self.classes.len() - 1
    }
}

/// Enumerate all subgroups of `group` (bitsets), by closure of extended generating sets.
pub fn enumerate_subgroups(group: &FiniteGroup) -> Result<Vec<ElementSet>> {
    if group.order() > GROUP_ORDER_CAP {
        return Err(EquifullerError::GroupTooLarge(group.order(), GROUP_ORDER_CAP));
    }
    let trivial: ElementSet = 1 << group.identity();
    let mut known: BTreeSet<ElementSet> = BTreeSet::new();
    known.insert(trivial);
    let mut frontier = vec![trivial];
    while let Some(h) = frontier.pop() {
        for g in group.elements() {
            if h & (1 << g) != 0 {
                continue;
            }
            let extended = group.closure(h | (1 << g));
            if known.insert(extended) {
                frontier.push(extended);
            }
        }
    }
    Ok(known.into_iter().collect())
}

/// Build the isotropy lattice: conjugacy classes, partial order and table of marks.
pub fn enumerate_subgroup_classes(group: &FiniteGroup) -> Result<IsotropyLattice> {
    let subgroups = enumerate_subgroups(group)?;
    let mut remaining: BTreeSet<ElementSet> = subgroups.iter().copied().collect();
    let mut raw_classes: Vec<Vec<ElementSet>> = vec![];
    while let Some(&h) = remaining.iter().next() {
        let mut members: BTreeSet<ElementSet> = BTreeSet::new();
        for g in group.elements() {
            members.insert(group.conjugate_set(h, g));
        }
        for m in &members {
            remaining.remove(m);
        }
        raw_classes.push(members.into_iter().collect());
    }
    // Sort by decreasing subgroup order, ties broken by the smallest member bitset
    // so the ordering is deterministic.
    raw_classes.sort_by_key(|members| (std::cmp::Reverse(set_len(members[0])), members[0]));

    let mut classes = Vec::with_capacity(raw_classes.len());
    let mut class_of = HashMap::new();
    for (class_id, members) in raw_classes.into_iter().enumerate() {
        let representative = members[0];
        let subgroup_order = set_len(representative);
        let normalizer_order = set_len(group.normalizer(representative));
        let weyl_order = normalizer_order / subgroup_order;
        for &m in &members {
            class_of.insert(m, class_id);
        }
        let name = class_name(group, representative, subgroup_order);
        classes.push(SubgroupClass {
            class_id,
            representative,
            subgroup_order,
            normalizer_order,
            weyl_order,
            name,
            members,
        });
    }

    let n = classes.len();
    let mut leq = vec![vec![false; n]; n];
    for h in 0..n {
        for k in 0..n {
            leq[h][k] = classes[h]
                .members
                .iter()
                .any(|&m| m & classes[k].representative == m);
        }
    }

    let mut marks = vec![vec![0i64; n]; n];
    for k in 0..n {
        for l in 0..n {
            marks[k][l] = count_fixed_cosets(group, classes[k].representative, classes[l].representative);
        }
    }

    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    group.order().hash(&mut hasher);
    for c in &classes {
        c.representative.hash(&mut hasher);
        c.subgroup_order.hash(&mut hasher);
    }
    marks.hash(&mut hasher);
    let fingerprint = hasher.finish();

    Ok(IsotropyLattice {
        group: group.clone(),
        classes,
        leq,
        marks,
        class_of,
        fingerprint,
    })
}

/// m[K][L] = #{gL in G/L : g^{-1} K g ⊆ L}, by direct coset counting.
pub fn count_fixed_cosets(group: &FiniteGroup, k: ElementSet, l: ElementSet) -> i64 {
    let mut seen: BTreeSet<ElementSet> = BTreeSet::new();
    let mut count = 0i64;
    for g in group.elements() {
        let coset: ElementSet = bits(l).fold(0u64, |acc, x| acc | (1 << group.mul(g, x)));
        if !seen.insert(coset) {
            continue;
        }
        // K fixes gL iff g^{-1} K g ⊆ L
        let conj = group.conjugate_set(k, group.inv(g));
        if conj & l == conj {
            count += 1;
        }
    }
    count
}

fn class_name(group: &FiniteGroup, rep: ElementSet, order: usize) -> String {
    if order == 1 {
        return "(e)".into();
    }
    if order == group.order() {
        return "(G)".into();
    }
    // cyclic subgroups get a Z_n label, others a generic one
    let cyclic = bits(rep).any(|g| group.closure(1 << g) == rep);
    if cyclic {
        format!("(Z{order})")
    } else {
        let names: Vec<&str> = bits(rep).map(|g| group.name(g)).collect();
        format!("({})", names.join(","))
    }
}

/// An orthogonal representation of a finite group on R^n.
#[derive(Debug, Clone)]
pub struct OrthogonalAction {
    group: FiniteGroup,
    dim: usize,
    matrices: Vec<DMatrix<f64>>,
}

const ACTION_TOL: f64 = 1e-12;

impl OrthogonalAction {
    pub fn new(group: FiniteGroup, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if matrices.len() != group.order() {
            return Err(EquifullerError::InvalidAction(
                "one matrix per group element required".into(),
            ));
        }
        let dim = matrices[0].nrows();
        for (g, m) in matrices.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(EquifullerError::InvalidAction(format!(
                    "matrix {g} is not {dim}x{dim}"
                )));
            }
            let defect = (m.transpose() * m - DMatrix::identity(dim, dim)).amax();
            if defect >= ACTION_TOL {
                return Err(EquifullerError::InvalidAction(format!(
                    "matrix {g} is not orthogonal (defect {defect:.3e})"
                )));
            }
        }
        let id_defect = (&matrices[group.identity()] - DMatrix::identity(dim, dim)).amax();
        if id_defect >= ACTION_TOL {
            return Err(EquifullerError::InvalidAction(
                "identity element does not map to the identity matrix".into(),
            ));
        }
        for g in group.elements() {
            for h in group.elements() {
                let defect = (&matrices[g] * &matrices[h] - &matrices[group.mul(g, h)]).amax();
                if defect >= ACTION_TOL {
                    return Err(EquifullerError::InvalidAction(format!(
                        "homomorphism fails at ({g}, {h}) with defect {defect:.3e}"
                    )));
                }
            }
        }
        Ok(Self { group, dim, matrices })
    }

    /// Trivial action of any group on R^dim.
    pub fn trivial(group: FiniteGroup, dim: usize) -> Self {
        let matrices = (0..group.order()).map(|_| DMatrix::identity(dim, dim)).collect();
        Self::new(group, matrices).unwrap()
    }

    /// Antipodal Z_2 action on R^dim: the non-identity element acts as -I.
    pub fn antipodal(dim: usize) -> Self {
        let group = FiniteGroup::cyclic(2).unwrap();
        let matrices = vec![
            DMatrix::identity(dim, dim),
            -DMatrix::<f64>::identity(dim, dim),
        ];
        Self::new(group, matrices).unwrap()
    }

    /// Z_2 on R^dim by flipping the sign of the last coordinate.
    pub fn reflection_last_axis(dim: usize) -> Self {
        let group = FiniteGroup::cyclic(2).unwrap();
        let mut refl = DMatrix::identity(dim, dim);
        refl[(dim - 1, dim - 1)] = -1.0;
        Self::new(group, vec![DMatrix::identity(dim, dim), refl]).unwrap()
    }

    /// Z_n acting on n planar blocks of R^{2n} by cyclic block shift.
    pub fn cyclic_block_shift(n: usize) -> Result<Self> {
        let group = FiniteGroup::cyclic(n)?;
        let dim = 2 * n;
        let matrices = (0..n)
            .map(|s| {
                let mut m = DMatrix::zeros(dim, dim);
                for block in 0..n {
                    let target = (block + s) % n;
                    m[(2 * target, 2 * block)] = 1.0;
                    m[(2 * target + 1, 2 * block + 1)] = 1.0;
                }
                m
            })
            .collect();
        Self::new(group, matrices)
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self, g: usize) -> &DMatrix<f64> {
        &self.matrices[g]
    }

    pub fn apply(&self, g: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.matrices[g] * x
    }

    /// Orthonormal basis of the H-fixed subspace V^H, from the averaged projector.
    pub fn fixed_subspace(&self, h: ElementSet) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.dim, self.dim);
        let count = set_len(h) as f64;
        for g in bits(h) {
            p += &self.matrices[g];
        }
        p /= count;
        // P is a symmetric projector; eigenvalues are 0 or 1 in exact arithmetic.
        let eig = nalgebra::SymmetricEigen::new(p);
        let cols: Vec<usize> = (0..self.dim).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        let mut basis = DMatrix::zeros(self.dim, cols.len());
        for (j, &i) in cols.iter().enumerate() {
            basis.set_column(j, &eig.eigenvectors.column(i));
        }
        basis
    }

    /// The subgroup {g : |M(g) x - x| < tol} with an ambiguity guard band.
    pub fn isotropy_of_point(&self, x: &DVector<f64>, tol: f64) -> Result<ElementSet> {
        let mut set = 0u64;
        for g in self.group.elements() {
            let residual = (self.apply(g, x) - x).norm();
            if residual < tol {
                set |= 1 << g;
            } else if residual < 10.0 * tol {
                return Err(EquifullerError::AmbiguousIsotropy { residual, tol });
            }
        }
        if !self.group.is_subgroup(set) {
            return Err(EquifullerError::AmbiguousIsotropy { residual: tol, tol });
        }
        Ok(set)
    }

    /// Isotropy class of a point, against the lattice.
    pub fn isotropy_class_of_point(
        &self,
        lattice: &IsotropyLattice,
        x: &DVector<f64>,
        tol: f64,
    ) -> Result<usize> {
        let set = self.isotropy_of_point(x, tol)?;
        lattice
            .class_of_subgroup(set)
            .ok_or(EquifullerError::AmbiguousIsotropy { residual: tol, tol })
    }
}

/// JSON-facing group description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSpec {
    Builtin {
        builtin: String,
        #[serde(default)]
        n: Option<usize>,
    },
    Table {
        order: usize,
        mul: Vec<Vec<usize>>,
        #[serde(default)]
        names: Option<Vec<String>>,
    },
}

impl GroupSpec {
    pub fn build(&self) -> Result<FiniteGroup> {
        match self {
            GroupSpec::Builtin { builtin, n } => {
                let n = n.unwrap_or(1);
                match builtin.as_str() {
                    "trivial" => Ok(FiniteGroup::trivial()),
                    "cyclic" => FiniteGroup::cyclic(n),
                    "dihedral" => FiniteGroup::dihedral(n),
                    "symmetric" => FiniteGroup::symmetric(n),
                    other => Err(EquifullerError::Config(format!("unknown builtin group {other}"))),
                }
            }
            GroupSpec::Table { order, mul, names } => {
                if mul.len() != *order {
                    return Err(EquifullerError::Config(
                        "mul table size does not match order".into(),
                    ));
                }
                FiniteGroup::from_table(mul.clone(), names.clone())
            }
        }
    }
}

/// JSON-facing action description: one row-major dim x dim block per element.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionSpec {
    pub matrices: Vec<Vec<Vec<f64>>>,
}

impl ActionSpec {
    pub fn build(&self, group: FiniteGroup) -> Result<OrthogonalAction> {
        let matrices = self
            .matrices
            .iter()
            .map(|rows| {
                let n = rows.len();
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            })
            .collect();
        OrthogonalAction::new(group, matrices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_two_has_two_classes() {
        let g = FiniteGroup::cyclic(2).unwrap();
        let lat = enumerate_subgroup_classes(&g).unwrap();
        assert_eq!(lat.len(), 2);
        assert_eq!(lat.class(0).subgroup_order, 2);
        assert_eq!(lat.class(1).subgroup_order, 1);
    }

    #[test]
    fn s3_has_four_classes() {
        let g = FiniteGroup::symmetric(3).unwrap();
        assert_eq!(g.order(), 6);
        let lat = enumerate_subgroup_classes(&g).unwrap();
        let orders: Vec<usize> = lat.classes().iter().map(|c| c.subgroup_order).collect();
        assert_eq!(orders, vec![6, 3, 2, 1]);
    }

    #[test]
    fn z4_has_three_classes() {
        let g = FiniteGroup::cyclic(4).unwrap();
        let lat = enumerate_subgroup_classes(&g).unwrap();
        let orders: Vec<usize> = lat.classes().iter().map(|c| c.subgroup_order).collect();
        assert_eq!(orders, vec![4, 2, 1]);
    }

    #[test]
    fn leq_reflexive_and_order_compatible() {
        for g in [
            FiniteGroup::cyclic(4).unwrap(),
            FiniteGroup::symmetric(3).unwrap(),
            FiniteGroup::dihedral(4).unwrap(),
        ] {
            let lat = enumerate_subgroup_classes(&g).unwrap();
            for h in 0..lat.len() {
                assert!(lat.class_leq(h, h));
                for k in 0..lat.len() {
                    if lat.class_leq(h, k) {
                        assert_eq!(lat.class(k).subgroup_order % lat.class(h).subgroup_order, 0);
                    }
                    // marks nonzero iff leq
                    assert_eq!(lat.marks()[h][k] != 0, lat.class_leq(h, k));
                }
            }
        }
    }

    #[test]
    fn s3_two_below_three_is_false() {
        let g = FiniteGroup::symmetric(3).unwrap();
        let lat = enumerate_subgroup_classes(&g).unwrap();
        let c2 = lat.classes().iter().find(|c| c.subgroup_order == 2).unwrap();
        let c3 = lat.classes().iter().find(|c| c.subgroup_order == 3).unwrap();
        assert!(!lat.class_leq(c2.class_id, c3.class_id));
        assert!(lat.class_leq(lat.class_of_trivial(), c3.class_id));
    }

    #[test]
    fn z2_marks_table() {
        let g = FiniteGroup::cyclic(2).unwrap();
        let lat = enumerate_subgroup_classes(&g).unwrap();
        // ordering [Z2, {e}]
        assert_eq!(lat.marks()[0], vec![1, 0]);
        assert_eq!(lat.marks()[1], vec![1, 2]);
    }

    #[test]
    fn trivial_class_marks_are_indices() {
        let g = FiniteGroup::symmetric(3).unwrap();
        let lat = enumerate_subgroup_classes(&g).unwrap();
        let e = lat.class_of_trivial();
        for l in 0..lat.len() {
            assert_eq!(
                lat.marks()[e][l] as usize,
                g.order() / lat.class(l).subgroup_order
            );
        }
        assert_eq!(lat.marks()[e][e], 6);
    }

    #[test]
    fn diagonal_marks_are_weyl_orders() {
        for g in [
            FiniteGroup::cyclic(6).unwrap(),
            FiniteGroup::symmetric(4).unwrap(),
            FiniteGroup::dihedral(4).unwrap(),
        ] {
            let lat = enumerate_subgroup_classes(&g).unwrap();
            for k in 0..lat.len() {
                assert_eq!(lat.marks()[k][k] as usize, lat.class(k).weyl_order);
            }
        }
    }

    #[test]
    fn fixed_subspace_sign_rep() {
        // sign representation of Z2 on R: nontrivial fixed space is empty
        let g = FiniteGroup::cyclic(2).unwrap();
        let action = OrthogonalAction::new(
            g,
            vec![DMatrix::identity(1, 1), -DMatrix::<f64>::identity(1, 1)],
        )
        .unwrap();
        let full = action.fixed_subspace(0b11);
        assert_eq!(full.ncols(), 0);
        let triv = action.fixed_subspace(0b01);
        assert_eq!(triv.ncols(), 1);
    }

    #[test]
    fn fixed_subspace_axis() {
        let action = OrthogonalAction::reflection_last_axis(2);
        let basis = action.fixed_subspace(0b11);
        assert_eq!(basis.ncols(), 1);
        assert!((basis[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!(basis[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn isotropy_of_points() {
        let action = OrthogonalAction::reflection_last_axis(2);
        let g = action.group().clone();
        let lat = enumerate_subgroup_classes(&g).unwrap();
        let origin = DVector::from_vec(vec![0.0, 0.0]);
        assert_eq!(
            action.isotropy_class_of_point(&lat, &origin, 1e-9).unwrap(),
            lat.class_of_group()
        );
        let axis = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(
            action.isotropy_class_of_point(&lat, &axis, 1e-9).unwrap(),
            lat.class_of_group()
        );
        let generic = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(
            action.isotropy_class_of_point(&lat, &generic, 1e-9).unwrap(),
            lat.class_of_trivial()
        );
    }

    #[test]
    fn ambiguous_isotropy_guard() {
        let action = OrthogonalAction::reflection_last_axis(2);
        let x = DVector::from_vec(vec![1.0, 5e-7]);
        // |M(g)x - x| = 1e-6, inside the [tol, 10 tol) band for tol = 5e-7
        assert!(matches!(
            action.isotropy_of_point(&x, 5e-7),
            Err(EquifullerError::AmbiguousIsotropy { .. })
        ));
    }

    #[test]
    fn fixed_subspace_nesting() {
        // (K) <= (H) implies V^H ⊆ V^K, checked by projector norms
        let g = FiniteGroup::dihedral(4).unwrap();
        // permutation-style action of D4 on R^2 as symmetries of the square
        let mut mats = vec![];
        for i in 0..8 {
            let (r, f) = (i % 4, i >= 4);
            let theta = std::f64::consts::FRAC_PI_2 * r as f64;
            let rot = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
            let refl = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
            mats.push(if f { refl * rot } else { rot });
        }
        let action = OrthogonalAction::new(g, mats).unwrap();
        let lat = enumerate_subgroup_classes(action.group()).unwrap();
        for h in 0..lat.len() {
            let rep_h = lat.class(h).representative;
            let bh = action.fixed_subspace(rep_h);
            for k in 0..lat.len() {
                // containment of fixed spaces holds for the conjugates actually
                // contained in H
                for &m in &lat.class(k).members {
                    if m & rep_h != m {
                        continue;
                    }
                    let bk = action.fixed_subspace(m);
                    for j in 0..bh.ncols() {
                        let v = bh.column(j).into_owned();
                        let proj = &bk * (bk.transpose() * &v);
                        assert!((proj - &v).norm() < 1e-10);
                    }
                }
            }
        }
    }
}
