//! Axis-parallel boxes in ℤ^d with big-integer corners and exact boundary
//! counts, for Følner sets far too large to enumerate.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::groups::{box_elements, GroupElement, GroupError};

/// Inclusive box `[lo_1, hi_1] × … × [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxSet {
    pub lo: Vec<BigInt>,
    pub hi: Vec<BigInt>,
}

/// A finite subset of ℤ^d given either pointwise or as a box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Points(Vec<Vec<i64>>),
    Box(BoxSet),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error("inclusion-exclusion over {0} points exceeds the limit")]
    TooManyPoints(usize),
    #[error("dimension mismatch")]
    Dimension,
    #[error(transparent)]
    Group(#[from] GroupError),
}

const MAX_INCLUSION_EXCLUSION: usize = 20;

impl BoxSet {
    pub fn new(lo: Vec<BigInt>, hi: Vec<BigInt>) -> Self {
        assert_eq!(lo.len(), hi.len());
        BoxSet { lo, hi }
    }

    /// `[-r, r]^d`
    pub fn centered_cube(d: usize, r: &BigInt) -> Self {
        BoxSet::new(vec![-r.clone(); d], vec![r.clone(); d])
    }

    /// `[0, side-1]^d`
    pub fn corner_cube(d: usize, side: &BigInt) -> Self {
        BoxSet::new(vec![BigInt::zero(); d], vec![side - 1; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, j: usize) -> BigInt {
        let s: BigInt = &self.hi[j] - &self.lo[j] + 1;
        s.max(BigInt::zero())
    }

    pub fn len(&self) -> BigInt {
        (0..self.dim()).fold(BigInt::one(), |acc, j| acc * self.side(j))
    }

    pub fn is_empty(&self) -> bool {
        self.len().is_zero()
    }

    pub fn intersect(&self, other: &BoxSet) -> BoxSet {
        BoxSet::new(
            self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(b).clone()).collect(),
            self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(b).clone()).collect(),
        )
    }

    /// `self + v`
    pub fn shifted(&self, v: &[BigInt]) -> BoxSet {
        BoxSet::new(
            self.lo.iter().zip(v).map(|(a, b)| a + b).collect(),
            self.hi.iter().zip(v).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn contains_point(&self, p: &[i64]) -> bool {
        p.iter()
            .enumerate()
            .all(|(j, &x)| self.lo[j] <= BigInt::from(x) && BigInt::from(x) <= self.hi[j])
    }

    pub fn contains_box(&self, other: &BoxSet) -> bool {
        other.is_empty() || (0..self.dim()).all(|j| self.lo[j] <= other.lo[j] && other.hi[j] <= self.hi[j])
    }

    pub fn to_elements(&self, cap: usize) -> Result<Vec<GroupElement>, GroupError> {
        let lo: Option<Vec<i64>> = self.lo.iter().map(|x| x.to_i64()).collect();
        let hi: Option<Vec<i64>> = self.hi.iter().map(|x| x.to_i64()).collect();
        match (lo, hi) {
            (Some(lo), Some(hi)) => box_elements(&lo, &hi, cap),
            _ => Err(GroupError::Budget(cap)),
        }
    }
}

impl Shape {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Shape::Points(p) => p.first().map(Vec::len),
            Shape::Box(b) => Some(b.dim()),
        }
    }

    pub fn len(&self) -> BigInt {
        match self {
            Shape::Points(p) => BigInt::from(p.len()),
            Shape::Box(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len().is_zero()
    }

    /// Per-coordinate minimum and maximum.
    fn extent(&self) -> Option<(Vec<BigInt>, Vec<BigInt>)> {
        match self {
            Shape::Box(b) if !b.is_empty() => Some((b.lo.clone(), b.hi.clone())),
            Shape::Box(_) => None,
            Shape::Points(p) => {
                let d = p.first()?.len();
                let lo = (0..d).map(|j| BigInt::from(p.iter().map(|v| v[j]).min().unwrap())).collect();
                let hi = (0..d).map(|j| BigInt::from(p.iter().map(|v| v[j]).max().unwrap())).collect();
                Some((lo, hi))
            }
        }
    }

    /// Largest `|x_j|` over the shape.
    pub fn sup_norm(&self) -> BigInt {
        match self.extent() {
            None => BigInt::zero(),
            Some((lo, hi)) => lo.iter().chain(&hi).map(|x| x.abs()).max().unwrap_or_default(),
        }
    }

    pub fn contains_point(&self, p: &[i64]) -> bool {
        match self {
            Shape::Points(pts) => pts.iter().any(|q| q.as_slice() == p),
            Shape::Box(b) => b.contains_point(p),
        }
    }

    /// `self ⊆ other`
    pub fn subset_of(&self, other: &Shape) -> bool {
        match (self, other) {
            (Shape::Points(p), _) => p.iter().all(|q| other.contains_point(q)),
            (Shape::Box(a), Shape::Box(b)) => b.contains_box(a),
            (Shape::Box(a), Shape::Points(_)) => a.len() <= other.len() && {
                match a.to_elements(1 << 20) {
                    Ok(el) => el.iter().all(|g| other.contains_point(g.as_vector().unwrap())),
                    Err(_) => false,
                }
            },
        }
    }
}

fn big(v: &[i64]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

fn neg(v: &[BigInt]) -> Vec<BigInt> {
    v.iter().map(|x| -x).collect()
}

/// `|{g ∈ K : g + t ∈ K for all t ∈ T}|` via the per-coordinate extent of `T`.
fn inner_count(k: &BoxSet, t: &Shape) -> BigInt {
    match t.extent() {
        None => k.len(),
        Some((tlo, thi)) => {
            let mut shrunk = BoxSet::new(
                k.lo.iter().zip(&tlo).map(|(a, m)| a - m).collect(),
                k.hi.iter().zip(&thi).map(|(a, m)| a - m).collect(),
            );
            shrunk = shrunk.intersect(k);
            shrunk.len()
        }
    }
}

/// Same count by intersecting the translates `K - t` one at a time.
fn inner_count_iterative(k: &BoxSet, t: &Shape) -> Result<BigInt, ShapeError> {
    match t {
        Shape::Points(p) => {
            let mut acc = k.clone();
            for q in p {
                acc = acc.intersect(&k.shifted(&neg(&big(q))));
            }
            Ok(acc.len())
        }
        Shape::Box(b) => {
            if b.is_empty() {
                return Ok(k.len());
            }
            // the extreme corners of a box decide containment
            let mut acc = k.clone();
            acc = acc.intersect(&k.shifted(&neg(&b.lo)));
            acc = acc.intersect(&k.shifted(&neg(&b.hi)));
            Ok(acc.len())
        }
    }
}

/// `|⋃_{t∈T} (K - t)|`, optionally intersected with `K`.
fn union_translates(k: &BoxSet, t: &Shape, within_k: bool) -> Result<BigInt, ShapeError> {
    match t {
        Shape::Box(b) => {
            if b.is_empty() || k.is_empty() {
                return Ok(BigInt::zero());
            }
            let u = BoxSet::new(
                k.lo.iter().zip(&b.hi).map(|(a, m)| a - m).collect(),
                k.hi.iter().zip(&b.lo).map(|(a, m)| a - m).collect(),
            );
            Ok(if within_k { u.intersect(k).len() } else { u.len() })
        }
        Shape::Points(p) => {
            if p.len() > MAX_INCLUSION_EXCLUSION {
                return Err(ShapeError::TooManyPoints(p.len()));
            }
            let mut total = BigInt::zero();
            let m = p.len();
            for mask in 1u32..(1u32 << m) {
                let mut acc: Option<BoxSet> = if within_k { Some(k.clone()) } else { None };
                for (i, q) in p.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        let tr = k.shifted(&neg(&big(q)));
                        acc = Some(match acc {
                            None => tr,
                            Some(a) => a.intersect(&tr),
                        });
                    }
                }
                let c = acc.map(|a| a.len()).unwrap_or_default();
                if mask.count_ones() % 2 == 1 {
                    total += c;
                } else {
                    total -= c;
                }
            }
            Ok(total)
        }
    }
}

/// Exact `|∂⁻_T K|`, `|∂⁺_T K|` for a box `K`, where the neighbours of `g`
/// are `g + t`. Two independent inner counts are cross-checked.
pub fn box_boundary(k: &BoxSet, t: &Shape) -> Result<(BigInt, BigInt), ShapeError> {
    if let Some(d) = t.dim() {
        if d != k.dim() {
            return Err(ShapeError::Dimension);
        }
    }
    let inner = inner_count(k, t);
    let inner2 = inner_count_iterative(k, t)?;
    assert_eq!(inner, inner2, "inner counts disagree");
    let interior = k.len() - inner;
    let union = union_translates(k, t, false)?;
    let union_in_k = union_translates(k, t, true)?;
    let exterior = union - union_in_k;
    Ok((interior, exterior))
}

/// `|∂_T K| = |∂⁻_T K| + |∂⁺_T K|`
pub fn box_full_boundary(k: &BoxSet, t: &Shape) -> Result<BigInt, ShapeError> {
    let (a, b) = box_boundary(k, t)?;
    Ok(a + b)
}

/// `|B(ℤ^d, r)|` for the ℓ¹ ball (standard generators).
pub fn l1_ball_volume(d: usize, r: &BigInt) -> BigInt {
    if r.is_negative() {
        return BigInt::zero();
    }
    // Σ_k 2^k C(d,k) C(r,k)
    let mut total = BigInt::zero();
    let mut c_rk = BigInt::one(); // C(r, k)
    let mut c_dk = BigInt::one(); // C(d, k)
    let mut two_k = BigInt::one();
    for k in 0..=d {
        if k > 0 {
            let kk = BigInt::from(k);
            c_rk = c_rk * (r - BigInt::from(k - 1)) / &kk;
            c_dk = c_dk * BigInt::from(d - k + 1) / &kk;
            two_k *= 2;
        }
        if c_rk.is_zero() {
            break;
        }
        total += &two_k * &c_dk * &c_rk;
    }
    total
}

/// `|∂⁻ B(r)|` for the ℓ¹ ball: the sphere of radius `r` (every such point
/// has a neighbour at distance `r + 1`).
pub fn l1_ball_interior_boundary(d: usize, r: &BigInt) -> BigInt {
    l1_ball_volume(d, r) - l1_ball_volume(d, &(r - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{boundary, BoundaryKind, GroupContext};

    fn pts(v: &[&[i64]]) -> Shape {
        Shape::Points(v.iter().map(|x| x.to_vec()).collect())
    }

    fn enumerated(k: &BoxSet, t: &Shape) -> (usize, usize) {
        let d = k.dim();
        let ctx = GroupContext::standard_zd(d);
        let ks = k.to_elements(1 << 16).unwrap();
        let ts: Vec<GroupElement> = match t {
            Shape::Points(p) => p.iter().map(|v| GroupElement::Vector(v.clone())).collect(),
            Shape::Box(b) => b.to_elements(1 << 16).unwrap(),
        };
        let i = boundary(&ctx, &ks, &ts, BoundaryKind::Interior).unwrap().len();
        let e = boundary(&ctx, &ks, &ts, BoundaryKind::Exterior).unwrap().len();
        (i, e)
    }

    #[test]
    fn box_boundary_matches_enumeration() {
        let plus = pts(&[&[0, 0], &[1, 0], &[-1, 0], &[0, 1], &[0, -1]]);
        let k = BoxSet::centered_cube(2, &BigInt::from(3));
        let (i, e) = box_boundary(&k, &plus).unwrap();
        assert_eq!((i, e), (BigInt::from(24), BigInt::from(28)));
        assert_eq!(enumerated(&k, &plus), (24, 28));
        let t = Shape::Box(BoxSet::centered_cube(2, &BigInt::from(1)));
        let (i, e) = box_boundary(&k, &t).unwrap();
        let (ei, ee) = enumerated(&k, &t);
        assert_eq!((i, e), (BigInt::from(ei), BigInt::from(ee)));
    }

    #[test]
    fn ball_volumes() {
        assert_eq!(l1_ball_volume(1, &BigInt::from(2)), BigInt::from(5));
        assert_eq!(l1_ball_volume(2, &BigInt::from(2)), BigInt::from(13));
        assert_eq!(l1_ball_volume(2, &BigInt::from(0)), BigInt::from(1));
        assert_eq!(l1_ball_interior_boundary(2, &BigInt::from(1)), BigInt::from(4));
    }

    proptest::proptest! {
        #[test]
        fn box_boundary_agrees_with_enumeration(
            lo in proptest::collection::vec(-4i64..4, 2),
            side in proptest::collection::vec(1i64..7, 2),
            t in proptest::collection::vec(proptest::collection::vec(-2i64..3, 2), 1..5),
        ) {
            let hi: Vec<i64> = lo.iter().zip(&side).map(|(a, s)| a + s - 1).collect();
            let k = BoxSet::new(big(&lo), big(&hi));
            let mut t = t;
            t.sort();
            t.dedup();
            let shape = Shape::Points(t);
            let (i, e) = box_boundary(&k, &shape).unwrap();
            let (ei, ee) = enumerated(&k, &shape);
            proptest::prop_assert_eq!(i, BigInt::from(ei));
            proptest::prop_assert_eq!(e, BigInt::from(ee));
        }
    }
}
