//! Finitely generated acting groups: ℤ^d, finitely supported ⊕ℤ over a
//! declared index window, and free products of order-two groups.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::rational::{frac, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroupError {
    #[error("element {0:?} does not belong to this group")]
    KindMismatch(GroupElement),
    #[error("element {0:?} is not in normal form")]
    NotNormal(GroupElement),
    #[error("generating set is not symmetric: missing inverse of {0:?}")]
    NotSymmetric(GroupElement),
    #[error("generating set does not contain the identity")]
    MissingIdentity,
    #[error("enumeration exceeded the budget of {0} elements")]
    Budget(usize),
    #[error("set must be nonempty")]
    EmptySet,
    #[error("bad generator document: {0}")]
    Parse(String),
}

/// Normal-form group element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupElement {
    /// Dense vector in ℤ^d.
    Vector(Vec<i64>),
    /// Sorted `(index, value)` pairs with nonzero values.
    Sparse(Vec<(u32, i64)>),
    /// Reduced word of letter indices, no equal neighbours.
    Word(Vec<u8>),
}

impl GroupElement {
    pub fn vector(v: &[i64]) -> Self {
        GroupElement::Vector(v.to_vec())
    }

    pub fn as_vector(&self) -> Option<&[i64]> {
        match self {
            GroupElement::Vector(v) => Some(v),
            _ => None,
        }
    }

    /// Reduces an arbitrary letter sequence.
    pub fn word(letters: &[u8]) -> Self {
        let mut out: Vec<u8> = Vec::with_capacity(letters.len());
        for &l in letters {
            if out.last() == Some(&l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        GroupElement::Word(out)
    }

    pub fn sparse(pairs: &[(u32, i64)]) -> Self {
        let mut v: Vec<(u32, i64)> = Vec::new();
        let mut sorted = pairs.to_vec();
        sorted.sort();
        for (i, x) in sorted {
            match v.last_mut() {
                Some(last) if last.0 == i => last.1 += x,
                _ => v.push((i, x)),
            }
        }
        v.retain(|p| p.1 != 0);
        GroupElement::Sparse(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    IntVector { d: usize },
    /// ⊕ℤ restricted to the listed coordinates.
    DirectSum { window: Vec<u32> },
    /// Free product of `letters` copies of ℤ/2.
    FreeInvolutions { letters: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Interior,
    Exterior,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxFamily {
    /// `[1, 2^n]^d`
    Dyadic,
    /// `[1, n]^d`
    Linear,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupContext {
    pub kind: GroupKind,
    pub generators: Vec<GroupElement>,
}

impl GroupContext {
    /// Validates that `generators` is symmetric, contains the identity and is
    /// in normal form.
    pub fn new(kind: GroupKind, generators: Vec<GroupElement>) -> Result<Self, GroupError> {
        let mut ctx = GroupContext {
            kind,
            generators: Vec::new(),
        };
        for g in &generators {
            ctx.check(g)?;
        }
        let set: BTreeSet<GroupElement> = generators.iter().cloned().collect();
        if !set.contains(&ctx.identity()) {
            return Err(GroupError::MissingIdentity);
        }
        for g in &set {
            if !set.contains(&ctx.inverse(g)?) {
                return Err(GroupError::NotSymmetric(g.clone()));
            }
        }
        ctx.generators = set.into_iter().collect();
        Ok(ctx)
    }

    /// Standard generators `{0, ±e_i}` of ℤ^d.
    pub fn standard_zd(d: usize) -> Self {
        let mut gens = vec![GroupElement::Vector(vec![0; d])];
        for i in 0..d {
            for s in [1, -1] {
                let mut v = vec![0; d];
                v[i] = s;
                gens.push(GroupElement::Vector(v));
            }
        }
        GroupContext::new(GroupKind::IntVector { d }, gens).expect("standard generators")
    }

    /// Free product of `k` involutions with generators `{e, letters}`.
    pub fn free_involutions(k: usize) -> Self {
        let mut gens = vec![GroupElement::Word(vec![])];
        for i in 0..k {
            gens.push(GroupElement::Word(vec![i as u8]));
        }
        GroupContext::new(GroupKind::FreeInvolutions { letters: k }, gens).expect("letters")
    }

    pub fn with_generators(&self, generators: Vec<GroupElement>) -> Result<Self, GroupError> {
        GroupContext::new(self.kind.clone(), generators)
    }

    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            GroupKind::IntVector { d } => Some(*d),
            GroupKind::DirectSum { window } => Some(window.len()),
            GroupKind::FreeInvolutions { .. } => None,
        }
    }

    /// True when balls grow polynomially (ℤ^d and ⊕ℤ windows).
    pub fn is_subexponential(&self) -> bool {
        !matches!(self.kind, GroupKind::FreeInvolutions { letters } if letters >= 3)
    }

    pub fn identity(&self) -> GroupElement {
        match &self.kind {
            GroupKind::IntVector { d } => GroupElement::Vector(vec![0; *d]),
            GroupKind::DirectSum { .. } => GroupElement::Sparse(vec![]),
            GroupKind::FreeInvolutions { .. } => GroupElement::Word(vec![]),
        }
    }

    /// Checks that `g` belongs to this group and is in normal form.
    pub fn check(&self, g: &GroupElement) -> Result<(), GroupError> {
        match (&self.kind, g) {
            (GroupKind::IntVector { d }, GroupElement::Vector(v)) if v.len() == *d => Ok(()),
            (GroupKind::DirectSum { window }, GroupElement::Sparse(p)) => {
                let sorted = p.windows(2).all(|w| w[0].0 < w[1].0);
                if !sorted || p.iter().any(|x| x.1 == 0) {
                    return Err(GroupError::NotNormal(g.clone()));
                }
                if p.iter().all(|(i, _)| window.contains(i)) {
                    Ok(())
                } else {
                    Err(GroupError::KindMismatch(g.clone()))
                }
            }
            (GroupKind::FreeInvolutions { letters }, GroupElement::Word(w)) => {
                if w.iter().any(|&l| l as usize >= *letters) {
                    return Err(GroupError::KindMismatch(g.clone()));
                }
                if w.windows(2).any(|p| p[0] == p[1]) {
                    return Err(GroupError::NotNormal(g.clone()));
                }
                Ok(())
            }
            _ => Err(GroupError::KindMismatch(g.clone())),
        }
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(g)?;
        Ok(match g {
            GroupElement::Vector(v) => GroupElement::Vector(v.iter().map(|x| -x).collect()),
            GroupElement::Sparse(p) => GroupElement::Sparse(p.iter().map(|&(i, x)| (i, -x)).collect()),
            GroupElement::Word(w) => GroupElement::Word(w.iter().rev().copied().collect()),
        })
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(a)?;
        self.check(b)?;
        Ok(mul_unchecked(a, b))
    }

    /// `{products of ≤ r generators}`; the identity is a generator, so this is
    /// also the set of products of exactly `r` generators.
    pub fn ball(&self, r: u32, cap: usize) -> Result<BTreeSet<GroupElement>, GroupError> {
        let mut seen: HashSet<GroupElement> = HashSet::new();
        let id = self.identity();
        seen.insert(id.clone());
        let mut frontier = vec![id];
        for _ in 0..r {
            let mut next = Vec::new();
            for g in &frontier {
                for s in &self.generators {
                    let h = mul_unchecked(s, g);
                    if seen.insert(h.clone()) {
                        if seen.len() > cap {
                            return Err(GroupError::Budget(cap));
                        }
                        next.push(h);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(seen.into_iter().collect())
    }

    /// Word length with respect to the generating set, searched up to `max_r`.
    pub fn word_length(&self, g: &GroupElement, max_r: u32, cap: usize) -> Result<Option<u32>, GroupError> {
        self.check(g)?;
        let id = self.identity();
        if g == &id {
            return Ok(Some(0));
        }
        let mut seen: HashSet<GroupElement> = HashSet::from([id.clone()]);
        let mut frontier = vec![id];
        for r in 1..=max_r {
            let mut next = Vec::new();
            for h in &frontier {
                for s in &self.generators {
                    let k = mul_unchecked(s, h);
                    if &k == g {
                        return Ok(Some(r));
                    }
                    if seen.insert(k.clone()) {
                        if seen.len() > cap {
                            return Err(GroupError::Budget(cap));
                        }
                        next.push(k);
                    }
                }
            }
            frontier = next;
        }
        Ok(None)
    }

    /// Parses `{"kind": ..., "d": ..., "generators": [...]}`.
    ///
    /// Kinds: `int_vector` (vectors of length `d`), `direct_sum` (dense
    /// vectors over the `window` coordinates, default `0..d`) and
    /// `free_involutions` (`d` letters; generators as strings like `"AB"` or
    /// letter-index arrays). The identity and inverses are added.
    pub fn from_json(text: &str) -> Result<Self, GroupError> {
        let v: Value = serde_json::from_str(text).map_err(|e| GroupError::Parse(e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| GroupError::Parse("expected an object".into()))?;
        for key in obj.keys() {
            if !["kind", "d", "generators", "window"].contains(&key.as_str()) {
                return Err(GroupError::Parse(format!("unknown field {key:?}")));
            }
        }
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| GroupError::Parse("missing kind".into()))?;
        let d = obj
            .get("d")
            .and_then(Value::as_u64)
            .ok_or_else(|| GroupError::Parse("missing d".into()))? as usize;
        let gens = obj
            .get("generators")
            .and_then(Value::as_array)
            .ok_or_else(|| GroupError::Parse("missing generators".into()))?;
        let ints = |g: &Value| -> Result<Vec<i64>, GroupError> {
            g.as_array()
                .ok_or_else(|| GroupError::Parse(format!("bad generator {g}")))?
                .iter()
                .map(|x| x.as_i64().ok_or_else(|| GroupError::Parse(format!("bad entry {x}"))))
                .collect()
        };
        let (gk, elems): (GroupKind, Vec<GroupElement>) = match kind {
            "int_vector" => {
                let mut out = Vec::new();
                for g in gens {
                    let v = ints(g)?;
                    if v.len() != d {
                        return Err(GroupError::Parse(format!("generator {g} has wrong length")));
                    }
                    out.push(GroupElement::Vector(v));
                }
                (GroupKind::IntVector { d }, out)
            }
            "direct_sum" => {
                let window: Vec<u32> = match obj.get("window") {
                    Some(w) => ints(w)?.into_iter().map(|x| x as u32).collect(),
                    None => (0..d as u32).collect(),
                };
                if window.len() != d {
                    return Err(GroupError::Parse("window length differs from d".into()));
                }
                let mut out = Vec::new();
                for g in gens {
                    let v = ints(g)?;
                    if v.len() != d {
                        return Err(GroupError::Parse(format!("generator {g} has wrong length")));
                    }
                    let pairs: Vec<(u32, i64)> = window.iter().copied().zip(v).collect();
                    out.push(GroupElement::sparse(&pairs));
                }
                (GroupKind::DirectSum { window }, out)
            }
            "free_involutions" => {
                let mut out = Vec::new();
                for g in gens {
                    let letters: Vec<u8> = if let Some(s) = g.as_str() {
                        s.bytes()
                            .map(|b| b.checked_sub(b'A').filter(|&x| (x as usize) < d))
                            .collect::<Option<Vec<u8>>>()
                            .ok_or_else(|| GroupError::Parse(format!("bad word {s}")))?
                    } else {
                        ints(g)?.into_iter().map(|x| x as u8).collect()
                    };
                    out.push(GroupElement::word(&letters));
                }
                (GroupKind::FreeInvolutions { letters: d }, out)
            }
            other => return Err(GroupError::Parse(format!("unknown kind {other:?}"))),
        };
        let probe = GroupContext {
            kind: gk.clone(),
            generators: vec![],
        };
        let mut all = vec![probe.identity()];
        for g in elems {
            probe.check(&g)?;
            all.push(probe.inverse(&g)?);
            all.push(g);
        }
        GroupContext::new(gk, all)
    }
}

fn mul_unchecked(a: &GroupElement, b: &GroupElement) -> GroupElement {
    match (a, b) {
        (GroupElement::Vector(x), GroupElement::Vector(y)) => {
            GroupElement::Vector(x.iter().zip(y).map(|(p, q)| p + q).collect())
        }
        (GroupElement::Sparse(x), GroupElement::Sparse(y)) => {
            let mut out = Vec::with_capacity(x.len() + y.len());
            let (mut i, mut j) = (0, 0);
            while i < x.len() || j < y.len() {
                if j == y.len() || (i < x.len() && x[i].0 < y[j].0) {
                    out.push(x[i]);
                    i += 1;
                } else if i == x.len() || y[j].0 < x[i].0 {
                    out.push(y[j]);
                    j += 1;
                } else {
                    let s = x[i].1 + y[j].1;
                    if s != 0 {
                        out.push((x[i].0, s));
                    }
                    i += 1;
                    j += 1;
                }
            }
            GroupElement::Sparse(out)
        }
        (GroupElement::Word(x), GroupElement::Word(y)) => {
            let mut k = 0;
            while k < x.len() && k < y.len() && x[x.len() - 1 - k] == y[k] {
                k += 1;
            }
            let mut out = x[..x.len() - k].to_vec();
            out.extend_from_slice(&y[k..]);
            GroupElement::Word(out)
        }
        _ => panic!("mixed element kinds"),
    }
}

/// Interior, exterior or full boundary of `a` with respect to `s`, where the
/// neighbours of `g` are `s·g`.
pub fn boundary(
    ctx: &GroupContext,
    a: &[GroupElement],
    s: &[GroupElement],
    kind: BoundaryKind,
) -> Result<BTreeSet<GroupElement>, GroupError> {
    for g in a.iter().chain(s) {
        ctx.check(g)?;
    }
    let set: HashSet<&GroupElement> = a.iter().collect();
    let mut out = BTreeSet::new();
    if matches!(kind, BoundaryKind::Interior | BoundaryKind::Both) {
        for g in a {
            if s.iter().any(|t| !set.contains(&mul_unchecked(t, g))) {
                out.insert(g.clone());
            }
        }
    }
    if matches!(kind, BoundaryKind::Exterior | BoundaryKind::Both) {
        let inv: Vec<GroupElement> = s.iter().map(|t| ctx.inverse(t)).collect::<Result<_, _>>()?;
        for g in a {
            for ti in &inv {
                let h = mul_unchecked(ti, g);
                if !set.contains(&h) {
                    out.insert(h);
                }
            }
        }
    }
    Ok(out)
}

/// `|∂⁻_S A| / |A|` and whether it is strictly below `eps`.
pub fn is_invariant(
    ctx: &GroupContext,
    a: &[GroupElement],
    s: &[GroupElement],
    eps: &Rational,
) -> Result<(bool, Rational), GroupError> {
    let distinct: BTreeSet<&GroupElement> = a.iter().collect();
    if distinct.is_empty() {
        return Err(GroupError::EmptySet);
    }
    let a: Vec<GroupElement> = distinct.into_iter().cloned().collect();
    let inner = boundary(ctx, &a, s, BoundaryKind::Interior)?;
    let defect = frac(inner.len(), a.len());
    Ok((&defect < eps, defect))
}

/// The box `[1, 2^n]^d` or `[1, n]^d` in lexicographic order.
pub fn folner_box(d: usize, n: u32, family: BoxFamily, cap: usize) -> Result<Vec<GroupElement>, GroupError> {
    let side: i64 = match family {
        BoxFamily::Dyadic => 1i64.checked_shl(n).filter(|&s| s > 0).ok_or(GroupError::Budget(cap))?,
        BoxFamily::Linear => n as i64,
    };
    box_elements(&vec![1; d], &vec![side; d], cap)
}

/// All integer points of `[lo, hi]` (inclusive, per coordinate) in
/// lexicographic order.
pub fn box_elements(lo: &[i64], hi: &[i64], cap: usize) -> Result<Vec<GroupElement>, GroupError> {
    let d = lo.len();
    let mut size: u128 = 1;
    for i in 0..d {
        let side = (hi[i] - lo[i] + 1).max(0) as u128;
        size = size.saturating_mul(side);
    }
    if size > cap as u128 {
        return Err(GroupError::Budget(cap));
    }
    let mut out = Vec::with_capacity(size as usize);
    if size == 0 {
        return Ok(out);
    }
    let mut cur = lo.to_vec();
    loop {
        out.push(GroupElement::Vector(cur.clone()));
        let mut i = d;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if cur[i] < hi[i] {
                cur[i] += 1;
                for c in cur.iter_mut().skip(i + 1).zip(lo.iter().skip(i + 1)) {
                    *c.0 = *c.1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn z1(v: &[i64]) -> Vec<GroupElement> {
        v.iter().map(|&x| GroupElement::Vector(vec![x])).collect()
    }

    #[test]
    fn multiply_examples() {
        let z2 = GroupContext::standard_zd(2);
        let p = z2.multiply(&GroupElement::vector(&[1, 0]), &GroupElement::vector(&[0, 1])).unwrap();
        assert_eq!(p, GroupElement::vector(&[1, 1]));
        let inv = GroupContext::free_involutions(3);
        let ab = GroupElement::Word(vec![0, 1]);
        let bc = GroupElement::Word(vec![1, 2]);
        assert_eq!(inv.multiply(&ab, &bc).unwrap(), GroupElement::Word(vec![0, 2]));
        let w = GroupElement::Word(vec![0, 1, 2, 0]);
        assert_eq!(inv.multiply(&w, &inv.inverse(&w).unwrap()).unwrap(), inv.identity());
    }

    #[test]
    fn multiply_rejects_kind_mismatch() {
        let z2 = GroupContext::standard_zd(2);
        assert!(z2.multiply(&GroupElement::Word(vec![0]), &z2.identity()).is_err());
        assert!(z2.multiply(&GroupElement::vector(&[1]), &z2.identity()).is_err());
    }

    #[test]
    fn ball_sizes() {
        let z2 = GroupContext::standard_zd(2);
        assert_eq!(z2.ball(1, 1000).unwrap().len(), 5);
        assert_eq!(z2.ball(2, 1000).unwrap().len(), 13);
        let inv = GroupContext::free_involutions(3);
        let b = inv.ball(2, 1000).unwrap();
        assert_eq!(b.len(), 10);
        assert!(b.contains(&GroupElement::Word(vec![2, 1])));
        assert!(matches!(z2.ball(10, 50), Err(GroupError::Budget(50))));
    }

    #[test]
    fn boundary_examples() {
        let z = GroupContext::standard_zd(1);
        let s = z1(&[1, -1]);
        let a = z1(&[1, 2, 3]);
        let inner = boundary(&z, &a, &s, BoundaryKind::Interior).unwrap();
        assert_eq!(inner, z1(&[1, 3]).into_iter().collect());
        let outer = boundary(&z, &a, &s, BoundaryKind::Exterior).unwrap();
        assert_eq!(outer, z1(&[0, 4]).into_iter().collect());
        for k in [BoundaryKind::Interior, BoundaryKind::Exterior, BoundaryKind::Both] {
            assert!(boundary(&z, &[], &s, k).unwrap().is_empty());
        }
    }

    #[test]
    fn invariance_examples() {
        let z = GroupContext::standard_zd(1);
        let s = z1(&[1, -1]);
        let a = folner_box(1, 100, BoxFamily::Linear, 1000).unwrap();
        assert_eq!(is_invariant(&z, &a, &s, &ratio(1, 20)).unwrap(), (true, ratio(2, 100)));
        assert_eq!(is_invariant(&z, &z1(&[0]), &s, &ratio(1, 2)).unwrap(), (false, ratio(1, 1)));
        let z2 = GroupContext::standard_zd(2);
        let sq = folner_box(2, 4, BoxFamily::Linear, 1000).unwrap();
        let s2: Vec<GroupElement> = [[1, 0], [-1, 0], [0, 1], [0, -1]].iter().map(|v| GroupElement::vector(v)).collect();
        assert_eq!(is_invariant(&z2, &sq, &s2, &ratio(1, 1)).unwrap(), (true, ratio(12, 16)));
        assert!(is_invariant(&z, &[], &s, &ratio(1, 2)).is_err());
    }

    #[test]
    fn folner_box_examples() {
        assert_eq!(folner_box(2, 2, BoxFamily::Dyadic, 100).unwrap().len(), 16);
        assert_eq!(folner_box(1, 5, BoxFamily::Linear, 100).unwrap(), z1(&[1, 2, 3, 4, 5]));
        assert_eq!(folner_box(1, 3, BoxFamily::Dyadic, 100).unwrap(), z1(&[1, 2, 3, 4, 5, 6, 7, 8]));
        let b = folner_box(2, 2, BoxFamily::Linear, 100).unwrap();
        assert_eq!(b[1], GroupElement::vector(&[1, 2]));
        assert!(folner_box(2, 8, BoxFamily::Dyadic, 100).is_err());
    }

    #[test]
    fn context_validation() {
        let k = GroupKind::IntVector { d: 1 };
        let one = GroupElement::vector(&[1]);
        assert_eq!(
            GroupContext::new(k.clone(), vec![GroupElement::vector(&[0]), one.clone()]),
            Err(GroupError::NotSymmetric(one.clone()))
        );
        assert_eq!(
            GroupContext::new(k, vec![one.clone(), GroupElement::vector(&[-1])]),
            Err(GroupError::MissingIdentity)
        );
    }

    #[test]
    fn json_loader() {
        let ctx = GroupContext::from_json(r#"{"kind":"int_vector","d":2,"generators":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(ctx.generators.len(), 5);
        let inv = GroupContext::from_json(r#"{"kind":"free_involutions","d":3,"generators":["A","B","C"]}"#).unwrap();
        assert_eq!(inv.generators.len(), 4);
        let ds = GroupContext::from_json(r#"{"kind":"direct_sum","d":2,"window":[3,7],"generators":[[1,0],[0,1]]}"#).unwrap();
        assert!(ds.generators.contains(&GroupElement::Sparse(vec![(7, -1)])));
        assert!(GroupContext::from_json(r#"{"kind":"int_vector","d":2,"generators":[[1]]}"#).is_err());
        assert!(GroupContext::from_json(r#"{"kind":"int_vector","d":1,"generators":[],"x":1}"#).is_err());
    }
}
