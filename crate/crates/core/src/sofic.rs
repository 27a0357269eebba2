//! Almost actions `Θ_n` on Følner orbit pieces, their diagonal powers and
//! Schreier graphs.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::fullgroup::{CocycleTable, FullGroup, FullGroupError, TableKey};
use crate::graph::{Edge, LabeledGraph};
use crate::groups::{box_elements, GroupElement};
use crate::rational::{frac, pow, serde_pq, Rational};
use crate::systems::{Point, SystemKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SoficError {
    #[error("orbit collision: s = {0:?} and s = {1:?} give the same point")]
    OrbitCollision(Vec<i64>, Vec<i64>),
    #[error("basepoint is not declared free")]
    NotFree,
    #[error("leftover sets differ in size ({0} vs {1})")]
    Leftover(usize, usize),
    #[error("maps live on different carriers")]
    CarrierMismatch,
    #[error("no assignment for the requested table")]
    Missing,
    #[error("budget of {0} exceeded")]
    Budget(usize),
    #[error(transparent)]
    FullGroup(#[from] FullGroupError),
}

/// `d_H(f, g)` on a common finite carrier.
pub fn hamming(f: &[u32], g: &[u32]) -> Result<Rational, SoficError> {
    if f.len() != g.len() || f.is_empty() {
        return Err(SoficError::CarrierMismatch);
    }
    Ok(frac(f.iter().zip(g).filter(|(a, b)| a != b).count(), f.len()))
}

/// `f ∘ g`
pub fn compose_maps(f: &[u32], g: &[u32]) -> Vec<u32> {
    g.iter().map(|&z| f[z as usize]).collect()
}

pub fn identity_map(n: usize) -> Vec<u32> {
    (0..n as u32).collect()
}

/// Hamming distance of the diagonal powers by enumerating all `l`-tuples.
pub fn power_hamming_explicit(f: &[u32], g: &[u32], l: u32, cap: usize) -> Result<Rational, SoficError> {
    let n = f.len();
    let total = n.checked_pow(l).filter(|&t| t <= cap).ok_or(SoficError::Budget(cap))?;
    let mut differ = 0usize;
    for v in 0..total {
        let mut rest = v;
        let mut any = false;
        for _ in 0..l {
            let z = rest % n;
            rest /= n;
            if f[z] != g[z] {
                any = true;
                break;
            }
        }
        if any {
            differ += 1;
        }
    }
    Ok(frac(differ, total))
}

/// `1 − (1 − d)^l`
pub fn power_hamming_law(d: &Rational, l: u32) -> Rational {
    Rational::one() - pow(&(Rational::one() - d), l as u64)
}

/// Finite carrier `⊔_i F_n x_i` with permutations assigned to tables.
#[derive(Debug, Clone)]
pub struct AlmostAction {
    pub fg: FullGroup,
    pub n: u32,
    pub l: u32,
    pub basepoints: Vec<Point>,
    /// Box `[1, 2^n]^d` in lexicographic order.
    pub box_: Vec<Vec<i64>>,
    /// `carrier[i·|F_n| + j] = box_[j]·x_i`.
    pub carrier: Vec<Point>,
    tables: Vec<CocycleTable>,
    maps: Vec<Vec<u32>>,
    index: HashMap<TableKey, usize>,
}

impl AlmostAction {
    pub fn carrier_len(&self) -> usize {
        self.carrier.len()
    }

    pub fn block_len(&self) -> usize {
        self.box_.len()
    }

    /// Assigns `Θ_n(t)`, returning its index.
    pub fn ensure(&mut self, t: &CocycleTable) -> Result<usize, SoficError> {
        let key = self.fg.key(t)?;
        if let Some(&i) = self.index.get(&key) {
            return Ok(i);
        }
        let map = self.compute(t)?;
        self.tables.push(t.clone());
        self.maps.push(map);
        self.index.insert(key, self.maps.len() - 1);
        Ok(self.maps.len() - 1)
    }

    pub fn map(&self, i: usize) -> &[u32] {
        &self.maps[i]
    }

    pub fn theta(&mut self, t: &CocycleTable) -> Result<Vec<u32>, SoficError> {
        let i = self.ensure(t)?;
        Ok(self.maps[i].clone())
    }

    pub fn assigned(&self) -> impl Iterator<Item = (&CocycleTable, &[u32])> {
        self.tables.iter().zip(self.maps.iter().map(Vec::as_slice))
    }

    fn compute(&self, t: &CocycleTable) -> Result<Vec<u32>, SoficError> {
        let m = self.box_.len();
        let side = 1i64 << self.n;
        let d = self.box_[0].len();
        let idx_of = |s: &[i64]| -> Option<usize> {
            let mut idx = 0usize;
            for &x in s {
                if !(1..=side).contains(&x) {
                    return None;
                }
                idx = idx * side as usize + (x - 1) as usize;
            }
            Some(idx)
        };
        let mut out = vec![u32::MAX; self.carrier.len()];
        for block in 0..self.basepoints.len() {
            let base = block * m;
            let mut hit = vec![false; m];
            let mut leftover = Vec::new();
            for (j, s) in self.box_.iter().enumerate() {
                let z = &self.carrier[base + j];
                let c = self.fg.cocycle(t, z)?;
                let c = c.as_vector().unwrap();
                let target: Vec<i64> = (0..d).map(|k| s[k] + c[k]).collect();
                match idx_of(&target) {
                    Some(k) if !hit[k] => {
                        hit[k] = true;
                        out[base + j] = (base + k) as u32;
                    }
                    Some(_) => return Err(FullGroupError::AmbiguousMatch(2).into()),
                    None => leftover.push(j),
                }
            }
            let free: Vec<usize> = (0..m).filter(|&k| !hit[k]).collect();
            if free.len() != leftover.len() {
                return Err(SoficError::Leftover(leftover.len(), free.len()));
            }
            for (j, k) in leftover.into_iter().zip(free) {
                out[base + j] = (base + k) as u32;
            }
        }
        Ok(out)
    }

    /// Diagonal power `θ^l` (tuples are implicit).
    pub fn amplify(&self, l: u32) -> AlmostAction {
        assert!(l >= 1);
        let mut a = self.clone();
        a.l = l;
        a
    }

    /// `d_H(θ^l(f), θ^l(g))`, explicit below `cap` tuples, by the factor law
    /// otherwise.
    pub fn power_distance(&self, f: &[u32], g: &[u32], cap: usize) -> Result<Rational, SoficError> {
        let d = hamming(f, g)?;
        if self.l == 1 {
            return Ok(d);
        }
        match power_hamming_explicit(f, g, self.l, cap) {
            Ok(x) => Ok(x),
            Err(_) => Ok(power_hamming_law(&d, self.l)),
        }
    }
}

/// `Θ_n` for one basepoint.
pub fn build_theta(fg: &FullGroup, x: &Point, n: u32, gammas: &[CocycleTable]) -> Result<AlmostAction, SoficError> {
    build_theta_multi(fg, std::slice::from_ref(x), n, gammas)
}

/// `Θ_n` on the disjoint union of the orbit pieces `F_n x_i`.
pub fn build_theta_multi(
    fg: &FullGroup,
    xs: &[Point],
    n: u32,
    gammas: &[CocycleTable],
) -> Result<AlmostAction, SoficError> {
    if !fg.sys.declared_free() {
        return Err(SoficError::NotFree);
    }
    let d = fg.sys.dim();
    let side = 1i64.checked_shl(n).ok_or(SoficError::Budget(fg.budget))?;
    let box_: Vec<Vec<i64>> = box_elements(&vec![1; d], &vec![side; d], fg.budget)
        .map_err(|_| SoficError::Budget(fg.budget))?
        .into_iter()
        .map(|g| g.as_vector().unwrap().to_vec())
        .collect();
    let mut carrier = Vec::with_capacity(box_.len() * xs.len());
    for x in xs {
        fg.sys.check_point(x).map_err(FullGroupError::from)?;
        let pts: Vec<Point> = match (&fg.sys.kind, x) {
            (SystemKind::Odometer(b), Point::Digits(ds)) => {
                let mut cur = ds.add(1, b);
                let mut v = Vec::with_capacity(box_.len());
                for _ in 0..box_.len() {
                    let next = cur.add(1, b);
                    v.push(Point::Digits(cur));
                    cur = next;
                }
                v
            }
            _ => box_
                .iter()
                .map(|s| fg.sys.translate_vec(x, s))
                .collect::<Result<_, _>>()
                .map_err(FullGroupError::from)?,
        };
        let mut seen: HashMap<&Point, usize> = HashMap::new();
        for (j, p) in pts.iter().enumerate() {
            if let Some(i) = seen.insert(p, j) {
                return Err(SoficError::OrbitCollision(box_[i].clone(), box_[j].clone()));
            }
        }
        carrier.extend(pts);
    }
    let mut a = AlmostAction {
        fg: fg.clone(),
        n,
        l: 1,
        basepoints: xs.to_vec(),
        box_,
        carrier,
        tables: vec![],
        maps: vec![],
        index: HashMap::new(),
    };
    a.ensure(&fg.identity())?;
    for g in gammas {
        a.ensure(g)?;
    }
    Ok(a)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conditions {
    #[serde(with = "serde_pq")]
    pub mult_defect: Rational,
    /// `None` when no nontrivial element was tested.
    #[serde(with = "crate::rational::serde_pq_opt")]
    pub min_displacement: Option<Rational>,
    pub identity_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub n: u32,
    pub l: u32,
    pub basepoints: Vec<Point>,
    pub conditions: Conditions,
    #[serde(with = "serde_pq")]
    pub epsilon: Rational,
    /// Pairs `(f, g)` with `fg` in the set.
    pub pairs_checked: usize,
    pub multiplicative_ok: bool,
    pub displacement_ok: bool,
    pub pass: bool,
}

/// Checks `(F, ε)`-injectivity: `d_H(Θ(fg), Θ(f)Θ(g)) ≤ ε` when
/// `f, g, fg ∈ F`, `d_H(Θ(f), id) > 1 − ε` for `f ≠ e`, `Θ(e) = id`.
pub fn check_injective_almost_action(
    a: &mut AlmostAction,
    f_set: &[CocycleTable],
    eps: &Rational,
    cap: usize,
) -> Result<InjectivityReport, SoficError> {
    let fg = a.fg.clone();
    let keys: Vec<TableKey> = f_set.iter().map(|t| fg.key(t)).collect::<Result<_, _>>()?;
    let key_set: HashSet<&TableKey> = keys.iter().collect();
    let id_key = fg.key(&fg.identity())?;
    let idx: Vec<usize> = f_set.iter().map(|t| a.ensure(t)).collect::<Result<_, _>>()?;
    let id_map = identity_map(a.carrier_len());
    let id_i = a.ensure(&fg.identity())?;
    let identity_ok = a.map(id_i) == id_map.as_slice();

    let mut mult_defect = Rational::zero();
    let mut pairs = 0;
    for (i, f) in f_set.iter().enumerate() {
        for (j, g) in f_set.iter().enumerate() {
            let fgt = fg.compose(f, g)?;
            if !key_set.contains(&fg.key(&fgt)?) {
                continue;
            }
            pairs += 1;
            let k = a.ensure(&fgt)?;
            let prod = compose_maps(a.map(idx[i]), a.map(idx[j]));
            let d = a.power_distance(a.map(k), &prod, cap)?;
            if d > mult_defect {
                mult_defect = d;
            }
        }
    }
    let mut min_disp: Option<Rational> = None;
    for (i, k) in keys.iter().enumerate() {
        if *k == id_key {
            continue;
        }
        let d = a.power_distance(a.map(idx[i]), &id_map, cap)?;
        if min_disp.as_ref().is_none_or(|m| &d < m) {
            min_disp = Some(d);
        }
    }
    let multiplicative_ok = &mult_defect <= eps;
    let displacement_ok = min_disp.as_ref().is_none_or(|m| m > &(Rational::one() - eps));
    Ok(InjectivityReport {
        n: a.n,
        l: a.l,
        basepoints: a.basepoints.clone(),
        conditions: Conditions {
            mult_defect,
            min_displacement: min_disp,
            identity_ok,
        },
        epsilon: eps.clone(),
        pairs_checked: pairs,
        multiplicative_ok,
        displacement_ok,
        pass: identity_ok && multiplicative_ok && displacement_ok,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoodSets {
    pub l: u32,
    pub ball_size: usize,
    /// Base points where every product over the ball is multiplicative.
    pub multiplicative_points: usize,
    #[serde(with = "serde_pq")]
    pub q1: Rational,
    #[serde(with = "serde_pq")]
    pub q2: Rational,
}

/// Exact fractions of `l`-tuples in `Q_1` (θ^l multiplicative on the ball)
/// and `Q_2` (no nontrivial ball element fixes the tuple).
pub fn measure_good_sets(a: &mut AlmostAction, ball: &[CocycleTable]) -> Result<GoodSets, SoficError> {
    let fg = a.fg.clone();
    let n = a.carrier_len();
    let l = a.l;
    let id_key = fg.key(&fg.identity())?;
    let idx: Vec<usize> = ball.iter().map(|t| a.ensure(t)).collect::<Result<_, _>>()?;
    let mut good = vec![true; n];
    for (i, f) in ball.iter().enumerate() {
        for (j, g) in ball.iter().enumerate() {
            let k = a.ensure(&fg.compose(f, g)?)?;
            let (mf, mg, mk) = (a.map(idx[i]), a.map(idx[j]), a.map(k));
            for z in 0..n {
                if mf[mg[z] as usize] != mk[z] {
                    good[z] = false;
                }
            }
        }
    }
    let multiplicative_points = good.iter().filter(|&&b| b).count();

    // fixed-set signatures over the nontrivial ball elements
    let nontrivial: Vec<usize> = ball
        .iter()
        .enumerate()
        .filter(|(_, t)| fg.key(t).map(|k| k != id_key).unwrap_or(true))
        .map(|(i, _)| idx[i])
        .collect();
    let words = nontrivial.len().div_ceil(64).max(1);
    let mut sig_counts: BTreeMap<Vec<u64>, BigInt> = BTreeMap::new();
    for z in 0..n {
        let mut sig = vec![0u64; words];
        for (b, &m) in nontrivial.iter().enumerate() {
            if a.map(m)[z] as usize == z {
                sig[b / 64] |= 1 << (b % 64);
            }
        }
        *sig_counts.entry(sig).or_default() += 1;
    }
    // distribution of the intersection of l signatures
    let full = {
        let mut v = vec![0u64; words];
        for b in 0..nontrivial.len() {
            v[b / 64] |= 1 << (b % 64);
        }
        v
    };
    let mut dist: BTreeMap<Vec<u64>, BigInt> = BTreeMap::from([(full, BigInt::one())]);
    for _ in 0..l {
        let mut next: BTreeMap<Vec<u64>, BigInt> = BTreeMap::new();
        for (s, c) in &dist {
            for (t, d) in &sig_counts {
                let inter: Vec<u64> = s.iter().zip(t).map(|(a, b)| a & b).collect();
                *next.entry(inter).or_default() += c * d;
            }
        }
        dist = next;
    }
    let q2_count: BigInt = dist
        .iter()
        .filter(|(s, _)| s.iter().all(|&w| w == 0))
        .map(|(_, c)| c.clone())
        .sum();
    let total = BigInt::from(n).pow(l);
    let q1_count = BigInt::from(multiplicative_points).pow(l);
    Ok(GoodSets {
        l,
        ball_size: ball.len(),
        multiplicative_points,
        q1: Rational::new(q1_count, total.clone()),
        q2: Rational::new(q2_count, total),
    })
}

/// Edges `(z, Θ(t)z)` labeled by the index of `t`; on the `l`-th power the
/// vertices are tuples (mixed radix, first coordinate least significant).
pub fn schreier_graph(a: &mut AlmostAction, gens: &[CocycleTable], cap: usize) -> Result<LabeledGraph, SoficError> {
    let n = a.carrier_len();
    let mut edges = Vec::new();
    for (label, t) in gens.iter().enumerate() {
        let i = a.ensure(t)?;
        for (z, &y) in a.map(i).iter().enumerate() {
            edges.push(Edge {
                source: z as u32,
                target: y,
                label: label as u32,
            });
        }
    }
    let base = LabeledGraph {
        vertices: n as u32,
        labels: gens.len() as u32,
        edges,
    };
    if a.l == 1 {
        return Ok(base);
    }
    match n.checked_pow(a.l) {
        Some(t) if t <= cap => base.diagonal_power(a.l).ok_or(SoficError::Budget(cap)),
        _ => Err(SoficError::Budget(cap)),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaSummary {
    pub table: CocycleTable,
    pub displaced: usize,
    #[serde(with = "serde_pq")]
    pub displacement: Rational,
}

pub fn displacement(map: &[u32]) -> (usize, Rational) {
    let k = map.iter().enumerate().filter(|(z, &y)| *z as u32 != y).count();
    (k, frac(k, map.len()))
}

/// Group element helper for one-dimensional systems.
pub fn shift(k: i64) -> CocycleTable {
    CocycleTable::constant(GroupElement::vector(&[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::systems::{BaseSequence, DigitStream, SystemContext};

    fn fg() -> FullGroup {
        FullGroup::new(SystemContext::binary_odometer())
    }

    fn zero() -> Point {
        Point::Digits(DigitStream::zero())
    }

    fn is_cycle(m: &[u32]) -> bool {
        let mut z = 0u32;
        for k in 1..=m.len() {
            z = m[z as usize];
            if z == 0 {
                return k == m.len();
            }
        }
        false
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&[0, 1, 2, 3], &[0, 1, 2, 3]).unwrap(), ratio(0, 1));
        assert_eq!(hamming(&[0, 1, 2, 3], &[0, 1, 3, 3]).unwrap(), ratio(1, 4));
        let cyc: Vec<u32> = (0..8).map(|i| (i + 1) % 8).collect();
        assert_eq!(hamming(&identity_map(8), &cyc).unwrap(), ratio(1, 1));
    }

    #[test]
    fn theta_examples() {
        let fg = fg();
        let mut a = build_theta(&fg, &zero(), 3, &[shift(1)]).unwrap();
        let m = a.theta(&shift(1)).unwrap();
        assert!(is_cycle(&m));
        assert_eq!(hamming(&m, &identity_map(8)).unwrap(), ratio(1, 1));
        assert_eq!(a.theta(&fg.identity()).unwrap(), identity_map(8));
        // the swap moves all eight orbit points, but 1 and 8 leave F_3 x and
        // are matched back to themselves
        let swap = CocycleTable::digit_swap(&BaseSequence::binary());
        let moved = a.carrier.iter().filter(|z| &fg.evaluate(&swap, z).unwrap() != *z).count();
        assert_eq!(moved, 8);
        let sw = a.theta(&swap).unwrap();
        assert_eq!(sw, vec![0, 2, 1, 4, 3, 6, 5, 7]);
        assert_eq!(displacement(&sw).0, 6);
    }

    #[test]
    fn multi_basepoints() {
        let fg = fg();
        let one = Point::Digits(DigitStream::new(vec![1], vec![0]));
        let mut a = build_theta_multi(&fg, &[zero(), one], 2, &[]).unwrap();
        assert_eq!(a.carrier_len(), 8);
        let m = a.theta(&shift(1)).unwrap();
        assert!(is_cycle(&m[..4]));
        assert!(m[4..].iter().all(|&y| y >= 4));
        let mut b = build_theta_multi(&fg, &[zero(), zero()], 2, &[]).unwrap();
        assert_eq!(b.carrier_len(), 8);
        assert_eq!(b.theta(&shift(1)).unwrap()[4..], [5, 6, 7, 4]);
    }

    #[test]
    fn amplification() {
        let f = identity_map(4);
        let g = vec![1, 0, 2, 3];
        assert_eq!(power_hamming_explicit(&f, &g, 2, 1 << 10).unwrap(), ratio(3, 4));
        assert_eq!(power_hamming_law(&ratio(1, 2), 2), ratio(3, 4));
        let fg = fg();
        let mut a = build_theta(&fg, &zero(), 3, &[]).unwrap().amplify(2);
        let m = a.theta(&shift(1)).unwrap();
        assert_eq!(a.power_distance(&m, &identity_map(8), 1 << 10).unwrap(), ratio(1, 1));
    }

    #[test]
    fn injectivity_examples() {
        let fg = fg();
        let mut a = build_theta(&fg, &zero(), 8, &[]).unwrap();
        let r = check_injective_almost_action(&mut a, &[fg.identity()], &ratio(1, 100), 1 << 16).unwrap();
        assert!(r.pass);
        let f = vec![fg.identity(), shift(1), shift(-1)];
        let r = check_injective_almost_action(&mut a, &f, &ratio(1, 10), 1 << 16).unwrap();
        assert!(r.conditions.mult_defect <= ratio(2, 256));
        let mut b = build_theta(&fg, &zero(), 2, &[]).unwrap();
        let r = check_injective_almost_action(&mut b, &[shift(1)], &ratio(1, 10), 1 << 16).unwrap();
        assert!(r.displacement_ok);
    }

    #[test]
    fn good_sets() {
        let fg = fg();
        let mut a = build_theta(&fg, &zero(), 3, &[]).unwrap();
        let g = measure_good_sets(&mut a, &[fg.identity()]).unwrap();
        assert_eq!((g.q1.clone(), g.q2.clone()), (ratio(1, 1), ratio(1, 1)));
        let mut b = a.amplify(2);
        let g = measure_good_sets(&mut b, &[fg.identity(), shift(1)]).unwrap();
        assert_eq!(g.q2, ratio(1, 1));
    }

    #[test]
    fn schreier_examples() {
        let fg = fg();
        let mut a = build_theta(&fg, &zero(), 3, &[]).unwrap();
        let g = schreier_graph(&mut a, &[fg.identity()], 1 << 10).unwrap();
        assert!(g.edges.iter().all(|e| e.source == e.target));
        let g = schreier_graph(&mut a, &[shift(1)], 1 << 10).unwrap();
        g.validate().unwrap();
        assert_eq!(g.edges.len(), 8);
        let sw = CocycleTable::digit_swap(&BaseSequence::binary());
        let g = schreier_graph(&mut a, &[sw], 1 << 10).unwrap();
        assert!(g.edges.iter().all(|e| e.target == [0, 2, 1, 4, 3, 6, 5, 7][e.source as usize]));
    }
}
