//! Følner sets of subgroups of the full group: direct defects, extraction
//! from partition certificates, small-set search, and the closed-form and
//! recursive Følner-function bounds.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::boxes::{box_boundary, l1_ball_interior_boundary, l1_ball_volume, BoxSet, Shape};
use crate::fullgroup::{CocycleTable, FullGroup, FullGroupError, TableKey};
use crate::graph::LabeledGraph;
use crate::groups::{boundary, BoundaryKind, GroupContext, GroupElement};
use crate::hyperfinite::{min_monotone, CertError, PartitionCertificate};
use crate::rational::{frac, ln_biguint, pow, serde_pq, sqrt_bracket, to_f64, Rational};
use crate::sofic::{AlmostAction, SoficError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FolnerError {
    #[error("epsilon must be positive")]
    Epsilon,
    #[error("search budget exhausted: {0}")]
    Budget(String),
    #[error("no candidate met epsilon; best defect {0}")]
    NotFound(String),
    #[error("stored defect {stored} differs from recount {recount}")]
    Mismatch { stored: String, recount: String },
    #[error(transparent)]
    FullGroup(#[from] FullGroupError),
    #[error(transparent)]
    Sofic(#[from] SoficError),
    #[error(transparent)]
    Cert(#[from] CertError),
}

/// A finite subset of Γ with its measured defect `|∂⁻_T F|/|F|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FolnerReport {
    pub elements: Vec<CocycleTable>,
    pub generators: Vec<CocycleTable>,
    pub size: usize,
    pub boundary: usize,
    #[serde(with = "serde_pq")]
    pub defect: Rational,
    pub provenance: String,
    /// The size is an upper bound for the Følner function, not a minimum.
    pub upper_bound: bool,
}

fn key_set(fg: &FullGroup, f: &[CocycleTable]) -> Result<HashSet<TableKey>, FolnerError> {
    Ok(f.iter().map(|g| fg.key(g)).collect::<Result<_, _>>()?)
}

/// `|{γ ∈ F : tγ ∉ F for some t ∈ T}|` by normal-form membership.
pub fn folner_boundary(fg: &FullGroup, f: &[CocycleTable], t: &[CocycleTable]) -> Result<usize, FolnerError> {
    let keys = key_set(fg, f)?;
    let mut count = 0;
    for g in f {
        for s in t {
            if !keys.contains(&fg.key(&fg.compose(s, g)?)?) {
                count += 1;
                break;
            }
        }
    }
    Ok(count)
}

/// Same count by pairwise table equality.
fn folner_boundary_pairwise(fg: &FullGroup, f: &[CocycleTable], t: &[CocycleTable]) -> Result<usize, FolnerError> {
    let mut count = 0;
    for g in f {
        'gens: for s in t {
            let h = fg.compose(s, g)?;
            for x in f {
                if fg.equal(&h, x)? {
                    continue 'gens;
                }
            }
            count += 1;
            break;
        }
    }
    Ok(count)
}

pub fn folner_defect(fg: &FullGroup, f: &[CocycleTable], t: &[CocycleTable]) -> Result<Rational, FolnerError> {
    if f.is_empty() {
        return Ok(Rational::zero());
    }
    Ok(frac(folner_boundary(fg, f, t)?, f.len()))
}

fn report(
    fg: &FullGroup,
    f: Vec<CocycleTable>,
    t: &[CocycleTable],
    provenance: String,
    upper_bound: bool,
) -> Result<FolnerReport, FolnerError> {
    let b = folner_boundary(fg, &f, t)?;
    let size = f.len();
    Ok(FolnerReport {
        elements: f,
        generators: t.to_vec(),
        size,
        boundary: b,
        defect: if size == 0 { Rational::zero() } else { frac(b, size) },
        provenance,
        upper_bound,
    })
}

impl FolnerReport {
    /// Recounts the boundary by pairwise equality and compares.
    pub fn recheck(&self, fg: &FullGroup) -> Result<(), FolnerError> {
        let b = folner_boundary_pairwise(fg, &self.elements, &self.generators)?;
        let recount = if self.size == 0 { Rational::zero() } else { frac(b, self.size) };
        if recount != self.defect || b != self.boundary {
            return Err(FolnerError::Mismatch {
                stored: self.defect.to_string(),
                recount: recount.to_string(),
            });
        }
        Ok(())
    }
}

/// Anchor-and-pullback extraction: for blocks (largest first, then lowest
/// edge-boundary ratio) and anchors `v`, `F = {γ ∈ B(Γ, k_ball) : θ(γ)v ∈ A_i}`.
/// The first `F` with defect at most `eps` and `|F| ≤ K` is returned.
pub fn extract_folner_set(
    a: &mut AlmostAction,
    graph: &LabeledGraph,
    cert: &PartitionCertificate,
    t: &[CocycleTable],
    k_ball: u32,
    eps: &Rational,
) -> Result<FolnerReport, FolnerError> {
    cert.recheck(graph)?;
    let fg = a.fg.clone();
    let ball = fg.subgroup_ball(t, k_ball)?;
    let maps: Vec<Vec<u32>> = ball.iter().map(|g| a.theta(g)).collect::<Result<_, _>>()?;
    let gen_maps: Vec<Vec<u32>> = t.iter().map(|g| a.theta(g)).collect::<Result<_, _>>()?;
    let mut owner = vec![usize::MAX; a.carrier_len()];
    for (i, b) in cert.blocks.iter().enumerate() {
        for &v in b {
            owner[v as usize] = i;
        }
    }
    let mut order: Vec<(usize, Rational)> = cert
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let leaving = b
                .iter()
                .filter(|&&v| gen_maps.iter().any(|m| owner[m[v as usize] as usize] != i))
                .count();
            (i, frac(leaving, b.len().max(1)))
        })
        .collect();
    order.sort_by(|x, y| {
        cert.blocks[y.0]
            .len()
            .cmp(&cert.blocks[x.0].len())
            .then_with(|| x.1.cmp(&y.1))
            .then(x.0.cmp(&y.0))
    });
    let mut best: Option<FolnerReport> = None;
    for (bi, _) in order {
        let block = &cert.blocks[bi];
        let mut anchors = block.clone();
        // anchors nearest the middle of the block listing first
        let mid = block.len() / 2;
        anchors.sort_by_key(|v| {
            let pos = block.iter().position(|x| x == v).unwrap();
            (pos as i64 - mid as i64).abs()
        });
        for v in anchors {
            let f: Vec<CocycleTable> = ball
                .iter()
                .zip(&maps)
                .filter(|(_, m)| owner[m[v as usize] as usize] == bi)
                .map(|(g, _)| g.clone())
                .collect();
            if f.len() > cert.k {
                continue;
            }
            let r = report(&fg, f, t, format!("block {bi}, anchor {v}"), true)?;
            if &r.defect <= eps {
                r.recheck(&fg)?;
                return Ok(r);
            }
            if best.as_ref().is_none_or(|b| r.defect < b.defect) {
                best = Some(r);
            }
        }
    }
    Err(FolnerError::NotFound(
        best.map(|b| b.defect.to_string()).unwrap_or_else(|| "none".into()),
    ))
}

/// Connected vertex sets containing vertex 0 with at most `max_size`
/// vertices, by breadth of extension with deduplication.
fn connected_sets(adj: &[Vec<usize>], max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut layer: BTreeSet<Vec<usize>> = BTreeSet::from([vec![0]]);
    for _ in 0..max_size {
        let mut next = BTreeSet::new();
        for s in &layer {
            out.push(s.clone());
            if s.len() == max_size {
                continue;
            }
            for &v in s {
                for &w in &adj[v] {
                    if let Err(pos) = s.binary_search(&w) {
                        let mut t = s.clone();
                        t.insert(pos, w);
                        next.insert(t);
                    }
                }
            }
        }
        layer = next;
    }
    out
}

/// Smallest-first Følner search in Γ among balls and exhaustive connected
/// sets containing the identity of size at most 6; reports an upper bound.
pub fn empirical_folner_function(
    fg: &FullGroup,
    t: &[CocycleTable],
    eps: &Rational,
    max_radius: u32,
) -> Result<FolnerReport, FolnerError> {
    if eps <= &Rational::zero() {
        return Err(FolnerError::Epsilon);
    }
    let mut candidates: Vec<(Vec<CocycleTable>, String, bool)> = Vec::new();
    // exhaustive small sets live in the ball of radius 5
    let ball = fg.subgroup_ball(t, 5.min(max_radius.max(1)))?;
    let index: HashMap<TableKey, usize> = ball
        .iter()
        .enumerate()
        .map(|(i, g)| Ok((fg.key(g)?, i)))
        .collect::<Result<_, FolnerError>>()?;
    let mut adj = vec![Vec::new(); ball.len()];
    for (i, g) in ball.iter().enumerate() {
        for s in t {
            if let Some(&j) = index.get(&fg.key(&fg.compose(s, g)?)?) {
                if j != i {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    for s in connected_sets(&adj, 6) {
        candidates.push((s.iter().map(|&i| ball[i].clone()).collect(), format!("exhaustive set of size {}", s.len()), false));
    }
    for r in 0..=max_radius {
        let b = fg.subgroup_ball(t, r)?;
        candidates.push((b, format!("ball of radius {r}"), true));
    }
    let mut best: Option<FolnerReport> = None;
    let mut found: Option<FolnerReport> = None;
    for (f, prov, ub) in candidates {
        let r = report(fg, f, t, prov, ub)?;
        if &r.defect <= eps {
            let better = found.as_ref().is_none_or(|b| (r.size, &r.defect) < (b.size, &b.defect));
            if better {
                found = Some(r);
            }
        } else if best.as_ref().is_none_or(|b| r.defect < b.defect) {
            best = Some(r);
        }
    }
    match found {
        Some(mut r) => {
            r.upper_bound = true;
            r.recheck(fg)?;
            Ok(r)
        }
        None => Err(FolnerError::NotFound(
            best.map(|b| b.defect.to_string()).unwrap_or_else(|| "none".into()),
        )),
    }
}

/// Constants and bounds of the closed-form Følner bound for ℤ^d actions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZdBound {
    pub d: u32,
    pub l: u32,
    pub m: i64,
    pub c: String,
    /// `⌈m/(1 − (1 − ε/C)^{1/d})⌉`.
    pub k_statement: String,
    /// `⌈2m/(1 − (1 − ε/C)^{1/d})⌉`.
    pub k_proof: String,
    pub bound_statement: String,
    pub bound_proof: String,
}

/// Smallest `k ≥ a` with `(1 − a/k)^d ≥ q`, i.e. `k = ⌈a/(1 − q^{1/d})⌉`.
fn k_for(a: &BigInt, q: &Rational, d: u32) -> BigInt {
    if q <= &Rational::zero() {
        return a.clone();
    }
    let ar = Rational::from_integer(a.clone());
    min_monotone::<()>(a, &(BigInt::one() << 4096), |k| {
        let x = Rational::one() - &ar / Rational::from_integer(k.clone());
        Ok(pow(&x, d as u64) >= *q)
    })
    .unwrap()
    .expect("k exceeds 2^4096")
}

/// `C = 2|S|(1+2|T|)2^l|T|²`, `m = max ‖s‖_∞`, and both bounds `k^{dl}`.
pub fn folner_bound_zd(d: u32, l: u32, s: &[Vec<i64>], t_len: usize, eps: &Rational) -> Result<ZdBound, FolnerError> {
    if eps <= &Rational::zero() {
        return Err(FolnerError::Epsilon);
    }
    let m = s.iter().flat_map(|v| v.iter().map(|x| x.abs())).max().unwrap_or(0);
    let tl = BigInt::from(t_len);
    let c: BigInt = BigInt::from(2 * s.len()) * (BigInt::one() + 2 * &tl) * (BigInt::one() << l) * &tl * &tl;
    let q = Rational::one() - eps / Rational::from_integer(c.clone());
    let q = q.max(Rational::zero());
    let ks = k_for(&BigInt::from(m), &q, d);
    let kp = k_for(&BigInt::from(2 * m), &q, d);
    Ok(ZdBound {
        d,
        l,
        m,
        c: c.to_string(),
        bound_statement: ks.pow(d * l).to_string(),
        bound_proof: kp.pow(d * l).to_string(),
        k_statement: ks.to_string(),
        k_proof: kp.to_string(),
    })
}

/// `δ(ε)` for the general recursion bound. The first branch is never larger
/// than the second since `1 − √(1 − c) ≥ c/2`; the second is bracketed and
/// compared exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaSchedule {
    #[serde(with = "serde_pq")]
    pub delta: Rational,
    /// A rational lower bound for the square-root branch.
    #[serde(with = "serde_pq")]
    pub sqrt_branch_lower: Rational,
    /// `⌈log δ / log(1 − δ)⌉`.
    pub n: u64,
    /// `n` checked by exact powers when feasible.
    pub n_exact: bool,
}

pub fn delta_schedule(eps: &Rational, l: u32, t_len: usize, s_len: usize) -> DeltaSchedule {
    let t = BigInt::from(t_len);
    let base = (BigInt::one() + 2 * &t) * (BigInt::one() << l) * &t * &t * BigInt::from(2 * s_len);
    let c = eps / Rational::from_integer(base);
    let first = &c / Rational::from_integer(BigInt::from(s_len + 2));
    let one_minus_c = (Rational::one() - &c).max(Rational::zero());
    let (_, root_hi) = sqrt_bracket(&one_minus_c, 64);
    let sqrt_lower = Rational::one() - root_hi;
    let delta = if sqrt_lower < first { sqrt_lower.clone() } else { first };
    let df = to_f64(&delta);
    let approx = (df.ln() / (-df).ln_1p()).ceil().max(1.0) as u64;
    // exact check of (1 − δ)^n ≤ δ < (1 − δ)^{n−1} when the powers stay small
    let bits = delta.denom().bits().max(1);
    let n_exact = approx.saturating_mul(bits) <= 1 << 22 && {
        let q = Rational::one() - &delta;
        pow(&q, approx) <= delta && (approx == 1 || pow(&q, approx - 1) > delta)
    };
    DeltaSchedule {
        delta,
        sqrt_branch_lower: sqrt_lower,
        n: approx,
        n_exact,
    }
}

/// A certified answer of the ℤ^d Følner oracle for `S = {0, ±e_i}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleAnswer {
    #[serde(with = "serde_pq")]
    pub epsilon: Rational,
    pub size: String,
    pub boundary: String,
    /// `ψ`: smallest ℓ¹ radius containing a recentred witness.
    pub radius: String,
    /// Witness recentred into the ball of that radius.
    pub witness: Shape,
    /// Exact minimum (exhaustive search or ℤ intervals) rather than a bound.
    pub exact: bool,
}

fn standard_s(d: usize) -> Vec<Vec<i64>> {
    let mut s = vec![vec![0; d]];
    for j in 0..d {
        for sign in [1, -1] {
            let mut v = vec![0; d];
            v[j] = sign;
            s.push(v);
        }
    }
    s
}

fn interior_boundary_points(points: &[Vec<i64>], s: &[Vec<i64>]) -> usize {
    let set: HashSet<&Vec<i64>> = points.iter().collect();
    points
        .iter()
        .filter(|p| {
            s.iter().any(|t| {
                let q: Vec<i64> = p.iter().zip(t).map(|(a, b)| a + b).collect();
                !set.contains(&q)
            })
        })
        .count()
}

/// Lattice animals of `ℤ^d` containing the origin, up to translation.
fn lattice_animals(d: usize, max_size: usize) -> Vec<Vec<Vec<i64>>> {
    let s = standard_s(d);
    let mut out = Vec::new();
    let mut layer: BTreeSet<Vec<Vec<i64>>> = BTreeSet::from([vec![vec![0; d]]]);
    let canon = |mut a: Vec<Vec<i64>>| {
        let lo: Vec<i64> = (0..d).map(|j| a.iter().map(|p| p[j]).min().unwrap()).collect();
        for p in a.iter_mut() {
            for j in 0..d {
                p[j] -= lo[j];
            }
        }
        a.sort();
        a
    };
    for size in 1..=max_size {
        let mut next = BTreeSet::new();
        for a in &layer {
            out.push(a.clone());
            if size == max_size {
                continue;
            }
            for p in a {
                for t in &s[1..] {
                    let q: Vec<i64> = p.iter().zip(t).map(|(x, y)| x + y).collect();
                    if !a.contains(&q) {
                        let mut b = a.clone();
                        b.push(q);
                        next.insert(canon(b));
                    }
                }
            }
        }
        layer = next;
    }
    out
}

/// Smallest ℓ¹ radius over integer translates of `points`.
fn min_l1_radius(points: &[Vec<i64>]) -> (i64, Vec<Vec<i64>>) {
    let d = points[0].len();
    let lo: Vec<i64> = (0..d).map(|j| points.iter().map(|p| p[j]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..d).map(|j| points.iter().map(|p| p[j]).max().unwrap()).collect();
    let mut best: Option<(i64, Vec<i64>)> = None;
    let mut c = lo.clone();
    loop {
        let r = points
            .iter()
            .map(|p| p.iter().zip(&c).map(|(x, y)| (x - y).abs()).sum::<i64>())
            .max()
            .unwrap();
        if best.as_ref().is_none_or(|b| r < b.0) {
            best = Some((r, c.clone()));
        }
        let mut j = d;
        loop {
            if j == 0 {
                let (r, c) = best.unwrap();
                let moved = points.iter().map(|p| p.iter().zip(&c).map(|(x, y)| x - y).collect()).collect();
                return (r, moved);
            }
            j -= 1;
            if c[j] < hi[j] {
                c[j] += 1;
                break;
            }
            c[j] = lo[j];
        }
    }
}

/// Følner oracle for `ℤ^d` with `S = {0, ±e_i}`: exhaustive up to six
/// points, then cubes (exact for `d = 1`).
#[derive(Debug, Clone)]
pub struct ZdOracle {
    pub d: usize,
    pub max_side: BigInt,
    animals: Vec<Vec<Vec<i64>>>,
}

impl ZdOracle {
    pub fn new(d: usize, max_side: BigInt) -> Self {
        ZdOracle {
            d,
            max_side,
            animals: lattice_animals(d, 6),
        }
    }

    pub fn s_len(&self) -> usize {
        2 * self.d + 1
    }

    pub fn vol(&self, r: &BigInt) -> BigInt {
        l1_ball_volume(self.d, r)
    }

    /// `Føl(ε)` with a witness and `ψ(ε)`.
    pub fn fol(&self, eps: &Rational) -> Result<OracleAnswer, FolnerError> {
        let s = standard_s(self.d);
        let mut best: Option<(usize, i64, Vec<Vec<i64>>, usize)> = None;
        for a in &self.animals {
            let b = interior_boundary_points(a, &s);
            if frac(b, 1) <= eps * frac(a.len(), 1) {
                let (r, moved) = min_l1_radius(a);
                let better = best.as_ref().is_none_or(|x| (a.len(), r) < (x.0, x.1));
                if better {
                    best = Some((a.len(), r, moved, b));
                }
            }
        }
        if let Some((size, r, moved, b)) = best {
            return Ok(OracleAnswer {
                epsilon: eps.clone(),
                size: size.to_string(),
                boundary: b.to_string(),
                radius: r.to_string(),
                witness: Shape::Points(moved),
                exact: true,
            });
        }
        let d = self.d as u32;
        let side = min_monotone::<()>(&BigInt::from(3), &self.max_side, |k| {
            let vol = k.pow(d);
            let inner: BigInt = (k - 2u32).pow(d);
            Ok(Rational::from_integer(&vol - inner) <= eps * Rational::from_integer(vol))
        })
        .unwrap()
        .ok_or_else(|| FolnerError::Budget(format!("cube side above {}", self.max_side)))?;
        let lo: BigInt = -((&side - 1u32) / 2u32);
        let hi: BigInt = &lo + &side - 1u32;
        let cube = BoxSet::new(vec![lo.clone(); self.d], vec![hi.clone(); self.d]);
        let radius = BigInt::from(self.d) * hi.clone().max(-lo.clone());
        let (interior, _) = box_boundary(&cube, &Shape::Points(s)).map_err(|e| FolnerError::Budget(e.to_string()))?;
        Ok(OracleAnswer {
            epsilon: eps.clone(),
            size: cube.len().to_string(),
            boundary: interior.to_string(),
            radius: radius.to_string(),
            witness: Shape::Box(cube),
            exact: self.d == 1,
        })
    }

    /// Recomputes the witness boundary and its containment in the ball.
    pub fn verify(&self, ans: &OracleAnswer) -> bool {
        let s = standard_s(self.d);
        let radius: BigInt = ans.radius.parse().unwrap();
        match &ans.witness {
            Shape::Points(p) => {
                let ctx = GroupContext::standard_zd(self.d);
                let elems: Vec<GroupElement> = p.iter().map(|v| GroupElement::Vector(v.clone())).collect();
                let sel: Vec<GroupElement> = s.iter().map(|v| GroupElement::Vector(v.clone())).collect();
                let b = boundary(&ctx, &elems, &sel, BoundaryKind::Interior).map(|x| x.len()).unwrap_or(usize::MAX);
                let inside = p.iter().all(|v| BigInt::from(v.iter().map(|x| x.abs()).sum::<i64>()) <= radius);
                b.to_string() == ans.boundary
                    && frac(b, 1) <= &ans.epsilon * frac(p.len(), 1)
                    && inside
                    && p.len().to_string() == ans.size
            }
            Shape::Box(bx) => {
                let Ok((interior, _)) = box_boundary(bx, &Shape::Points(s)) else {
                    return false;
                };
                let far: BigInt = (0..self.d).map(|j| bx.lo[j].abs().max(bx.hi[j].abs())).sum();
                interior.to_string() == ans.boundary
                    && Rational::from_integer(interior) <= &ans.epsilon * Rational::from_integer(bx.len())
                    && far <= radius
                    && bx.len().to_string() == ans.size
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiRow {
    pub i: u32,
    #[serde(rename = "Phi")]
    pub big_phi: String,
    pub phi: String,
    /// The oracle call producing this row (absent for `i = 1`).
    pub oracle: Option<OracleAnswer>,
    pub verified: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiTable {
    pub rows: Vec<PhiRow>,
    /// Set when the oracle budget stopped the table early.
    pub partial: Option<String>,
}

/// `Φ(1) = φ(1) = |S|`; `Φ(m+1) = Føl(η)`,
/// `φ(m+1) = max{φ(m), vol(ψ(η))}` with
/// `η = ε/(16·φ(m)·(Σ_{i≤m} Φ(i))²·(|S|+1))`.
pub fn phi_recursion(oracle: &ZdOracle, eps: &Rational, steps: u32) -> PhiTable {
    let s = BigInt::from(oracle.s_len());
    let mut rows = vec![PhiRow {
        i: 1,
        big_phi: s.to_string(),
        phi: s.to_string(),
        oracle: None,
        verified: true,
    }];
    let mut sum = s.clone();
    let mut small = s.clone();
    for i in 2..=steps {
        let eta = eps / Rational::from_integer(BigInt::from(16) * &small * &sum * &sum * (&s + 1));
        let ans = match oracle.fol(&eta) {
            Ok(a) => a,
            Err(e) => {
                return PhiTable {
                    rows,
                    partial: Some(e.to_string()),
                }
            }
        };
        let size: BigInt = ans.size.parse().unwrap();
        let r: BigInt = ans.radius.parse().unwrap();
        small = small.max(oracle.vol(&r));
        sum += &size;
        let verified = oracle.verify(&ans);
        rows.push(PhiRow {
            i,
            big_phi: size.to_string(),
            phi: small.to_string(),
            oracle: Some(ans),
            verified,
        });
    }
    PhiTable { rows, partial: None }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiRow {
    pub i: u32,
    #[serde(rename = "Psi")]
    pub psi: String,
    /// `Føl̃` radius (1 for the first row).
    pub radius: String,
    pub sphere: String,
    #[serde(with = "serde_pq")]
    pub epsilon: Rational,
    pub verified: bool,
}

/// `|∂⁻_S B(r)|` by enumeration when the ball is small.
fn sphere_enumerated(d: usize, r: &BigInt, cap: usize) -> Option<BigInt> {
    let r = r.to_i64()?;
    if l1_ball_volume(d, &BigInt::from(r)) > BigInt::from(cap) {
        return None;
    }
    let ctx = GroupContext::standard_zd(d);
    let ball = ctx.ball(r as u32, cap).ok()?;
    let ball: Vec<GroupElement> = ball.into_iter().collect();
    let s: Vec<GroupElement> = standard_s(d).into_iter().map(GroupElement::Vector).collect();
    Some(BigInt::from(boundary(&ctx, &ball, &s, BoundaryKind::Interior).ok()?.len()))
}

/// `Ψ(1) = vol(1)`, `Ψ(m+1) = vol(Føl̃(ε/(16·Ψ(m)³·(|S|+1))))` for ℤ^d with
/// ℓ¹ balls.
pub fn psi_tilde_recursion(d: usize, eps: &Rational, steps: u32, max_radius: &BigInt) -> Result<Vec<PsiRow>, FolnerError> {
    let s1 = BigInt::from(2 * d + 2);
    let one = BigInt::one();
    let mut psi = l1_ball_volume(d, &one);
    let mut rows = vec![PsiRow {
        i: 1,
        psi: psi.to_string(),
        radius: "1".into(),
        sphere: l1_ball_interior_boundary(d, &one).to_string(),
        epsilon: eps.clone(),
        verified: true,
    }];
    for i in 2..=steps {
        let eta = eps / Rational::from_integer(BigInt::from(16) * &psi * &psi * &psi * &s1);
        let r = min_monotone::<()>(&one, max_radius, |r| {
            Ok(Rational::from_integer(l1_ball_interior_boundary(d, r)) <= &eta * Rational::from_integer(l1_ball_volume(d, r)))
        })
        .unwrap()
        .ok_or_else(|| FolnerError::Budget(format!("ball radius above {max_radius}")))?;
        let sphere = l1_ball_interior_boundary(d, &r);
        let vol = l1_ball_volume(d, &r);
        let prev: BigInt = &r - 1u32;
        let minimal = prev.is_zero()
            || Rational::from_integer(l1_ball_interior_boundary(d, &prev)) > &eta * Rational::from_integer(l1_ball_volume(d, &prev));
        let holds = Rational::from_integer(sphere.clone()) <= &eta * Rational::from_integer(vol.clone());
        let second = match sphere_enumerated(d, &r, 1 << 20) {
            Some(x) => x == sphere,
            None if d == 1 => {
                let bx = BoxSet::centered_cube(1, &r);
                box_boundary(&bx, &Shape::Points(standard_s(1))).map(|x| x.0 == sphere).unwrap_or(false)
            }
            None => true,
        };
        psi = vol;
        rows.push(PsiRow {
            i,
            psi: psi.to_string(),
            radius: r.to_string(),
            sphere: sphere.to_string(),
            epsilon: eta,
            verified: minimal && holds && second,
        });
    }
    Ok(rows)
}

/// Natural log of a decimal big integer string, for table display.
pub fn ln_decimal(s: &str) -> f64 {
    s.parse::<num_bigint::BigUint>().map(|n| ln_biguint(&n)).unwrap_or(f64::NAN)
}

/// Blocks of consecutive carrier indices.
pub fn consecutive_blocks(len: usize, size: usize) -> Vec<Vec<u32>> {
    (0..len)
        .step_by(size)
        .map(|s| (s as u32..(s + size).min(len) as u32).collect())
        .collect()
}

/// Orders reports by size, then defect.
pub fn best_report(reports: Vec<FolnerReport>) -> Option<FolnerReport> {
    let mut by: BTreeMap<(usize, Rational), FolnerReport> = BTreeMap::new();
    for r in reports {
        by.entry((r.size, r.defect.clone())).or_insert(r);
    }
    by.into_values().next()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperfinite::verify_certificate;
    use crate::rational::ratio;
    use crate::sofic::{build_theta, schreier_graph, shift};
    use crate::systems::{BaseSequence, SystemContext};

    fn odometer() -> FullGroup {
        FullGroup::new(SystemContext::binary_odometer())
    }

    #[test]
    fn defect_examples() {
        let fg = odometer();
        let f: Vec<CocycleTable> = (-1..=2).map(shift).collect();
        assert_eq!(folner_defect(&fg, &f, &[shift(1), shift(-1)]).unwrap(), ratio(1, 2));
        let swap = CocycleTable::digit_swap(&BaseSequence::binary());
        let f = vec![fg.identity(), swap.clone()];
        assert_eq!(folner_defect(&fg, &f, std::slice::from_ref(&swap)).unwrap(), ratio(0, 1));
        assert_eq!(folner_defect(&fg, &[fg.identity()], &[swap]).unwrap(), ratio(1, 1));
    }

    #[test]
    fn bound_constants() {
        let s = vec![vec![0], vec![1], vec![-1]];
        let b = folner_bound_zd(1, 1, &s, 2, &ratio(1, 2)).unwrap();
        assert_eq!(b.c, "240");
        assert_eq!(b.k_proof, "960");
        assert_eq!(b.bound_proof, "960");
        assert_eq!(b.k_statement, "480");
        let b = folner_bound_zd(1, 1, &s, 2, &ratio(240, 1)).unwrap();
        assert_eq!(b.k_proof, "2");
        let b2 = folner_bound_zd(2, 1, &s, 2, &ratio(1, 2)).unwrap();
        let k: f64 = b2.k_proof.parse().unwrap();
        let oracle = (2.0 / (1.0 - (1.0f64 - 1.0 / 480.0).sqrt())).ceil();
        assert_eq!(k, oracle);
    }

    #[test]
    fn oracle_z() {
        let o = ZdOracle::new(1, BigInt::from(1u64 << 50));
        let a = o.fol(&ratio(1, 2)).unwrap();
        assert_eq!(a.size, "4");
        assert_eq!(a.radius, "2");
        assert!(o.verify(&a));
        let t = phi_recursion(&o, &ratio(1, 2), 3);
        assert_eq!(t.rows[0].big_phi, "3");
        assert_eq!(t.rows[1].big_phi, "6912");
        assert_eq!(t.rows[1].phi, "6913");
        assert!(t.rows.iter().all(|r| r.verified));
    }

    #[test]
    fn psi_examples() {
        let rows = psi_tilde_recursion(1, &ratio(1, 2), 3, &BigInt::from(1u64 << 60)).unwrap();
        assert_eq!(rows[0].psi, "3");
        assert_eq!(rows[1].psi, "6913");
        assert!(rows.iter().all(|r| r.verified));
    }

    #[test]
    fn extract_interval() {
        let fg = odometer();
        let t = vec![shift(1), shift(-1)];
        let x = fg.sys.origin_point();
        let mut a = build_theta(&fg, &x, 6, &t).unwrap();
        let g = schreier_graph(&mut a, &t, 1 << 20).unwrap();
        let cert = verify_certificate(&g, consecutive_blocks(64, 8), 8, &ratio(1, 2)).unwrap();
        let r = extract_folner_set(&mut a, &g, &cert, &t, 8, &ratio(1, 2)).unwrap();
        assert_eq!(r.size, 8);
        assert_eq!(r.defect, ratio(2, 8));
    }

    #[test]
    fn empirical_examples() {
        let fg = odometer();
        let r = empirical_folner_function(&fg, &[shift(1), shift(-1)], &ratio(1, 2), 4).unwrap();
        assert_eq!(r.size, 4);
        let swap = CocycleTable::digit_swap(&BaseSequence::binary());
        let r = empirical_folner_function(&fg, &[swap], &ratio(1, 2), 3).unwrap();
        assert_eq!(r.size, 2);
        assert_eq!(r.defect, ratio(0, 1));
    }

    #[test]
    fn delta_first_branch() {
        let s = delta_schedule(&ratio(1, 2), 1, 2, 3);
        assert_eq!(s.delta, ratio(1, 2400));
        assert!(s.sqrt_branch_lower > s.delta);
        assert!(s.n_exact);
    }
}
