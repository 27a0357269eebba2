//! Partition certificates for labeled graphs and their transports, greedy
//! quasi-tiling, tile towers and Følner-graph partitions.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxes::{box_boundary, box_full_boundary, BoxSet, Shape, ShapeError};
use crate::graph::{Edge, LabeledGraph};
use crate::groups::{boundary, BoundaryKind, GroupContext, GroupElement, GroupError, GroupKind};
use crate::rational::{frac, min_power_below, pow, serde_pq, serde_pq_opt, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CertError {
    #[error("blocks do not partition the vertex set: {0}")]
    NotPartition(String),
    #[error("block {block} has {size} > K = {k} vertices")]
    BlockTooLarge { block: usize, size: usize, k: usize },
    #[error("crossing fraction {0} is not below epsilon")]
    FractionTooLarge(String),
    #[error("not a subgraph")]
    NotSubgraph,
    #[error("vertex counts differ: {0} vs {1}")]
    UnequalVertexCounts(u32, u32),
    #[error("degree bound {bound} violated at vertex {vertex} (degree {degree})")]
    DegreeBound { vertex: u32, degree: u32, bound: u32 },
    #[error("budget of {0} exceeded")]
    Budget(usize),
}

/// Block partition of a graph with block-size bound and crossing count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionCertificate {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(with = "serde_pq_opt")]
    pub epsilon: Option<Rational>,
    pub vertices: u32,
    pub blocks: Vec<Vec<u32>>,
    pub crossing_edges: u64,
    #[serde(with = "serde_pq")]
    pub fraction: Rational,
}

fn assignment(vertices: u32, blocks: &[Vec<u32>]) -> Result<Vec<u32>, CertError> {
    let mut owner = vec![u32::MAX; vertices as usize];
    for (b, block) in blocks.iter().enumerate() {
        for &v in block {
            if v >= vertices {
                return Err(CertError::NotPartition(format!("vertex {v} out of range")));
            }
            if owner[v as usize] != u32::MAX {
                return Err(CertError::NotPartition(format!("vertex {v} in two blocks")));
            }
            owner[v as usize] = b as u32;
        }
    }
    if let Some(v) = owner.iter().position(|&o| o == u32::MAX) {
        return Err(CertError::NotPartition(format!("vertex {v} uncovered")));
    }
    Ok(owner)
}

/// Edges whose endpoints lie in different blocks (parallel sweep).
pub fn count_crossing(g: &LabeledGraph, owner: &[u32]) -> u64 {
    g.edges
        .par_chunks(1 << 14)
        .map(|chunk| {
            chunk
                .iter()
                .filter(|e| owner[e.source as usize] != owner[e.target as usize])
                .count() as u64
        })
        .sum()
}

/// Sequential recount by block membership sets.
fn count_crossing_sets(g: &LabeledGraph, blocks: &[Vec<u32>]) -> u64 {
    let mut block_of = HashMap::new();
    for (i, b) in blocks.iter().enumerate() {
        for &v in b {
            block_of.insert(v, i);
        }
    }
    g.edges
        .iter()
        .filter(|e| block_of.get(&e.source) != block_of.get(&e.target))
        .count() as u64
}

/// Builds a certificate without an ε requirement.
pub fn certify(g: &LabeledGraph, blocks: Vec<Vec<u32>>, k: usize) -> Result<PartitionCertificate, CertError> {
    let owner = assignment(g.vertices, &blocks)?;
    if let Some((i, b)) = blocks.iter().enumerate().find(|(_, b)| b.len() > k) {
        return Err(CertError::BlockTooLarge {
            block: i,
            size: b.len(),
            k,
        });
    }
    let crossing = count_crossing(g, &owner);
    let fraction = if g.vertices == 0 {
        Rational::zero()
    } else {
        Rational::new(BigInt::from(crossing), BigInt::from(g.vertices))
    };
    Ok(PartitionCertificate {
        k,
        epsilon: None,
        vertices: g.vertices,
        blocks,
        crossing_edges: crossing,
        fraction,
    })
}

/// Certificate whose fraction is strictly below `eps`.
pub fn verify_certificate(
    g: &LabeledGraph,
    blocks: Vec<Vec<u32>>,
    k: usize,
    eps: &Rational,
) -> Result<PartitionCertificate, CertError> {
    let mut c = certify(g, blocks, k)?;
    if &c.fraction >= eps {
        return Err(CertError::FractionTooLarge(c.fraction.to_string()));
    }
    c.epsilon = Some(eps.clone());
    Ok(c)
}

impl PartitionCertificate {
    /// Re-verifies blocks, sizes and the crossing count from scratch.
    pub fn recheck(&self, g: &LabeledGraph) -> Result<(), CertError> {
        assignment(g.vertices, &self.blocks)?;
        if self.vertices != g.vertices {
            return Err(CertError::UnequalVertexCounts(self.vertices, g.vertices));
        }
        if let Some((i, b)) = self.blocks.iter().enumerate().find(|(_, b)| b.len() > self.k) {
            return Err(CertError::BlockTooLarge {
                block: i,
                size: b.len(),
                k: self.k,
            });
        }
        let c = count_crossing_sets(g, &self.blocks);
        if c != self.crossing_edges {
            return Err(CertError::NotPartition(format!(
                "stored crossing count {} but recount {c}",
                self.crossing_edges
            )));
        }
        if let Some(eps) = &self.epsilon {
            if &self.fraction >= eps {
                return Err(CertError::FractionTooLarge(self.fraction.to_string()));
            }
        }
        Ok(())
    }
}

/// Replaces each block by the connected components of its induced subgraph.
pub fn split_connected(g: &LabeledGraph, cert: &PartitionCertificate) -> Result<PartitionCertificate, CertError> {
    let owner = assignment(g.vertices, &cert.blocks)?;
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); g.vertices as usize];
    for e in &g.edges {
        if owner[e.source as usize] == owner[e.target as usize] {
            adj[e.source as usize].push(e.target);
            adj[e.target as usize].push(e.source);
        }
    }
    let mut seen = vec![false; g.vertices as usize];
    let mut blocks = Vec::new();
    for block in &cert.blocks {
        let mut sorted = block.clone();
        sorted.sort_unstable();
        for &v in &sorted {
            if seen[v as usize] {
                continue;
            }
            seen[v as usize] = true;
            let mut comp = vec![v];
            let mut stack = vec![v];
            while let Some(x) = stack.pop() {
                for &y in &adj[x as usize] {
                    if !seen[y as usize] {
                        seen[y as usize] = true;
                        comp.push(y);
                        stack.push(y);
                    }
                }
            }
            comp.sort_unstable();
            blocks.push(comp);
        }
    }
    let mut out = certify(g, blocks, cert.k)?;
    out.epsilon = cert.epsilon.clone();
    Ok(out)
}

/// Same blocks on a subgraph with the same vertex set.
pub fn restrict_certificate(
    g: &LabeledGraph,
    cert: &PartitionCertificate,
    sub: &LabeledGraph,
) -> Result<PartitionCertificate, CertError> {
    if !sub.is_subgraph_of(g) {
        return Err(CertError::NotSubgraph);
    }
    let mut out = certify(sub, cert.blocks.clone(), cert.k)?;
    out.epsilon = cert.epsilon.clone();
    Ok(out)
}

/// Certificate for the disjoint union (vertices of graph `i` shifted by
/// `i·|V|`); all graphs must have the same number of vertices.
pub fn union_certificate(
    graphs: &[LabeledGraph],
    certs: &[PartitionCertificate],
) -> Result<(LabeledGraph, PartitionCertificate), CertError> {
    let n = graphs.first().map(|g| g.vertices).unwrap_or(0);
    if let Some(g) = graphs.iter().find(|g| g.vertices != n) {
        return Err(CertError::UnequalVertexCounts(n, g.vertices));
    }
    let union = LabeledGraph::disjoint_union(graphs);
    let mut blocks = Vec::new();
    for (i, c) in certs.iter().enumerate() {
        let off = i as u32 * n;
        blocks.extend(c.blocks.iter().map(|b| b.iter().map(|v| v + off).collect::<Vec<u32>>()));
    }
    let k = certs.iter().map(|c| c.k).max().unwrap_or(0);
    let cert = certify(&union, blocks, k)?;
    Ok((union, cert))
}

/// Which side of the inclusion the new graph is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// `V(G') ⊆ V(G)`.
    Shrink,
    /// `V(G) ⊆ V(G'')`.
    Enlarge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportResult {
    pub cert: PartitionCertificate,
    /// The formula bound the fraction is compared against.
    #[serde(with = "serde_pq")]
    pub bound: Rational,
    pub within_bound: bool,
}

fn check_degree(g: &LabeledGraph, d: u32) -> Result<(), CertError> {
    for (v, &deg) in g.degrees().iter().enumerate() {
        if deg > d {
            return Err(CertError::DegreeBound {
                vertex: v as u32,
                degree: deg,
                bound: d,
            });
        }
    }
    Ok(())
}

/// Moves a certificate along a vertex inclusion. `embedding[i]` is the
/// image of vertex `i` of the smaller graph in the larger one.
pub fn transport_certificate(
    g: &LabeledGraph,
    cert: &PartitionCertificate,
    other: &LabeledGraph,
    embedding: &[u32],
    direction: Transport,
    d: u32,
) -> Result<TransportResult, CertError> {
    check_degree(g, d)?;
    check_degree(other, d)?;
    let (small, large) = match direction {
        Transport::Shrink => (other, g),
        Transport::Enlarge => (g, other),
    };
    if embedding.len() != small.vertices as usize
        || embedding.iter().any(|&v| v >= large.vertices)
        || embedding.iter().collect::<HashSet<_>>().len() != embedding.len()
    {
        return Err(CertError::NotSubgraph);
    }
    let large_edges: HashSet<(u32, u32, u32)> = large.edges.iter().map(|e| (e.source, e.target, e.label)).collect();
    // edges of the small graph are edges of the large one
    if small
        .edges
        .iter()
        .any(|e| !large_edges.contains(&(embedding[e.source as usize], embedding[e.target as usize], e.label)))
    {
        return Err(CertError::NotSubgraph);
    }
    let owner = assignment(g.vertices, &cert.blocks)?;
    match direction {
        Transport::Shrink => {
            let mut by_block: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
            for (i, &v) in embedding.iter().enumerate() {
                by_block.entry(owner[v as usize]).or_default().push(i as u32);
            }
            let out = certify(other, by_block.into_values().collect(), cert.k)?;
            let bound = if other.vertices == 0 {
                Rational::zero()
            } else {
                &cert.fraction * frac(g.vertices as usize, other.vertices as usize)
            };
            Ok(TransportResult {
                within_bound: out.fraction <= bound,
                cert: out,
                bound,
            })
        }
        Transport::Enlarge => {
            let image: HashSet<u32> = embedding.iter().copied().collect();
            let back: HashMap<u32, u32> = embedding.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
            let small_edges: HashSet<(u32, u32, u32)> = g.edges.iter().map(|e| (e.source, e.target, e.label)).collect();
            // the old graph is induced in the new one
            for e in &other.edges {
                if image.contains(&e.source) && image.contains(&e.target) {
                    let key = (back[&e.source], back[&e.target], e.label);
                    if !small_edges.contains(&key) {
                        return Err(CertError::NotSubgraph);
                    }
                }
            }
            let mut blocks: Vec<Vec<u32>> = cert
                .blocks
                .iter()
                .map(|b| b.iter().map(|&v| embedding[v as usize]).collect())
                .collect();
            for v in 0..other.vertices {
                if !image.contains(&v) {
                    blocks.push(vec![v]);
                }
            }
            let out = certify(other, blocks, cert.k.max(1))?;
            let added = (other.vertices - g.vertices) as usize;
            let bound = &cert.fraction + frac(d as usize * added, other.vertices as usize);
            Ok(TransportResult {
                within_bound: out.fraction <= bound,
                cert: out,
                bound,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    Explicit { cap: usize },
    BoundOnly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerCertificate {
    pub l: u32,
    /// Block-size bound `K^l`.
    pub k: String,
    /// `Σ_{m=1}^{l} C(l,m)·|T|·f^m`.
    #[serde(with = "serde_pq")]
    pub bound: Rational,
    /// `Σ_t (A_t^l − N_t^l)` with `A_t` the `t`-edges and `N_t` those
    /// inside a block.
    pub crossing_edges: String,
    #[serde(with = "serde_pq")]
    pub fraction: Rational,
    /// Present in explicit mode; its recount equals `crossing_edges`.
    pub explicit: Option<PartitionCertificate>,
}

/// Product-block certificate for the diagonal power `G^l`.
pub fn power_certificate(
    g: &LabeledGraph,
    cert: &PartitionCertificate,
    l: u32,
    mode: PowerMode,
) -> Result<PowerCertificate, CertError> {
    g.validate().map_err(|e| CertError::NotPartition(e.to_string()))?;
    let owner = assignment(g.vertices, &cert.blocks)?;
    let n = BigInt::from(g.vertices);
    let total = n.pow(l);
    let labels = g.labels.max(1);
    let mut crossing = BigInt::zero();
    for t in 0..g.labels {
        let a = g.edges.iter().filter(|e| e.label == t).count();
        let inside = g
            .edges
            .iter()
            .filter(|e| e.label == t && owner[e.source as usize] == owner[e.target as usize])
            .count();
        crossing += BigInt::from(a).pow(l) - BigInt::from(inside).pow(l);
    }
    let mut bound = Rational::zero();
    for m in 1..=l {
        let c = binomial(BigInt::from(l), BigInt::from(m));
        bound += Rational::from_integer(c * BigInt::from(labels)) * pow(&cert.fraction, m as u64);
    }
    let fraction = if total.is_zero() {
        Rational::zero()
    } else {
        Rational::new(crossing.clone(), total.clone())
    };
    let explicit = match mode {
        PowerMode::BoundOnly => None,
        PowerMode::Explicit { cap } => {
            if total > BigInt::from(cap) {
                return Err(CertError::Budget(cap));
            }
            let power = g.diagonal_power(l).ok_or(CertError::Budget(cap))?;
            let nv = g.vertices as u64;
            let mut blocks: BTreeMap<Vec<u32>, Vec<u32>> = BTreeMap::new();
            for v in 0..power.vertices {
                let mut rest = v as u64;
                let mut key = Vec::with_capacity(l as usize);
                for _ in 0..l {
                    key.push(owner[(rest % nv) as usize]);
                    rest /= nv;
                }
                blocks.entry(key).or_default().push(v);
            }
            let k = cert.k.checked_pow(l).ok_or(CertError::Budget(cap))?;
            let c = certify(&power, blocks.into_values().collect(), k)?;
            assert_eq!(BigInt::from(c.crossing_edges), crossing, "power crossing counts disagree");
            Some(c)
        }
    };
    Ok(PowerCertificate {
        l,
        k: BigInt::from(cert.k).pow(l).to_string(),
        bound,
        crossing_edges: crossing.to_string(),
        fraction,
        explicit,
    })
}

/// Whether construction hypotheses are enforced or only reported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisPolicy {
    Enforce,
    #[default]
    Report,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

fn hyp(name: &str, holds: bool, detail: String) -> HypothesisCheck {
    HypothesisCheck {
        name: name.into(),
        holds,
        detail,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TilingError {
    #[error("hypothesis failed: {0}")]
    Hypothesis(String),
    #[error("coverage {achieved} below 1 − ε")]
    Coverage { achieved: String },
    #[error("tiles must be nested and nonempty")]
    BadTiles,
    #[error("search budget exhausted at tile {index}: {detail}")]
    Budget { index: usize, detail: String },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Cert(#[from] CertError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Placement {
    /// Index into `tiles`.
    pub tile: usize,
    pub center: GroupElement,
    /// Points of `T_k c` not covered by earlier placements.
    pub exact: Vec<GroupElement>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuasiTiling {
    pub tiles: Vec<Vec<GroupElement>>,
    pub placements: Vec<Placement>,
    #[serde(with = "serde_pq")]
    pub coverage: Rational,
    #[serde(with = "serde_pq")]
    pub epsilon: Rational,
    pub hypotheses: Vec<HypothesisCheck>,
}

impl QuasiTiling {
    pub fn centers(&self, k: usize) -> Vec<&GroupElement> {
        self.placements.iter().filter(|p| p.tile == k).map(|p| &p.center).collect()
    }
}

/// Checks conditions (1) and (2) of a quasi-tiling from scratch:
/// `⋃ T_k c ⊆ A` with `|⋃ T_k c| ≥ (1−ε)|A|`, and disjoint exact tiles
/// `T̂_k c ⊆ T_k c` with `|T̂_k c| ≥ (1−ε)|T_k c|`.
pub fn verify_quasitiling(ctx: &GroupContext, a: &[GroupElement], q: &QuasiTiling) -> Result<(bool, bool), GroupError> {
    let aset: HashSet<&GroupElement> = a.iter().collect();
    let one_minus = Rational::one() - &q.epsilon;
    let mut union: HashSet<GroupElement> = HashSet::new();
    let mut inside = true;
    let mut exact_seen: HashSet<&GroupElement> = HashSet::new();
    let mut cond2 = true;
    for p in &q.placements {
        let translate: HashSet<GroupElement> = q.tiles[p.tile]
            .iter()
            .map(|t| ctx.multiply(t, &p.center))
            .collect::<Result<_, _>>()?;
        for g in &translate {
            if !aset.contains(g) {
                inside = false;
            }
        }
        for g in &p.exact {
            if !translate.contains(g) || !exact_seen.insert(g) {
                cond2 = false;
            }
        }
        if frac(p.exact.len(), 1) < &one_minus * frac(translate.len(), 1) {
            cond2 = false;
        }
        union.extend(translate);
    }
    let cond1 = inside && frac(union.len(), 1) >= &one_minus * frac(aset.len(), 1);
    Ok((cond1, cond2))
}

fn full_boundary_explicit(ctx: &GroupContext, a: &[GroupElement], s: &[GroupElement]) -> Result<usize, GroupError> {
    Ok(boundary(ctx, a, s, BoundaryKind::Both)?.len())
}

/// `A` as a box when it is one.
pub fn as_box(a: &[GroupElement]) -> Option<BoxSet> {
    let first = a.first()?.as_vector()?;
    let d = first.len();
    let mut lo = first.to_vec();
    let mut hi = first.to_vec();
    for g in a {
        let v = g.as_vector()?;
        for j in 0..d {
            lo[j] = lo[j].min(v[j]);
            hi[j] = hi[j].max(v[j]);
        }
    }
    let b = BoxSet::new(lo.iter().map(|&x| x.into()).collect(), hi.iter().map(|&x| x.into()).collect());
    let distinct: HashSet<&GroupElement> = a.iter().collect();
    (b.len() == BigInt::from(distinct.len())).then_some(b)
}

fn shape_of(a: &[GroupElement]) -> Shape {
    match as_box(a) {
        Some(b) => Shape::Box(b),
        None => Shape::Points(a.iter().map(|g| g.as_vector().unwrap().to_vec()).collect()),
    }
}

/// `|∂⁻_T A|`, symbolic when `A` is a box in ℤ^d.
fn interior_boundary(ctx: &GroupContext, a: &[GroupElement], t: &[GroupElement]) -> Result<BigInt, TilingError> {
    if matches!(ctx.kind, GroupKind::IntVector { .. }) {
        if let Some(b) = as_box(a) {
            let ts = shape_of(t);
            if matches!(ts, Shape::Box(_)) || t.len() <= 20 {
                return Ok(box_boundary(&b, &ts)?.0);
            }
        }
    }
    Ok(BigInt::from(boundary(ctx, a, t, BoundaryKind::Interior)?.len()))
}

/// Greedy ε-quasi-tiling of `A` by the nested tiles (largest placed first;
/// centers in lexicographic order; a first pass places fully fresh
/// translates, a second pass any translate with at least `(1−ε)|T|` fresh
/// points). Hypotheses are evaluated and, under `Enforce`, required.
pub fn quasitile(
    ctx: &GroupContext,
    a: &[GroupElement],
    tiles: &[Vec<GroupElement>],
    eps: &Rational,
    policy: HypothesisPolicy,
) -> Result<QuasiTiling, TilingError> {
    if tiles.is_empty() || tiles.iter().any(|t| t.is_empty()) {
        return Err(TilingError::BadTiles);
    }
    for w in tiles.windows(2) {
        let big: HashSet<&GroupElement> = w[1].iter().collect();
        if !w[0].iter().all(|g| big.contains(g)) {
            return Err(TilingError::BadTiles);
        }
    }
    let mut hyps = Vec::new();
    let half = Rational::new(1.into(), 2.into());
    hyps.push(hyp("0 < ε < 1/2", eps > &Rational::zero() && eps < &half, format!("ε = {eps}")));
    let n = tiles.len() as u64;
    let q = Rational::one() - eps / Rational::from_integer(2.into());
    hyps.push(hyp(
        "(1 − ε/2)^n < ε",
        &pow(&q, n) < eps,
        format!("n = {n}, (1 − ε/2)^n = {}", pow(&q, n)),
    ));
    for k in 1..tiles.len() {
        let b = full_boundary_explicit(ctx, &tiles[k], &tiles[k - 1])?;
        let lim = eps / Rational::from_integer(8.into()) * frac(tiles[k].len(), 1);
        hyps.push(hyp(
            &format!("|∂_(T_{k}) T_{}| ≤ (ε/8)|T_{}|", k + 1, k + 1),
            frac(b, 1) <= lim,
            format!("{b} vs {lim}"),
        ));
    }
    let ib = interior_boundary(ctx, a, tiles.last().unwrap())?;
    let lim = eps * frac(a.len(), 1);
    hyps.push(hyp(
        "A is (T_n, ε)-invariant",
        Rational::from_integer(ib.clone()) < lim,
        format!("|∂⁻A| = {ib} vs ε|A| = {lim}"),
    ));
    if policy == HypothesisPolicy::Enforce {
        if let Some(h) = hyps.iter().find(|h| !h.holds) {
            return Err(TilingError::Hypothesis(format!("{}: {}", h.name, h.detail)));
        }
    }

    let placements = match ctx.kind {
        GroupKind::IntVector { .. } => greedy_grid(a, tiles, eps),
        _ => greedy_generic(ctx, a, tiles, eps)?,
    };
    let covered: usize = placements.iter().map(|p| p.exact.len()).sum();
    let distinct = a.iter().collect::<HashSet<_>>().len();
    let out = QuasiTiling {
        tiles: tiles.to_vec(),
        placements,
        coverage: frac(covered, distinct),
        epsilon: eps.clone(),
        hypotheses: hyps,
    };
    let (c1, c2) = verify_quasitiling(ctx, a, &out)?;
    if !c2 {
        return Err(TilingError::Hypothesis("exact tiles violate condition (2)".into()));
    }
    if !c1 {
        return Err(TilingError::Coverage {
            achieved: out.coverage.to_string(),
        });
    }
    Ok(out)
}

fn thresholds(size: usize, eps: &Rational) -> [usize; 2] {
    let need = ((Rational::one() - eps) * frac(size, 1)).ceil().to_integer().to_usize().unwrap();
    [size, need.max(1)]
}

fn greedy_grid(a: &[GroupElement], tiles: &[Vec<GroupElement>], eps: &Rational) -> Vec<Placement> {
    let pts: Vec<&[i64]> = a.iter().map(|g| g.as_vector().unwrap()).collect();
    let d = pts[0].len();
    let lo: Vec<i64> = (0..d).map(|j| pts.iter().map(|p| p[j]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..d).map(|j| pts.iter().map(|p| p[j]).max().unwrap()).collect();
    let dims: Vec<usize> = (0..d).map(|j| (hi[j] - lo[j] + 1) as usize).collect();
    let index = |p: &[i64]| -> Option<usize> {
        let mut idx = 0usize;
        for j in 0..d {
            if p[j] < lo[j] || p[j] > hi[j] {
                return None;
            }
            idx = idx * dims[j] + (p[j] - lo[j]) as usize;
        }
        Some(idx)
    };
    let cells: usize = dims.iter().product();
    let mut in_a = vec![false; cells];
    for p in &pts {
        in_a[index(p).unwrap()] = true;
    }
    let mut covered = vec![false; cells];
    let mut placements = Vec::new();
    for k in (0..tiles.len()).rev() {
        let tile: Vec<&[i64]> = tiles[k].iter().map(|g| g.as_vector().unwrap()).collect();
        let tlo: Vec<i64> = (0..d).map(|j| tile.iter().map(|p| p[j]).min().unwrap()).collect();
        let thi: Vec<i64> = (0..d).map(|j| tile.iter().map(|p| p[j]).max().unwrap()).collect();
        let clo: Vec<i64> = (0..d).map(|j| lo[j] - tlo[j]).collect();
        let chi: Vec<i64> = (0..d).map(|j| hi[j] - thi[j]).collect();
        if (0..d).any(|j| clo[j] > chi[j]) {
            continue;
        }
        for need in thresholds(tile.len(), eps) {
            let allowed_covered = tile.len() - need;
            let mut c = clo.clone();
            'centers: loop {
                let mut fresh = Vec::with_capacity(tile.len());
                let mut bad = 0usize;
                let mut ok = true;
                let mut q = vec![0i64; d];
                for t in &tile {
                    for j in 0..d {
                        q[j] = t[j] + c[j];
                    }
                    let idx = index(&q).unwrap();
                    if !in_a[idx] {
                        ok = false;
                        break;
                    }
                    if covered[idx] {
                        bad += 1;
                        if bad > allowed_covered {
                            ok = false;
                            break;
                        }
                    } else {
                        fresh.push(idx);
                    }
                }
                if ok {
                    let mut exact = Vec::with_capacity(fresh.len());
                    for &idx in &fresh {
                        covered[idx] = true;
                        let mut rest = idx;
                        let mut v = vec![0i64; d];
                        for j in (0..d).rev() {
                            v[j] = (rest % dims[j]) as i64 + lo[j];
                            rest /= dims[j];
                        }
                        exact.push(GroupElement::Vector(v));
                    }
                    exact.sort();
                    placements.push(Placement {
                        tile: k,
                        center: GroupElement::Vector(c.clone()),
                        exact,
                    });
                }
                // next center in lexicographic order
                let mut j = d;
                loop {
                    if j == 0 {
                        break 'centers;
                    }
                    j -= 1;
                    if c[j] < chi[j] {
                        c[j] += 1;
                        for x in c.iter_mut().skip(j + 1).zip(clo.iter().skip(j + 1)) {
                            *x.0 = *x.1;
                        }
                        break;
                    }
                }
            }
        }
    }
    placements
}

fn greedy_generic(
    ctx: &GroupContext,
    a: &[GroupElement],
    tiles: &[Vec<GroupElement>],
    eps: &Rational,
) -> Result<Vec<Placement>, GroupError> {
    let aset: HashSet<&GroupElement> = a.iter().collect();
    let mut centers: Vec<GroupElement> = Vec::new();
    for g in a {
        for t in &tiles[0] {
            centers.push(ctx.multiply(&ctx.inverse(t)?, g)?);
        }
    }
    centers.sort();
    centers.dedup();
    let mut covered: HashSet<GroupElement> = HashSet::new();
    let mut placements = Vec::new();
    for k in (0..tiles.len()).rev() {
        for need in thresholds(tiles[k].len(), eps) {
            for c in &centers {
                let tr: Vec<GroupElement> = tiles[k].iter().map(|t| ctx.multiply(t, c)).collect::<Result<_, _>>()?;
                if !tr.iter().all(|g| aset.contains(g)) {
                    continue;
                }
                let mut fresh: Vec<GroupElement> = tr.into_iter().filter(|g| !covered.contains(g)).collect();
                if fresh.len() >= need {
                    fresh.sort();
                    covered.extend(fresh.iter().cloned());
                    placements.push(Placement {
                        tile: k,
                        center: c.clone(),
                        exact: fresh,
                    });
                }
            }
        }
    }
    Ok(placements)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TowerLevel {
    pub tile: Shape,
    pub size: String,
    /// `|∂_{T_i} K_i|` and the bound `ε|K_i|/(16|T_i|^2)`, for `i ≥ 2`.
    pub boundary: Option<String>,
    pub boundary_bound: Option<String>,
    /// `|∂_{T_{i−1}} T_i| ≤ (ε/8)|T_i|`, re-verified.
    pub conclusion_holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TileTower {
    pub n: u64,
    #[serde(with = "serde_pq")]
    pub epsilon: Rational,
    pub levels: Vec<TowerLevel>,
}

impl TileTower {
    /// Explicit tiles, if each fits under `cap` points.
    pub fn explicit_tiles(&self, cap: usize) -> Result<Vec<Vec<GroupElement>>, GroupError> {
        self.levels
            .iter()
            .map(|l| match &l.tile {
                Shape::Points(p) => Ok(p.iter().map(|v| GroupElement::Vector(v.clone())).collect()),
                Shape::Box(b) => b.to_elements(cap),
            })
            .collect()
    }
}

/// Smallest `r ≥ r0` in `[r0, max]` with `pred(r)`, assuming `pred` is
/// monotone; exponential then binary search.
pub fn min_monotone<E>(
    r0: &BigInt,
    max: &BigInt,
    mut pred: impl FnMut(&BigInt) -> Result<bool, E>,
) -> Result<Option<BigInt>, E> {
    if pred(r0)? {
        return Ok(Some(r0.clone()));
    }
    let mut lo = r0.clone();
    let mut step = BigInt::one();
    let hi = loop {
        let cand = (&lo + &step).min(max.clone());
        if pred(&cand)? {
            break cand;
        }
        if &cand >= max {
            return Ok(None);
        }
        lo = cand;
        step *= 2;
    };
    let mut hi = hi;
    while &hi - &lo > BigInt::one() {
        let mid: BigInt = (&lo + &hi) / 2;
        if pred(&mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Nested tiles `T_1 = S ⊂ … ⊂ T_n` with `T_{i+1} = T_i ∪ K_i` for centered
/// cubes `K_i ⊇ T_i` satisfying `|∂_{T_i} K_i| ≤ ε|K_i|/(16|T_i|^2)`; `n` is
/// minimal with `(1 − ε/2)^n < ε`. Cube radii are capped by `max_radius`.
pub fn tile_tower(ctx: &GroupContext, s: &[GroupElement], eps: &Rational, max_radius: &BigInt) -> Result<TileTower, TilingError> {
    let d = match ctx.kind {
        GroupKind::IntVector { d } => d,
        _ => return Err(TilingError::BadTiles),
    };
    if eps <= &Rational::zero() || eps >= &Rational::one() {
        return Err(TilingError::Hypothesis(format!("ε = {eps} outside (0, 1)")));
    }
    let q = Rational::one() - eps / Rational::from_integer(2.into());
    let n = min_power_below(&q, eps, true);
    let mut current = Shape::Points(s.iter().map(|g| g.as_vector().unwrap().to_vec()).collect());
    let mut levels = vec![TowerLevel {
        size: current.len().to_string(),
        tile: current.clone(),
        boundary: None,
        boundary_bound: None,
        conclusion_holds: None,
    }];
    for i in 1..n as usize {
        let t_len = current.len();
        let lim_factor = eps / Rational::from_integer(BigInt::from(16) * &t_len * &t_len);
        let r0 = current.sup_norm();
        let t = current.clone();
        let found = min_monotone::<ShapeError>(&r0, max_radius, |r| {
            let k = BoxSet::centered_cube(d, r);
            let b = box_full_boundary(&k, &t)?;
            Ok(Rational::from_integer(b) <= &lim_factor * Rational::from_integer(k.len()))
        })?;
        let r = found.ok_or_else(|| TilingError::Budget {
            index: i + 1,
            detail: format!(
                "no centered cube of radius ≤ {max_radius} has |∂_T K| ≤ ε|K|/(16·{t_len}²)"
            ),
        })?;
        let k = BoxSet::centered_cube(d, &r);
        let kb = box_full_boundary(&k, &current)?;
        let next = Shape::Box(k.clone());
        let concl = box_full_boundary(&k, &current)?;
        let holds = Rational::from_integer(concl) <= eps / Rational::from_integer(8.into()) * Rational::from_integer(k.len());
        levels.push(TowerLevel {
            size: k.len().to_string(),
            tile: next.clone(),
            boundary: Some(kb.to_string()),
            boundary_bound: Some((lim_factor * Rational::from_integer(k.len())).to_string()),
            conclusion_holds: Some(holds),
        });
        current = next;
    }
    Ok(TileTower {
        n,
        epsilon: eps.clone(),
        levels,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphPartition {
    pub graph: LabeledGraph,
    pub cert: PartitionCertificate,
    pub singletons: usize,
    pub hypotheses: Vec<HypothesisCheck>,
}

/// The `S`-graph on `F` (edges `g → s·g`, labels indexing `S`).
pub fn s_graph(ctx: &GroupContext, f: &[GroupElement], s: &[GroupElement]) -> Result<LabeledGraph, GroupError> {
    let index: HashMap<&GroupElement, u32> = f.iter().enumerate().map(|(i, g)| (g, i as u32)).collect();
    let mut edges = Vec::new();
    for (i, g) in f.iter().enumerate() {
        for (label, t) in s.iter().enumerate() {
            if let Some(&j) = index.get(&ctx.multiply(t, g)?) {
                edges.push(Edge {
                    source: i as u32,
                    target: j,
                    label: label as u32,
                });
            }
        }
    }
    Ok(LabeledGraph {
        vertices: f.len() as u32,
        labels: s.len() as u32,
        edges,
    })
}

/// `δ(ε, S) = min{ε/(2|S|(|S|+2)), 1 − √(1 − ε/(2|S|))}` as a decision:
/// whether `t ≤ δ`, decided exactly.
pub fn within_delta(eps: &Rational, s_len: usize, t: &Rational) -> (bool, bool) {
    let s = Rational::from_integer(BigInt::from(s_len));
    let a = eps / (Rational::from_integer(2.into()) * &s * (&s + Rational::from_integer(2.into())));
    let c = eps / (Rational::from_integer(2.into()) * &s);
    let first = t <= &a;
    // t ≤ 1 − √(1 − c)  ⟺  1 − c ≤ (1 − t)^2 for t ≤ 1
    let one_t = Rational::one() - t;
    let second = t <= &Rational::one() && Rational::one() - c <= &one_t * &one_t;
    (first, second)
}

/// Blocks = exact tiles plus singletons on the `S`-graph of `F`.
pub fn folner_graph_partition(
    ctx: &GroupContext,
    f: &[GroupElement],
    s: &[GroupElement],
    tiling: &QuasiTiling,
    eps: &Rational,
    policy: HypothesisPolicy,
) -> Result<GraphPartition, TilingError> {
    let (first, second) = within_delta(eps, s.len(), &tiling.epsilon);
    let hyps = vec![hyp(
        "tiling ε ≤ δ(ε, S)",
        first && second,
        format!("ε_tiling = {}, branches ({first}, {second})", tiling.epsilon),
    )];
    if policy == HypothesisPolicy::Enforce && !(first && second) {
        return Err(TilingError::Hypothesis(hyps[0].detail.clone()));
    }
    let graph = s_graph(ctx, f, s)?;
    let index: HashMap<&GroupElement, u32> = f.iter().enumerate().map(|(i, g)| (g, i as u32)).collect();
    let mut used = vec![false; f.len()];
    let mut blocks = Vec::new();
    for p in &tiling.placements {
        let mut b = Vec::with_capacity(p.exact.len());
        for g in &p.exact {
            let i = *index
                .get(g)
                .ok_or_else(|| TilingError::Hypothesis(format!("tile point {g:?} outside F")))?;
            used[i as usize] = true;
            b.push(i);
        }
        blocks.push(b);
    }
    let mut singletons = 0;
    for (i, u) in used.iter().enumerate() {
        if !u {
            blocks.push(vec![i as u32]);
            singletons += 1;
        }
    }
    let k = tiling.tiles.last().map(|t| t.len()).unwrap_or(1);
    let cert = verify_certificate(&graph, blocks, k, eps)?;
    Ok(GraphPartition {
        graph,
        cert,
        singletons,
        hypotheses: hyps,
    })
}
