//! Elements of the topological full group as cocycle tables over cylinder
//! partitions.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::groups::{GroupElement, GroupError};
use crate::rational::Rational;
use crate::systems::{BaseSequence, Cell, DigitStream, Pattern, Point, SystemContext, SystemError, SystemKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FullGroupError {
    #[error("no cylinder of the table matches the point")]
    NoMatchingCylinder,
    #[error("{0} cylinders of the table match the point")]
    AmbiguousMatch(usize),
    #[error("refinement budget of {0} exceeded")]
    Budget(usize),
    #[error("system is not declared free")]
    NotFree,
    #[error("table is not a partition: {0}")]
    NotPartition(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Part {
    pub pattern: Pattern,
    pub element: GroupElement,
}

/// `φ(x) = c(x)·x` with `c` constant on each cylinder.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CocycleTable {
    pub parts: Vec<Part>,
}

impl CocycleTable {
    pub fn constant(g: GroupElement) -> Self {
        CocycleTable {
            parts: vec![Part {
                pattern: Pattern::full(),
                element: g,
            }],
        }
    }

    /// The odometer map exchanging the cylinders `{d_0 = 0}` and `{d_0 = 1}`
    /// by `±1`, identity elsewhere.
    pub fn digit_swap(bases: &BaseSequence) -> Self {
        let b0 = bases.base(0);
        let mut parts = vec![
            Part {
                pattern: Pattern::exact(Cell::Digit(0), 0),
                element: GroupElement::vector(&[1]),
            },
            Part {
                pattern: Pattern::exact(Cell::Digit(0), 1),
                element: GroupElement::vector(&[-1]),
            },
        ];
        if b0 > 2 {
            let rest = ((1u64 << b0) - 1) & !0b11;
            parts.push(Part {
                pattern: Pattern::single(Cell::Digit(0), rest),
                element: GroupElement::vector(&[0]),
            });
        }
        CocycleTable { parts }
    }

    /// Distinct group elements used by the table.
    pub fn elements(&self) -> BTreeSet<GroupElement> {
        self.parts.iter().map(|p| p.element.clone()).collect()
    }
}

/// Canonical identity for table equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKey {
    /// Normal form (exact, digit cylinders).
    Normal(Vec<Part>),
    /// Cocycle values on the test grid.
    Signature(Vec<GroupElement>),
}

/// How partition validity was established.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionCheck {
    Exact,
    Grid { points: usize, radius: i64 },
}

/// A system with the parameters used for table arithmetic.
#[derive(Debug, Clone)]
pub struct FullGroup {
    pub sys: SystemContext,
    /// Test grid radius for systems without exact cylinder arithmetic.
    pub grid_radius: i64,
    pub budget: usize,
    grid: Vec<Point>,
}

/// Partition returned by [`FullGroup::uniform_partition`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformPartition {
    pub ball: Vec<CocycleTable>,
    pub parts: Vec<Pattern>,
    /// `elements[i][j]`: the element by which `ball[j]` acts on `parts[i]`.
    pub elements: Vec<Vec<GroupElement>>,
    pub check: PartitionCheck,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Trie {
    Leaf(Vec<GroupElement>),
    Branch(u32, Vec<Trie>),
}

impl FullGroup {
    pub fn new(sys: SystemContext) -> Self {
        FullGroup::with_params(sys, 72, 1 << 20)
    }

    pub fn with_params(sys: SystemContext, grid_radius: i64, budget: usize) -> Self {
        let grid = test_grid(&sys, grid_radius);
        FullGroup {
            sys,
            grid_radius,
            budget,
            grid,
        }
    }

    pub fn identity(&self) -> CocycleTable {
        CocycleTable::constant(self.sys.group.identity())
    }

    pub fn test_points(&self) -> &[Point] {
        &self.grid
    }

    fn matching<'a>(&self, t: &'a CocycleTable, x: &Point) -> Result<&'a Part, FullGroupError> {
        let mut found = None;
        let mut count = 0;
        for p in &t.parts {
            if p.pattern.matches(&self.sys, x)? {
                count += 1;
                found.get_or_insert(p);
            }
        }
        match (count, found) {
            (1, Some(p)) => Ok(p),
            (0, _) => Err(FullGroupError::NoMatchingCylinder),
            (k, _) => Err(FullGroupError::AmbiguousMatch(k)),
        }
    }

    /// The unique `g` with `φ(x) = g·x` read off the table.
    pub fn cocycle(&self, t: &CocycleTable, x: &Point) -> Result<GroupElement, FullGroupError> {
        Ok(self.matching(t, x)?.element.clone())
    }

    pub fn evaluate(&self, t: &CocycleTable, x: &Point) -> Result<Point, FullGroupError> {
        let g = self.cocycle(t, x)?;
        Ok(self.sys.translate(x, &g)?)
    }

    /// `{x : g·x ∈ P}` as disjoint patterns.
    pub fn pullback(&self, p: &Pattern, g: &GroupElement) -> Result<Vec<Pattern>, FullGroupError> {
        self.sys.group.check(g)?;
        pullback_in(&self.sys, p, g.as_vector().unwrap(), self.budget)
    }

    /// Table of `a ∘ b`.
    pub fn compose(&self, a: &CocycleTable, b: &CocycleTable) -> Result<CocycleTable, FullGroupError> {
        let mut parts = Vec::new();
        for pb in &b.parts {
            for pa in &a.parts {
                for q in self.pullback(&pa.pattern, &pb.element)? {
                    if let Some(r) = pb.pattern.and(&q) {
                        parts.push(Part {
                            pattern: r,
                            element: self.sys.group.multiply(&pa.element, &pb.element)?,
                        });
                        if parts.len() > self.budget {
                            return Err(FullGroupError::Budget(self.budget));
                        }
                    }
                }
            }
        }
        self.normalize(&CocycleTable { parts })
    }

    /// Parts `(g·P, g⁻¹)`.
    pub fn inverse(&self, t: &CocycleTable) -> Result<CocycleTable, FullGroupError> {
        let mut parts = Vec::new();
        for p in &t.parts {
            let gi = self.sys.group.inverse(&p.element)?;
            for q in self.pullback(&p.pattern, &gi)? {
                parts.push(Part {
                    pattern: q,
                    element: gi.clone(),
                });
            }
        }
        self.normalize(&CocycleTable { parts })
    }

    /// Canonical form: a minimal digit trie for odometers; elsewhere
    /// simplified, merged and sorted parts.
    pub fn normalize(&self, t: &CocycleTable) -> Result<CocycleTable, FullGroupError> {
        if let SystemKind::Odometer(bases) = &self.sys.kind {
            let tables = std::slice::from_ref(t);
            let trie = build_trie(bases, tables, &Pattern::full(), 0, &mut self.budget.clone())?;
            let mut parts: Vec<Part> = flatten_trie(&trie, Pattern::full())
                .into_iter()
                .map(|(pattern, mut els)| Part {
                    pattern,
                    element: els.pop().unwrap(),
                })
                .collect();
            parts.sort();
            return Ok(CocycleTable { parts });
        }
        let mut parts: Vec<Part> = t
            .parts
            .iter()
            .map(|p| Part {
                pattern: p.pattern.simplified(&self.sys),
                element: p.element.clone(),
            })
            .collect();
        parts.sort();
        parts.dedup();
        // merge parts with the same element that differ in one cell
        loop {
            let mut merged = false;
            'outer: for i in 0..parts.len() {
                for j in i + 1..parts.len() {
                    if parts[i].element != parts[j].element {
                        continue;
                    }
                    if let Some(m) = merge_one_cell(&parts[i].pattern, &parts[j].pattern) {
                        let m = m.simplified(&self.sys);
                        parts[i].pattern = m;
                        parts.remove(j);
                        merged = true;
                        break 'outer;
                    }
                }
            }
            if !merged {
                break;
            }
        }
        parts.sort();
        Ok(CocycleTable { parts })
    }

    /// Equality key: the normal form on odometers, the grid signature
    /// elsewhere.
    pub fn key(&self, t: &CocycleTable) -> Result<TableKey, FullGroupError> {
        if self.sys.is_prefix_structured() {
            Ok(TableKey::Normal(self.normalize(t)?.parts))
        } else {
            let sig = self
                .grid
                .iter()
                .map(|x| self.cocycle(t, x))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(TableKey::Signature(sig))
        }
    }

    pub fn equal(&self, a: &CocycleTable, b: &CocycleTable) -> Result<bool, FullGroupError> {
        Ok(self.key(a)? == self.key(b)?)
    }

    pub fn is_identity(&self, t: &CocycleTable) -> Result<bool, FullGroupError> {
        self.equal(t, &self.identity())
    }

    /// Patterns on which the table moves points.
    pub fn open_support(&self, t: &CocycleTable) -> Result<Vec<Pattern>, FullGroupError> {
        if !self.sys.declared_free() {
            return Err(FullGroupError::NotFree);
        }
        let id = self.sys.group.identity();
        Ok(self
            .normalize(t)?
            .parts
            .into_iter()
            .filter(|p| p.element != id)
            .map(|p| p.pattern)
            .collect())
    }

    /// Checks that the cylinders partition the space: exactly for digit
    /// cylinders, on the test grid otherwise.
    pub fn check_partition(&self, patterns: &[&Pattern]) -> Result<PartitionCheck, FullGroupError> {
        if let SystemKind::Odometer(bases) = &self.sys.kind {
            for i in 0..patterns.len() {
                for j in i + 1..patterns.len() {
                    if !disjoint_in(&self.sys, patterns[i], patterns[j]) {
                        return Err(FullGroupError::NotPartition(format!("parts {i} and {j} overlap")));
                    }
                }
            }
            let total: Rational = patterns.iter().map(|p| measure(bases, p)).sum();
            if !total.is_one() {
                return Err(FullGroupError::NotPartition(format!("measures sum to {total}")));
            }
            return Ok(PartitionCheck::Exact);
        }
        for x in &self.grid {
            let k = patterns
                .iter()
                .map(|p| p.matches(&self.sys, x))
                .collect::<Result<Vec<bool>, _>>()?
                .into_iter()
                .filter(|&b| b)
                .count();
            if k != 1 {
                return Err(FullGroupError::NotPartition(format!("{k} parts contain {x:?}")));
            }
        }
        Ok(PartitionCheck::Grid {
            points: self.grid.len(),
            radius: self.grid_radius,
        })
    }

    /// Partition of the domain and of the image (bijectivity).
    pub fn check_table(&self, t: &CocycleTable) -> Result<PartitionCheck, FullGroupError> {
        let dom: Vec<&Pattern> = t.parts.iter().map(|p| &p.pattern).collect();
        let check = self.check_partition(&dom)?;
        if self.sys.is_prefix_structured() {
            let mut images = Vec::new();
            for p in &t.parts {
                let gi = self.sys.group.inverse(&p.element)?;
                images.extend(self.pullback(&p.pattern, &gi)?);
            }
            let refs: Vec<&Pattern> = images.iter().collect();
            self.check_partition(&refs)?;
        } else {
            let mut seen = HashMap::new();
            for x in &self.grid {
                let y = self.evaluate(t, x)?;
                if let Some(prev) = seen.insert(y, x.clone()) {
                    return Err(FullGroupError::NotPartition(format!("{prev:?} and {x:?} collide")));
                }
            }
        }
        Ok(check)
    }

    /// Normalized products of at most `radius` generators (with inverses
    /// added), deduplicated by key, in discovery order.
    pub fn subgroup_ball(&self, gens: &[CocycleTable], radius: u32) -> Result<Vec<CocycleTable>, FullGroupError> {
        let mut sym: Vec<CocycleTable> = Vec::new();
        let mut sym_keys = BTreeSet::new();
        for g in gens {
            for t in [self.normalize(g)?, self.inverse(g)?] {
                if sym_keys.insert(self.key(&t)?) {
                    sym.push(t);
                }
            }
        }
        let id = self.normalize(&self.identity())?;
        let mut keys = BTreeSet::from([self.key(&id)?]);
        let mut out = vec![id.clone()];
        let mut frontier = vec![id];
        for _ in 0..radius {
            let mut next = Vec::new();
            for g in &frontier {
                for s in &sym {
                    let h = self.compose(s, g)?;
                    if keys.insert(self.key(&h)?) {
                        if out.len() >= self.budget {
                            return Err(FullGroupError::Budget(self.budget));
                        }
                        out.push(h.clone());
                        next.push(h);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(out)
    }

    /// Coarsest common refinement on which every ball element acts by a
    /// single group element.
    pub fn uniform_partition(&self, gens: &[CocycleTable], radius: u32) -> Result<UniformPartition, FullGroupError> {
        let ball = self.subgroup_ball(gens, radius)?;
        let (parts, elements): (Vec<Pattern>, Vec<Vec<GroupElement>>) = match &self.sys.kind {
            SystemKind::Odometer(bases) => {
                let trie = build_trie(bases, &ball, &Pattern::full(), 0, &mut self.budget.clone())?;
                flatten_trie(&trie, Pattern::full()).into_iter().unzip()
            }
            _ => {
                let mut acc: Vec<(Pattern, Vec<GroupElement>)> = vec![(Pattern::full(), vec![])];
                for t in &ball {
                    let mut next = Vec::new();
                    for (p, els) in &acc {
                        for part in &self.normalize(t)?.parts {
                            if let Some(q) = p.and(&part.pattern) {
                                let mut e = els.clone();
                                e.push(part.element.clone());
                                next.push((q, e));
                                if next.len() > self.budget {
                                    return Err(FullGroupError::Budget(self.budget));
                                }
                            }
                        }
                    }
                    acc = next;
                }
                // keep parts that occur on the grid
                let mut seen = vec![false; acc.len()];
                for x in &self.grid {
                    for (i, (p, _)) in acc.iter().enumerate() {
                        if !seen[i] && p.matches(&self.sys, x)? {
                            seen[i] = true;
                        }
                    }
                }
                acc.into_iter().zip(seen).filter(|(_, s)| *s).map(|(a, _)| a).unzip()
            }
        };
        let refs: Vec<&Pattern> = parts.iter().collect();
        let check = self.check_partition(&refs)?;
        Ok(UniformPartition {
            ball,
            parts,
            elements,
            check,
        })
    }
}

fn test_grid(sys: &SystemContext, r: i64) -> Vec<Point> {
    match &sys.kind {
        SystemKind::Odometer(b) => (-r..=r).map(|k| Point::Digits(DigitStream::from_int(k, b))).collect(),
        SystemKind::ElekMonodOrbit => {
            let mut out = Vec::new();
            for y in -r..=r {
                for x in -r..=r {
                    out.push(Point::Lattice(vec![x, y]));
                }
            }
            out
        }
        SystemKind::GenericSubshift { oracle, .. } => {
            let d = oracle.dim();
            crate::groups::box_elements(&vec![-r; d], &vec![r; d], 1 << 22)
                .map(|v| {
                    v.into_iter()
                        .map(|g| Point::Config {
                            handle: 0,
                            shift: g.as_vector().unwrap().to_vec(),
                        })
                        .collect()
                })
                .unwrap_or_default()
        }
        SystemKind::Product(f) => {
            let small = (r / 8).max(2);
            let grids: Vec<Vec<Point>> = f.iter().map(|s| test_grid(s, small)).collect();
            let mut out = vec![vec![]];
            for g in grids {
                let mut next = Vec::new();
                for prefix in &out {
                    for p in &g {
                        let mut v: Vec<Point> = prefix.clone();
                        v.push(p.clone());
                        next.push(v);
                    }
                }
                out = next;
            }
            out.into_iter().map(Point::Tuple).collect()
        }
    }
}

fn pullback_in(sys: &SystemContext, p: &Pattern, v: &[i64], budget: usize) -> Result<Vec<Pattern>, FullGroupError> {
    match &sys.kind {
        SystemKind::Odometer(bases) => {
            let depth = p.digit_depth();
            let modulus = bases.modulus(depth).filter(|&m| m as usize <= budget).ok_or(FullGroupError::Budget(budget))?;
            let shift = v[0].rem_euclid(modulus as i64) as u64;
            let mut hits = Vec::new();
            for r in 0..modulus {
                let digits = bases.digits_of((r + shift) % modulus, depth);
                let ok = p
                    .cells
                    .iter()
                    .all(|(c, &m)| matches!(c, Cell::Digit(i) if m & (1 << digits[*i as usize]) != 0));
                if ok {
                    hits.push(bases.digits_of(r, depth));
                }
            }
            Ok(compress_digit_sets(bases, &hits, depth))
        }
        SystemKind::ElekMonodOrbit | SystemKind::GenericSubshift { .. } => {
            let neg: Vec<i64> = v.iter().map(|x| -x).collect();
            Ok(vec![p.shifted(&neg)])
        }
        SystemKind::Product(factors) => {
            let mut offset = 0;
            let mut acc: Vec<Pattern> = vec![Pattern::full()];
            for (i, f) in factors.iter().enumerate() {
                let d = f.dim();
                let sub = Pattern {
                    cells: p
                        .cells
                        .iter()
                        .filter_map(|(c, &m)| match c {
                            Cell::Factor(j, inner) if *j as usize == i => Some(((**inner).clone(), m)),
                            _ => None,
                        })
                        .collect(),
                };
                let pulled = pullback_in(f, &sub, &v[offset..offset + d], budget)?;
                offset += d;
                let mut next = Vec::new();
                for a in &acc {
                    for q in &pulled {
                        let lifted = Pattern {
                            cells: q
                                .cells
                                .iter()
                                .map(|(c, &m)| (Cell::Factor(i as u32, Box::new(c.clone())), m))
                                .collect(),
                        };
                        if let Some(r) = a.and(&lifted) {
                            next.push(r);
                        }
                    }
                }
                if next.len() > budget {
                    return Err(FullGroupError::Budget(budget));
                }
                acc = next;
            }
            Ok(acc)
        }
    }
}

/// Disjoint cylinders covering exactly the given digit strings of length
/// `depth` (as a minimal trie).
fn compress_digit_sets(bases: &BaseSequence, hits: &[Vec<u32>], depth: usize) -> Vec<Pattern> {
    #[derive(PartialEq, Eq, Hash, Clone)]
    enum Node {
        All,
        Branch(Vec<Option<Node>>),
    }
    fn build(bases: &BaseSequence, hits: &[&Vec<u32>], i: usize, depth: usize) -> Option<Node> {
        if hits.is_empty() {
            return None;
        }
        if i == depth {
            return Some(Node::All);
        }
        let b = bases.base(i) as usize;
        let children: Vec<Option<Node>> = (0..b)
            .map(|d| {
                let sub: Vec<&Vec<u32>> = hits.iter().copied().filter(|h| h[i] as usize == d).collect();
                build(bases, &sub, i + 1, depth)
            })
            .collect();
        if children.iter().all(|c| c == &Some(Node::All)) {
            Some(Node::All)
        } else {
            Some(Node::Branch(children))
        }
    }
    fn flatten(n: &Node, i: u32, prefix: Pattern, out: &mut Vec<Pattern>) {
        match n {
            Node::All => out.push(prefix),
            Node::Branch(ch) => {
                let mut groups: Vec<(u64, &Node)> = Vec::new();
                for (d, c) in ch.iter().enumerate() {
                    if let Some(c) = c {
                        match groups.iter_mut().find(|(_, g)| *g == c) {
                            Some((m, _)) => *m |= 1 << d,
                            None => groups.push((1 << d, c)),
                        }
                    }
                }
                for (m, c) in groups {
                    let mut p = prefix.clone();
                    p.cells.insert(Cell::Digit(i), m);
                    flatten(c, i + 1, p, out);
                }
            }
        }
    }
    let refs: Vec<&Vec<u32>> = hits.iter().collect();
    let mut out = Vec::new();
    if let Some(root) = build(bases, &refs, 0, depth) {
        flatten(&root, 0, Pattern::full(), &mut out);
    }
    out
}

/// Minimal trie of `x ↦ (c_t(x))_t` over digit cylinders.
fn build_trie(
    bases: &BaseSequence,
    tables: &[CocycleTable],
    prefix: &Pattern,
    i: u32,
    budget: &mut usize,
) -> Result<Trie, FullGroupError> {
    let mut leaf = Vec::with_capacity(tables.len());
    let mut constant = true;
    for t in tables {
        let els: BTreeSet<&GroupElement> = t
            .parts
            .iter()
            .filter(|p| prefix.and(&p.pattern).is_some())
            .map(|p| &p.element)
            .collect();
        if els.is_empty() {
            return Err(FullGroupError::NotPartition(format!("no part meets {prefix}")));
        }
        if els.len() == 1 {
            leaf.push((*els.iter().next().unwrap()).clone());
        } else {
            constant = false;
            break;
        }
    }
    if constant {
        return Ok(Trie::Leaf(leaf));
    }
    let max_depth = tables.iter().flat_map(|t| &t.parts).map(|p| p.pattern.digit_depth()).max().unwrap_or(0);
    if i as usize >= max_depth || i as usize >= 64 {
        return Err(FullGroupError::NotPartition(format!("overlapping parts on {prefix}")));
    }
    if *budget == 0 {
        return Err(FullGroupError::Budget(0));
    }
    *budget -= 1;
    let b = bases.base(i as usize);
    let mut children = Vec::with_capacity(b as usize);
    for d in 0..b {
        let mut p = prefix.clone();
        p.cells.insert(Cell::Digit(i), 1 << d);
        children.push(build_trie(bases, tables, &p, i + 1, budget)?);
    }
    Ok(Trie::Branch(i, children))
}

fn flatten_trie(t: &Trie, prefix: Pattern) -> Vec<(Pattern, Vec<GroupElement>)> {
    match t {
        Trie::Leaf(els) => vec![(prefix, els.clone())],
        Trie::Branch(i, children) => {
            let mut groups: Vec<(u64, &Trie)> = Vec::new();
            for (d, c) in children.iter().enumerate() {
                match groups.iter_mut().find(|(_, g)| *g == c) {
                    Some((m, _)) => *m |= 1 << d,
                    None => groups.push((1 << d, c)),
                }
            }
            let mut out = Vec::new();
            for (m, c) in groups {
                let mut p = prefix.clone();
                p.cells.insert(Cell::Digit(*i), m);
                out.extend(flatten_trie(c, p));
            }
            out
        }
    }
}

fn merge_one_cell(a: &Pattern, b: &Pattern) -> Option<Pattern> {
    if a.cells.len() != b.cells.len() || !a.cells.keys().eq(b.cells.keys()) {
        return None;
    }
    let diff: Vec<&Cell> = a.cells.iter().filter(|(c, m)| b.cells[*c] != **m).map(|(c, _)| c).collect();
    match diff.as_slice() {
        [] => Some(a.clone()),
        [c] => {
            let mut out = a.clone();
            *out.cells.get_mut(*c).unwrap() |= b.cells[*c];
            Some(out)
        }
        _ => None,
    }
}

/// Exact disjointness of two cylinders given cell alphabets.
pub fn disjoint_in(sys: &SystemContext, a: &Pattern, b: &Pattern) -> bool {
    let empty = |p: &Pattern| p.cells.iter().any(|(c, m)| m & sys.cell_alphabet_mask(c) == 0);
    empty(a) || empty(b) || a.disjoint(b) || {
        a.cells
            .iter()
            .any(|(c, m)| b.cells.get(c).is_some_and(|o| o & m & sys.cell_alphabet_mask(c) == 0))
    }
}

/// Uniform (Haar) measure of a digit cylinder.
pub fn measure(bases: &BaseSequence, p: &Pattern) -> Rational {
    let mut r = Rational::one();
    for (c, m) in &p.cells {
        if let Cell::Digit(i) = c {
            let b = bases.base(*i as usize);
            let allowed = (m & ((1u64 << b) - 1)).count_ones();
            r *= Rational::new(BigInt::from(allowed), BigInt::from(b));
        }
    }
    if r.is_zero() {
        Rational::zero()
    } else {
        r
    }
}

/// Tables keyed by their equality key, preserving first occurrence.
pub fn dedup_tables(fg: &FullGroup, tables: Vec<CocycleTable>) -> Result<Vec<CocycleTable>, FullGroupError> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for t in tables {
        if seen.insert(fg.key(&t)?, ()).is_none() {
            out.push(t);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elekmonod::{involution_table, Color};

    fn odo() -> FullGroup {
        FullGroup::new(SystemContext::binary_odometer())
    }

    fn plus(k: i64) -> CocycleTable {
        CocycleTable::constant(GroupElement::vector(&[k]))
    }

    fn swap() -> CocycleTable {
        CocycleTable::digit_swap(&BaseSequence::binary())
    }

    fn pt(prefix: &[u32]) -> Point {
        Point::Digits(DigitStream::new(prefix.to_vec(), vec![0]))
    }

    #[test]
    fn evaluate_examples() {
        let fg = odo();
        assert_eq!(fg.evaluate(&swap(), &pt(&[0])).unwrap(), pt(&[1]));
        assert_eq!(fg.evaluate(&fg.identity(), &pt(&[1, 1])).unwrap(), pt(&[1, 1]));
        let em = FullGroup::with_params(SystemContext::elek_monod(), 4, 1 << 16);
        let y = em.evaluate(&involution_table(Color::A), &Point::Lattice(vec![0, 0])).unwrap();
        // σ has an A-edge going up from the origin
        assert_eq!(y, Point::Lattice(vec![0, -1]));
    }

    #[test]
    fn compose_examples() {
        let fg = odo();
        let id = fg.normalize(&fg.identity()).unwrap();
        assert_eq!(fg.compose(&swap(), &swap()).unwrap(), id);
        assert_eq!(fg.compose(&swap(), &fg.identity()).unwrap(), fg.normalize(&swap()).unwrap());
        assert_eq!(fg.compose(&plus(1), &plus(1)).unwrap(), fg.normalize(&plus(2)).unwrap());
        assert_eq!(fg.inverse(&swap()).unwrap(), fg.normalize(&swap()).unwrap());
        assert_eq!(fg.inverse(&plus(1)).unwrap(), fg.normalize(&plus(-1)).unwrap());
    }

    #[test]
    fn normalize_merges_split_parts() {
        let fg = odo();
        let split = CocycleTable {
            parts: vec![
                Part {
                    pattern: Pattern::from_cells([(Cell::Digit(0), 0), (Cell::Digit(1), 0)]),
                    element: GroupElement::vector(&[1]),
                },
                Part {
                    pattern: Pattern::from_cells([(Cell::Digit(0), 0), (Cell::Digit(1), 1)]),
                    element: GroupElement::vector(&[1]),
                },
                Part {
                    pattern: Pattern::exact(Cell::Digit(0), 1),
                    element: GroupElement::vector(&[-1]),
                },
            ],
        };
        assert_eq!(fg.normalize(&split).unwrap().parts.len(), 2);
        let two_ids = CocycleTable {
            parts: vec![
                Part {
                    pattern: Pattern::exact(Cell::Digit(0), 0),
                    element: GroupElement::vector(&[0]),
                },
                Part {
                    pattern: Pattern::exact(Cell::Digit(0), 1),
                    element: GroupElement::vector(&[0]),
                },
            ],
        };
        assert_eq!(fg.normalize(&two_ids).unwrap(), fg.identity());
    }

    #[test]
    fn supports() {
        let fg = odo();
        assert!(fg.open_support(&fg.identity()).unwrap().is_empty());
        assert_eq!(fg.open_support(&swap()).unwrap().len(), 2);
    }

    #[test]
    fn balls_and_partitions() {
        let fg = odo();
        assert_eq!(fg.subgroup_ball(&[swap()], 2).unwrap().len(), 2);
        assert_eq!(fg.subgroup_ball(&[plus(1), plus(-1)], 3).unwrap().len(), 7);
        let up = fg.uniform_partition(&[swap()], 2).unwrap();
        assert_eq!(up.parts.len(), 2);
        assert_eq!(up.check, PartitionCheck::Exact);
        assert_eq!(fg.uniform_partition(&[plus(1)], 3).unwrap().parts.len(), 1);
        assert_eq!(fg.uniform_partition(&[swap(), plus(1)], 2).unwrap().parts.len(), 2);
    }

    #[test]
    fn table_checks() {
        let fg = odo();
        assert_eq!(fg.check_table(&swap()).unwrap(), PartitionCheck::Exact);
        let bad = CocycleTable {
            parts: vec![Part {
                pattern: Pattern::exact(Cell::Digit(0), 0),
                element: GroupElement::vector(&[0]),
            }],
        };
        assert!(fg.check_table(&bad).is_err());
    }

    #[test]
    fn elek_monod_ball() {
        let em = FullGroup::with_params(SystemContext::elek_monod(), 72, 1 << 16);
        let gens: Vec<CocycleTable> = [Color::A, Color::B, Color::C].map(involution_table).to_vec();
        let ball = em.subgroup_ball(&gens, 2).unwrap();
        assert!(ball.len() >= 10, "{}", ball.len());
        for t in &gens {
            assert!(matches!(em.check_table(t).unwrap(), PartitionCheck::Grid { .. }));
        }
    }
}
