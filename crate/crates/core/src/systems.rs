//! Cantor systems with computable clopen structure: odometers, the orbit of
//! the Elek–Monod coloring, products and oracle-backed subshifts.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::elekmonod::{sigma_color, LatticeEdge};
use crate::groups::{box_elements, GroupContext, GroupElement, GroupError, GroupKind};
use crate::rational::{frac, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SystemError {
    #[error("point or element does not belong to this system: {0}")]
    KindMismatch(String),
    #[error("window oracle refused: {0}")]
    OracleRefusal(String),
    #[error("invalid base sequence: {0}")]
    InvalidBase(String),
    #[error("budget of {0} exceeded")]
    Budget(usize),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Eventually periodic sequence of odometer bases, each in `2..=64`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BaseSequence {
    pub prefix: Vec<u32>,
    pub period: Vec<u32>,
}

impl BaseSequence {
    pub fn new(prefix: Vec<u32>, period: Vec<u32>) -> Result<Self, SystemError> {
        if period.is_empty() {
            return Err(SystemError::InvalidBase("empty period".into()));
        }
        if let Some(b) = prefix.iter().chain(&period).find(|&&b| !(2..=64).contains(&b)) {
            return Err(SystemError::InvalidBase(format!("base {b} outside 2..=64")));
        }
        Ok(BaseSequence { prefix, period })
    }

    pub fn binary() -> Self {
        BaseSequence {
            prefix: vec![],
            period: vec![2],
        }
    }

    /// Parses `"2,3,2,..."`: the listed bases, the last one repeating.
    pub fn parse(s: &str) -> Result<Self, SystemError> {
        let mut items: Vec<&str> = s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect();
        if items.last() == Some(&"...") {
            items.pop();
        }
        let bases: Vec<u32> = items
            .iter()
            .map(|x| x.parse::<u32>().map_err(|_| SystemError::InvalidBase(format!("bad base {x:?}"))))
            .collect::<Result<_, _>>()?;
        let (last, rest) = bases
            .split_last()
            .ok_or_else(|| SystemError::InvalidBase("no bases".into()))?;
        BaseSequence::new(rest.to_vec(), vec![*last])
    }

    pub fn base(&self, i: usize) -> u32 {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.period[(i - self.prefix.len()) % self.period.len()]
        }
    }

    /// Product of the first `n` bases, if it fits.
    pub fn modulus(&self, n: usize) -> Option<u64> {
        (0..n).try_fold(1u64, |acc, i| acc.checked_mul(self.base(i) as u64))
    }

    /// Digits `0..n` of `k mod N_n`.
    pub fn digits_of(&self, k: u64, n: usize) -> Vec<u32> {
        let mut k = k;
        (0..n)
            .map(|i| {
                let b = self.base(i) as u64;
                let d = (k % b) as u32;
                k /= b;
                d
            })
            .collect()
    }

    /// Inverse of [`digits_of`](Self::digits_of).
    pub fn value_of(&self, digits: &[u32]) -> u64 {
        let mut v = 0u64;
        for i in (0..digits.len()).rev() {
            v = v * self.base(i) as u64 + digits[i] as u64;
        }
        v
    }
}

/// Eventually periodic digit stream in canonical form: primitive period and
/// the shortest prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DigitStream {
    pub prefix: Vec<u32>,
    pub period: Vec<u32>,
}

impl DigitStream {
    pub fn new(prefix: Vec<u32>, period: Vec<u32>) -> Self {
        assert!(!period.is_empty(), "digit stream needs a period");
        let mut period = primitive_root(period);
        let mut prefix = prefix;
        while let (Some(&a), Some(&b)) = (prefix.last(), period.last()) {
            if a != b {
                break;
            }
            prefix.pop();
            period.rotate_right(1);
        }
        DigitStream { prefix, period }
    }

    pub fn zero() -> Self {
        DigitStream::new(vec![], vec![0])
    }

    /// `k` written in the odometer, negative values via the all-max tail.
    pub fn from_int(k: i64, bases: &BaseSequence) -> Self {
        DigitStream::zero().add(k, bases)
    }

    pub fn digit(&self, i: usize) -> u32 {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.period[(i - self.prefix.len()) % self.period.len()]
        }
    }

    /// Checks `digit i < base i` at every position.
    pub fn is_valid(&self, bases: &BaseSequence) -> bool {
        let span = self.prefix.len().max(bases.prefix.len()) + self.period.len().lcm(&bases.period.len());
        (0..span).all(|i| self.digit(i) < bases.base(i))
    }

    /// `self + k` with carries; carries running into the tail forever turn
    /// an all-max tail into zeros (and vice versa for borrows).
    pub fn add(&self, k: i64, bases: &BaseSequence) -> Self {
        let p = self.prefix.len();
        let l = self.period.len();
        let start_periodic = p.max(bases.prefix.len());
        let joint = l.lcm(&bases.period.len());
        let mut digits: Vec<u32> = Vec::new();
        let mut carry = k as i128;
        let mut i = 0usize;
        loop {
            if carry == 0 {
                if i >= p {
                    let rot = (i - p) % l;
                    let mut period = self.period.clone();
                    period.rotate_left(rot);
                    return DigitStream::new(digits, period);
                }
                digits.extend_from_slice(&self.prefix[i..]);
                i = p;
                continue;
            }
            if (carry == 1 || carry == -1) && i >= start_periodic {
                let target = |j: usize| if carry == 1 { bases.base(j) - 1 } else { 0 };
                if (i..i + joint).all(|j| self.digit(j) == target(j)) {
                    let period = if carry == 1 {
                        vec![0]
                    } else {
                        (i..i + bases.period.len()).map(|j| bases.base(j) - 1).collect()
                    };
                    return DigitStream::new(digits, period);
                }
            }
            let b = bases.base(i) as i128;
            let v = self.digit(i) as i128 + carry;
            digits.push(v.rem_euclid(b) as u32);
            carry = v.div_euclid(b);
            i += 1;
        }
    }
}

fn primitive_root(period: Vec<u32>) -> Vec<u32> {
    let l = period.len();
    for q in 1..=l {
        if l.is_multiple_of(q) && (0..l).all(|i| period[i] == period[i % q]) {
            return period[..q].to_vec();
        }
    }
    period
}

/// Coordinate of a configuration read by a window.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Digit(u32),
    Edge(LatticeEdge),
    Site(Vec<i64>),
    Factor(u32, Box<Cell>),
}

impl Cell {
    /// The cell `c + v` (translation of lattice coordinates; digit cells are
    /// not translation-covariant and are returned unchanged).
    pub fn shifted(&self, v: &[i64]) -> Cell {
        match self {
            Cell::Digit(i) => Cell::Digit(*i),
            Cell::Edge(e) => Cell::Edge(e.shifted(v[0], v[1])),
            Cell::Site(s) => Cell::Site(s.iter().zip(v).map(|(a, b)| a + b).collect()),
            Cell::Factor(i, c) => Cell::Factor(*i, Box::new(c.shifted(v))),
        }
    }
}

/// Conjunction of per-cell symbol constraints; each cell carries the set of
/// allowed symbols as a bit mask. The empty conjunction is the whole space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Pattern {
    pub cells: BTreeMap<Cell, u64>,
}

#[derive(Serialize, Deserialize)]
struct PatternRepr {
    domain: Vec<Cell>,
    symbols: Vec<Vec<u8>>,
}

impl Serialize for Pattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PatternRepr {
            domain: self.cells.keys().cloned().collect(),
            symbols: self.cells.values().map(|&m| mask_symbols(m)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = PatternRepr::deserialize(d)?;
        if r.domain.len() != r.symbols.len() {
            return Err(serde::de::Error::custom("domain and symbols differ in length"));
        }
        let mut p = Pattern::full();
        for (c, syms) in r.domain.into_iter().zip(r.symbols) {
            if syms.iter().any(|&s| s >= 64) {
                return Err(serde::de::Error::custom("symbol out of range"));
            }
            let m = syms.iter().fold(0u64, |m, &s| m | (1 << s));
            p = p
                .and(&Pattern::single(c, m))
                .ok_or_else(|| serde::de::Error::custom("contradictory pattern"))?;
        }
        Ok(p)
    }
}

pub fn mask_symbols(m: u64) -> Vec<u8> {
    (0..64u8).filter(|&s| m & (1 << s) != 0).collect()
}

impl Pattern {
    pub fn full() -> Self {
        Pattern::default()
    }

    pub fn single(cell: Cell, mask: u64) -> Self {
        Pattern {
            cells: BTreeMap::from([(cell, mask)]),
        }
    }

    pub fn exact(cell: Cell, symbol: u8) -> Self {
        Pattern::single(cell, 1 << symbol)
    }

    pub fn from_cells(cells: impl IntoIterator<Item = (Cell, u8)>) -> Self {
        Pattern {
            cells: cells.into_iter().map(|(c, s)| (c, 1u64 << s)).collect(),
        }
    }

    pub fn is_full(&self) -> bool {
        self.cells.is_empty()
    }

    /// Intersection; `None` when empty.
    pub fn and(&self, other: &Pattern) -> Option<Pattern> {
        let mut out = self.clone();
        for (c, &m) in &other.cells {
            let e = out.cells.entry(c.clone()).or_insert(u64::MAX);
            *e &= m;
            if *e == 0 {
                return None;
            }
        }
        Some(out)
    }

    /// Disjoint as constraint sets (some shared cell has disjoint masks).
    pub fn disjoint(&self, other: &Pattern) -> bool {
        self.cells
            .iter()
            .any(|(c, m)| other.cells.get(c).is_some_and(|o| o & m == 0))
    }

    /// Pattern with every cell translated by `v`.
    pub fn shifted(&self, v: &[i64]) -> Pattern {
        Pattern {
            cells: self.cells.iter().map(|(c, &m)| (c.shifted(v), m)).collect(),
        }
    }

    /// Removes constraints that allow the whole alphabet of their cell.
    pub fn simplified(&self, sys: &SystemContext) -> Pattern {
        Pattern {
            cells: self
                .cells
                .iter()
                .filter(|(c, &m)| m & sys.cell_alphabet_mask(c) != sys.cell_alphabet_mask(c))
                .map(|(c, &m)| (c.clone(), m & sys.cell_alphabet_mask(c)))
                .collect(),
        }
    }

    /// Largest digit index referenced plus one.
    pub fn digit_depth(&self) -> usize {
        self.cells
            .keys()
            .filter_map(|c| match c {
                Cell::Digit(i) => Some(*i as usize + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn matches(&self, sys: &SystemContext, x: &Point) -> Result<bool, SystemError> {
        for (c, &m) in &self.cells {
            let s = sys.symbol_at(x, c)?;
            if m & (1 << s) == 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cells.is_empty() {
            return write!(f, "X");
        }
        let parts: Vec<String> = self
            .cells
            .iter()
            .map(|(c, &m)| format!("{c:?}∈{:?}", mask_symbols(m)))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Symbol source for a generic ℤ^d subshift point.
pub trait WindowOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn alphabet_size(&self) -> u32;
    /// Symbol of configuration `handle` at `site`; errors are refusals.
    fn symbol(&self, handle: u64, site: &[i64]) -> Result<u8, String>;
}

/// Periodic configurations: `handle` indexes a block repeated with the given
/// periods in each coordinate.
#[derive(Debug, Clone)]
pub struct PeriodicOracle {
    pub periods: Vec<i64>,
    pub alphabet: u32,
    pub blocks: Vec<Vec<u8>>,
}

impl WindowOracle for PeriodicOracle {
    fn dim(&self) -> usize {
        self.periods.len()
    }

    fn alphabet_size(&self) -> u32 {
        self.alphabet
    }

    fn symbol(&self, handle: u64, site: &[i64]) -> Result<u8, String> {
        let block = self
            .blocks
            .get(handle as usize)
            .ok_or_else(|| format!("unknown configuration {handle}"))?;
        let mut idx = 0usize;
        for (j, &x) in site.iter().enumerate() {
            idx = idx * self.periods[j] as usize + x.rem_euclid(self.periods[j]) as usize;
        }
        Ok(block[idx])
    }
}

#[derive(Debug, Clone)]
pub enum SystemKind {
    Odometer(BaseSequence),
    Product(Vec<SystemContext>),
    ElekMonodOrbit,
    GenericSubshift { alphabet: u32, oracle: Arc<dyn WindowOracle> },
}

/// A system together with its acting group (ℤ^d with standard generators).
#[derive(Debug, Clone)]
pub struct SystemContext {
    pub group: GroupContext,
    pub kind: SystemKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Point {
    Digits(DigitStream),
    /// The point `g·σ` of the Elek–Monod orbit.
    Lattice(Vec<i64>),
    Tuple(Vec<Point>),
    Config { handle: u64, shift: Vec<i64> },
}

/// `2^{-r}` metric value with `r` the agreement radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distance {
    pub agreed: u32,
    pub max_radius: u32,
}

impl Distance {
    /// 0 when the windows agree out to `max_radius`.
    pub fn value(&self) -> Rational {
        if self.agreed >= self.max_radius {
            Rational::from_integer(0.into())
        } else {
            Rational::new(1.into(), num_bigint::BigInt::from(1) << self.agreed as usize)
        }
    }

    /// `2^{-agreed}`, an upper bound also in the agreeing case.
    pub fn upper_bound(&self) -> Rational {
        Rational::new(1.into(), num_bigint::BigInt::from(1) << self.agreed as usize)
    }

    pub fn is_resolved(&self) -> bool {
        self.agreed < self.max_radius
    }
}

impl SystemContext {
    pub fn odometer(bases: BaseSequence) -> Self {
        SystemContext {
            group: GroupContext::standard_zd(1),
            kind: SystemKind::Odometer(bases),
        }
    }

    pub fn binary_odometer() -> Self {
        SystemContext::odometer(BaseSequence::binary())
    }

    pub fn elek_monod() -> Self {
        SystemContext {
            group: GroupContext::standard_zd(2),
            kind: SystemKind::ElekMonodOrbit,
        }
    }

    pub fn product(factors: Vec<SystemContext>) -> Self {
        let d: usize = factors.iter().map(|f| f.dim()).sum();
        SystemContext {
            group: GroupContext::standard_zd(d),
            kind: SystemKind::Product(factors),
        }
    }

    pub fn generic(oracle: Arc<dyn WindowOracle>) -> Self {
        SystemContext {
            group: GroupContext::standard_zd(oracle.dim()),
            kind: SystemKind::GenericSubshift {
                alphabet: oracle.alphabet_size(),
                oracle,
            },
        }
    }

    pub fn dim(&self) -> usize {
        match &self.group.kind {
            GroupKind::IntVector { d } => *d,
            _ => unreachable!("systems act by ℤ^d"),
        }
    }

    /// Whether the system is declared free on its represented points.
    pub fn declared_free(&self) -> bool {
        match &self.kind {
            SystemKind::Odometer(_) => true,
            SystemKind::ElekMonodOrbit => {
                log::info!("assuming the Elek–Monod orbit points are free");
                true
            }
            SystemKind::Product(f) => f.iter().any(|s| s.declared_free()),
            SystemKind::GenericSubshift { .. } => false,
        }
    }

    /// Whether clopen partitions are checked exactly (digit cylinders).
    pub fn is_prefix_structured(&self) -> bool {
        matches!(self.kind, SystemKind::Odometer(_))
    }

    pub fn bases(&self) -> Option<&BaseSequence> {
        match &self.kind {
            SystemKind::Odometer(b) => Some(b),
            _ => None,
        }
    }

    fn factor_offsets(factors: &[SystemContext]) -> Vec<usize> {
        let mut off = vec![0];
        for f in factors {
            off.push(off.last().unwrap() + f.dim());
        }
        off
    }

    pub fn origin_point(&self) -> Point {
        match &self.kind {
            SystemKind::Odometer(_) => Point::Digits(DigitStream::zero()),
            SystemKind::ElekMonodOrbit => Point::Lattice(vec![0, 0]),
            SystemKind::Product(f) => Point::Tuple(f.iter().map(|s| s.origin_point()).collect()),
            SystemKind::GenericSubshift { oracle, .. } => Point::Config {
                handle: 0,
                shift: vec![0; oracle.dim()],
            },
        }
    }

    pub fn check_point(&self, x: &Point) -> Result<(), SystemError> {
        match (&self.kind, x) {
            (SystemKind::Odometer(b), Point::Digits(d)) if d.is_valid(b) => Ok(()),
            (SystemKind::ElekMonodOrbit, Point::Lattice(v)) if v.len() == 2 => Ok(()),
            (SystemKind::Product(f), Point::Tuple(ps)) if f.len() == ps.len() => {
                f.iter().zip(ps).try_for_each(|(s, p)| s.check_point(p))
            }
            (SystemKind::GenericSubshift { oracle, .. }, Point::Config { shift, .. }) if shift.len() == oracle.dim() => {
                Ok(())
            }
            _ => Err(SystemError::KindMismatch(format!("{x:?}"))),
        }
    }

    /// The point `g·x`.
    pub fn translate(&self, x: &Point, g: &GroupElement) -> Result<Point, SystemError> {
        self.group.check(g)?;
        let v = g.as_vector().unwrap();
        self.translate_vec(x, v)
    }

    pub fn translate_vec(&self, x: &Point, v: &[i64]) -> Result<Point, SystemError> {
        match (&self.kind, x) {
            (SystemKind::Odometer(b), Point::Digits(d)) => Ok(Point::Digits(d.add(v[0], b))),
            (SystemKind::ElekMonodOrbit, Point::Lattice(p)) => Ok(Point::Lattice(vec![p[0] + v[0], p[1] + v[1]])),
            (SystemKind::Product(f), Point::Tuple(ps)) if f.len() == ps.len() => {
                let off = Self::factor_offsets(f);
                let parts = f
                    .iter()
                    .zip(ps)
                    .enumerate()
                    .map(|(i, (s, p))| s.translate_vec(p, &v[off[i]..off[i + 1]]))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Point::Tuple(parts))
            }
            (SystemKind::GenericSubshift { .. }, Point::Config { handle, shift }) => Ok(Point::Config {
                handle: *handle,
                shift: shift.iter().zip(v).map(|(a, b)| a + b).collect(),
            }),
            _ => Err(SystemError::KindMismatch(format!("{x:?}"))),
        }
    }

    /// Alphabet of a cell as a mask.
    pub fn cell_alphabet_mask(&self, c: &Cell) -> u64 {
        let size = match (&self.kind, c) {
            (SystemKind::Odometer(b), Cell::Digit(i)) => b.base(*i as usize),
            (SystemKind::ElekMonodOrbit, Cell::Edge(_)) => 6,
            (SystemKind::GenericSubshift { alphabet, .. }, Cell::Site(_)) => *alphabet,
            (SystemKind::Product(f), Cell::Factor(i, inner)) => {
                return f.get(*i as usize).map(|s| s.cell_alphabet_mask(inner)).unwrap_or(0)
            }
            _ => 0,
        };
        if size >= 64 {
            u64::MAX
        } else {
            (1u64 << size) - 1
        }
    }

    /// Symbol of the configuration of `x` at `c`.
    pub fn symbol_at(&self, x: &Point, c: &Cell) -> Result<u8, SystemError> {
        match (&self.kind, x, c) {
            (SystemKind::Odometer(_), Point::Digits(d), Cell::Digit(i)) => Ok(d.digit(*i as usize) as u8),
            (SystemKind::ElekMonodOrbit, Point::Lattice(p), Cell::Edge(e)) => {
                // (g·σ)(e) = σ(e - g)
                Ok(sigma_color(&e.shifted(-p[0], -p[1])) as u8)
            }
            (SystemKind::GenericSubshift { oracle, .. }, Point::Config { handle, shift }, Cell::Site(s)) => {
                let site: Vec<i64> = s.iter().zip(shift).map(|(a, b)| a - b).collect();
                oracle.symbol(*handle, &site).map_err(SystemError::OracleRefusal)
            }
            (SystemKind::Product(f), Point::Tuple(ps), Cell::Factor(i, inner)) => {
                let i = *i as usize;
                match (f.get(i), ps.get(i)) {
                    (Some(s), Some(p)) => s.symbol_at(p, inner),
                    _ => Err(SystemError::KindMismatch(format!("{c:?}"))),
                }
            }
            _ => Err(SystemError::KindMismatch(format!("{x:?} at {c:?}"))),
        }
    }

    /// Restriction of `x` to `domain`.
    pub fn window(&self, x: &Point, domain: &[Cell]) -> Result<Pattern, SystemError> {
        let mut cells = Vec::with_capacity(domain.len());
        for c in domain {
            cells.push((c.clone(), self.symbol_at(x, c)?));
        }
        Ok(Pattern::from_cells(cells))
    }

    /// Symbols of `x` on `domain`, in order.
    pub fn window_symbols(&self, x: &Point, domain: &[Cell]) -> Result<Vec<u8>, SystemError> {
        domain.iter().map(|c| self.symbol_at(x, c)).collect()
    }

    /// Cells of the radius-`r` ball: digits `0..r`, edges with both ends in
    /// `[-r, r]^2`, sites with `|s|_∞ < r`; empty at `r = 0`.
    pub fn ball_cells(&self, r: u32) -> Vec<Cell> {
        let r = r as i64;
        match &self.kind {
            SystemKind::Odometer(_) => (0..r as u32).map(Cell::Digit).collect(),
            SystemKind::ElekMonodOrbit => {
                let mut out = Vec::new();
                for x in -r..=r {
                    for y in -r..=r {
                        if x < r {
                            out.push(Cell::Edge(LatticeEdge::h(x, y)));
                        }
                        if y < r {
                            out.push(Cell::Edge(LatticeEdge::v(x, y)));
                        }
                    }
                }
                out
            }
            SystemKind::GenericSubshift { oracle, .. } => {
                if r == 0 {
                    return vec![];
                }
                let d = oracle.dim();
                box_elements(&vec![-(r - 1); d], &vec![r - 1; d], usize::MAX)
                    .unwrap()
                    .into_iter()
                    .map(|g| Cell::Site(g.as_vector().unwrap().to_vec()))
                    .collect()
            }
            SystemKind::Product(f) => f
                .iter()
                .enumerate()
                .flat_map(|(i, s)| {
                    s.ball_cells(r as u32)
                        .into_iter()
                        .map(move |c| Cell::Factor(i as u32, Box::new(c)))
                })
                .collect(),
        }
    }

    /// `2^{-r}` with `r` the largest radius `≤ max_radius` on which the
    /// windows of `x` and `y` agree; products use the max of factor metrics.
    pub fn metric(&self, x: &Point, y: &Point, max_radius: u32) -> Result<Distance, SystemError> {
        if let (SystemKind::Product(f), Point::Tuple(xs), Point::Tuple(ys)) = (&self.kind, x, y) {
            let mut agreed = max_radius;
            for ((s, a), b) in f.iter().zip(xs).zip(ys) {
                agreed = agreed.min(s.metric(a, b, max_radius)?.agreed);
            }
            return Ok(Distance { agreed, max_radius });
        }
        for r in 1..=max_radius {
            let cells = self.ball_cells(r);
            if self.window_symbols(x, &cells)? != self.window_symbols(y, &cells)? {
                return Ok(Distance {
                    agreed: r - 1,
                    max_radius,
                });
            }
        }
        Ok(Distance {
            agreed: max_radius,
            max_radius,
        })
    }

    /// Fraction of `s ∈ [1, 2^n]^d` with `s·x` in the cylinder of `pattern`.
    pub fn banach_density_lower(
        &self,
        pattern: &Pattern,
        basepoint: &Point,
        n: u32,
        cap: usize,
    ) -> Result<Rational, SystemError> {
        let d = self.dim();
        let side = 1i64 << n;
        let box_ = box_elements(&vec![1; d], &vec![side; d], cap).map_err(|_| SystemError::Budget(cap))?;
        let mut hits = 0usize;
        if let (SystemKind::Odometer(b), Point::Digits(x)) = (&self.kind, basepoint) {
            let mut cur = x.add(1, b);
            for _ in 0..side {
                if pattern.matches(self, &Point::Digits(cur.clone()))? {
                    hits += 1;
                }
                cur = cur.add(1, b);
            }
        } else {
            for s in &box_ {
                if pattern.matches(self, &self.translate(basepoint, s)?)? {
                    hits += 1;
                }
            }
        }
        Ok(frac(hits, box_.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn ds(prefix: &[u32], period: &[u32]) -> DigitStream {
        DigitStream::new(prefix.to_vec(), period.to_vec())
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(ds(&[0, 0, 1, 1], &[1, 1]), ds(&[0, 0], &[1]));
        assert_eq!(ds(&[1, 0], &[1, 0]), ds(&[], &[1, 0]));
        assert_eq!(ds(&[], &[0, 1, 0, 1]).period, vec![0, 1]);
    }

    #[test]
    fn translate_examples() {
        let sys = SystemContext::binary_odometer();
        let x = Point::Digits(ds(&[0, 1, 1], &[0]));
        let y = sys.translate(&x, &GroupElement::vector(&[1])).unwrap();
        assert_eq!(y, Point::Digits(ds(&[1, 1, 1], &[0])));
        let minus_one = Point::Digits(ds(&[], &[1]));
        let z = sys.translate(&minus_one, &GroupElement::vector(&[1])).unwrap();
        assert_eq!(z, Point::Digits(DigitStream::zero()));
        let em = SystemContext::elek_monod();
        let p = em.translate(&Point::Lattice(vec![2, 3]), &GroupElement::vector(&[1, -1])).unwrap();
        assert_eq!(p, Point::Lattice(vec![3, 2]));
    }

    #[test]
    fn integers_round_trip() {
        let b = BaseSequence::new(vec![3, 2], vec![5, 2]).unwrap();
        for k in -200..200 {
            let x = DigitStream::from_int(k, &b);
            assert!(x.is_valid(&b));
            assert_eq!(x.add(-k, &b), DigitStream::zero(), "k = {k}");
            assert_eq!(x.add(1, &b), DigitStream::from_int(k + 1, &b));
        }
    }

    #[test]
    fn window_examples() {
        let sys = SystemContext::binary_odometer();
        let x = Point::Digits(ds(&[0, 1], &[0]));
        let cells = sys.ball_cells(3);
        assert_eq!(sys.window_symbols(&x, &cells).unwrap(), vec![0, 1, 0]);
        let em = SystemContext::elek_monod();
        let e = Cell::Edge(LatticeEdge::h(0, 0));
        assert_eq!(em.symbol_at(&Point::Lattice(vec![0, 0]), &e).unwrap(), crate::elekmonod::Color::E as u8);
        let prod = SystemContext::product(vec![sys.clone(), em.clone()]);
        let pt = Point::Tuple(vec![x.clone(), Point::Lattice(vec![0, 0])]);
        let w = prod
            .window_symbols(&pt, &[Cell::Factor(0, Box::new(Cell::Digit(1))), Cell::Factor(1, Box::new(e))])
            .unwrap();
        assert_eq!(w, vec![1, crate::elekmonod::Color::E as u8]);
    }

    #[test]
    fn metric_examples() {
        let sys = SystemContext::binary_odometer();
        let x = Point::Digits(ds(&[0, 1, 1], &[0]));
        let d = sys.metric(&x, &x, 10).unwrap();
        assert_eq!(d.value(), ratio(0, 1));
        assert_eq!(d.upper_bound(), ratio(1, 1024));
        let y = Point::Digits(ds(&[1, 1, 1], &[0]));
        assert_eq!(sys.metric(&x, &y, 10).unwrap().value(), ratio(1, 1));
        let a = Point::Digits(ds(&[0, 0, 0, 0, 0, 0], &[0]));
        let b = Point::Digits(ds(&[0, 0, 0, 0, 0, 1], &[0]));
        assert_eq!(sys.metric(&a, &b, 10).unwrap().value(), ratio(1, 32));
    }

    #[test]
    fn density_examples() {
        let sys = SystemContext::binary_odometer();
        let x = Point::Digits(ds(&[1, 0, 1], &[1, 0, 0]));
        let p = Pattern::exact(Cell::Digit(0), 0);
        assert_eq!(sys.banach_density_lower(&p, &x, 8, 1 << 20).unwrap(), ratio(128, 256));
        assert_eq!(sys.banach_density_lower(&Pattern::full(), &x, 8, 1 << 20).unwrap(), ratio(1, 1));
        // digit 0 restricted to a symbol outside the alphabet
        let none = Pattern::single(Cell::Digit(0), 1 << 5);
        assert_eq!(sys.banach_density_lower(&none, &x, 4, 1 << 20).unwrap(), ratio(0, 1));
    }

    #[test]
    fn generic_subshift_refuses_unknown_handles() {
        let oracle = PeriodicOracle {
            periods: vec![2],
            alphabet: 2,
            blocks: vec![vec![0, 1]],
        };
        let sys = SystemContext::generic(Arc::new(oracle));
        let x = Point::Config { handle: 0, shift: vec![0] };
        assert_eq!(sys.window_symbols(&x, &sys.ball_cells(2)).unwrap(), vec![1, 0, 1]);
        let bad = Point::Config { handle: 9, shift: vec![0] };
        assert!(matches!(sys.window(&bad, &sys.ball_cells(1)), Err(SystemError::OracleRefusal(_))));
    }

    #[test]
    fn pattern_json_round_trip() {
        let p = Pattern::from_cells([(Cell::Digit(0), 1), (Cell::Edge(LatticeEdge::v(0, 0)), 2)]);
        let s = serde_json::to_string(&p).unwrap();
        let q: Pattern = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(s.contains("\"domain\"") && s.contains("\"symbols\""));
    }
}
