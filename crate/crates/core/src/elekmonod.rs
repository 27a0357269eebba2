//! The Elek–Monod edge coloring of the ℤ² lattice: labels, the word list Δ,
//! windows, pattern counts and the six involutions.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fullgroup::{CocycleTable, Part};
use crate::groups::GroupElement;
use crate::rational::ln_biguint;
use crate::systems::{Cell, Pattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    A = 0,
    B = 1,
    C = 2,
    D = 3,
    E = 4,
    F = 5,
}

impl Color {
    pub const ALL: [Color; 6] = [Color::A, Color::B, Color::C, Color::D, Color::E, Color::F];

    pub fn from_index(i: u8) -> Color {
        Color::ALL[i as usize]
    }

    pub fn letter(self) -> char {
        b"ABCDEF"[self as usize] as char
    }

    pub fn parse(c: char) -> Option<Color> {
        Color::ALL.into_iter().find(|x| x.letter() == c.to_ascii_uppercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    H,
    V,
}

/// `H`: `((x,y),(x+1,y))`; `V`: `((x,y),(x,y+1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeEdge {
    pub base: (i64, i64),
    pub orientation: Orientation,
}

impl LatticeEdge {
    pub fn h(x: i64, y: i64) -> Self {
        LatticeEdge {
            base: (x, y),
            orientation: Orientation::H,
        }
    }

    pub fn v(x: i64, y: i64) -> Self {
        LatticeEdge {
            base: (x, y),
            orientation: Orientation::V,
        }
    }

    pub fn shifted(&self, dx: i64, dy: i64) -> Self {
        LatticeEdge {
            base: (self.base.0 + dx, self.base.1 + dy),
            orientation: self.orientation,
        }
    }

    /// The edge leaving the origin in unit direction `u`.
    pub fn at_origin(u: (i64, i64)) -> Self {
        match u {
            (1, 0) => LatticeEdge::h(0, 0),
            (-1, 0) => LatticeEdge::h(-1, 0),
            (0, 1) => LatticeEdge::v(0, 0),
            (0, -1) => LatticeEdge::v(0, -1),
            _ => panic!("not a unit direction: {u:?}"),
        }
    }
}

/// The four unit directions in the order used by the involution tables.
pub const DIRECTIONS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// 2-adic valuation of `m`.
pub fn label(m: i64) -> Option<u32> {
    if m == 0 {
        None
    } else {
        Some(m.trailing_zeros())
    }
}

const DELTA_PREFIX: [&[u8]; 9] = [&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2], &[1, 0], &[2, 0], &[2, 1]];

/// The `i`-th nontrivial reduced word over `{A, B, C}` (letters `0, 1, 2`),
/// `i ≥ 1`: the nine listed words, then length-lex from length 3 on.
pub fn delta_word(i: u64) -> Vec<u8> {
    assert!(i >= 1, "Δ is indexed from 1");
    if i <= 9 {
        return DELTA_PREFIX[i as usize - 1].to_vec();
    }
    // 3(2^k - 1) reduced words have length ≤ k
    let mut k = 3u32;
    while 3 * ((1u64 << k) - 1) < i {
        k += 1;
    }
    let mut r = i - 3 * ((1u64 << (k - 1)) - 1) - 1;
    let mut bits = Vec::with_capacity(k as usize - 1);
    for _ in 1..k {
        bits.push((r & 1) as u8);
        r >>= 1;
    }
    let mut w = vec![r as u8];
    for b in bits.into_iter().rev() {
        let prev = *w.last().unwrap();
        let choices: Vec<u8> = (0..3).filter(|&c| c != prev).collect();
        w.push(choices[b as usize]);
    }
    w
}

fn delta_cached(i: u32) -> &'static [u8] {
    static CACHE: OnceLock<Vec<Vec<u8>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (1..=64).map(delta_word).collect());
    &cache[i as usize - 1]
}

/// Vertical period of line `x`.
pub fn line_period(x: i64) -> u64 {
    match label(x) {
        Some(l) if l > 0 => delta_cached(l).len() as u64 + 1,
        _ => 2,
    }
}

/// The color σ(e).
pub fn sigma_color(e: &LatticeEdge) -> Color {
    let (x, y) = e.base;
    match e.orientation {
        Orientation::H => {
            if x.rem_euclid(2) == 0 {
                Color::E
            } else {
                Color::F
            }
        }
        Orientation::V => match label(x) {
            Some(l) if l > 0 => {
                let w = delta_cached(l);
                let p = w.len() as i64 + 1;
                let slot = y.rem_euclid(p) as usize;
                if slot < w.len() {
                    Color::from_index(w[w.len() - 1 - slot])
                } else {
                    Color::D
                }
            }
            _ => {
                if y.rem_euclid(2) == 0 {
                    Color::A
                } else {
                    Color::D
                }
            }
        },
    }
}

/// Colors of the four edges at vertex `v`, in [`DIRECTIONS`] order.
pub fn incident_colors(v: (i64, i64), color: &impl Fn(&LatticeEdge) -> Color) -> [Color; 4] {
    DIRECTIONS.map(|u| color(&LatticeEdge::at_origin(u).shifted(v.0, v.1)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub vertex: (i64, i64),
    pub colors: [Color; 4],
}

/// Checks properness at every vertex of `[lo, hi]^2` for σ.
pub fn check_proper(lo: i64, hi: i64) -> Option<Violation> {
    check_proper_with(lo, hi, &sigma_color)
}

/// Checks properness at every vertex of `[lo, hi]^2` for an arbitrary
/// coloring; returns the first violation in row order.
pub fn check_proper_with(lo: i64, hi: i64, color: &(impl Fn(&LatticeEdge) -> Color + Sync)) -> Option<Violation> {
    (lo..=hi).into_par_iter().find_map_first(|y| {
        (lo..=hi).find_map(|x| {
            let c = incident_colors((x, y), color);
            let distinct = (0..4).all(|i| (i + 1..4).all(|j| c[i] != c[j]));
            (!distinct).then_some(Violation { vertex: (x, y), colors: c })
        })
    })
}

/// Checks that every interval of `len(n) = 2^{n+1}` integers inside
/// `[lo, hi]` contains some `m` with `L(m) = n`; returns the first bad start.
pub fn check_label_density(n: u32, lo: i64, hi: i64) -> Option<i64> {
    let len = 1i64 << (n + 1);
    let hits: Vec<i64> = (lo..=hi).filter(|&m| label(m) == Some(n)).collect();
    // gaps between consecutive hits, plus the two ends
    let mut prev = lo - 1;
    for &h in hits.iter().chain(std::iter::once(&(hi + 1))) {
        if h - prev > len {
            return Some(prev + 1);
        }
        prev = h;
    }
    None
}

/// Colors of `g·E_n`: H-edges with bases in `[0, 2^n - 1] × [0, 2^n]`
/// followed by V-edges with bases in `[0, 2^n] × [0, 2^n - 1]`, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColoringWindow {
    pub anchor: (i64, i64),
    pub n: u32,
    pub h: Vec<Color>,
    pub v: Vec<Color>,
}

impl ColoringWindow {
    /// Translation-aligned content, comparable across anchors.
    pub fn content(&self) -> Vec<u8> {
        self.h.iter().chain(&self.v).map(|&c| c as u8).collect()
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.content()).into()
    }

    pub fn to_grid_text(&self) -> String {
        let s = 1i64 << self.n;
        let mut out = String::new();
        for y in (0..=s).rev() {
            for x in 0..s {
                out.push('+');
                out.push(self.h[(y * s + x) as usize].letter());
            }
            out.push_str("+\n");
            if y > 0 {
                for x in 0..=s {
                    out.push(self.v[((y - 1) * (s + 1) + x) as usize].letter());
                    out.push(' ');
                }
                out.push('\n');
            }
        }
        out
    }
}

pub fn window_at(g: (i64, i64), n: u32) -> ColoringWindow {
    let s = 1i64 << n;
    let mut h = Vec::with_capacity((s * (s + 1)) as usize);
    for y in 0..=s {
        for x in 0..s {
            h.push(sigma_color(&LatticeEdge::h(x + g.0, y + g.1)));
        }
    }
    let mut v = Vec::with_capacity((s * (s + 1)) as usize);
    for y in 0..s {
        for x in 0..=s {
            v.push(sigma_color(&LatticeEdge::v(x + g.0, y + g.1)));
        }
    }
    ColoringWindow { anchor: g, n, h, v }
}

/// Edges with both endpoints in `[x0, x1] × [y0, y1]`, in a fixed order.
pub fn rectangle_edges(x0: i64, x1: i64, y0: i64, y1: i64) -> Vec<LatticeEdge> {
    let mut out = Vec::new();
    for y in y0..=y1 {
        for x in x0..x1 {
            out.push(LatticeEdge::h(x, y));
        }
    }
    for y in y0..y1 {
        for x in x0..=x1 {
            out.push(LatticeEdge::v(x, y));
        }
    }
    out
}

/// Whether all `σ|_{P_{n,m}}`, `P_{n,m} = [2^n m + 1, 2^n (m+1) - 1] × [0, 2^n]`,
/// agree after translation for `m` in `ms`.
pub fn same_pattern_check(n: u32, ms: impl IntoIterator<Item = i64>) -> bool {
    let s = 1i64 << n;
    let domain = rectangle_edges(1, s - 1, 0, s);
    let read = |m: i64| -> Vec<Color> { domain.iter().map(|e| sigma_color(&e.shifted(s * m, 0))).collect() };
    let mut reference: Option<Vec<Color>> = None;
    for m in ms {
        let w = read(m);
        match &reference {
            None => reference = Some(w),
            Some(r) if r != &w => return false,
            _ => {}
        }
    }
    true
}

/// lcm of the periods of the lines `x0..=x1` (at least 2).
pub fn joint_period(x0: i64, x1: i64) -> u64 {
    (x0..=x1).fold(2u64, |acc, x| acc.lcm(&line_period(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalStrategy {
    /// One full joint period of the window's lines per column.
    ExactPeriod,
    /// `g_2 ∈ [0, k)`.
    Fixed(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternCount {
    pub n: u32,
    pub h_range: (i64, i64),
    pub count: usize,
    pub windows_scanned: u64,
    /// SHA-256 over the sorted window digests.
    pub catalog_digest: String,
}

/// Distinct windows `σ|_{g E_n}` over `g_1 ∈ h_range` and the chosen
/// vertical sweep; exact over the swept region.
pub fn pattern_count(n: u32, h_range: (i64, i64), strategy: VerticalStrategy, budget: u64) -> Result<PatternCount, u64> {
    let s = 1i64 << n;
    let columns: Vec<(i64, u64)> = (h_range.0..=h_range.1)
        .map(|g1| {
            let p = match strategy {
                VerticalStrategy::ExactPeriod => joint_period(g1, g1 + s),
                VerticalStrategy::Fixed(k) => k,
            };
            (g1, p)
        })
        .collect();
    let total: u64 = columns.iter().map(|c| c.1).sum();
    if total > budget {
        return Err(total);
    }
    let digests: BTreeSet<[u8; 32]> = columns
        .par_iter()
        .map(|&(g1, p)| {
            let mut local = HashSet::new();
            for g2 in 0..p as i64 {
                local.insert(window_at((g1, g2), n).content());
            }
            local
        })
        .reduce(HashSet::new, |mut a, b| {
            a.extend(b);
            a
        })
        .into_iter()
        .map(|c| -> [u8; 32] { Sha256::digest(c).into() })
        .collect();
    let mut hasher = Sha256::new();
    for d in &digests {
        hasher.update(d);
    }
    Ok(PatternCount {
        n,
        h_range,
        count: digests.len(),
        windows_scanned: total,
        catalog_digest: hex(&hasher.finalize()),
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::from(1u32), |acc, k| acc * k)
}

/// `2 · 2^n · 4^{2^n} · (n+1)!`
pub fn pattern_bound(n: u32) -> BigUint {
    BigUint::from(2u32) * (BigUint::from(1u32) << n as usize) * (BigUint::from(1u32) << (2usize << n)) * factorial(n as u64 + 1)
}

/// `2^n · n! + 4 · 2^n · 4^{2^n} · (n+1)!`
pub fn pattern_bound_full(n: u32) -> BigUint {
    let two_n = BigUint::from(1u32) << n as usize;
    &two_n * factorial(n as u64)
        + BigUint::from(4u32) * &two_n * (BigUint::from(1u32) << (2usize << n)) * factorial(n as u64 + 1)
}

/// `(n log 2 + log n + n(log n − 1) + log(4n+5) + 2^n log 4) / 4^n`, valid as a
/// majorant of the normalized bound for `n ≥ 2`.
pub fn stirling_majorant(n: u32) -> f64 {
    let nf = n as f64;
    (nf * std::f64::consts::LN_2 + nf.ln() + nf * (nf.ln() - 1.0) + (4.0 * nf + 5.0).ln() + (1u64 << n) as f64 * 4f64.ln())
        / 4f64.powi(n as i32)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyRow {
    pub n: u32,
    pub count: usize,
    /// `log(count) / 4^n`, display only.
    pub normalized_log_count: f64,
    pub bound: String,
    pub normalized_log_bound: f64,
    pub full_bound: String,
    pub normalized_log_full_bound: f64,
    pub count_within_bound: bool,
}

/// Rows for `n = 1..=n_max`, with `h_range = [−2^{n+6}, 2^{n+6}]` and exact
/// vertical periods.
pub fn entropy_table(n_max: u32, budget: u64) -> Result<Vec<EntropyRow>, u64> {
    (1..=n_max)
        .map(|n| {
            let h = 1i64 << (n + 6);
            let pc = pattern_count(n, (-h, h), VerticalStrategy::ExactPeriod, budget)?;
            Ok(entropy_row(n, pc.count))
        })
        .collect()
}

pub fn entropy_row(n: u32, count: usize) -> EntropyRow {
    let area = 4f64.powi(n as i32);
    let bound = pattern_bound(n);
    let full = pattern_bound_full(n);
    EntropyRow {
        n,
        count,
        normalized_log_count: (count as f64).ln() / area,
        normalized_log_bound: ln_biguint(&bound) / area,
        normalized_log_full_bound: ln_biguint(&full) / area,
        count_within_bound: BigUint::from(count) <= bound,
        bound: bound.to_string(),
        full_bound: full.to_string(),
    }
}

/// The involution for `letter`: where the origin has an incident edge of
/// that color towards `u`, move the origin to `u` (translate by `−u`);
/// elsewhere the identity. Parts are made syntactically disjoint.
pub fn involution_table(letter: Color) -> CocycleTable {
    let cells: Vec<Cell> = DIRECTIONS
        .iter()
        .map(|&u| Cell::Edge(LatticeEdge::at_origin(u)))
        .collect();
    let is = 1u64 << letter as u8;
    let not = 0b111111 & !is;
    let mut parts = Vec::new();
    for (i, &u) in DIRECTIONS.iter().enumerate() {
        let mut p = Pattern::single(cells[i].clone(), is);
        for c in &cells[..i] {
            p.cells.insert(c.clone(), not);
        }
        parts.push(Part {
            pattern: p,
            element: GroupElement::vector(&[-u.0, -u.1]),
        });
    }
    parts.push(Part {
        pattern: Pattern {
            cells: cells.iter().map(|c| (c.clone(), not)).collect(),
        },
        element: GroupElement::vector(&[0, 0]),
    });
    CocycleTable { parts }
}

/// Moves the σ-vertex `q` along its incident edge of color `letter`, if any.
pub fn step(q: (i64, i64), letter: Color) -> (i64, i64) {
    for u in DIRECTIONS {
        if sigma_color(&LatticeEdge::at_origin(u).shifted(q.0, q.1)) == letter {
            return (q.0 + u.0, q.1 + u.1);
        }
    }
    q
}

/// Applies the word (rightmost letter first) at the point `p·σ`, returning
/// the image point.
pub fn apply_word(word: &[Color], p: (i64, i64)) -> (i64, i64) {
    // the origin of p·σ sits at σ's vertex −p
    let mut q = (-p.0, -p.1);
    for &l in word.iter().rev() {
        q = step(q, l);
    }
    (-q.0, -q.1)
}

pub fn parse_word(s: &str) -> Option<Vec<Color>> {
    s.chars().map(Color::parse).collect()
}

pub fn word_string(w: &[Color]) -> String {
    w.iter().map(|c| c.letter()).collect()
}

/// All nontrivial reduced words over `{A, B, C}` of length `≤ max_len`.
pub fn reduced_words(max_len: usize) -> Vec<Vec<Color>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<Color>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for c in [Color::A, Color::B, Color::C] {
                if w.last() != Some(&c) {
                    let mut x = w.clone();
                    x.push(c);
                    next.push(x);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub point: (i64, i64),
    pub image: (i64, i64),
}

/// First `g ∈ [−r, r]^2` (row order) where the word moves `g·σ`. On the
/// free orbit points a move is a nonzero net translation.
pub fn word_acts_nontrivially(word: &[Color], search_radius: i64) -> Option<Witness> {
    assert!(!word.is_empty(), "empty word");
    assert!(word.windows(2).all(|p| p[0] != p[1]), "word is not reduced");
    for y in -search_radius..=search_radius {
        for x in -search_radius..=search_radius {
            let image = apply_word(word, (x, y));
            if image != (x, y) {
                return Some(Witness { point: (x, y), image });
            }
        }
    }
    None
}

/// Points `p ∈ [−r, r]^2` at which `x ∘ x` fails to fix `p·σ`, with the
/// image windows compared up to `radius` around the origin.
pub fn involution_square_failures(letter: Color, r: i64, radius: i64) -> Vec<(i64, i64)> {
    let word = [letter, letter];
    let domain = rectangle_edges(-radius, radius, -radius, radius);
    (-r..=r)
        .into_par_iter()
        .flat_map_iter(|y| {
            let domain = &domain;
            (-r..=r).filter_map(move |x| {
                let q = apply_word(&word, (x, y));
                let same = domain
                    .iter()
                    .all(|e| sigma_color(&e.shifted(-x, -y)) == sigma_color(&e.shifted(-q.0, -q.1)));
                (!same).then_some((x, y))
            })
        })
        .collect()
}
