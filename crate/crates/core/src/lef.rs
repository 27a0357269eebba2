//! Finite models of residually finite actions and LEF representations of
//! the full group built from them.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fullgroup::{CocycleTable, FullGroup, FullGroupError};
use crate::rational::{frac, serde_pq, serde_pq_opt, Rational};
use crate::sofic::{compose_maps, displacement, hamming};
use crate::systems::{BaseSequence, DigitStream, Point, SystemContext, SystemError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LefError {
    #[error("modulus of the first {0} bases overflows")]
    Modulus(usize),
    #[error("cocycle value {value} of element {element} at model point {point} is outside the modeled set")]
    Unmodeled { element: usize, point: usize, value: i64 },
    #[error("system is not an odometer")]
    NotOdometer,
    #[error(transparent)]
    FullGroup(#[from] FullGroupError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Points `E`, the permutation action `β` of ℤ on them, quality `ε` and the
/// approximated set `F ⊂ ℤ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteModel {
    pub n: usize,
    pub bases: BaseSequence,
    /// `E`: the integers `0..N` written with a zero tail.
    pub points: Vec<DigitStream>,
    pub modulus: u64,
    #[serde(with = "serde_pq")]
    pub epsilon: Rational,
    pub approximated: Vec<i64>,
    /// Largest `|k|` for which `β(k)` is modeled; `β` is the cyclic shift.
    pub max_shift: i64,
}

impl FiniteModel {
    /// `β(k)` as a permutation of indices.
    pub fn beta(&self, k: i64) -> Vec<u32> {
        let n = self.modulus as i128;
        (0..self.points.len())
            .map(|i| (i as i128 + k as i128).rem_euclid(n) as u32)
            .collect()
    }

    pub fn point(&self, i: usize) -> Point {
        Point::Digits(self.points[i].clone())
    }
}

/// Supplies a finite model at each level `n`.
pub trait FiniteModelProvider {
    fn model(&self, n: usize) -> Result<FiniteModel, LefError>;
}

pub struct OdometerProvider(pub BaseSequence);

impl FiniteModelProvider for OdometerProvider {
    fn model(&self, n: usize) -> Result<FiniteModel, LefError> {
        odometer_finite_model(&self.0, n)
    }
}

/// `E = {0, …, N−1}` for `N` the product of the first `n` bases,
/// `β(±1)` the cyclic shift, `ε = 2^{−n}`, `F = {±1}`.
pub fn odometer_finite_model(bases: &BaseSequence, n: usize) -> Result<FiniteModel, LefError> {
    let modulus = bases.modulus(n).filter(|&m| m <= u32::MAX as u64).ok_or(LefError::Modulus(n))?;
    let points = (0..modulus).map(|k| DigitStream::new(bases.digits_of(k, n), vec![0])).collect();
    Ok(FiniteModel {
        n,
        bases: bases.clone(),
        points,
        modulus,
        epsilon: Rational::new(1.into(), num_bigint::BigInt::from(1) << n),
        approximated: vec![1, -1],
        max_shift: i64::MAX,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    #[serde(with = "serde_pq")]
    pub epsilon: Rational,
    pub samples: usize,
    pub density_ok: bool,
    #[serde(with = "serde_pq")]
    pub worst_density: Rational,
    pub approximation_ok: bool,
    #[serde(with = "serde_pq_opt")]
    pub worst_approximation: Option<Rational>,
    pub pass: bool,
}

/// Seeded sample points: carry points, then random digit prefixes.
pub fn sample_points(bases: &BaseSequence, n: usize, count: usize, rng: &mut impl Rng) -> Vec<DigitStream> {
    let mut out = vec![
        DigitStream::zero(),
        DigitStream::new((0..n).map(|i| bases.base(i) - 1).collect(), vec![0]),
        DigitStream::new(vec![], vec![1.min(bases.base(0) - 1)]),
    ];
    let len = n + 8;
    while out.len() < count {
        let prefix = (0..len).map(|i| rng.gen_range(0..bases.base(i))).collect();
        out.push(DigitStream::new(prefix, vec![0]));
    }
    out.truncate(count.max(3));
    out
}

/// Checks `E` is `ε`-dense on the samples and `d(α(s)z, β(s)z) ≤ ε` for
/// `z ∈ E`, `s ∈ F`, with the metric read out to `radius`.
pub fn check_residually_finite(
    sys: &SystemContext,
    model: &FiniteModel,
    samples: &[DigitStream],
    f: &[i64],
    eps: &Rational,
    radius: u32,
) -> Result<ResidualReport, LefError> {
    let bases = sys.bases().ok_or(LefError::NotOdometer)?;
    let mut worst_density = Rational::from_integer(0.into());
    for x in samples {
        // the model point sharing the first n digits is the nearest one
        let k = bases.value_of(&(0..model.n).map(|i| x.digit(i)).collect::<Vec<_>>());
        let mut best: Option<Rational> = None;
        for cand in [k as usize, 0] {
            let dist = sys.metric(&Point::Digits(x.clone()), &model.point(cand), radius)?.value();
            if best.as_ref().is_none_or(|b| &dist < b) {
                best = Some(dist);
            }
        }
        worst_density = worst_density.max(best.unwrap());
    }
    let mut worst_approx: Option<Rational> = None;
    for &s in f {
        let beta = model.beta(s);
        for (i, z) in model.points.iter().enumerate() {
            let a = Point::Digits(z.add(s, bases));
            let b = model.point(beta[i] as usize);
            let d = sys.metric(&a, &b, radius)?.value();
            if worst_approx.as_ref().is_none_or(|w| &d > w) {
                worst_approx = Some(d);
            }
        }
    }
    let density_ok = &worst_density <= eps;
    let approximation_ok = worst_approx.as_ref().is_none_or(|w| w <= eps);
    Ok(ResidualReport {
        epsilon: eps.clone(),
        samples: samples.len(),
        density_ok,
        worst_density,
        approximation_ok,
        worst_approximation: worst_approx,
        pass: density_ok && approximation_ok,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreenessReport {
    pub radius: u32,
    /// Odometer actions are free, independent of the search.
    pub structural: bool,
    pub duplicates: usize,
    /// `(k, point)` with `k ≠ 0`, `|k| ≤ radius` and `k·z = z`.
    pub fixed: Vec<(i64, usize)>,
    pub pass: bool,
}

pub fn freeness_check(sys: &SystemContext, model: &FiniteModel, radius: u32) -> Result<FreenessReport, LefError> {
    let bases = sys.bases().ok_or(LefError::NotOdometer)?;
    let distinct: BTreeSet<&DigitStream> = model.points.iter().collect();
    let duplicates = model.points.len() - distinct.len();
    let mut fixed = Vec::new();
    let r = radius as i64;
    for k in (-r..=r).filter(|&k| k != 0) {
        for (i, z) in model.points.iter().enumerate() {
            if &z.add(k, bases) == z {
                fixed.push((k, i));
            }
        }
    }
    Ok(FreenessReport {
        radius,
        structural: true,
        duplicates,
        pass: duplicates == 0 && fixed.is_empty(),
        fixed,
    })
}

/// `Θ(γ)(z) = β(g)(z)` for the cocycle value `g = c_γ(z)`.
pub fn build_lef_map(fg: &FullGroup, ball: &[CocycleTable], model: &FiniteModel) -> Result<Vec<Vec<u32>>, LefError> {
    let n = model.modulus as i128;
    ball.iter()
        .enumerate()
        .map(|(e, t)| {
            (0..model.points.len())
                .map(|i| {
                    let g = fg.cocycle(t, &model.point(i))?;
                    let k = g.as_vector().unwrap()[0];
                    if k.abs() > model.max_shift {
                        return Err(LefError::Unmodeled {
                            element: e,
                            point: i,
                            value: k,
                        });
                    }
                    Ok((i as i128 + k as i128).rem_euclid(n) as u32)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LefWitness {
    pub left: usize,
    pub right: usize,
    #[serde(with = "serde_pq")]
    pub defect: Rational,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LefConditions {
    pub n: usize,
    pub ball_size: usize,
    pub pairs_checked: usize,
    #[serde(with = "serde_pq")]
    pub max_product_defect: Rational,
    #[serde(with = "serde_pq_opt")]
    pub min_displacement: Option<Rational>,
    pub identity_ok: bool,
    pub multiplicative: bool,
    pub displacing: bool,
    pub product_failures: Vec<LefWitness>,
    /// Nontrivial ball elements whose displacement is not above its ε.
    pub displacement_failures: Vec<usize>,
    pub pass: bool,
}

/// Exact check: `d_H(Θ(γ_iγ_j), Θ(γ_i)Θ(γ_j)) = 0` for all pairs and
/// `d_H(Θ(γ), id) > ε_γ` for nontrivial `γ` (`eps` is per element, the last
/// value repeating).
pub fn check_lef_conditions(
    fg: &FullGroup,
    ball: &[CocycleTable],
    model: &FiniteModel,
    eps: &[Rational],
) -> Result<LefConditions, LefError> {
    let maps = build_lef_map(fg, ball, model)?;
    let zero = Rational::from_integer(0.into());
    let mut max_defect = zero.clone();
    let mut failures = Vec::new();
    let mut pairs = 0;
    for i in 0..ball.len() {
        let products: Vec<CocycleTable> = ball.iter().map(|b| fg.compose(&ball[i], b)).collect::<Result<_, _>>()?;
        let pm = build_lef_map(fg, &products, model)?;
        for (j, p) in pm.iter().enumerate() {
            let d = hamming(p, &compose_maps(&maps[i], &maps[j])).unwrap();
            pairs += 1;
            if d > zero {
                failures.push(LefWitness {
                    left: i,
                    right: j,
                    defect: d.clone(),
                });
            }
            max_defect = max_defect.max(d);
        }
    }
    let mut min_disp: Option<Rational> = None;
    let mut disp_fail = Vec::new();
    let mut identity_ok = true;
    for (i, t) in ball.iter().enumerate() {
        let (_, d) = displacement(&maps[i]);
        if fg.is_identity(t)? {
            identity_ok &= d == zero;
            continue;
        }
        let e = eps.get(i).or(eps.last()).cloned().unwrap_or_else(|| zero.clone());
        if d <= e {
            disp_fail.push(i);
        }
        if min_disp.as_ref().is_none_or(|m| &d < m) {
            min_disp = Some(d);
        }
    }
    let multiplicative = failures.is_empty();
    let displacing = disp_fail.is_empty();
    Ok(LefConditions {
        n: model.n,
        ball_size: ball.len(),
        pairs_checked: pairs,
        max_product_defect: max_defect,
        min_displacement: min_disp,
        identity_ok,
        multiplicative,
        displacing,
        product_failures: failures,
        displacement_failures: disp_fail,
        pass: multiplicative && displacing && identity_ok,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LefSearch {
    pub minimal_n: Option<usize>,
    /// Whether every `n' > minimal_n` up to `max_n` also passes.
    pub monotone: bool,
    pub conditions: Vec<LefConditions>,
}

/// Runs the check for `n = 1..=max_n` on the subgroup ball.
pub fn lef_search(
    fg: &FullGroup,
    gens: &[CocycleTable],
    radius: u32,
    max_n: usize,
    eps: &Rational,
) -> Result<LefSearch, LefError> {
    let bases = fg.sys.bases().ok_or(LefError::NotOdometer)?.clone();
    let ball = fg.subgroup_ball(gens, radius)?;
    let mut conditions = Vec::new();
    for n in 1..=max_n {
        let model = odometer_finite_model(&bases, n)?;
        conditions.push(check_lef_conditions(fg, &ball, &model, std::slice::from_ref(eps))?);
    }
    let minimal_n = conditions.iter().find(|c| c.pass).map(|c| c.n);
    let monotone = minimal_n.is_none_or(|m| conditions.iter().filter(|c| c.n >= m).all(|c| c.pass));
    Ok(LefSearch {
        minimal_n,
        monotone,
        conditions,
    })
}

/// `|E|` and `ε` per level, for the halving check.
pub fn quality_table(bases: &BaseSequence, max_n: usize) -> Result<Vec<(usize, Rational)>, LefError> {
    (1..=max_n)
        .map(|n| odometer_finite_model(bases, n).map(|m| (m.points.len(), m.epsilon)))
        .collect()
}

pub fn fraction_of(count: usize, total: usize) -> Rational {
    frac(count, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::sofic::shift;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fg() -> FullGroup {
        FullGroup::new(SystemContext::binary_odometer())
    }

    #[test]
    fn model_examples() {
        let m = odometer_finite_model(&BaseSequence::binary(), 3).unwrap();
        assert_eq!(m.points.len(), 8);
        assert_eq!(m.epsilon, ratio(1, 8));
        let b = m.beta(1);
        assert_eq!(b, vec![1, 2, 3, 4, 5, 6, 7, 0]);
        assert_eq!(compose_maps(&m.beta(-1), &b), (0..8).collect::<Vec<u32>>());
    }

    #[test]
    fn residual_examples() {
        let sys = SystemContext::binary_odometer();
        let bases = BaseSequence::binary();
        let m = odometer_finite_model(&bases, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples = sample_points(&bases, 3, 64, &mut rng);
        let r = check_residually_finite(&sys, &m, &samples, &[1, -1], &ratio(1, 8), 12).unwrap();
        assert!(r.pass, "{r:?}");
        let r = check_residually_finite(&sys, &m, &samples, &[1, -1], &ratio(1, 32), 12).unwrap();
        assert!(!r.density_ok);
        let r = check_residually_finite(&sys, &m, &samples, &[], &ratio(1, 8), 12).unwrap();
        assert!(r.approximation_ok);
    }

    #[test]
    fn freeness() {
        let sys = SystemContext::binary_odometer();
        let mut m = odometer_finite_model(&BaseSequence::binary(), 3).unwrap();
        assert!(freeness_check(&sys, &m, 4).unwrap().pass);
        assert!(freeness_check(&sys, &m, 0).unwrap().pass);
        m.points.push(m.points[0].clone());
        assert!(!freeness_check(&sys, &m, 4).unwrap().pass);
    }

    #[test]
    fn lef_maps() {
        let fg = fg();
        let m = odometer_finite_model(&BaseSequence::binary(), 3).unwrap();
        let swap = CocycleTable::digit_swap(&BaseSequence::binary());
        let maps = build_lef_map(&fg, &[shift(1), fg.identity(), swap.clone()], &m).unwrap();
        assert_eq!(maps[0], vec![1, 2, 3, 4, 5, 6, 7, 0]);
        assert_eq!(maps[1], (0..8).collect::<Vec<u32>>());
        assert_eq!(maps[2], vec![1, 0, 3, 2, 5, 4, 7, 6]);
        let c = check_lef_conditions(&fg, &[swap], &m, &[ratio(1, 4)]).unwrap();
        assert!(c.pass);
        let ball = fg.subgroup_ball(&[shift(1)], 2).unwrap();
        let c = check_lef_conditions(&fg, &ball, &m, &[ratio(0, 1)]).unwrap();
        assert!(c.multiplicative);
    }

    #[test]
    fn search_is_monotone() {
        let fg = fg();
        let swap = CocycleTable::digit_swap(&BaseSequence::binary());
        let s = lef_search(&fg, &[shift(1), swap], 2, 8, &ratio(0, 1)).unwrap();
        assert!(s.minimal_n.is_some());
        assert!(s.monotone);
    }
}
