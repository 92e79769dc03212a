//! Sizes, energies, BMO norms and the maximal-interval stopping time.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use crate::dyadic::{pow2, DyadicInterval};
use crate::error::{Error, Result};
use crate::grid::GridFunction1D;
use crate::wavelets::CoefficientSequence;

/// Largest integer `n` with `base·2^n < v`, for `v, base > 0`.
pub fn strict_level(v: f64, base: f64) -> i32 {
    debug_assert!(v > 0.0 && base > 0.0);
    let mut n = (v / base).log2().floor() as i32;
    while base * pow2(n) >= v {
        n -= 1;
    }
    while base * pow2(n + 1) < v {
        n += 1;
    }
    n
}

/// `sup_λ λ·|{|g| > λ}|` for piecewise constant data on cells of equal width.
pub fn weak_l1_cells(values: &[f64], width: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|x| x.abs()).filter(|x| *x > 0.0).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.iter()
        .enumerate()
        .map(|(i, x)| x * (i + 1) as f64 * width)
        .fold(0.0, f64::max)
}

/// Weak-L¹ quasinorm of a grid function; the supremum is approached just below each value.
pub fn weak_l1_norm(g: &GridFunction1D) -> f64 {
    weak_l1_cells(&g.values, g.grid.cell_width())
}

/// Coefficients keyed by interval, with per-scale range queries for subtree sums.
#[derive(Debug, Clone)]
struct Subtrees {
    /// `|a_I|²/|I|`, zeros dropped.
    weights: BTreeMap<DyadicInterval, f64>,
    scales: BTreeSet<i32>,
}

impl Subtrees {
    fn new(seq: &CoefficientSequence, collection: &[DyadicInterval]) -> Self {
        let mut weights = BTreeMap::new();
        let mut scales = BTreeSet::new();
        for iv in collection {
            let a = seq.get(iv);
            if a != 0.0 {
                weights.insert(*iv, a * a / iv.length());
                scales.insert(iv.scale);
            }
        }
        Self { weights, scales }
    }

    fn remove(&mut self, iv: &DyadicInterval) {
        self.weights.remove(iv);
    }

    /// Cell values of the local square function over `top` and the cell width.
    fn local_square(&self, top: &DyadicInterval) -> (Vec<f64>, f64) {
        let mut found: Vec<(DyadicInterval, f64)> = Vec::new();
        for &s in self.scales.range(..=top.scale) {
            let shift = (top.scale - s) as u32;
            let lo = DyadicInterval::new(s, top.pos << shift);
            let hi = DyadicInterval::new(s, (top.pos + 1) << shift);
            found.extend(self.weights.range(lo..hi).map(|(k, v)| (*k, *v)));
        }
        let Some(finest) = found.iter().map(|(k, _)| k.scale).min() else {
            return (vec![0.0], top.length());
        };
        let cells = 1usize << (top.scale - finest);
        let mut diff = vec![0.0; cells + 1];
        for (k, w) in &found {
            let width = 1usize << (k.scale - finest);
            let start = ((k.pos - (top.pos << (top.scale - k.scale))) as usize) * width;
            diff[start] += w;
            diff[start + width] -= w;
        }
        let mut acc = 0.0;
        let values = diff[..cells]
            .iter()
            .map(|d| {
                acc += d;
                acc.max(0.0).sqrt()
            })
            .collect();
        (values, pow2(finest))
    }

    /// `|I|⁻¹ ‖local square function‖_{1,∞}`.
    fn lacunary_ratio(&self, top: &DyadicInterval) -> f64 {
        let (v, w) = self.local_square(top);
        weak_l1_cells(&v, w) / top.length()
    }
}

/// Per-interval ratios entering size and energy.
pub fn ratios(seq: &CoefficientSequence, collection: &[DyadicInterval], lacunary: bool) -> Vec<f64> {
    if lacunary {
        let t = Subtrees::new(seq, collection);
        collection.iter().map(|iv| t.lacunary_ratio(iv)).collect()
    } else {
        collection.iter().map(|iv| seq.get(iv).abs() / iv.length().sqrt()).collect()
    }
}

/// Energy flavor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyKind {
    Weak1Inf,
    StrongT(f64),
}

impl EnergyKind {
    pub fn name(&self) -> String {
        match self {
            Self::Weak1Inf => "weak_1inf".into(),
            Self::StrongT(t) => format!("strong_t({t})"),
        }
    }
}

/// Size and energy values with their witnesses.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeEnergyReport {
    pub lacunary: bool,
    pub size: f64,
    pub size_witness: Option<DyadicInterval>,
    pub energy_kind: EnergyKind,
    pub energy: f64,
    /// Level `n` realizing the weak energy.
    pub energy_level: Option<i32>,
    /// Disjoint family `𝔻_n` at that level.
    pub energy_family: Vec<DyadicInterval>,
}

impl SizeEnergyReport {
    /// `key: value` lines.
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lacunary: {}", self.lacunary);
        let _ = writeln!(s, "size: {:e}", self.size);
        if let Some(w) = self.size_witness {
            let _ = writeln!(s, "size_witness: {w}");
        }
        let _ = writeln!(s, "energy_kind: {}", self.energy_kind.name());
        let _ = writeln!(s, "energy: {:e}", self.energy);
        if let Some(n) = self.energy_level {
            let _ = writeln!(s, "energy_level: {n}");
        }
        let fam: Vec<String> = self.energy_family.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "energy_family: {}", fam.join(" "));
        s
    }
}

/// Size of a coefficient sequence with a witnessing interval.
pub fn size(seq: &CoefficientSequence, collection: &[DyadicInterval], lacunary: bool) -> Result<(f64, DyadicInterval)> {
    if collection.is_empty() {
        return Err(Error::Precondition("size of an empty collection".into()));
    }
    let r = ratios(seq, collection, lacunary);
    let (i, v) = r
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
    Ok((v, collection[i]))
}

/// Inclusion-maximal intervals among those flagged.
pub fn maximal_intervals(intervals: impl IntoIterator<Item = DyadicInterval>) -> Vec<DyadicInterval> {
    let set: BTreeSet<DyadicInterval> = intervals.into_iter().collect();
    let top = set.iter().map(|i| i.scale).max().unwrap_or(0);
    let mut out: Vec<DyadicInterval> = set
        .iter()
        .filter(|iv| (iv.scale + 1..=top).all(|k| !set.contains(&iv.ancestor(k))))
        .copied()
        .collect();
    out.sort_by(|a, b| a.left().total_cmp(&b.left()));
    out
}

/// Maximal measure `sup_{𝔻_n} Σ|I|` and the optimizing family, for threshold `2^n`.
fn level_family(collection: &[DyadicInterval], r: &[f64], n: i32) -> (f64, Vec<DyadicInterval>) {
    let t = pow2(n);
    let fam = maximal_intervals(collection.iter().zip(r).filter(|(_, v)| **v > t).map(|(i, _)| *i));
    (fam.iter().map(|i| i.length()).sum(), fam)
}

/// Distinct candidate levels: for each positive ratio, the largest `n` with `2^n < r`.
fn candidate_levels(r: &[f64]) -> BTreeSet<i32> {
    r.iter().filter(|v| **v > 0.0).map(|v| strict_level(*v, 1.0)).collect()
}

/// Energy with the realizing level and family (weak kind) or the full sum (strong kind).
pub fn energy(
    seq: &CoefficientSequence,
    collection: &[DyadicInterval],
    lacunary: bool,
    kind: EnergyKind,
) -> Result<(f64, Option<i32>, Vec<DyadicInterval>)> {
    if let EnergyKind::StrongT(t) = kind {
        if !(t > 1.0) {
            return Err(Error::Precondition(format!("energy exponent t = {t} must exceed 1")));
        }
    }
    let r = ratios(seq, collection, lacunary);
    let levels = candidate_levels(&r);
    let (Some(&lo), Some(&hi)) = (levels.first(), levels.last()) else {
        return Ok((0.0, None, Vec::new()));
    };
    match kind {
        EnergyKind::Weak1Inf => {
            let mut best = (0.0, None, Vec::new());
            for &n in &levels {
                let (m, fam) = level_family(collection, &r, n);
                let v = pow2(n) * m;
                if v > best.0 {
                    best = (v, Some(n), fam);
                }
            }
            Ok(best)
        }
        EnergyKind::StrongT(t) => {
            let mut total = 0.0;
            let mut bottom = 0.0;
            for n in lo..=hi {
                let (m, _) = level_family(collection, &r, n);
                if n == lo {
                    bottom = m;
                }
                total += pow2(n).powf(t) * m;
            }
            // every positive ratio qualifies below `lo`: geometric tail
            total += bottom * pow2(lo - 1).powf(t) / (1.0 - pow2(-1).powf(t));
            Ok((total.powf(1.0 / t), None, Vec::new()))
        }
    }
}

/// Size and energy together.
pub fn size_energy_report(
    seq: &CoefficientSequence,
    collection: &[DyadicInterval],
    lacunary: bool,
    kind: EnergyKind,
) -> Result<SizeEnergyReport> {
    let (s, w) = size(seq, collection, lacunary)?;
    let (e, n, fam) = energy(seq, collection, lacunary, kind)?;
    Ok(SizeEnergyReport {
        lacunary,
        size: s,
        size_witness: Some(w),
        energy_kind: kind,
        energy: e,
        energy_level: n,
        energy_family: fam,
    })
}

/// `sup_{I₀} |I₀|^{-1/r} ‖local square function‖_r`.
pub fn bmo_norm(seq: &CoefficientSequence, collection: &[DyadicInterval], r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("BMO exponent r = {r} must be positive")));
    }
    let t = Subtrees::new(seq, collection);
    Ok(collection
        .iter()
        .map(|iv| {
            let (v, w) = t.local_square(iv);
            let s: f64 = v.iter().map(|x| x.powf(r)).sum::<f64>() * w;
            (s / iv.length()).powf(1.0 / r)
        })
        .fold(0.0, f64::max))
}

/// A tree: its top and every member (the top included).
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub top: DyadicInterval,
    pub members: Vec<DyadicInterval>,
    /// Ratio of the top when it was selected.
    pub top_ratio: f64,
}

/// Output of [`stopping_time_maximal`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeDecomposition {
    pub levels: BTreeMap<i32, Vec<Tree>>,
    /// Intervals never selected: only those with ratio zero outside every tree.
    pub residual: Vec<DyadicInterval>,
    pub lacunary: bool,
    pub c1: f64,
    /// Energy value entering the thresholds.
    pub energy: f64,
    /// Factor applied to the sequence before decomposing (1 unless normalized).
    pub scale_factor: f64,
}

impl TreeDecomposition {
    pub fn trees(&self) -> impl Iterator<Item = (i32, &Tree)> {
        self.levels.iter().flat_map(|(k, ts)| ts.iter().map(move |t| (*k, t)))
    }

    /// Members of all trees at level `k`.
    pub fn level_union(&self, k: i32) -> Vec<DyadicInterval> {
        self.levels
            .get(&k)
            .map(|ts| ts.iter().flat_map(|t| t.members.iter().copied()).collect())
            .unwrap_or_default()
    }

    /// Checks the partition, disjoint-top and containment invariants.
    pub fn verify_structure(&self, collection: &[DyadicInterval]) -> std::result::Result<(), String> {
        let mut seen = HashSet::new();
        for (k, t) in self.trees() {
            for m in &t.members {
                if !t.top.contains(m) {
                    return Err(format!("level {k}: {m} not inside top {}", t.top));
                }
                if !seen.insert(*m) {
                    return Err(format!("{m} assigned twice"));
                }
            }
        }
        for r in &self.residual {
            if !seen.insert(*r) {
                return Err(format!("{r} both residual and assigned"));
            }
        }
        let want: HashSet<DyadicInterval> = collection.iter().copied().collect();
        if seen != want {
            return Err("trees and residual do not partition the collection".into());
        }
        for (k, ts) in &self.levels {
            for (a, ta) in ts.iter().enumerate() {
                for tb in &ts[a + 1..] {
                    if ta.top.intersects(&tb.top) {
                        return Err(format!("level {k}: tops {} and {} overlap", ta.top, tb.top));
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-level size sandwich `C1·2^{k-1}E < size(∪U_k) ≤ min(C1·2^k E, size_𝓘)`,
    /// with sizes taken over the sequence actually decomposed.
    pub fn verify_size_sandwich(&self, seq: &CoefficientSequence, collection: &[DyadicInterval]) -> std::result::Result<(), String> {
        let seq = seq.scaled(self.scale_factor);
        let (full, _) = size(&seq, collection, self.lacunary).map_err(|e| e.to_string())?;
        for k in self.levels.keys() {
            let u = self.level_union(*k);
            let (s, _) = size(&seq, &u, self.lacunary).map_err(|e| e.to_string())?;
            let lo = self.c1 * pow2(k - 1) * self.energy;
            let hi = (self.c1 * pow2(*k) * self.energy).min(full);
            if !(lo < s && s <= hi) {
                return Err(format!("level {k}: size {s} outside ({lo}, {hi}]"));
            }
        }
        Ok(())
    }

    /// `Σ_{U∈𝕌_k}|Q_U|` per level.
    pub fn top_mass(&self) -> BTreeMap<i32, f64> {
        self.levels
            .iter()
            .map(|(k, ts)| (*k, ts.iter().map(|t| t.top.length()).sum()))
            .collect()
    }

    /// Levels where `Σ|Q_U| > 2^{1-k}/C1` (expected empty after normalizing `E`, C1 a power of two).
    pub fn mass_violations(&self) -> Vec<(i32, f64, f64)> {
        self.top_mass()
            .into_iter()
            .filter_map(|(k, m)| {
                let bound = pow2(1 - k) / self.c1;
                (m > bound).then_some((k, m, bound))
            })
            .collect()
    }

    /// `level <k>: I(k=..,n=..) ...` lines, one per tree, top first.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, t) in self.trees() {
            let mut line = format!("level {k}: {}", t.top);
            for m in t.members.iter().filter(|m| **m != t.top) {
                let _ = write!(line, " {m}");
            }
            let _ = writeln!(s, "{line}");
        }
        if !self.residual.is_empty() {
            let r: Vec<String> = self.residual.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "residual: {}", r.join(" "));
        }
        s
    }
}

fn run_stopping_time(
    seq: &CoefficientSequence,
    collection: &[DyadicInterval],
    lacunary: bool,
    c1: f64,
    e_nominal: f64,
    e_report: f64,
    scale_factor: f64,
) -> TreeDecomposition {
    let mut remaining: BTreeSet<DyadicInterval> = collection.iter().copied().collect();
    let mut levels: BTreeMap<i32, Vec<Tree>> = BTreeMap::new();
    let base = c1 * e_nominal;
    let mut sub = Subtrees::new(seq, collection);
    let ratio_of = |sub: &Subtrees, iv: &DyadicInterval| {
        if lacunary {
            sub.lacunary_ratio(iv)
        } else {
            seq.get(iv).abs() / iv.length().sqrt()
        }
    };
    let mut cache: BTreeMap<DyadicInterval, f64> = remaining.iter().map(|iv| (*iv, ratio_of(&sub, iv))).collect();
    if base > 0.0 {
        loop {
            // highest level first, then the largest interval, then the leftmost
            let pick = cache
                .iter()
                .filter(|(_, r)| **r > 0.0)
                .map(|(iv, r)| (strict_level(*r, base) + 1, *iv, *r))
                .max_by(|a, b| {
                    a.0.cmp(&b.0)
                        .then(a.1.scale.cmp(&b.1.scale))
                        .then(b.1.pos.cmp(&a.1.pos))
                });
            let Some((k, top, r)) = pick else { break };
            let members: Vec<DyadicInterval> = remaining.iter().filter(|m| top.contains(m)).copied().collect();
            for m in &members {
                remaining.remove(m);
                cache.remove(m);
                sub.remove(m);
            }
            if lacunary {
                let max_scale = remaining.iter().map(|i| i.scale).max().unwrap_or(top.scale);
                for s in top.scale + 1..=max_scale {
                    let a = top.ancestor(s);
                    if remaining.contains(&a) {
                        cache.insert(a, ratio_of(&sub, &a));
                    }
                }
            }
            levels.entry(k).or_default().push(Tree { top, members, top_ratio: r });
        }
    }
    TreeDecomposition {
        levels,
        residual: remaining.into_iter().collect(),
        lacunary,
        c1,
        energy: e_report,
        scale_factor,
    }
}

/// Maximal-interval stopping time with `E = energy^{1,∞}` of the sequence.
pub fn stopping_time_maximal(
    seq: &CoefficientSequence,
    collection: &[DyadicInterval],
    lacunary: bool,
    c1: f64,
) -> Result<TreeDecomposition> {
    if !(c1 >= 1.0) {
        return Err(Error::Precondition(format!("C1 = {c1} must be at least 1")));
    }
    if collection.is_empty() {
        return Err(Error::Precondition("empty collection".into()));
    }
    let (e, _, _) = energy(seq, collection, lacunary, EnergyKind::Weak1Inf)?;
    Ok(run_stopping_time(seq, collection, lacunary, c1, e, e, 1.0))
}

/// Stopping time with the energy replaced by a supplied positive value `ν`:
/// level `k` holds tops with `C1·2^{k-1}ν < ratio ≤ C1·2^k ν`.
pub fn stopping_time_with_norm(
    seq: &CoefficientSequence,
    collection: &[DyadicInterval],
    lacunary: bool,
    c1: f64,
    norm: f64,
) -> Result<TreeDecomposition> {
    if !(norm > 0.0) {
        return Err(Error::Precondition(format!("threshold norm {norm} must be positive")));
    }
    if !(c1 >= 1.0) {
        return Err(Error::Precondition(format!("C1 = {c1} must be at least 1")));
    }
    Ok(run_stopping_time(seq, collection, lacunary, c1, norm, norm, 1.0))
}

/// Stopping time after rescaling by `2^{-⌈log₂E⌉}`, so that `E ∈ (1/2, 1]` and the
/// thresholds use the nominal value `E = 1`.
pub fn stopping_time_normalized(
    seq: &CoefficientSequence,
    collection: &[DyadicInterval],
    lacunary: bool,
    c1: f64,
) -> Result<TreeDecomposition> {
    if !(c1 >= 1.0) {
        return Err(Error::Precondition(format!("C1 = {c1} must be at least 1")));
    }
    if collection.is_empty() {
        return Err(Error::Precondition("empty collection".into()));
    }
    let (e, _, _) = energy(seq, collection, lacunary, EnergyKind::Weak1Inf)?;
    if e == 0.0 {
        return Ok(run_stopping_time(seq, collection, lacunary, c1, 0.0, 0.0, 1.0));
    }
    let factor = pow2(-(strict_level(e, 1.0) + 1));
    let scaled = seq.scaled(factor);
    let mut d = run_stopping_time(&scaled, collection, lacunary, c1, 1.0, 1.0, factor);
    d.energy = 1.0;
    Ok(d)
}

/// Result of [`size_energy_bound_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrilinearBound {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub reports: [SizeEnergyReport; 3],
}

/// `|Σ_Q |Q|^{-1/2} a¹a²a³|` against `Π size^{1-θᵢ} energy^{θᵢ}`.
pub fn size_energy_bound_check(
    seqs: [&CoefficientSequence; 3],
    lacunary: [bool; 3],
    collection: &[DyadicInterval],
    theta: [f64; 3],
) -> Result<TrilinearBound> {
    if theta.iter().any(|t| !(0.0..1.0).contains(t)) || (theta.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("θ = {theta:?} must lie in [0,1) and sum to 1")));
    }
    if lacunary.iter().filter(|l| **l).count() < 2 {
        return Err(Error::Precondition("at least two families must be lacunary".into()));
    }
    let lhs = collection
        .iter()
        .map(|q| seqs[0].get(q) * seqs[1].get(q) * seqs[2].get(q) / q.length().sqrt())
        .sum::<f64>()
        .abs();
    let mut reps = Vec::with_capacity(3);
    for i in 0..3 {
        reps.push(size_energy_report(seqs[i], collection, lacunary[i], EnergyKind::Weak1Inf)?);
    }
    let rhs: f64 = reps
        .iter()
        .zip(theta)
        .map(|(r, t)| r.size.powf(1.0 - t) * r.energy.powf(t))
        .product();
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    let reports: [SizeEnergyReport; 3] = reps.try_into().expect("three reports");
    Ok(TrilinearBound { lhs, rhs, ratio, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::enumerate_dyadic;
    use crate::grid::Grid1D;
    use crate::rng::trial_rng;
    use rand::Rng;

    fn iv(k: i32, n: i64) -> DyadicInterval {
        DyadicInterval::new(k, n)
    }

    fn seq(pairs: &[(DyadicInterval, f64)]) -> CoefficientSequence {
        CoefficientSequence::from_pairs(pairs.iter().map(|p| p.0), pairs.iter().copied()).unwrap()
    }

    fn random_seq(seed: u64, depth: i32, density: f64) -> (CoefficientSequence, Vec<DyadicInterval>) {
        let coll = enumerate_dyadic(0, -depth, 0);
        let mut rng = trial_rng(seed, 0);
        let pairs: Vec<_> = coll
            .iter()
            .map(|i| (*i, if rng.random_bool(density) { rng.random_range(-1.0..1.0) } else { 0.0 }))
            .collect();
        (seq(&pairs), coll)
    }

    #[test]
    fn strict_levels() {
        assert_eq!(strict_level(1.0, 1.0), -1);
        assert_eq!(strict_level(1.5, 1.0), 0);
        assert_eq!(strict_level(2.0, 1.0), 0);
        assert_eq!(strict_level(3.0, 0.75), 1);
    }

    #[test]
    fn weak_l1_examples() {
        let g = Grid1D::new(2, 3).unwrap();
        assert_eq!(weak_l1_norm(&GridFunction1D::zeros(g)), 0.0);
        assert_eq!(weak_l1_norm(&GridFunction1D::indicator(g, &iv(0, 0)).unwrap()), 1.0);
        let two = GridFunction1D::indicator(g, &iv(-1, 0)).unwrap().scaled(2.0);
        assert_eq!(weak_l1_norm(&two), 1.0);
    }

    #[test]
    fn size_examples() {
        let one = seq(&[(iv(0, 0), 1.0)]);
        assert_eq!(size(&one, &[iv(0, 0)], false).unwrap().0, 1.0);
        assert_eq!(size(&one, &[iv(0, 0)], true).unwrap().0, 1.0);
        let two = seq(&[(iv(0, 0), 1.0), (iv(-1, 0), 0.0)]);
        assert_eq!(size(&two, &[iv(0, 0), iv(-1, 0)], false).unwrap(), (1.0, iv(0, 0)));
        assert!(size(&one, &[], false).is_err());
    }

    #[test]
    fn energy_examples() {
        let coll = [iv(0, 0), iv(0, 1)];
        let zero = seq(&[(iv(0, 0), 0.0)]);
        assert_eq!(energy(&zero, &[iv(0, 0)], false, EnergyKind::Weak1Inf).unwrap().0, 0.0);
        let one = seq(&[(iv(0, 0), 1.0)]);
        let (e, n, fam) = energy(&one, &[iv(0, 0)], false, EnergyKind::Weak1Inf).unwrap();
        assert_eq!((e, n, fam), (0.5, Some(-1), vec![iv(0, 0)]));
        let pair = seq(&[(coll[0], 1.0), (coll[1], 1.0)]);
        assert_eq!(energy(&pair, &coll, false, EnergyKind::Weak1Inf).unwrap().0, 1.0);
        assert!(energy(&pair, &coll, false, EnergyKind::StrongT(1.0)).is_err());
        // Σ_{n≤-1} 2^{2n}·1 = 1/3
        let (e2, _, _) = energy(&one, &[iv(0, 0)], false, EnergyKind::StrongT(2.0)).unwrap();
        assert!((e2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    fn disjoint(fam: &[DyadicInterval]) -> bool {
        fam.iter().enumerate().all(|(a, x)| fam[a + 1..].iter().all(|y| !x.intersects(y)))
    }

    #[test]
    fn energy_witness_is_optimal_by_exhaustion() {
        for seed in 0..20 {
            let coll: Vec<DyadicInterval> = enumerate_dyadic(0, -3, 0).into_iter().take(12).collect();
            let mut rng = trial_rng(seed, 1);
            let pairs: Vec<_> = coll.iter().map(|i| (*i, rng.random_range(-1.0..1.0))).collect();
            let s = seq(&pairs);
            for lac in [false, true] {
                let r = ratios(&s, &coll, lac);
                for n in candidate_levels(&r) {
                    let (m, fam) = level_family(&coll, &r, n);
                    assert!(disjoint(&fam));
                    let mut best: f64 = 0.0;
                    for mask in 0u32..(1 << coll.len()) {
                        let sub: Vec<DyadicInterval> =
                            (0..coll.len()).filter(|b| mask >> b & 1 == 1).map(|b| coll[b]).collect();
                        let ok = sub.iter().all(|i| r[coll.iter().position(|c| c == i).unwrap()] > pow2(n));
                        if ok && disjoint(&sub) {
                            best = best.max(sub.iter().map(|i| i.length()).sum());
                        }
                    }
                    assert_eq!(m, best);
                }
            }
        }
    }

    #[test]
    fn bmo_examples() {
        let one = seq(&[(iv(0, 0), 1.0)]);
        assert_eq!(bmo_norm(&one, &[iv(0, 0)], 2.0).unwrap(), 1.0);
        assert_eq!(bmo_norm(&seq(&[(iv(0, 0), 0.0)]), &[iv(0, 0)], 1.0).unwrap(), 0.0);
        assert!(bmo_norm(&one, &[iv(0, 0)], 0.0).is_err());
    }

    #[test]
    fn john_nirenberg_constants() {
        let (mut c, mut cc) = (f64::INFINITY, 0.0f64);
        for seed in 0..100 {
            let (s, coll) = random_seq(seed, 5, 0.6);
            let r = bmo_norm(&s, &coll, 1.0).unwrap() / bmo_norm(&s, &coll, 2.0).unwrap();
            c = c.min(r);
            cc = cc.max(r);
        }
        println!("BMO(1)/BMO(2) in [{c:.4}, {cc:.4}]");
        assert!(c > 0.1 && cc <= 1.0 + 1e-12);
    }

    #[test]
    fn stopping_time_examples() {
        let one = seq(&[(iv(0, 0), 3.0)]);
        let d = stopping_time_maximal(&one, &[iv(0, 0)], false, 1.0).unwrap();
        // E = 2 (n = 1), ratio 3: 2^{k-1}·2 < 3 ≤ 2^k·2 gives k = 1
        assert_eq!(d.levels.keys().copied().collect::<Vec<_>>(), vec![1]);
        let nested = seq(&[(iv(0, 0), 1.0), (iv(-1, 0), pow2(-1).sqrt())]);
        let d = stopping_time_maximal(&nested, &[iv(0, 0), iv(-1, 0)], false, 1.0).unwrap();
        let trees: Vec<_> = d.trees().collect();
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].1.top, iv(0, 0));
        assert_eq!(trees[0].1.members.len(), 2);
    }

    #[test]
    fn stopping_time_invariants_on_random_input() {
        for seed in 0..30 {
            let (s, coll) = random_seq(seed, 5, 0.9);
            for lac in [false, true] {
                for c1 in [1.0, 2.0, 4.0] {
                    let d = stopping_time_maximal(&s, &coll, lac, c1).unwrap();
                    d.verify_structure(&coll).unwrap();
                    d.verify_size_sandwich(&s, &coll).unwrap();
                    let zero_ratio: Vec<_> = coll
                        .iter()
                        .zip(ratios(&s, &coll, lac))
                        .filter(|(_, r)| *r == 0.0)
                        .map(|(i, _)| *i)
                        .collect();
                    assert!(d.residual.iter().all(|r| zero_ratio.contains(r)));
                    let n = stopping_time_normalized(&s, &coll, lac, c1).unwrap();
                    n.verify_structure(&coll).unwrap();
                    n.verify_size_sandwich(&s, &coll).unwrap();
                    assert!(n.mass_violations().is_empty(), "{:?}", n.mass_violations());
                }
            }
        }
    }

    #[test]
    fn dense_input_leaves_no_residual() {
        let (s, coll) = random_seq(7, 4, 1.0);
        let d = stopping_time_maximal(&s, &coll, false, 1.0).unwrap();
        assert!(d.residual.is_empty());
        assert!(d.to_text().starts_with("level "));
    }

    #[test]
    fn trilinear_examples() {
        let z = seq(&[(iv(0, 0), 0.0)]);
        let b = size_energy_bound_check([&z, &z, &z], [true, true, false], &[iv(0, 0)], [0.5, 0.5, 0.0]).unwrap();
        assert_eq!((b.lhs, b.rhs, b.ratio), (0.0, 0.0, 0.0));
        let one = seq(&[(iv(0, 0), 1.0)]);
        let b = size_energy_bound_check([&one, &one, &one], [true, true, false], &[iv(0, 0)], [0.999, 0.001, 0.0]).unwrap();
        assert_eq!(b.lhs, 1.0);
        assert!(b.rhs > 0.0);
        assert!(size_energy_bound_check([&one, &one, &one], [true, false, false], &[iv(0, 0)], [0.5, 0.5, 0.0]).is_err());
        assert!(size_energy_bound_check([&one, &one, &one], [true, true, true], &[iv(0, 0)], [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn report_record() {
        let one = seq(&[(iv(0, 0), 1.0)]);
        let r = size_energy_report(&one, &[iv(0, 0)], false, EnergyKind::Weak1Inf).unwrap();
        let rec = r.to_record();
        assert!(rec.contains("size: 1e0"));
        assert!(rec.contains("energy_level: -1"));
        assert!(rec.contains("energy_family: I(k=0,n=0)"));
    }
}
