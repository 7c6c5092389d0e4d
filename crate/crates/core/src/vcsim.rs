//! Exact simulator for the interval hypothesis-class construction used in
//! the sample-complexity analysis.
//!
//! The instance space is the real line. Around `m` centers spaced at
//! least `4 eps` apart, each width-`2 eps` neighborhood packs `2^(m-1)`
//! disjoint subintervals, one per binary signature whose digit for that
//! center is one, each of uniform measure exactly `rho_o / m`. Hypothesis
//! `h_b` predicts 0 exactly on the subintervals carrying its signature.
//! Because everything is an interval, misclassification measures under
//! the uniform perturbation law are exact length ratios, and behavior
//! sets over all `2^m` hypotheses can be enumerated exactly.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};

/// Loss used when collecting behavior patterns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossMode {
    /// Strict-exceedance quantile loss: 1 iff the misclassification
    /// measure over the perturbation interval exceeds `rho`.
    RhoSup(f64),
    /// Plain 0-1 loss at the unperturbed point.
    Nominal,
}

/// One packed subinterval `[start, end)` carrying a signature.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LabeledSet {
    pub signature: u32,
    pub start: f64,
    pub end: f64,
}

/// The constructed hypothesis class.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisClassHo {
    pub rho_o: f64,
    pub eps: f64,
    /// Number of centers, `ceil(log2(1/rho_o)) + 1`.
    pub m: usize,
    pub centers: Vec<f64>,
    /// Per center, the `2^(m-1)` sets in increasing signature order.
    pub sets: Vec<Vec<LabeledSet>>,
}

/// Largest supported number of centers (behavior enumeration is `2^m`).
const MAX_CENTERS: usize = 24;

impl HypothesisClassHo {
    pub fn build(rho_o: f64, eps: f64) -> Result<Self> {
        if !(rho_o > 0.0 && rho_o < 0.5) {
            return Err(Error::invalid("rho_o", format!("must be in (0, 1/2), got {rho_o}")));
        }
        if !(eps > 0.0) {
            return Err(Error::invalid("eps", format!("must be > 0, got {eps}")));
        }
        let m = (1.0 / rho_o).log2().ceil() as usize + 1;
        if m > MAX_CENTERS {
            return Err(Error::BudgetExceeded(format!(
                "rho_o = {rho_o} needs {m} centers; enumeration caps at {MAX_CENTERS}"
            )));
        }
        let set_len = (rho_o / m as f64) * 2.0 * eps;
        let centers: Vec<f64> = (0..m).map(|i| 4.0 * eps * i as f64).collect();
        let mut sets = Vec::with_capacity(m);
        for (i, c) in centers.iter().enumerate() {
            let mut packed = Vec::with_capacity(1 << (m - 1));
            let mut cursor = c - eps;
            for b in 0..(1u32 << m) {
                if b & (1 << i) == 0 {
                    continue;
                }
                packed.push(LabeledSet {
                    signature: b,
                    start: cursor,
                    end: cursor + set_len,
                });
                cursor += set_len;
            }
            debug_assert!(cursor <= c + eps + 1e-12, "packing fits the feasibility bound");
            sets.push(packed);
        }
        Ok(Self { rho_o, eps, m, centers, sets })
    }

    pub fn hypothesis_count(&self) -> usize {
        1 << self.m
    }

    /// Uniform measure of each packed set, `rho_o / m`.
    pub fn per_set_measure(&self) -> f64 {
        self.rho_o / self.m as f64
    }

    /// `h_b(x)`: 0 iff `x` lies in a set carrying signature `b`.
    pub fn predict(&self, b: u32, x: f64) -> u8 {
        for (i, c) in self.centers.iter().enumerate() {
            if b & (1 << i) == 0 {
                continue;
            }
            if (x - c).abs() > self.eps {
                continue;
            }
            for set in &self.sets[i] {
                if set.signature == b {
                    return u8::from(!(x >= set.start && x < set.end));
                }
            }
        }
        1
    }

    /// Exact uniform measure of `{delta in [-eps, eps] : h_b(x + delta)
    /// != y}`, by interval intersection.
    pub fn error_measure(&self, b: u32, x: f64, y: u8) -> f64 {
        let lo = x - self.eps;
        let hi = x + self.eps;
        let mut zero_len = 0.0;
        for (i, c) in self.centers.iter().enumerate() {
            if b & (1 << i) == 0 {
                continue;
            }
            // sets live inside [c - eps, c + eps]
            if (x - c).abs() > 2.0 * self.eps {
                continue;
            }
            for set in &self.sets[i] {
                if set.signature == b {
                    let l = set.start.max(lo);
                    let r = set.end.min(hi);
                    if r > l {
                        zero_len += r - l;
                    }
                }
            }
        }
        let zero_measure = zero_len / (2.0 * self.eps);
        if y == 1 {
            zero_measure
        } else {
            1.0 - zero_measure
        }
    }

    /// Strict-exceedance quantile 0-1 loss: 1 iff the error measure
    /// exceeds `rho`; `rho = 0` counts any positive-measure disagreement.
    pub fn rhosup_01_loss(&self, b: u32, x: f64, y: u8, rho: f64) -> Result<u8> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::invalid("rho", format!("must be in [0, 1), got {rho}")));
        }
        Ok(u8::from(self.error_measure(b, x, y) > rho))
    }

    fn loss(&self, mode: LossMode, b: u32, x: f64, y: u8) -> Result<u8> {
        match mode {
            LossMode::RhoSup(rho) => self.rhosup_01_loss(b, x, y, rho),
            LossMode::Nominal => Ok(u8::from(self.predict(b, x) != y)),
        }
    }

    /// All loss patterns realized over the `2^m` hypotheses on the given
    /// points; the cardinality is the shatter count.
    pub fn behavior_set(&self, points: &[(f64, u8)], mode: LossMode) -> Result<BTreeSet<u32>> {
        if points.len() > 20 {
            return Err(Error::BudgetExceeded(format!(
                "behavior_set enumerates patterns for at most 20 points, got {}",
                points.len()
            )));
        }
        let mut patterns = BTreeSet::new();
        for b in 0..(1u32 << self.m) {
            let mut pattern = 0u32;
            for (idx, (x, y)) in points.iter().enumerate() {
                if self.loss(mode, b, *x, *y)? == 1 {
                    pattern |= 1 << idx;
                }
            }
            patterns.insert(pattern);
        }
        Ok(patterns)
    }

    /// Candidate query grid: centers, every interval endpoint nudged
    /// inward and outward by a tenth of a set length, gap midpoints, and
    /// one far-away point. Loss patterns are piecewise constant in `x`
    /// with breakpoints at endpoint translates, so this covers every case
    /// up to the nudge.
    pub fn query_grid(&self) -> Vec<f64> {
        let eta = self.per_set_measure() * 2.0 * self.eps / 10.0;
        let mut grid = Vec::new();
        for (i, c) in self.centers.iter().enumerate() {
            grid.push(*c);
            for boundary in [c - self.eps, c + self.eps] {
                grid.push(boundary - eta);
                grid.push(boundary + eta);
            }
            for set in &self.sets[i] {
                for boundary in [set.start, set.end] {
                    grid.push(boundary - eta);
                    grid.push(boundary + eta);
                }
            }
            if i + 1 < self.centers.len() {
                grid.push((c + self.centers[i + 1]) / 2.0);
            }
        }
        grid.push(self.centers[self.m - 1] + 10.0 * self.eps);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }

    /// Exhaustive growth-function estimate: the maximum behavior-set
    /// cardinality over all `k`-subsets of the grid and all label
    /// assignments. `k` is capped at 3.
    pub fn growth_estimate(&self, mode: LossMode, k: usize, grid: &[f64]) -> Result<usize> {
        if k == 0 || k > 3 {
            return Err(Error::BudgetExceeded(format!(
                "growth_estimate supports 1 <= k <= 3, got {k}"
            )));
        }
        let n_hyp = self.hypothesis_count();
        let blocks = n_hyp.div_ceil(64);
        // one hypothesis-indexed loss bitmask per (x, y)
        let mut masks: Vec<Vec<u64>> = Vec::new();
        for &x in grid {
            for y in [0u8, 1u8] {
                let mut mask = vec![0u64; blocks];
                for b in 0..n_hyp as u32 {
                    if self.loss(mode, b, x, y)? == 1 {
                        mask[(b / 64) as usize] |= 1u64 << (b % 64);
                    }
                }
                masks.push(mask);
            }
        }
        masks.sort();
        masks.dedup();

        let full_blocks = |mask: &[u64]| -> Vec<u64> {
            let mut inv: Vec<u64> = mask.iter().map(|b| !b).collect();
            let spare = blocks * 64 - n_hyp;
            if spare > 0 {
                let last = inv.last_mut().expect("at least one block");
                *last &= u64::MAX >> spare;
            }
            inv
        };
        let nonzero = |m: &[u64]| m.iter().any(|b| *b != 0);
        let and = |a: &[u64], b: &[u64]| -> Vec<u64> {
            a.iter().zip(b).map(|(x, y)| x & y).collect()
        };

        let mut best = 0usize;
        let d = masks.len();
        let choose = |mask: &Vec<u64>, bit: bool| -> Vec<u64> {
            if bit {
                mask.clone()
            } else {
                full_blocks(mask)
            }
        };
        match k {
            1 => {
                for a in masks.iter() {
                    let mut count = 0;
                    for bits in 0..2usize {
                        if nonzero(&choose(a, bits & 1 == 1)) {
                            count += 1;
                        }
                    }
                    best = best.max(count);
                }
            }
            2 => {
                for i in 0..d {
                    for j in i..d {
                        let mut count = 0;
                        for bits in 0..4usize {
                            let p = choose(&masks[i], bits & 1 == 1);
                            let q = choose(&masks[j], bits & 2 == 2);
                            if nonzero(&and(&p, &q)) {
                                count += 1;
                            }
                        }
                        best = best.max(count);
                        if best == 4 {
                            return Ok(best);
                        }
                    }
                }
            }
            _ => {
                for i in 0..d {
                    for j in i..d {
                        for l in j..d {
                            let mut count = 0;
                            for bits in 0..8usize {
                                let p = choose(&masks[i], bits & 1 == 1);
                                let q = choose(&masks[j], bits & 2 == 2);
                                let r = choose(&masks[l], bits & 4 == 4);
                                if nonzero(&and(&and(&p, &q), &r)) {
                                    count += 1;
                                }
                            }
                            best = best.max(count);
                            if best == 8 {
                                return Ok(best);
                            }
                        }
                    }
                }
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::PerturbationSpec;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn build_examples() {
        let class = HypothesisClassHo::build(0.25, 1.0).unwrap();
        assert_eq!(class.m, 3);
        for s in &class.sets {
            assert_eq!(s.len(), 4);
        }

        let class = HypothesisClassHo::build(0.01, 1.0).unwrap();
        assert_eq!(class.m, 8);
        for s in &class.sets {
            assert_eq!(s.len(), 128);
        }
        assert!((class.per_set_measure() - 0.00125).abs() < 1e-15);

        assert!(HypothesisClassHo::build(0.5, 1.0).is_err());
        assert!(HypothesisClassHo::build(0.0, 1.0).is_err());
        assert!(HypothesisClassHo::build(1e-9, 1.0).is_err(), "budget cap");
    }

    #[test]
    fn construction_invariants_exhaustive() {
        for rho_o in [0.25, 0.1, 0.01] {
            let eps = 0.7;
            let class = HypothesisClassHo::build(rho_o, eps).unwrap();
            let m = class.m;
            for (i, c) in class.centers.iter().enumerate() {
                // exactly 2^(m-1) sets, signatures carry bit i, disjoint,
                // inside the neighborhood, measure rho_o / m each
                assert_eq!(class.sets[i].len(), 1 << (m - 1));
                let mut prev_end = c - eps;
                let mut total = 0.0;
                for set in &class.sets[i] {
                    assert!(set.signature & (1 << i) != 0);
                    assert!(set.start >= prev_end - 1e-12, "sets are disjoint");
                    assert!(set.end <= c + eps + 1e-12, "sets inside the neighborhood");
                    let measure = (set.end - set.start) / (2.0 * eps);
                    assert!((measure - rho_o / m as f64).abs() < 1e-15);
                    total += measure;
                    prev_end = set.end;
                }
                let expect = (1u64 << (m - 1)) as f64 * rho_o / m as f64;
                assert!((total - expect).abs() < 1e-12);
                assert!(expect < 1.0, "feasibility inequality");
            }
            // signatures across a center's sets span all masks with bit i
            let sigs: std::collections::BTreeSet<u32> =
                class.sets[0].iter().map(|s| s.signature).collect();
            assert_eq!(sigs.len(), 1 << (m - 1));
        }
    }

    #[test]
    fn predict_examples() {
        let class = HypothesisClassHo::build(0.25, 1.0).unwrap();
        // far from every neighborhood: always 1
        for b in 0..class.hypothesis_count() as u32 {
            assert_eq!(class.predict(b, 1000.0), 1);
        }
        // interior of the first set of center 0
        let set = class.sets[0][0];
        let x = (set.start + set.end) / 2.0;
        assert_eq!(class.predict(set.signature, x), 0);
        for b in 0..class.hypothesis_count() as u32 {
            if b != set.signature {
                assert_eq!(class.predict(b, x), 1, "sets are signature-disjoint");
            }
        }
    }

    #[test]
    fn rhosup_loss_paper_cases() {
        let class = HypothesisClassHo::build(0.25, 1.0).unwrap();
        let rho_o = 0.25;
        for (i, c) in class.centers.iter().enumerate() {
            for b in 0..class.hypothesis_count() as u32 {
                // y = 1, rho = 0: the loss reads off digit i
                let expect = u8::from(b & (1 << i) != 0);
                assert_eq!(class.rhosup_01_loss(b, *c, 1, 0.0).unwrap(), expect);
                // y = 1, rho = rho_o: packed sets are too small to matter
                assert_eq!(class.rhosup_01_loss(b, *c, 1, rho_o).unwrap(), 0);
                // y = 0, rho in [rho_o, 1 - rho_o): the correct region is
                // overwhelming
                for rho in [rho_o, 0.5, 0.9 * (1.0 - rho_o)] {
                    assert_eq!(class.rhosup_01_loss(b, *c, 0, rho).unwrap(), 1);
                }
            }
        }
    }

    #[test]
    fn rhosup_loss_monotone_in_rho() {
        let class = HypothesisClassHo::build(0.1, 1.0).unwrap();
        let mut rng = rng::seeded(81);
        for _ in 0..200 {
            let b = rng.gen_range(0..class.hypothesis_count()) as u32;
            let x = rng.gen_range(-2.0..18.0);
            let y = rng.gen_range(0..2) as u8;
            let mut prev = 1u8;
            for rho in [0.0, 0.05, 0.1, 0.3, 0.6, 0.9] {
                let loss = class.rhosup_01_loss(b, x, y, rho).unwrap();
                assert!(loss <= prev, "loss must not grow with rho");
                prev = loss;
            }
        }
    }

    #[test]
    fn canonical_points_shatter_at_rho_zero() {
        let class = HypothesisClassHo::build(0.25, 1.0).unwrap();
        let points: Vec<(f64, u8)> = class.centers.iter().map(|c| (*c, 1u8)).collect();
        let patterns = class.behavior_set(&points, LossMode::RhoSup(0.0)).unwrap();
        assert_eq!(patterns.len(), 8);

        // above the packing threshold no pair shatters
        for rho in [0.25, 0.5, 0.67] {
            let pair = vec![(class.centers[0], 1u8), (class.centers[1], 0u8)];
            let patterns = class.behavior_set(&pair, LossMode::RhoSup(rho)).unwrap();
            assert!(patterns.len() <= 2, "rho={rho}: {}", patterns.len());
        }

        // nominal loss cannot shatter pairs either
        let set = class.sets[0][1];
        let pair = vec![
            ((set.start + set.end) / 2.0, 1u8),
            (class.centers[1], 1u8),
        ];
        let patterns = class.behavior_set(&pair, LossMode::Nominal).unwrap();
        assert!(patterns.len() <= 2);
    }

    #[test]
    fn growth_estimates() {
        let class = HypothesisClassHo::build(0.25, 1.0).unwrap();
        let grid = class.query_grid();

        // rho = 0, k = m: the canonical points witness full shattering
        assert_eq!(
            class.growth_estimate(LossMode::RhoSup(0.0), 3, &grid).unwrap(),
            8
        );
        // quantile regime: pairs can never realize all four patterns
        for rho in [0.25, 0.5, 0.9 * 0.75] {
            let count = class.growth_estimate(LossMode::RhoSup(rho), 2, &grid).unwrap();
            assert!(count <= 3, "rho={rho}: growth {count}");
        }
        // nominal loss: same conclusion
        let count = class.growth_estimate(LossMode::Nominal, 2, &grid).unwrap();
        assert!(count <= 3, "nominal growth {count}");
        // single points separate hypotheses below the packing threshold
        assert_eq!(class.growth_estimate(LossMode::RhoSup(0.0), 1, &grid).unwrap(), 2);
        assert_eq!(class.growth_estimate(LossMode::Nominal, 1, &grid).unwrap(), 2);

        assert!(class.growth_estimate(LossMode::Nominal, 4, &grid).is_err());
    }

    /// Monte-Carlo agreement: estimate the error measure by sampling the
    /// perturbation interval and compare against the exact interval
    /// arithmetic; also run the indicator losses through the empirical
    /// quantile estimator and compare the resulting 0-1 loss away from the
    /// decision boundary.
    #[test]
    fn mc_measure_matches_exact() {
        let class = HypothesisClassHo::build(0.1, 1.0).unwrap();
        let pert = PerturbationSpec::linf(1.0, 1).unwrap();
        let mut rng = rng::seeded(82);
        let draws = 2_000;
        for trial in 0..1_000 {
            let b = rng.gen_range(0..class.hypothesis_count()) as u32;
            // queries concentrated where the geometry lives
            let x = rng.gen_range(-1.5..(4.0 * class.m as f64));
            let y = (trial % 2) as u8;
            let exact = class.error_measure(b, x, y);
            let mut indicators = Vec::with_capacity(draws);
            for _ in 0..draws {
                let delta = pert.sample(&mut rng)[0];
                let z = x + delta;
                indicators.push(f64::from(class.predict(b, z) != y));
            }
            let mc = indicators.iter().sum::<f64>() / draws as f64;
            let sigma = (exact * (1.0 - exact) / draws as f64).sqrt().max(1.0 / draws as f64);
            assert!(
                (mc - exact).abs() <= 4.0 * sigma,
                "trial {trial}: mc {mc} vs exact {exact} (sigma {sigma})"
            );

            // full pipeline: the empirical quantile of the indicator
            // sample reproduces the exact strict-exceedance loss whenever
            // the measure sits clearly off the threshold
            let rho = rng.gen_range(0.0..0.9);
            let sample = crate::riskcore::LossSample::uniform(indicators).unwrap();
            let mc_loss = sample.rho_esssup(rho).unwrap();
            if (exact - rho).abs() > 4.0 * sigma {
                let exact_loss = class.rhosup_01_loss(b, x, y, rho).unwrap();
                assert_eq!(
                    mc_loss as u8, exact_loss,
                    "trial {trial}: quantile-path loss disagrees (measure {exact}, rho {rho})"
                );
            }
        }
    }
}
