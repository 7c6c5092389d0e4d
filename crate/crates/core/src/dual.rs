//! Dual view of CVaR on discrete perturbation supports.
//!
//! CVaR at tail mass `beta` equals the value of a distributionally robust
//! reweighting problem: maximize the expected loss over densities `nu`
//! with respect to the base measure that are capped at `1/beta` and
//! normalized. On finitely many atoms the maximizer is a water-filling:
//! pour density `1/beta` onto the largest losses until base mass `beta`
//! is covered, splitting the boundary atom. The 0-1 loss admits the fully
//! closed form below. `beta` here is the same tail mass the primal
//! estimator [`LossSample::cvar_sorted`] consumes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::riskcore::LossSample;

const PROB_SUM_TOL: f64 = 1e-12;

/// Finite base measure: `K` atoms with losses and positive probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAtoms {
    losses: Vec<f64>,
    probs: Vec<f64>,
}

/// A feasible reweighting density with its cap.
#[derive(Debug, Clone, Serialize)]
pub struct DualDensity {
    /// Density with respect to the base measure, one entry per atom.
    pub nu: Vec<f64>,
    /// Upper bound `1/beta` every entry must respect.
    pub cap: f64,
}

impl DiscreteAtoms {
    pub fn new(losses: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::invalid("losses", "must be non-empty"));
        }
        if losses.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: losses.len(),
                got: probs.len(),
            });
        }
        if losses.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "atom losses" });
        }
        if probs.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::invalid("probs", "must all be positive"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::invalid(
                "probs",
                format!("must sum to 1 within {PROB_SUM_TOL}, got {total}"),
            ));
        }
        Ok(Self { losses, probs })
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Expected loss under the reweighting `nu`.
    pub fn reweighted_value(&self, nu: &[f64]) -> f64 {
        self.losses
            .iter()
            .zip(&self.probs)
            .zip(nu)
            .map(|((l, p), n)| l * p * n)
            .sum()
    }

    /// Primal CVaR of the atom law at tail mass `beta`.
    pub fn primal_cvar(&self, beta: f64) -> Result<f64> {
        LossSample::weighted(self.losses.clone(), self.probs.clone())?.cvar_sorted(beta)
    }
}

impl DualDensity {
    /// Checks the cap and normalization conditions.
    pub fn is_feasible(&self, atoms: &DiscreteAtoms, tol: f64) -> bool {
        if self.nu.len() != atoms.len() {
            return false;
        }
        if self.nu.iter().any(|n| *n < -tol || *n > self.cap + tol) {
            return false;
        }
        let mass: f64 = self.nu.iter().zip(atoms.probs()).map(|(n, p)| n * p).sum();
        (mass - 1.0).abs() <= tol
    }
}

/// Water-filling maximizer of the capped reweighting problem.
///
/// Atoms are visited in descending loss order and assigned the cap
/// `1/beta` until base mass `beta` is exhausted; the boundary atom takes
/// the fractional remainder. When every loss is identical any feasible
/// density is optimal and the base measure itself (`nu = 1`) is returned.
pub fn dual_optimum(atoms: &DiscreteAtoms, beta: f64) -> Result<DualDensity> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid("beta", format!("must be in (0,1], got {beta}")));
    }
    let cap = 1.0 / beta;
    let k = atoms.len();
    let lo = atoms.losses().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = atoms.losses().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(DualDensity { nu: vec![1.0; k], cap });
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        atoms.losses()[b]
            .total_cmp(&atoms.losses()[a])
            .then(a.cmp(&b))
    });

    let mut nu = vec![0.0; k];
    let mut mass = 0.0;
    for &i in &order {
        let p = atoms.probs()[i];
        if mass + p <= beta {
            nu[i] = cap;
            mass += p;
        } else {
            nu[i] = (beta - mass) / (beta * p);
            break;
        }
    }
    Ok(DualDensity { nu, cap })
}

/// Absolute difference between the primal CVaR and the water-filling
/// value; strong duality on finite programs keeps this at numerical zero.
pub fn duality_gap(atoms: &DiscreteAtoms, beta: f64) -> Result<f64> {
    let primal = atoms.primal_cvar(beta)?;
    let dual = atoms.reweighted_value(&dual_optimum(atoms, beta)?.nu);
    Ok((primal - dual).abs())
}

/// Closed-form optimal density for the 0-1 loss, given the
/// misclassification mass `m_err` of the base measure.
///
/// Returns `(density on error atoms, density on correct atoms, value)`.
/// The error density is `min(1/m_err, 1/beta)`, read as `1/beta` when
/// `m_err = 0` since it then carries no mass; the correct side carries
/// the normalization remainder, explicitly zero when `m_err = 1`.
pub fn zero_one_dual_density(m_err: f64, beta: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..=1.0).contains(&m_err) {
        return Err(Error::invalid("m_err", format!("must be in [0,1], got {m_err}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid("beta", format!("must be in (0,1], got {beta}")));
    }
    let value = (m_err / beta).min(1.0);
    let err_density = if m_err == 0.0 { 1.0 / beta } else { (1.0 / m_err).min(1.0 / beta) };
    let correct_density = if m_err == 1.0 {
        0.0
    } else {
        (1.0 - value) / (1.0 - m_err)
    };
    Ok((err_density, correct_density, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_atoms(rng: &mut impl Rng, k: usize) -> DiscreteAtoms {
        let losses: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..5.0)).collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        DiscreteAtoms::new(losses, raw.iter().map(|p| p / total).collect()).unwrap()
    }

    /// Independent optimality certificate for a capped reweighting LP:
    /// feasibility plus no improving exchange. Moving density from a
    /// lower-loss atom with positive density to a higher-loss atom below
    /// its cap would raise the value, so optimality means no such pair
    /// exists.
    fn assert_exchange_optimal(atoms: &DiscreteAtoms, density: &DualDensity) {
        assert!(density.is_feasible(atoms, 1e-9));
        let nu = &density.nu;
        for hi in 0..atoms.len() {
            for lo in 0..atoms.len() {
                if atoms.losses()[hi] > atoms.losses()[lo] + 1e-12 {
                    let headroom = density.cap - nu[hi];
                    let movable = nu[lo];
                    assert!(
                        headroom < 1e-9 || movable < 1e-9,
                        "improving exchange from atom {lo} to atom {hi}"
                    );
                }
            }
        }
    }

    #[test]
    fn construction_validates() {
        assert!(DiscreteAtoms::new(vec![], vec![]).is_err());
        assert!(DiscreteAtoms::new(vec![1.0], vec![0.5]).is_err());
        assert!(DiscreteAtoms::new(vec![1.0, 2.0], vec![0.5, 0.5]).is_ok());
        assert!(DiscreteAtoms::new(vec![1.0, 2.0], vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn beta_one_returns_base_measure() {
        let mut rng = rng::seeded(91);
        let atoms = random_atoms(&mut rng, 6);
        let density = dual_optimum(&atoms, 1.0).unwrap();
        // every atom is filled at cap 1, i.e. the base measure
        for n in &density.nu {
            assert!((n - 1.0).abs() < 1e-12);
        }
        let mean: f64 = atoms
            .losses()
            .iter()
            .zip(atoms.probs())
            .map(|(l, p)| l * p)
            .sum();
        assert!((atoms.reweighted_value(&density.nu) - mean).abs() < 1e-12);
    }

    #[test]
    fn two_atom_example() {
        let atoms = DiscreteAtoms::new(vec![1.0, 0.0], vec![0.3, 0.7]).unwrap();
        let density = dual_optimum(&atoms, 0.5).unwrap();
        assert!((density.nu[0] - 2.0).abs() < 1e-12, "loss-1 atom at the cap");
        assert!((density.nu[1] - 0.4 / 0.7).abs() < 1e-12, "remainder on the loss-0 atom");
        let value = atoms.reweighted_value(&density.nu);
        assert!((value - 0.6).abs() < 1e-12);
        assert_exchange_optimal(&atoms, &density);
    }

    #[test]
    fn equal_losses_return_base_measure() {
        let atoms = DiscreteAtoms::new(vec![2.5, 2.5, 2.5], vec![0.2, 0.3, 0.5]).unwrap();
        let density = dual_optimum(&atoms, 0.4).unwrap();
        assert_eq!(density.nu, vec![1.0, 1.0, 1.0]);
        assert!((atoms.reweighted_value(&density.nu) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn strong_duality_on_random_instances() {
        let mut rng = rng::seeded(92);
        for _ in 0..100 {
            let atoms = random_atoms(&mut rng, 20);
            for beta in [0.05, 0.3, 0.9] {
                let gap = duality_gap(&atoms, beta).unwrap();
                assert!(gap <= 1e-9, "beta={beta}: gap {gap}");
                let density = dual_optimum(&atoms, beta).unwrap();
                assert_exchange_optimal(&atoms, &density);
            }
        }
    }

    #[test]
    fn dual_value_beats_random_feasible_densities() {
        let mut rng = rng::seeded(93);
        let atoms = random_atoms(&mut rng, 12);
        let beta = 0.25;
        let optimum = dual_optimum(&atoms, beta).unwrap();
        let best = atoms.reweighted_value(&optimum.nu);
        let cap = 1.0 / beta;
        for _ in 0..1_000 {
            // random capped weights, then restore unit mass: scale down if
            // over, otherwise blend toward the everywhere-at-cap density
            // (whose mass is cap >= 1), staying inside the cap either way
            let mut nu: Vec<f64> = (0..atoms.len()).map(|_| rng.gen_range(0.0..cap)).collect();
            let mass: f64 = nu.iter().zip(atoms.probs()).map(|(n, p)| n * p).sum();
            if mass >= 1.0 {
                for n in nu.iter_mut() {
                    *n /= mass;
                }
            } else {
                let t = (1.0 - mass) / (cap - mass);
                for n in nu.iter_mut() {
                    *n += t * (cap - *n);
                }
            }
            let density = DualDensity { nu, cap };
            assert!(density.is_feasible(&atoms, 1e-9));
            let value = atoms.reweighted_value(&density.nu);
            assert!(value <= best + 1e-9, "random feasible density beat water-filling");
        }
    }

    #[test]
    fn dual_value_monotone_as_beta_shrinks() {
        let mut rng = rng::seeded(94);
        let atoms = random_atoms(&mut rng, 15);
        let mut prev = f64::NEG_INFINITY;
        for beta in [1.0, 0.8, 0.5, 0.2, 0.05, 0.01] {
            let value = atoms.reweighted_value(&dual_optimum(&atoms, beta).unwrap().nu);
            assert!(value >= prev - 1e-12, "beta={beta}");
            prev = value;
        }
    }

    #[test]
    fn cap_precludes_point_masses() {
        let mut rng = rng::seeded(95);
        for _ in 0..50 {
            let atoms = random_atoms(&mut rng, 8);
            let max_p = atoms.probs().iter().copied().fold(0.0, f64::max);
            let beta = (max_p * 1.5).min(0.99);
            let density = dual_optimum(&atoms, beta).unwrap();
            for (n, p) in density.nu.iter().zip(atoms.probs()) {
                assert!(n * p < 1.0 - 1e-9, "an atom carried all reweighted mass");
            }
        }
    }

    #[test]
    fn zero_one_closed_form() {
        // m_err = 0: no error mass, value zero, base measure on correct side
        let (e, c, v) = zero_one_dual_density(0.0, 0.5).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(c, 1.0);
        assert_eq!(e, 2.0);

        // worked two-atom example
        let (e, c, v) = zero_one_dual_density(0.3, 0.5).unwrap();
        assert!((v - 0.6).abs() < 1e-15);
        assert!((e - 2.0).abs() < 1e-15);
        assert!((c - 0.4 / 0.7).abs() < 1e-15);

        // saturated adversary
        for m_err in [0.5, 0.7, 1.0] {
            let (_, c, v) = zero_one_dual_density(m_err, 0.5).unwrap();
            assert_eq!(v, 1.0);
            if m_err == 1.0 {
                assert_eq!(c, 0.0);
            }
        }
    }

    #[test]
    fn zero_one_matches_atomic_dual_and_primal() {
        let mut rng = rng::seeded(96);
        for _ in 0..50 {
            let m_err: f64 = rng.gen_range(0.01..0.99);
            let beta: f64 = rng.gen_range(0.05..1.0);
            let atoms =
                DiscreteAtoms::new(vec![1.0, 0.0], vec![m_err, 1.0 - m_err]).unwrap();
            let (e, c, v) = zero_one_dual_density(m_err, beta).unwrap();

            let density = dual_optimum(&atoms, beta).unwrap();
            let dual_value = atoms.reweighted_value(&density.nu);
            assert!((dual_value - v).abs() < 1e-12);
            assert!((atoms.primal_cvar(beta).unwrap() - v).abs() < 1e-12);

            // mass identity: the densities integrate to one
            let mass = m_err * e + (1.0 - m_err) * c;
            assert!((mass - 1.0).abs() < 1e-12);
        }
    }

    /// Refining a discretization of a continuous law converges to the
    /// analytic CVaR: for the uniform loss on [0, 1] at tail beta the
    /// limit is 1 - beta/2.
    #[test]
    fn refinement_converges_to_continuous_cvar() {
        let beta = 0.3;
        let analytic = 1.0 - beta / 2.0;
        let mut prev_err = f64::INFINITY;
        for k in [10usize, 100, 1_000, 10_000] {
            let losses: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect();
            let atoms = DiscreteAtoms::new(losses, vec![1.0 / k as f64; k]).unwrap();
            let value = atoms.reweighted_value(&dual_optimum(&atoms, beta).unwrap().nu);
            let err = (value - analytic).abs();
            assert!(err <= prev_err + 1e-12, "refinement should not diverge");
            prev_err = err;
        }
        assert!(prev_err < 1e-4, "final refinement error {prev_err}");
    }
}
