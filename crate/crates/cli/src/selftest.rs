//! Quick property sweep across every core module; one printed line per
//! check. Meant as a smoke test, not a replacement for `cargo test`.

use prl_core::dual::{self, DiscreteAtoms};
use prl_core::gaussmix::{self, GaussianMixtureSpec};
use prl_core::linreg;
use prl_core::models::DifferentiableModel;
use prl_core::perturb::PerturbationSpec;
use prl_core::riskcore::LossSample;
use prl_core::rng;
use prl_core::trainer;
use prl_core::vcsim::{HypothesisClassHo, LossMode};
use rand::Rng;

struct Runner {
    failures: usize,
}

impl Runner {
    fn check(&mut self, name: &str, outcome: Result<bool, String>) {
        match outcome {
            Ok(true) => println!("[ok]   {name}"),
            Ok(false) => {
                println!("[FAIL] {name}");
                self.failures += 1;
            }
            Err(message) => {
                println!("[FAIL] {name}: {message}");
                self.failures += 1;
            }
        }
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Runs the whole suite; returns true when every check passed.
pub fn run_selftest(seed: u64) -> bool {
    let mut r = Runner { failures: 0 };

    r.check("perturb: ball samples stay inside", (|| {
        let spec = PerturbationSpec::l2(1.5, 8).map_err(err)?;
        let mut rng = rng::stream(seed, 1);
        for _ in 0..10_000 {
            if !spec.contains(&spec.sample(&mut rng)).map_err(err)? {
                return Ok(false);
            }
        }
        Ok(true)
    })());

    r.check("perturb: second moment of the uniform ball", (|| {
        let spec = PerturbationSpec::l2(1.0, 2).map_err(err)?;
        let mut rng = rng::stream(seed, 2);
        let n = 200_000;
        let mean_sq: f64 = (0..n)
            .map(|_| spec.sample(&mut rng).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        Ok((mean_sq - 0.5).abs() < 0.02)
    })());

    r.check("riskcore: quantile bounded by tail mean", (|| {
        let mut rng = rng::stream(seed, 3);
        for _ in 0..100 {
            let values: Vec<f64> = (0..80).map(|_| rng.gen_range(0.0..10.0)).collect();
            let s = LossSample::uniform(values).map_err(err)?;
            for rho in [0.05, 0.2, 0.5, 0.9] {
                if s.rho_esssup(rho).map_err(err)? > s.cvar_sorted(rho).map_err(err)? + 1e-12 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    })());

    r.check("riskcore: variational minimum equals sorted tail mean", (|| {
        let mut rng = rng::stream(seed, 4);
        for _ in 0..100 {
            let values: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..5.0)).collect();
            let s = LossSample::uniform(values).map_err(err)?;
            for rho in [0.1, 0.5, 1.0] {
                let a = s.cvar_sorted(rho).map_err(err)?;
                let b = s.cvar_variational_exact(rho).map_err(err)?.value;
                if (a - b).abs() > 1e-10 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    })());

    r.check("gaussmix: cap measure inversion roundtrip", (|| {
        for d in [2usize, 50, 1000] {
            for i in 1..20 {
                let rho = i as f64 / 20.0;
                let v = gaussmix::cap_distance_v_rho(d, 1.0, rho).map_err(err)?;
                if (gaussmix::cap_measure(d, v).map_err(err)? - rho).abs() > 1e-9 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    })());

    r.check("gaussmix: closed-form risk against sampling", (|| {
        let spec = GaussianMixtureSpec::with_mean_norm(2.0, 2, 0.5).map_err(err)?;
        let pert = PerturbationSpec::l2(1.0, 2).map_err(err)?;
        let hyp = spec.prob_robust_hypothesis(1.0, 0.1).map_err(err)?;
        let exact = spec.prob_risk(&hyp, 1.0, 0.1).map_err(err)?;
        let n = 20_000;
        let mc = spec
            .mc_prob_risk(&hyp, &pert, 0.1, n, 200, seed ^ 6)
            .map_err(err)?;
        let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
        Ok((mc - exact).abs() <= 4.0 * sigma)
    })());

    r.check("linreg: epigraph coefficient adjudication", (|| {
        let adj = linreg::adjudicate_epigraph(200, 1.0, 0.1, 100_000, seed ^ 7).map_err(err)?;
        Ok(adj.proof_rel_err <= 0.10 && adj.lemma_rel_err > 0.40)
    })());

    r.check("models: gradients match finite differences", (|| {
        let mut rng = rng::stream(seed, 8);
        for trial in 0..20 {
            let mut model = if trial % 2 == 0 {
                DifferentiableModel::linear_logistic(3).map_err(err)?
            } else {
                DifferentiableModel::mlp_logistic(3, 3, &mut rng).map_err(err)?
            };
            let params: Vec<f64> =
                (0..model.n_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            model.set_params(&params).map_err(err)?;
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let grad = model.loss_grad(&x, y).map_err(err)?;
            let h = 1e-5;
            for i in 0..model.n_params() {
                let orig = model.params()[i];
                model.params_mut()[i] = orig + h;
                let up = model.loss(&x, y).map_err(err)?;
                model.params_mut()[i] = orig - h;
                let down = model.loss(&x, y).map_err(err)?;
                model.params_mut()[i] = orig;
                let fd = (up - down) / (2.0 * h);
                if (grad[i] - fd).abs() > 1e-5 * (1.0 + fd.abs()) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    })());

    r.check("trainer: attack iterates stay inside the ball", (|| {
        let mut rng = rng::stream(seed, 9);
        let mut model = DifferentiableModel::linear_logistic(3).map_err(err)?;
        model.set_params(&[1.0, -0.5, 0.25, 0.0]).map_err(err)?;
        for pert in [
            PerturbationSpec::l2(0.5, 3).map_err(err)?,
            PerturbationSpec::linf(0.3, 3).map_err(err)?,
        ] {
            for _ in 0..20 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let delta =
                    trainer::pgd_attack(&model, &x, 1.0, &pert, 10, 0.2).map_err(err)?;
                if !pert.contains(&delta).map_err(err)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    })());

    r.check("dual: water-filling closes the duality gap", (|| {
        let mut rng = rng::stream(seed, 10);
        for _ in 0..20 {
            let losses: Vec<f64> = (0..15).map(|_| rng.gen_range(0.0..5.0)).collect();
            let raw: Vec<f64> = (0..15).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let atoms = DiscreteAtoms::new(losses, raw.iter().map(|p| p / total).collect())
                .map_err(err)?;
            for beta in [0.05, 0.3, 0.9] {
                if dual::duality_gap(&atoms, beta).map_err(err)? > 1e-9 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    })());

    r.check("vcsim: canonical shattering and pair growth", (|| {
        let class = HypothesisClassHo::build(0.25, 1.0).map_err(err)?;
        let canonical: Vec<(f64, u8)> = class.centers.iter().map(|c| (*c, 1u8)).collect();
        let full = class
            .behavior_set(&canonical, LossMode::RhoSup(0.0))
            .map_err(err)?
            .len();
        let grid = class.query_grid();
        let pair = class
            .growth_estimate(LossMode::RhoSup(0.25), 2, &grid)
            .map_err(err)?;
        Ok(full == class.hypothesis_count() && pair <= 3)
    })());

    if r.failures == 0 {
        println!("selftest: all checks passed");
        true
    } else {
        println!("selftest: {} check(s) FAILED", r.failures);
        false
    }
}
