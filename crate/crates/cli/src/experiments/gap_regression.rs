//! Regression analogue of the risk-gap sweep, plus the adjudication of
//! the epigraph correction coefficient: the proof-derived `2 eps ||theta||`
//! form against the `eps^2 ||theta||^2` form printed in the lemma
//! statement, judged by the sampled quantile of the perturbed loss.

use anyhow::Result;
use prl_core::linreg;

use crate::config::GapRegressionParams;
use crate::report::{num, Artifacts, Check, Summary};

pub fn run(params: &GapRegressionParams, seed: u64, artifacts: &Artifacts) -> Result<Summary> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut curves = Vec::new();

    for &rho in &params.rhos {
        let points = linreg::regression_gap(
            params.theta_norm,
            params.sigma,
            params.eps,
            rho,
            &params.dims,
            params.n_samples,
            seed,
        )?;
        for p in &points {
            rows.push(vec![
                p.d.to_string(),
                num(p.rho),
                num(p.gap_mc),
                num(p.stderr),
            ]);
        }
        if params.theta_norm > 0.0 {
            if rho == 0.0 {
                let base = points[0].gap_mc;
                for p in &points[1..] {
                    let rel = ((p.gap_mc - base) / base).abs();
                    checks.push(Check::new(
                        format!("rho0_gap_constant_d{}", p.d),
                        rel <= 0.05,
                        rel,
                        "worst-case gap stays flat across dimension",
                    ));
                }
            } else {
                for pair in points.windows(2) {
                    let ratio = pair[0].gap_mc / pair[1].gap_mc;
                    let expect = (pair[1].d as f64 / pair[0].d as f64).sqrt();
                    let lo = 0.75 * expect;
                    let hi = 1.35 * expect;
                    checks.push(Check::new(
                        format!("rho{rho}_gap_ratio_d{}_d{}", pair[0].d, pair[1].d),
                        ratio >= lo && ratio <= hi,
                        ratio,
                        format!("gap({})/gap({}) in [{lo:.3}, {hi:.3}]", pair[0].d, pair[1].d),
                    ));
                }
            }
        }
        curves.push((rho, points));
    }

    artifacts.write_csv("results.csv", &["d", "rho", "gap_mc", "stderr"], &rows)?;

    let mut header = vec!["d".to_string()];
    for (rho, _) in &curves {
        header.push(format!("gap_rho_{rho}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut plot_rows = Vec::new();
    for (i, &d) in params.dims.iter().enumerate() {
        let mut row = vec![d.to_string()];
        for (_, points) in &curves {
            row.push(num(points[i].gap_mc));
        }
        plot_rows.push(row);
    }
    artifacts.write_plotdata("reg_gap_vs_d.tsv", &header_refs, &plot_rows)?;

    if let Some(adj) = &params.adjudicate {
        let verdict = linreg::adjudicate_epigraph(adj.d, params.eps, adj.rho, adj.m_draws, seed)?;
        artifacts.write_json("adjudication.json", &verdict)?;
        checks.push(Check::new(
            "proof_coefficient_tracks_mc",
            verdict.proof_rel_err <= 0.10,
            verdict.proof_rel_err,
            "correction from 2*eps*||theta|| within 10% of the sampled quantile",
        ));
        checks.push(Check::new(
            "lemma_statement_coefficient_rejected",
            verdict.lemma_rel_err > 0.50,
            verdict.lemma_rel_err,
            "correction from eps^2*||theta||^2 misses the sampled quantile by over 50%",
        ));
    }

    Ok(Summary::new("gap_regression", seed, checks))
}
