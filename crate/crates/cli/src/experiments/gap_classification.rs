//! Risk gap between the best probabilistically robust linear classifier
//! and the Bayes classifier, across dimension. Positive tolerance levels
//! should shrink the gap like 1/sqrt(d); the worst-case level keeps it
//! constant.

use anyhow::Result;
use prl_core::gaussmix;

use crate::config::GapClassificationParams;
use crate::report::{num, Artifacts, Check, Summary};

pub fn run(params: &GapClassificationParams, seed: u64, artifacts: &Artifacts) -> Result<Summary> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut curves = Vec::new();

    for &rho in &params.rhos {
        let points = match &params.mc {
            Some(mc) => gaussmix::gap_curve_with_mc(
                params.mean_norm,
                params.pi_plus,
                params.eps,
                rho,
                &params.dims,
                mc.n_points,
                mc.m_draws,
                seed,
            )?,
            None => gaussmix::gap_curve(
                params.mean_norm,
                params.pi_plus,
                params.eps,
                rho,
                &params.dims,
            )?,
        };
        for p in &points {
            rows.push(vec![
                p.d.to_string(),
                num(p.rho),
                num(p.gap_closed_form),
                p.gap_mc.map(num).unwrap_or_default(),
                p.mc_stderr.map(num).unwrap_or_default(),
            ]);
        }

        if rho == 0.0 {
            // constant branch: every gap within 5% of the first
            let base = points[0].gap_closed_form;
            for p in &points[1..] {
                let rel = ((p.gap_closed_form - base) / base).abs();
                checks.push(Check::new(
                    format!("rho0_gap_constant_d{}", p.d),
                    rel <= 0.05,
                    rel,
                    format!("|gap({}) - gap({})| / gap({}) <= 0.05", p.d, points[0].d, points[0].d),
                ));
            }
        } else {
            // vanishing branch: consecutive ratios track sqrt(d2/d1)
            for pair in points.windows(2) {
                let ratio = pair[0].gap_closed_form / pair[1].gap_closed_form;
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

        // Monte-Carlo cross-check if requested: closed form within 3
        // binomial sigmas
        for p in &points {
            if let (Some(mc), Some(se)) = (p.gap_mc, p.mc_stderr) {
                let diff = (mc - p.gap_closed_form).abs();
                checks.push(Check::new(
                    format!("rho{rho}_mc_agreement_d{}", p.d),
                    diff <= 3.0 * se,
                    diff,
                    format!("|gap_mc - gap_closed_form| <= 3 * {se:.2e}"),
                ));
            }
        }
        curves.push((rho, points));
    }

    artifacts.write_csv(
        "results.csv",
        &["d", "rho", "gap_closed_form", "gap_mc", "mc_stderr"],
        &rows,
    )?;

    // plot data: one gap column per tolerance level
    let mut header = vec!["d".to_string()];
    for (rho, _) in &curves {
        header.push(format!("gap_rho_{rho}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut plot_rows = Vec::new();
    for (i, &d) in params.dims.iter().enumerate() {
        let mut row = vec![d.to_string()];
        for (_, points) in &curves {
            row.push(num(points[i].gap_closed_form));
        }
        plot_rows.push(row);
    }
    artifacts.write_plotdata("gap_vs_d.tsv", &header_refs, &plot_rows)?;

    Ok(Summary::new("gap_classification", seed, checks))
}
