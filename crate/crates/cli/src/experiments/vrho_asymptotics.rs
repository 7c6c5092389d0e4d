//! Exact cap distance against its high-dimensional closed form
//! `eps * PhiInv(1 - rho) / sqrt(d)`, plus the inversion roundtrip.

use anyhow::Result;
use prl_core::gaussmix;

use crate::config::VrhoParams;
use crate::report::{num, Artifacts, Check, Summary};

pub fn run(params: &VrhoParams, seed: u64, artifacts: &Artifacts) -> Result<Summary> {
    let mut rows = Vec::new();
    let mut plot_rows = Vec::new();
    let mut checks = Vec::new();

    for &rho in &params.rhos {
        let exact = gaussmix::cap_distance_v_rho(params.d, params.eps, rho)?;
        let asym = gaussmix::cap_distance_asymptotic(params.d, params.eps, rho)?;
        let rel_err = if asym != 0.0 { ((exact - asym) / asym).abs() } else { exact.abs() };
        let roundtrip_err = (gaussmix::cap_measure(params.d, exact / params.eps)? - rho).abs();
        rows.push(vec![
            params.d.to_string(),
            num(rho),
            num(exact),
            num(asym),
            num(rel_err),
            num(roundtrip_err),
        ]);
        plot_rows.push(vec![num(rho), num(exact), num(asym)]);

        checks.push(Check::new(
            format!("roundtrip_rho_{rho}"),
            roundtrip_err <= 1e-9,
            roundtrip_err,
            "cap_measure(cap_distance(rho)) returns rho to 1e-9",
        ));
        if rho < 0.5 {
            checks.push(Check::new(
                format!("asymptotic_rho_{rho}"),
                rel_err <= 0.05,
                rel_err,
                "exact within 5% of eps * PhiInv(1 - rho) / sqrt(d)",
            ));
        }
    }

    artifacts.write_csv(
        "results.csv",
        &["d", "rho", "v_exact", "v_asymptotic", "rel_err", "roundtrip_err"],
        &rows,
    )?;
    artifacts.write_plotdata("vrho.tsv", &["rho", "v_exact", "v_asymptotic"], &plot_rows)?;

    Ok(Summary::new("vrho_asymptotics", seed, checks))
}
