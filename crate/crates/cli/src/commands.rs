use std::fs;
use std::path::PathBuf;

use nsper_core::conditions::{uc_row, UC_HEADER};
use nsper_core::frame::check_uep_conditions;
use nsper_core::localization::Gaussian;
use nsper_core::periodize::{periodize_scaling, periodize_wavelet};
use nsper_core::product::fmt_sig;
use nsper_core::{
    build_nonstationary_level, build_periodic_level, eval_scaling_spectrum, lift_mask, roundtrip_check,
    run_adjustment_experiment, step_mask_lift, uc_heisenberg, uc_pair_for_level, verify_mask_smoothness, LiftedFamily,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, TABLE_MARGIN};
use crate::CliError;

/// Residual above which an extension-principle identity counts as failed.
const IDENTITY_TOL: f64 = 1e-8;
/// Samples per unit interval in mask dumps.
const MASK_SAMPLES: usize = 1024;

pub struct Output {
    dir: PathBuf,
    command: &'static str,
    config: serde_json::Value,
    hash: String,
    files: Vec<String>,
}

impl Output {
    pub fn new(cfg: &RunConfig, command: &'static str) -> Result<Self, CliError> {
        let dir = cfg.out_dir().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.clone(), e))?;
        Ok(Self {
            dir,
            command,
            config: serde_json::from_str(&cfg.canonical_json()).expect("valid json"),
            hash: cfg.hash(),
            files: Vec::new(),
        })
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Io(path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value).map_err(nsper_core::Error::from)?;
        body.push('\n');
        self.text(name, &body)
    }

    pub fn finish(mut self, ok: bool) -> Result<(), CliError> {
        self.files.sort();
        let manifest = json!({
            "command": self.command,
            "config": self.config,
            "config_sha256": self.hash,
            "files": self.files,
            "status": if ok { "ok" } else { "failed" },
            "version": env!("CARGO_PKG_VERSION"),
        });
        let mut body = serde_json::to_string_pretty(&manifest).map_err(nsper_core::Error::from)?;
        body.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, body).map_err(|e| CliError::Io(path, e))
    }
}

fn levels(cfg: &RunConfig) -> std::ops::RangeInclusive<u32> {
    cfg.j_min..=cfg.j_max
}

pub fn validate(cfg: &RunConfig, out: &mut Output) -> Result<bool, CliError> {
    let table = cfg.table(0)?;
    let report = table.validate(cfg.validation_tol());
    out.json("validation.json", &report)?;
    println!(
        "levels {}..={}: {} ({} violations)",
        table.j_min(),
        table.j_max(),
        if report.valid { "valid" } else { "invalid" },
        report.violations.len()
    );
    Ok(report.valid)
}

pub fn lift(cfg: &RunConfig, out: &mut Output) -> Result<bool, CliError> {
    let table = cfg.table(TABLE_MARGIN)?;
    let tol = cfg.tol.max(1e-10);
    let mut reports = Vec::new();
    for j in levels(cfg) {
        let mask = lift_mask(&table, j, cfg.order)?;
        out.json(&format!("spline_j{j}.json"), &mask.spline().dump())?;
        let mut csv = String::from("xi,m\n");
        for i in 0..MASK_SAMPLES {
            let xi = i as f64 / MASK_SAMPLES as f64;
            csv += &format!("{},{}\n", fmt_sig(xi, 17), fmt_sig(mask.value(xi), 17));
        }
        out.text(&format!("mask_j{j}.csv"), &csv)?;
        let r = verify_mask_smoothness(&mask, tol);
        println!("j={j} K={} mismatch {:?} passes {}", cfg.order, r.max_mismatch, r.passes);
        reports.push(r);
    }
    out.json("smoothness.json", &reports)?;
    Ok(reports.iter().all(|r| r.passes))
}

pub fn build(cfg: &RunConfig, out: &mut Output) -> Result<bool, CliError> {
    let table = cfg.table(TABLE_MARGIN)?;
    let family = LiftedFamily::new(&table, cfg.order)?;
    for j in levels(cfg) {
        let n = cfg.cutoff_at(j);
        out.json(&format!("periodic_j{j}.json"), &build_periodic_level(&table, j, n, cfg.tol)?)?;
        let grid = eval_scaling_spectrum(&family, j, cfg.span, cfg.resolution, cfg.tol)?;
        out.text(&format!("spectrum_j{j}.csv"), &grid.to_csv())?;
        let xi_span = cfg.span * (1u64 << j) as f64;
        let level = build_nonstationary_level(&family, j, xi_span, cfg.resolution, cfg.tol)?;
        out.json(&format!("nonstationary_j{j}.json"), &level)?;
    }
    if cfg.j_min > cfg.j_max {
        return Ok(true);
    }
    let n = cfg.cutoff_at(cfg.j_min);
    let xi_span = cfg.span * (1u64 << cfg.j_min) as f64;
    let uep = check_uep_conditions(&family, levels(cfg), n, xi_span, cfg.resolution, cfg.tol)?;
    out.json("uep.json", &uep)?;
    let worst = [uep.con2, uep.con3, uep.con4, uep.ncon2, uep.ncon3, uep.ncon4, uep.wavelet_quadrature]
        .into_iter()
        .fold(0.0, f64::max);
    println!("largest identity residual {worst:e}");
    Ok(worst <= IDENTITY_TOL)
}

pub fn periodize(cfg: &RunConfig, out: &mut Output) -> Result<bool, CliError> {
    let table = cfg.table(TABLE_MARGIN)?;
    let family = LiftedFamily::new(&table, cfg.order)?;
    let mut reports = Vec::new();
    let mut step_exact = true;
    for j in levels(cfg) {
        let n = cfg.cutoff.unwrap_or(16);
        let r = roundtrip_check(&family, j, n, cfg.resolution, cfg.tol)?;
        println!("j={j} N={n} max discrepancy {:e}", r.max_discrepancy);
        reports.push(r);
        let lifted = build_nonstationary_level(&family, j, n as f64, cfg.resolution, cfg.tol)?;
        out.json(&format!("series_psi_j{j}.json"), &periodize_wavelet(&lifted, &table, n)?)?;
        out.json(&format!("series_phi_j{j}.json"), &periodize_scaling(&lifted, &table, n)?)?;
        let periodic = build_periodic_level(&table, j, n, cfg.tol)?;
        let step = step_mask_lift(&table, j, n as f64, cfg.resolution, cfg.tol)?;
        step_exact &= periodize_wavelet(&step, &table, n)?.coeffs() == periodic.psi.coeffs()
            && periodize_scaling(&step, &table, n)?.coeffs() == periodic.phi.coeffs();
    }
    out.json("roundtrip.json", &json!({ "reports": reports, "step_lift_exact": step_exact }))?;
    Ok(step_exact)
}

pub fn uc(cfg: &RunConfig, out: &mut Output) -> Result<bool, CliError> {
    let table = cfg.table(TABLE_MARGIN)?;
    let mut csv = format!("{UC_HEADER}\n");
    let mut pairs = Vec::new();
    if cfg.self_test {
        let g = uc_heisenberg(&Gaussian, 8.0)?;
        csv += &format!(
            "gaussian,,,,{},{},{},,SELF_TEST\n",
            fmt_sig(g.uc_h, 12),
            fmt_sig(g.time_var, 12),
            fmt_sig(g.freq_var, 12)
        );
        pairs.push(json!({ "self_test": g }));
    }
    if cfg.j_min <= cfg.j_max {
        let family = LiftedFamily::new(&table, cfg.order)?;
        for j in levels(cfg) {
            let p = uc_pair_for_level(&family, j, cfg.cutoff_at(j), cfg.span, cfg.tol)?;
            csv += &uc_row(
                j,
                p.uc_b.uc_b,
                p.uc_b.var_a,
                p.uc_b.var_f,
                p.uc_h.uc_h,
                p.uc_h.time_var,
                p.uc_h.freq_var,
                p.gap,
                &p.flags,
            );
            pairs.push(serde_json::to_value(&p).map_err(nsper_core::Error::from)?);
        }
    }
    out.text("uc.csv", &csv)?;
    out.json("uc.json", &pairs)?;
    print!("{csv}");
    Ok(true)
}

pub fn experiment(cfg: &RunConfig, out: &mut Output) -> Result<bool, CliError> {
    let table = cfg.table(TABLE_MARGIN)?;
    let report = run_adjustment_experiment(&table, cfg.order, levels(cfg), cfg.cutoff, None, cfg.span, cfg.tol)?;
    let csv = report.to_csv();
    out.text("experiment.csv", &csv)?;
    out.text("uc.csv", &report.uc_csv())?;
    out.json("summary.json", &report)?;
    print!("{csv}");
    Ok(true)
}
