//! One function per subcommand.

use std::fs;
use std::path::Path;

use polaron_core::ensemble::{self, Ensemble};
use polaron_core::fk::{self, PathConfig};
use polaron_core::renewal::{self, TAIL_WARN_FRACTION};
use polaron_core::spectral::{self, PointKind};
use polaron_core::validation::{self, Faults, ValidationConfig};
use polaron_core::{generate_ensemble, save_ensemble};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Table;

pub const ESS_WARN: f64 = 100.0;

type Result<T> = std::result::Result<T, CliError>;

fn warn(msg: impl AsRef<str>) {
    eprintln!("warning: {}", msg.as_ref());
}

fn header(command: &str, cfg: &RunConfig) -> String {
    format!("command = {command}\n{}", cfg.to_file_string())
}

fn emit(table: &Table, command: &str, cfg: &RunConfig) -> Result<()> {
    table.emit(&header(command, cfg), cfg.format, cfg.out_dir.as_deref())?;
    Ok(())
}

fn require_alpha(cfg: &RunConfig) -> Result<f64> {
    cfg.alpha
        .ok_or_else(|| CliError::Usage("missing parameter `alpha` (use --alpha or the config file)".into()))
}

pub fn load(cfg: &RunConfig) -> Result<Ensemble> {
    let path = cfg
        .ensemble
        .as_ref()
        .ok_or_else(|| CliError::Usage("missing parameter `ensemble` (use --ensemble or the config file)".into()))?;
    let ens = ensemble::load_ensemble(path).map_err(|source| CliError::Load {
        path: path.clone(),
        source,
    })?;
    if let Some(a) = cfg.alpha {
        ens.require_alpha(a).map_err(|source| CliError::Load {
            path: path.clone(),
            source,
        })?;
    }
    Ok(ens)
}

fn warn_ess(what: &str, ess: f64) {
    if ess < ESS_WARN {
        warn(format!("effective sample size {ess:.1} < {ESS_WARN} at {what}"));
    }
}

fn warn_tail(p: f64, fraction: f64) {
    if fraction > TAIL_WARN_FRACTION {
        warn(format!(
            "P = {p}: {:.2}% of the kernel mass lies beyond T_max; plateau and Laplace tail rest on the window",
            100.0 * fraction
        ));
    }
}

pub fn sample(cfg: &RunConfig, out: &Path) -> Result<()> {
    let alpha = require_alpha(cfg)?;
    let ens = generate_ensemble(alpha, cfg.shards, cfg.samples_per_shard, cfg.base_seed)?;
    save_ensemble(&ens, out).map_err(|source| CliError::Save {
        path: out.to_path_buf(),
        source,
    })?;
    let n = ens.len() as f64;
    let mean_tau = ens.rows().iter().map(|r| r.tau).sum::<f64>() / n;
    let mean_n = ens.rows().iter().map(|r| r.n as f64).sum::<f64>() / n;
    println!(
        "wrote {} rows to {}: mean tau {mean_tau:.6}, mean n {mean_n:.6}, cap breaches 0",
        ens.len(),
        out.display()
    );
    Ok(())
}

pub fn energy(cfg: &RunConfig) -> Result<()> {
    let ens = load(cfg)?;
    let curve = spectral::energy_curve(&ens, &cfg.p_grid, cfg.tol)?;
    let mut table = Table::new("energy", &["P", "energy", "kind", "stderr", "ess", "max_share"]);
    for pt in &curve.points {
        warn_ess(&format!("P = {} (root)", pt.p), pt.diagnostics.ess);
        table.push(vec![
            pt.p.into(),
            pt.energy.into(),
            pt.kind.as_str().into(),
            pt.stderr.into(),
            pt.diagnostics.ess.into(),
            pt.diagnostics.max_share.into(),
        ]);
    }
    let mut summary = Table::new("summary", &["alpha", "E0", "E0_stderr", "meff", "meff_stderr"]);
    summary.push(vec![
        ens.alpha().into(),
        curve.e0.value.into(),
        curve.e0.stderr.into(),
        curve.effective_mass.value.into(),
        curve.effective_mass.stderr.into(),
    ]);
    let d = &curve.diagnostics;
    let mut checks = Table::new("diagnostics", &["check", "passed", "worst_margin"]);
    for (name, c) in [
        ("monotone", &d.monotone),
        ("concave", &d.concave),
        ("quasi_particle_bound", &d.quasi_particle_bound),
        ("plateau_terminal", &d.plateau_terminal),
    ] {
        if !c.passed {
            warn(format!("curve diagnostic `{name}` failed: {}", c.detail));
        }
        checks.push(vec![name.into(), c.passed.into(), c.worst_margin.into()]);
    }
    emit(&table, "energy", cfg)?;
    emit(&summary, "energy", cfg)?;
    emit(&checks, "energy", cfg)
}

pub fn lambda(cfg: &RunConfig) -> Result<()> {
    let ens = load(cfg)?;
    let mut table = Table::new("lambda", &["P", "lambda", "value", "stderr", "ess", "max_share"]);
    for &p in &cfg.p_grid {
        for lam in cfg.lambda_grid() {
            let est = spectral::lambda_hat(&ens, p, lam)?;
            warn_ess(&format!("P = {p}, lambda = {lam}"), est.ess);
            table.push(vec![p.into(), lam.into(), est.value.into(), est.stderr.into(), est.ess.into(), est.max_share.into()]);
        }
    }
    emit(&table, "lambda", cfg)
}

pub fn resolvent(cfg: &RunConfig) -> Result<()> {
    let ens = load(cfg)?;
    let e0 = spectral::solve_e0(&ens, cfg.tol)?;
    let mut table = Table::new(
        "resolvent",
        &["P", "lambda", "resolvent_renewal", "resolvent_formula", "rel_diff"],
    );
    for &p in &cfg.p_grid {
        let point = spectral::solve_ep(&ens, p, &e0, cfg.tol)?;
        if point.kind == PointKind::Plateau {
            warn(format!("P = {p} is a plateau point; skipped"));
            continue;
        }
        let nu = renewal::empirical_nu(&ens, p, cfg.h, cfg.t_max)?;
        warn_tail(p, nu.tail_fraction());
        let sol = renewal::solve_renewal(&nu);
        for lam in cfg.lambda_grid() {
            if lam >= point.energy {
                warn(format!("lambda = {lam} is not below E({p}) = {}; skipped", point.energy));
                continue;
            }
            let formula = spectral::resolvent(&ens, p, lam, &e0)?;
            let via_renewal = renewal::laplace(&sol, lam, point.energy)?;
            table.push(vec![
                p.into(),
                lam.into(),
                via_renewal.into(),
                formula.into(),
                ((via_renewal - formula) / formula).into(),
            ]);
        }
    }
    emit(&table, "resolvent", cfg)
}

pub fn overlap(cfg: &RunConfig) -> Result<()> {
    let ens = load(cfg)?;
    let e0 = spectral::solve_e0(&ens, cfg.tol)?;
    let mut table = Table::new(
        "overlap",
        &["P", "energy", "kind", "overlap", "in_range", "renewal_plateau", "rel_diff"],
    );
    for &p in &cfg.p_grid {
        let point = spectral::solve_ep(&ens, p, &e0, cfg.tol)?;
        if point.kind == PointKind::Plateau {
            table.push(vec![p.into(), point.energy.into(), point.kind.as_str().into(), f64::NAN.into(), false.into(), f64::NAN.into(), f64::NAN.into()]);
            continue;
        }
        let ov = spectral::overlap(&ens, &point)?;
        if !ov.in_range {
            warn(format!("P = {p}: overlap {} outside (0, 1]", ov.value));
        }
        let nu = renewal::empirical_nu(&ens, p, cfg.h, cfg.t_max)?;
        warn_tail(p, nu.tail_fraction());
        let level = match renewal::plateau(&renewal::solve_renewal(&nu), point.energy) {
            Ok(pl) => pl.value,
            Err(e) => {
                warn(format!("P = {p}: {e}"));
                f64::NAN
            }
        };
        table.push(vec![
            p.into(),
            point.energy.into(),
            point.kind.as_str().into(),
            ov.value.into(),
            ov.in_range.into(),
            level.into(),
            ((ov.value - level) / level).into(),
        ]);
    }
    emit(&table, "overlap", cfg)
}

pub fn renewal(cfg: &RunConfig) -> Result<()> {
    let ens = load(cfg)?;
    let mut table = Table::new("renewal", &["P", "T", "f"]);
    for &p in &cfg.p_grid {
        let nu = renewal::empirical_nu(&ens, p, cfg.h, cfg.t_max)?;
        warn_tail(p, nu.tail_fraction());
        let sol = renewal::solve_renewal(&nu);
        for (t, f) in sol.times().zip(&sol.values) {
            table.push(vec![p.into(), t.into(), (*f).into()]);
        }
    }
    emit(&table, "renewal", cfg)
}

pub fn oracle(cfg: &RunConfig) -> Result<()> {
    let ens = load(cfg)?;
    let alpha = ens.alpha();
    let mut table = Table::new(
        "oracle",
        &["alpha", "P", "T", "fk_value", "fk_stderr", "renewal_value", "rel_diff"],
    );
    let shards = cfg.shards.min(cfg.fk_paths as u64);
    for &p in &cfg.p_grid {
        let sol = renewal::solve_renewal(&renewal::empirical_nu(&ens, p, cfg.h, cfg.t_max)?);
        for &t in &cfg.t_values {
            let path_cfg = PathConfig::new(t, cfg.fk_steps, cfg.fk_paths, alpha, p)?;
            let est = fk::fk_estimate_sharded(&path_cfg, cfg.base_seed, shards)?;
            if !est.sine_consistent() {
                warn(format!("P = {p}, T = {t}: imaginary part not consistent with zero"));
            }
            let r = sol.at(t)?;
            table.push(vec![
                alpha.into(),
                p.into(),
                t.into(),
                est.value.into(),
                est.stderr.into(),
                r.into(),
                ((r - est.value) / est.value).into(),
            ]);
        }
    }
    emit(&table, "oracle", cfg)
}

pub fn probe(cfg: &RunConfig) -> Result<()> {
    let ens = load(cfg)?;
    let e0 = spectral::solve_e0(&ens, cfg.tol)?;
    let mut table = Table::new(
        "probe",
        &["P", "estimate", "log_estimate", "ess", "max_share", "tail_index", "verdict"],
    );
    for &p in &cfg.p_grid {
        let pr = spectral::i0_probe(&ens, p, e0.value)?;
        table.push(vec![
            p.into(),
            pr.estimate.into(),
            pr.log_estimate.into(),
            pr.ess.into(),
            pr.max_share.into(),
            pr.tail_index.unwrap_or(f64::NAN).into(),
            pr.verdict.as_str().into(),
        ]);
    }
    eprintln!("note: probe verdicts are descriptive; boundedness cannot be decided from a finite ensemble");
    emit(&table, "probe", cfg)
}

pub fn validate(quick: bool, faults: Faults) -> Result<()> {
    let vcfg = if quick {
        ValidationConfig::quick()
    } else {
        ValidationConfig::default()
    };
    let scratch = std::env::temp_dir().join(format!("polaron-validate-{}", std::process::id()));
    fs::create_dir_all(&scratch)?;
    let outcomes = validation::run_all(&vcfg, &faults, &scratch);
    let _ = fs::remove_dir_all(&scratch);
    let outcomes = outcomes?;
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    println!("validate: {} of {} checks passed", outcomes.len() - failed.len(), outcomes.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("failed checks: {}", failed.join(", "))))
    }
}
