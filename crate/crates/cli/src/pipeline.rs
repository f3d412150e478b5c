//! The scenario pipeline: validate, solve, hedge, simulate, verify, report.

use std::path::{Path, PathBuf};

use serde::Serialize;

use riskmin::hedge::{
    attainability_check, hedge_field, residual_risk, write_hedge_csv, HedgeOptions, PhiMode,
    RiskMinStrategy,
};
use riskmin::mc::{mc_value, McOptions};
use riskmin::model::{preset_dividend, preset_model, validate_model, SamplePlan};
use riskmin::pide::{
    solve_pide, write_field_csv, Axis, PideOptions, QueryMode, SpatialGrid,
};
use riskmin::sim::{
    martingale_diagnostic, mean_se, write_paths_csv, write_transitions_csv, EnsembleSpec, TimeGrid,
};

use crate::config::{Probe, ScenarioConfig};
use crate::manifest::{ArtifactWriter, CheckEntry, Manifest, SummaryItem};
use crate::CliError;

#[derive(Debug, Default, Clone)]
pub struct RunFlags {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub paths: Option<usize>,
    /// Node counts per axis (`--grid NxM`).
    pub grid: Option<Vec<usize>>,
    pub skip_pide: bool,
    pub mc_only: bool,
}

#[derive(Serialize)]
struct ProbeEntry {
    t: f64,
    y: Vec<f64>,
    c: usize,
    estimate: f64,
    #[serde(rename = "se")]
    std_error: f64,
    reference: Option<f64>,
    #[serde(rename = "flag")]
    flagged: bool,
}

#[derive(Serialize)]
struct ProbeReport {
    probes: Vec<ProbeEntry>,
    n_flagged: usize,
}

#[derive(Serialize)]
struct SelfFinancingReport {
    mean: f64,
    std_error: f64,
    n_paths: usize,
}

pub fn output_dir(config: &ScenarioConfig, flags: &RunFlags) -> PathBuf {
    if let Some(dir) = &flags.out_dir {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var("RISKMIN_OUT_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(
        config
            .outputs
            .directory
            .clone()
            .unwrap_or_else(|| "out".to_string()),
    )
}

pub fn run_scenario(
    config: &ScenarioConfig,
    flags: &RunFlags,
    scenario: &str,
) -> Result<(Manifest, PathBuf), CliError> {
    let mut config = config.clone();
    if let Some(seed) = flags.seed {
        config.numerics.seed = seed;
    }
    if let Some(paths) = flags.paths {
        config.numerics.paths = paths;
    }
    if let Some(nodes) = &flags.grid {
        if nodes.len() != config.numerics.grid.len() {
            return Err(CliError::Flag(format!(
                "--grid expects {} axis counts for this scenario",
                config.numerics.grid.len()
            )));
        }
        for (axis, &n) in config.numerics.grid.iter_mut().zip(nodes) {
            axis.nodes = n;
        }
    }

    let dir = output_dir(&config, flags);
    let mut writer = ArtifactWriter::new(&dir)?;
    let mut checks: Vec<CheckEntry> = Vec::new();
    let mut summary: Vec<SummaryItem> = Vec::new();

    // --- build model and claim
    let (model, bundled) = preset_model(&config.model.family, &config.model.params)?;
    let dividend = match bundled {
        Some(d) => d,
        None => preset_dividend(&config.dividend.family, &config.dividend.params, &model)?,
    };
    if config.model.y0.len() != model.dims.state() {
        return Err(CliError::Flag(format!(
            "model.y0 has {} entries, the model state has {}",
            config.model.y0.len(),
            model.dims.state()
        )));
    }
    let maturity = dividend.maturity;

    // --- stage: validation
    let plan = SamplePlan::default_for(&model, maturity, &config.model.y0);
    let validation = validate_model(&model, &plan);
    writer.write_json("validation.json", "validate", &validation)?;
    checks.push(CheckEntry {
        name: "model_assumptions".into(),
        passed: validation.passed(),
        detail: validation
            .checks
            .iter()
            .map(|c| format!("{}:{}", c.name, if c.passed { "ok" } else { "fail" }))
            .collect::<Vec<_>>()
            .join(","),
    });

    // --- stage: attainability (rank logic, probe-based)
    let attain = attainability_check(&model, &plan)?;
    writer.write_json("attainability.json", "attainability", &attain)?;
    summary.push(SummaryItem {
        name: "attainability".into(),
        value: serde_json::to_value(&attain.verdict).unwrap(),
        source: "attainability.json".into(),
    });

    // --- stage: solver
    let solve = !(flags.mc_only || flags.skip_pide);
    let mut value_field = None;
    if solve {
        if config.numerics.grid.len() != model.dims.state() {
            return Err(CliError::Flag(format!(
                "numerics.grid has {} axes, the model state has {} dimensions; \
                 use --mc-only for models the grid solver cannot cover",
                config.numerics.grid.len(),
                model.dims.state()
            )));
        }
        let axes = config
            .numerics
            .grid
            .iter()
            .map(|a| Axis::new(a.lo, a.hi, a.nodes, a.log))
            .collect::<Result<Vec<_>, _>>()?;
        let grid = SpatialGrid::new(axes)?;
        let (vf, stats) = solve_pide(
            &model,
            &dividend,
            &grid,
            &PideOptions {
                n_time_steps: config.numerics.time_steps,
            },
        )?;
        for w in &stats.warnings {
            eprintln!("solver warning: {w}");
        }
        if config.outputs.value_field {
            let mut bytes = Vec::new();
            write_field_csv(&vf, &mut bytes)?;
            writer.write("value_field.csv", "solve", &bytes)?;
        }
        value_field = Some(vf);
    }

    // --- stage: hedge
    let mut hedge = None;
    if let Some(vf) = &value_field {
        let hf = hedge_field(
            &model,
            &dividend,
            vf,
            &HedgeOptions {
                time_stride: config.numerics.hedge_time_stride,
                phi_mode: PhiMode::RiskMinimizing,
            },
        )?;
        if config.outputs.hedge_field {
            let mut bytes = Vec::new();
            write_hedge_csv(&hf, &mut bytes)?;
            writer.write("hedge_field.csv", "hedge", &bytes)?;
        }
        if config.outputs.credit_hedge && model.regimes.count() >= 2 {
            let bytes = credit_hedge_table(&model, &dividend, vf, &hf)?;
            writer.write("credit_hedge.csv", "hedge", &bytes)?;
        }
        hedge = Some(hf);
    }

    // --- stage: simulate
    let sim_grid = TimeGrid::new(0.0, maturity, config.numerics.mc_time_steps)?;
    let spec = EnsembleSpec::new(
        model.clone(),
        config.model.y0.clone(),
        config.model.c0,
        sim_grid,
        config.numerics.paths,
        config.numerics.seed,
    )?;
    if config.outputs.paths_csv || config.outputs.transitions_csv {
        let ensemble = spec.simulate()?;
        if config.outputs.paths_csv {
            let mut bytes = Vec::new();
            write_paths_csv(&ensemble, &mut bytes)?;
            writer.write("paths.csv", "simulate", &bytes)?;
        }
        if config.outputs.transitions_csv {
            let mut bytes = Vec::new();
            write_transitions_csv(&ensemble, &mut bytes)?;
            writer.write("transitions.csv", "simulate", &bytes)?;
        }
    }
    let diag = martingale_diagnostic(&spec)?;
    writer.write_json("martingale.json", "simulate", &diag)?;
    checks.push(CheckEntry {
        name: "martingale_diagnostics".into(),
        passed: !diag.flagged(),
        detail: format!(
            "{} quantities, {} flagged",
            diag.entries.len(),
            diag.entries.iter().filter(|e| e.flagged).count()
        ),
    });

    // --- stage: cost / risk
    if let (Some(vf), Some(hf)) = (&value_field, &hedge) {
        let risk = residual_risk(&model, &dividend, vf, hf, &spec)?;
        let strategy = RiskMinStrategy { hedge: hf, value: vf };
        let d = model.dims.assets;
        let cost_deltas = spec.map_paths(|p| {
            let c = riskmin::hedge::cost_process(&dividend, &strategy, d, p);
            Ok(c[c.len() - 1] - c[0])
        })?;
        let (sf_mean, sf_se) = mean_se(&cost_deltas);
        let sf = SelfFinancingReport {
            mean: sf_mean,
            std_error: sf_se,
            n_paths: spec.n_paths,
        };
        writer.write_json("risk_report.json", "risk", &risk)?;
        writer.write_json("self_financing.json", "risk", &sf)?;
        summary.push(SummaryItem {
            name: "residual_risk".into(),
            value: serde_json::json!({"r0": risk.r0, "se": risk.r0_se,
                "brownian": risk.source_brownian, "jump": risk.source_jump,
                "transition": risk.source_transition,
                "direct": risk.direct, "direct_se": risk.direct_se}),
            source: "risk_report.json".into(),
        });
        summary.push(SummaryItem {
            name: "mean_self_financing".into(),
            value: serde_json::json!({"mean": sf.mean, "se": sf.std_error}),
            source: "self_financing.json".into(),
        });
        let sigma = config.numerics.tolerances.mc_sigma;
        checks.push(CheckEntry {
            name: "mean_self_financing".into(),
            passed: sf_mean.abs() <= sigma * sf_se,
            detail: format!("|{sf_mean:.4e}| <= {sigma} * {sf_se:.4e}"),
        });
        if let Some(cap) = config.numerics.tolerances.max_residual_risk {
            checks.push(CheckEntry {
                name: "residual_risk_cap".into(),
                passed: risk.r0 <= cap,
                detail: format!("r0 {:.4e} <= {cap:.4e}", risk.r0),
            });
        }
    }

    // --- stage: verification probes
    let probes: Vec<Probe> = if config.numerics.probes.is_empty() {
        vec![Probe {
            t: 0.0,
            y: config.model.y0.clone(),
            c: config.model.c0,
        }]
    } else {
        config.numerics.probes.clone()
    };
    let mut entries = Vec::new();
    let sigma = config.numerics.tolerances.mc_sigma;
    for (k, probe) in probes.iter().enumerate() {
        let est = mc_value(
            &model,
            &dividend,
            probe.t,
            &probe.y,
            probe.c,
            config.numerics.probe_paths,
            &McOptions {
                n_steps: ((maturity - probe.t) / maturity
                    * config.numerics.mc_time_steps as f64)
                    .ceil()
                    .max(1.0) as usize,
                antithetic: false,
            },
            config.numerics.seed.wrapping_add(1000 + k as u64),
        )?;
        let reference = value_field
            .as_ref()
            .map(|vf| vf.value_at(probe.t, &probe.y, probe.c, QueryMode::Strict))
            .transpose()?;
        let flagged = reference
            .map(|r| (est.estimate - r).abs() > sigma * est.std_error)
            .unwrap_or(false);
        entries.push(ProbeEntry {
            t: probe.t,
            y: probe.y.clone(),
            c: probe.c,
            estimate: est.estimate,
            std_error: est.std_error,
            reference,
            flagged,
        });
    }
    let n_flagged = entries.iter().filter(|e| e.flagged).count();
    let probe_report = ProbeReport {
        probes: entries,
        n_flagged,
    };
    writer.write_json("probe_report.json", "verify", &probe_report)?;
    for (k, e) in probe_report.probes.iter().enumerate() {
        summary.push(SummaryItem {
            name: format!("value_probe_{k}"),
            value: serde_json::json!({
                "t": e.t, "y": e.y, "c": e.c,
                "mc": e.estimate, "se": e.std_error, "solver": e.reference,
            }),
            source: "probe_report.json".into(),
        });
    }
    if value_field.is_some() {
        checks.push(CheckEntry {
            name: "solver_vs_mc_probes".into(),
            passed: n_flagged <= config.numerics.tolerances.probe_flags_allowed,
            detail: format!(
                "{n_flagged}/{} probes beyond {} SE (allowed {})",
                probe_report.probes.len(),
                sigma,
                config.numerics.tolerances.probe_flags_allowed
            ),
        });
    }

    let manifest = Manifest {
        scenario: scenario.to_string(),
        seed: config.numerics.seed,
        artifacts: writer.entries.clone(),
        checks,
        summary,
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Config {
        path: "manifest.json".into(),
        detail: e.to_string(),
    })?;
    std::fs::write(dir.join("manifest.json"), manifest_bytes)?;
    Ok((manifest, dir))
}

/// Strategy hedging the rating-transition risk alone, tabulated on the
/// hedge grid. Nodes whose switch shifts leave the value field are skipped.
fn credit_hedge_table(
    model: &riskmin::model::MarketModel,
    dividend: &riskmin::model::DividendSpec,
    vf: &riskmin::pide::ValueField,
    hf: &riskmin::hedge::HedgeField,
) -> Result<Vec<u8>, CliError> {
    use std::io::Write;
    let mut out = Vec::new();
    write!(out, "t")?;
    for a in 1..=vf.grid.dim() {
        write!(out, ",y{a}")?;
    }
    write!(out, ",c")?;
    for k in 1..=model.dims.assets {
        write!(out, ",phi{k}")?;
    }
    writeln!(out)?;
    for level in 0..hf.tgrid.n_nodes() {
        let t = hf.tgrid.node(level);
        for c in 1..=model.regimes.count() {
            for node in vf.grid.node_indices() {
                let y = vf.grid.coords(node);
                let Ok(phi) = riskmin::hedge::credit_delta_hedge(model, dividend, vf, t, &y, c)
                else {
                    continue;
                };
                write!(out, "{t}")?;
                for coord in &y {
                    write!(out, ",{coord}")?;
                }
                write!(out, ",{c}")?;
                for k in 0..model.dims.assets {
                    write!(out, ",{}", phi[k])?;
                }
                writeln!(out)?;
            }
        }
    }
    Ok(out)
}

/// Writes the rendered summary next to the manifest and returns it.
pub fn emit_report(manifest: &Manifest, dir: &Path) -> Result<String, CliError> {
    let text = crate::manifest::render_summary(manifest);
    std::fs::write(dir.join("summary.txt"), &text)?;
    Ok(text)
}
