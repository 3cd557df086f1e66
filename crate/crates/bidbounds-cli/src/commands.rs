//! Command implementations and the process exit contract.
//!
//! Every command returns [`Outcome`]: `Done` maps to exit code 0 and
//! `Refuted` to exit code 2, reserved for the substantive finding that an
//! identified set is empty. Errors map to exit code 1. Result tables land
//! in the `--out` directory together with a `manifest.json` recording the
//! full parameterization; reruns with identical inputs, flags, and seeds
//! are byte-identical.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter};
use std::path::Path;

use thiserror::Error;

use bidbounds::bounds::{bbm_vs_sharp_report, BoundsError};
use bidbounds::inference::{
    bayesian_bootstrap_intervals, bayesian_bootstrap_masks, empirical_distribution,
    nonparam_moment_interval, parametric_hoeffding_set, subsampling_confidence_set, BidSample,
    InferenceError, SubsampleConfig,
};
use bidbounds::lp::{self, FEASIBILITY_TOL, LpError};
use bidbounds::model::{MetricFn, ModelError, SupportGrid, UtilityKernel};
use bidbounds::montecarlo::{family_by_name, run_experiment, ExperimentConfig, McError};
use bidbounds::parametric::{
    parametric_identified_set, parametric_minimax_profile, Family, ParametricError, Theta,
    ThetaGrid,
};
use bidbounds::sharp::{
    build_bce_cv, build_bce_ipv, build_bce_pv, counterfactual_bounds, ipv_symmetric_moment_bounds,
    ipv_symmetry_test, membership, moment_bounds, BceSystem, BidDistribution, ConstraintSystem,
    MomentBounds, RowLabel, SharpError,
};

use crate::args::{
    BbmCompareArgs, BootstrapArgs, Cli, Command, CounterfactualArgs, GridArgs, HeatmapArgs,
    IdentifyArgs, McRunArgs, ModelArg, MomentArg, OcsPrepArgs, ParametricSetArgs, RuleArg,
    SubsampleArgs, SymmetryTestArgs,
};
use crate::emit::{format_f64, write_csv, write_json, write_manifest};
use crate::gridspec::{parse_levels, GridSpecError};
use crate::ingest::{ingest, IngestError};
use crate::prep::{preprocess, PrepError, PreprocessSpec};
use crate::sample::{table_to_sample, SampleError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("specify --grid-h or both --values and --bids")]
    MissingGrid,
    #[error("bad grid: {0}")]
    GridSpec(#[from] GridSpecError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Prep(#[from] PrepError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("bad candidate distribution: {0}")]
    BadPi(String),
    #[error("bad metric {0:?}: use revenue, welfare, or constant:X")]
    BadMetric(String),
    #[error("{0}")]
    Unsupported(&'static str),
    #[error("BIDBOUNDS_THREADS must be a positive integer, got {0:?}")]
    ThreadEnv(String),
    #[error("cannot parse {path}: {source}")]
    Config { path: String, source: toml::de::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sharp(#[from] SharpError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Parametric(#[from] ParametricError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// What a finished command means for the process exit code.
#[derive(Debug)]
pub enum Outcome {
    Done,
    /// The queried identified set is empty; the string says which one.
    Refuted(String),
}

/// Validates the only environment variable the program consults. The
/// solver is single-threaded, so the value is reserved for forward
/// compatibility, but garbage should fail loudly rather than be ignored.
pub fn check_thread_env() -> Result<(), CliError> {
    match std::env::var("BIDBOUNDS_THREADS") {
        Ok(s) => match s.trim().parse::<std::num::NonZeroUsize>() {
            Ok(_) => Ok(()),
            Err(_) => Err(CliError::ThreadEnv(s)),
        },
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(std::env::VarError::NotUnicode(_)) => Err(CliError::ThreadEnv("<non-unicode>".into())),
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    check_thread_env()?;
    match &cli.command {
        Command::Identify(args) => identify(args),
        Command::ParametricSet(args) => parametric_set(args),
        Command::Counterfactual(args) => counterfactual(args),
        Command::McRun(args) => mc_run(args),
        Command::Heatmap(args) => heatmap(args),
        Command::OcsPrep(args) => ocs_prep(args),
        Command::BbmCompare(args) => bbm_compare(args),
        Command::Bootstrap(args) => bootstrap(args),
        Command::Subsample(args) => subsample(args),
        Command::SymmetryTest(args) => symmetry_test(args),
    }
}

fn rule_kernel(rule: RuleArg) -> UtilityKernel {
    match rule {
        RuleArg::First => UtilityKernel::first_price(),
        RuleArg::Second => UtilityKernel::second_price(),
    }
}

fn rule_name(rule: RuleArg) -> &'static str {
    match rule {
        RuleArg::First => "first-price",
        RuleArg::Second => "second-price",
    }
}

fn build_grid(args: &GridArgs) -> Result<(SupportGrid, UtilityKernel), CliError> {
    let grid = match (args.grid_h, &args.values, &args.bids) {
        (Some(h), _, _) => SupportGrid::integer(args.players, h)?,
        (None, Some(values), Some(bids)) => {
            SupportGrid::new(args.players, parse_levels(values)?, parse_levels(bids)?)?
        }
        _ => return Err(CliError::MissingGrid),
    };
    Ok((grid, rule_kernel(args.rule)))
}

fn load_sample(
    data: &Path,
    grid: &SupportGrid,
) -> Result<(BidSample, BidDistribution), CliError> {
    let table = ingest(data)?;
    let sample = table_to_sample(&table, grid)?;
    let phi = empirical_distribution(&sample)?;
    Ok((sample, phi))
}

fn write_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Write { path: path.display().to_string(), source }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(write_err(dir))
}

fn moment_fn(moment: MomentArg) -> (&'static str, fn(f64) -> f64) {
    match moment {
        MomentArg::Mean => ("mean", |v| v),
        MomentArg::Second => ("second moment", |v| v * v),
    }
}

/// Parses one comma-separated probability mass over `expected` points;
/// tolerates rounding in the sum and renormalizes.
fn parse_mass(spec: &str, expected: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let mut mass = Vec::new();
    for token in spec.split(',') {
        let x: f64 = token
            .trim()
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite() && *x >= 0.0)
            .ok_or_else(|| {
                CliError::BadPi(format!("{what}: {token:?} is not a nonnegative number"))
            })?;
        mass.push(x);
    }
    if mass.len() != expected {
        return Err(CliError::BadPi(format!(
            "{what} needs {expected} masses, got {}",
            mass.len()
        )));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(CliError::BadPi(format!("{what} sums to {total}, expected 1")));
    }
    for x in &mut mass {
        *x /= total;
    }
    Ok(mass)
}

/// Per-player marginals separated by `;`; a single group is shared.
fn parse_marginals(
    spec: &str,
    players: usize,
    num_values: usize,
) -> Result<Vec<Vec<f64>>, CliError> {
    let groups: Vec<&str> = spec.split(';').collect();
    if groups.len() != 1 && groups.len() != players {
        return Err(CliError::BadPi(format!(
            "expected 1 or {players} `;`-separated marginals, got {}",
            groups.len()
        )));
    }
    let mut out = Vec::with_capacity(players);
    for (i, group) in groups.iter().enumerate() {
        out.push(parse_mass(group, num_values, &format!("marginal {i}"))?);
    }
    while out.len() < players {
        out.push(out[0].clone());
    }
    Ok(out)
}

/// Equality rows pinning each player's value marginal in the
/// private-value layout: `Σ_p φ(p) Σ_{v⃗: v⃗_i = v} x(v⃗|p) = ρ_i(v)`.
fn pin_pv_marginals(
    bce: &BceSystem,
    phi: &BidDistribution,
    grid: &SupportGrid,
    marginals: &[Vec<f64>],
) -> ConstraintSystem {
    let n = grid.n();
    let nv = grid.values().len();
    let per = nv.pow(n as u32);
    let mut sys = bce.system().clone();
    for (i, rho) in marginals.iter().enumerate() {
        // Value profiles are flattened row-major with player 0 outermost.
        let stride = nv.pow((n - 1 - i) as u32);
        for v in 0..nv {
            let mut coeffs = Vec::new();
            for (p, &w) in phi.probs().iter().enumerate() {
                for flat in 0..per {
                    if flat / stride % nv == v {
                        coeffs.push((p * per + flat, -w));
                    }
                }
            }
            sys.push_equality(
                |positive| RowLabel::MarginalConsistency { player: i, v, positive },
                coeffs,
                rho[v],
            );
        }
    }
    sys
}

/// Equality rows pinning one shared marginal in the independent-private-
/// value layout: `Σ_p φ(p) x_i(v|p) = ρ(v)` for every player.
fn pin_ipv_marginal(
    bce: &BceSystem,
    phi: &BidDistribution,
    grid: &SupportGrid,
    rho: &[f64],
) -> ConstraintSystem {
    let n = grid.n();
    let nv = grid.values().len();
    let s = phi.support_size();
    let mut sys = bce.system().clone();
    for i in 0..n {
        for v in 0..nv {
            let coeffs: Vec<(usize, f64)> = phi
                .probs()
                .iter()
                .enumerate()
                .map(|(p, &w)| ((i * s + p) * nv + v, -w))
                .collect();
            sys.push_equality(
                |positive| RowLabel::MarginalConsistency { player: i, v, positive },
                coeffs,
                rho[v],
            );
        }
    }
    sys
}

fn dump_lp(path: &Path, sys: &ConstraintSystem, sigma: f64) -> Result<(), CliError> {
    let mut file = BufWriter::new(File::create(path).map_err(write_err(path))?);
    sys.feasibility_lp(sigma).write_lp_format(&mut file).map_err(write_err(path))?;
    println!("wrote feasibility program to {}", path.display());
    Ok(())
}

fn thinned_thetas(family: &Family, stride: usize) -> Result<ThetaGrid, CliError> {
    let full = ThetaGrid::default_for(family);
    if stride <= 1 {
        return Ok(full);
    }
    let points: Vec<Theta> = full
        .points()
        .iter()
        .enumerate()
        .filter(|(k, _)| k % stride == 0)
        .map(|(_, t)| Theta(t.coords().to_vec()))
        .collect();
    Ok(ThetaGrid::new(family, points)?)
}

/// Columns for one parameter point: index, then each coordinate.
fn theta_cells(index: usize, theta: &Theta) -> Vec<String> {
    let mut cells = vec![index.to_string()];
    cells.extend(theta.coords().iter().map(|&c| format_f64(c)));
    cells
}

fn theta_header(family: &Family) -> Vec<&'static str> {
    let mut header = vec!["index"];
    header.extend_from_slice(family.param_names());
    header
}

fn identify(args: &IdentifyArgs) -> Result<Outcome, CliError> {
    let (grid, u) = build_grid(&args.grid)?;
    let (sample, phi) = load_sample(&args.data, &grid)?;
    let nv = grid.values().len();
    let model_name = match args.model {
        ModelArg::Cv => "common values",
        ModelArg::Pv => "private values",
        ModelArg::Ipv => "symmetric independent private values",
    };
    println!(
        "{} observations on {} support profiles; {} auctions, {}",
        sample.len(),
        phi.support_size(),
        rule_name(args.grid.rule),
        model_name
    );
    if args.delta.is_some() && args.model != ModelArg::Cv {
        return Err(CliError::Unsupported(
            "--delta (confidence intervals) applies to the cv model",
        ));
    }
    if args.delta.is_some() && args.moment != MomentArg::Mean {
        return Err(CliError::Unsupported("--delta supports --moment mean"));
    }

    // Rows for the optional result table: query, included, lower, upper,
    // minimax. Missing entries stay blank.
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut refutation: Option<String> = None;
    let note = |refutation: &mut Option<String>, message: String| {
        refutation.get_or_insert(message);
    };

    match args.model {
        ModelArg::Cv => {
            let bce = build_bce_cv(&phi, &grid, &u)?;
            let mut pinned = None;
            if let Some(spec) = &args.pi {
                let pi = parse_mass(spec, nv, "cv candidate")?;
                let m = membership(&bce, &pi, args.tol)?;
                let verdict = if m.included { "included" } else { "excluded" };
                println!(
                    "membership: {verdict} (minimax {:.9}, tolerance {})",
                    m.minimax,
                    format_f64(args.tol)
                );
                rows.push(vec![
                    "membership".into(),
                    m.included.to_string(),
                    String::new(),
                    String::new(),
                    format_f64(m.minimax),
                ]);
                if !m.included {
                    note(
                        &mut refutation,
                        format!(
                            "candidate excluded at tolerance {} (minimax {:.9})",
                            format_f64(args.tol),
                            m.minimax
                        ),
                    );
                }
                pinned = Some(bce.with_value_consistency(&pi)?);
            }
            let (label, f) = moment_fn(args.moment);
            if let Some(delta) = args.delta {
                let mc = nonparam_moment_interval(&sample, &grid, &u, f, delta)?;
                match mc.interval {
                    Some(interval) => {
                        println!(
                            "{label} confidence interval [{:.6}, {:.6}] \
                             (delta {}, row tolerance {:.6}, widening {:.6})",
                            interval.lower,
                            interval.upper,
                            format_f64(delta),
                            mc.schedule.sigma,
                            mc.schedule.epsilon
                        );
                        rows.push(vec![
                            "confidence".into(),
                            "true".into(),
                            format_f64(interval.lower),
                            format_f64(interval.upper),
                            format_f64(mc.minimax),
                        ]);
                    }
                    None => {
                        println!(
                            "confidence set empty at delta {}: smallest feasible tolerance {:.6}",
                            format_f64(delta),
                            mc.minimax
                        );
                        rows.push(vec![
                            "confidence".into(),
                            "false".into(),
                            String::new(),
                            String::new(),
                            format_f64(mc.minimax),
                        ]);
                        note(
                            &mut refutation,
                            format!("confidence set empty at delta {}", format_f64(delta)),
                        );
                    }
                }
            } else {
                let fv: Vec<f64> = grid.values().iter().map(|&v| f(v)).collect();
                report_moment(
                    label,
                    args.tol,
                    moment_bounds(&bce, &fv, args.tol)?,
                    &mut rows,
                    |msg| note(&mut refutation, msg),
                );
            }
            if let Some(path) = &args.lp_dump {
                dump_lp(path, pinned.as_ref().unwrap_or_else(|| bce.system()), args.tol)?;
            }
        }
        ModelArg::Pv => {
            let bce = build_bce_pv(&phi, &grid, &u)?;
            let (sys, query): (ConstraintSystem, &str) = match &args.pi {
                Some(spec) => {
                    let marginals = parse_marginals(spec, grid.n(), nv)?;
                    (pin_pv_marginals(&bce, &phi, &grid, &marginals), "membership")
                }
                None => (bce.system().clone(), "consistency"),
            };
            let minimax = lp::minimax_value(&sys)?;
            let included = minimax <= args.tol + FEASIBILITY_TOL;
            let verdict = match (args.pi.is_some(), included) {
                (true, true) => "included",
                (true, false) => "excluded",
                (false, true) => "consistent",
                (false, false) => "refuted",
            };
            println!(
                "{query}: {verdict} (minimax {minimax:.9}, tolerance {})",
                format_f64(args.tol)
            );
            rows.push(vec![
                query.into(),
                included.to_string(),
                String::new(),
                String::new(),
                format_f64(minimax),
            ]);
            if !included {
                note(
                    &mut refutation,
                    format!("private-value {query} fails at tolerance {}", format_f64(args.tol)),
                );
            }
            if let Some(path) = &args.lp_dump {
                dump_lp(path, &sys, args.tol)?;
            }
        }
        ModelArg::Ipv => {
            if let Some(spec) = &args.pi {
                if spec.contains(';') {
                    return Err(CliError::Unsupported(
                        "the ipv model takes a single shared marginal",
                    ));
                }
                let rho = parse_mass(spec, nv, "ipv marginal")?;
                let bce = build_bce_ipv(&phi, &grid, &u)?;
                let sys = pin_ipv_marginal(&bce, &phi, &grid, &rho);
                let minimax = lp::minimax_value(&sys)?;
                let included = minimax <= args.tol + FEASIBILITY_TOL;
                println!(
                    "membership: {} (minimax {minimax:.9}, tolerance {})",
                    if included { "included" } else { "excluded" },
                    format_f64(args.tol)
                );
                rows.push(vec![
                    "membership".into(),
                    included.to_string(),
                    String::new(),
                    String::new(),
                    format_f64(minimax),
                ]);
                if !included {
                    note(
                        &mut refutation,
                        format!(
                            "shared marginal excluded at tolerance {}",
                            format_f64(args.tol)
                        ),
                    );
                }
                if let Some(path) = &args.lp_dump {
                    dump_lp(path, &sys, args.tol)?;
                }
            } else {
                if args.lp_dump.is_some() {
                    return Err(CliError::Unsupported(
                        "--lp-dump under the ipv model needs --pi; the moment \
                         query does not expose its program",
                    ));
                }
                let (label, f) = moment_fn(args.moment);
                report_moment(
                    label,
                    args.tol,
                    ipv_symmetric_moment_bounds(&phi, &grid, &u, f, args.tol)?,
                    &mut rows,
                    |msg| note(&mut refutation, msg),
                );
            }
        }
    }

    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        let meta = [
            ("tolerance", format_f64(args.tol)),
            ("delta", args.delta.map(format_f64).unwrap_or_else(|| "none".into())),
            ("n_obs", sample.len().to_string()),
            ("feasibility_tol", format_f64(FEASIBILITY_TOL)),
            ("model", format!("{:?}", args.model).to_lowercase()),
            ("rule", rule_name(args.grid.rule).into()),
        ];
        let path = dir.join("identify.csv");
        write_csv(&path, &meta, &["query", "included", "lower", "upper", "minimax"], &rows)
            .map_err(write_err(&path))?;
        let mut params = grid_params(&args.grid, &args.data);
        params.insert("model".into(), format!("{:?}", args.model).to_lowercase());
        params.insert("tol".into(), format_f64(args.tol));
        params.insert(
            "delta".into(),
            args.delta.map(format_f64).unwrap_or_else(|| "none".into()),
        );
        params.insert("moment".into(), format!("{:?}", args.moment).to_lowercase());
        params.insert("pi".into(), args.pi.clone().unwrap_or_else(|| "none".into()));
        write_manifest(dir, "identify", params).map_err(write_err(dir))?;
    }

    Ok(match refutation {
        Some(message) => Outcome::Refuted(message),
        None => Outcome::Done,
    })
}

/// Prints and records one sharp-moment result; reports emptiness.
fn report_moment(
    label: &str,
    tol: f64,
    bounds: MomentBounds,
    rows: &mut Vec<Vec<String>>,
    mut refute: impl FnMut(String),
) {
    match bounds {
        MomentBounds::Interval { interval, minimax } => {
            println!(
                "{label} in [{:.6}, {:.6}] (tolerance {}, minimax {minimax:.9})",
                interval.lower,
                interval.upper,
                format_f64(tol)
            );
            rows.push(vec![
                label.replace(' ', "_"),
                "true".into(),
                format_f64(interval.lower),
                format_f64(interval.upper),
                format_f64(minimax),
            ]);
        }
        MomentBounds::Empty { min_tolerance } => {
            println!(
                "no consistent value distribution at tolerance {}; \
                 smallest feasible tolerance {min_tolerance:.6}",
                format_f64(tol)
            );
            rows.push(vec![
                label.replace(' ', "_"),
                "false".into(),
                String::new(),
                String::new(),
                format_f64(min_tolerance),
            ]);
            refute(format!("identified set empty at tolerance {}", format_f64(tol)));
        }
    }
}

fn grid_params(grid: &GridArgs, data: &Path) -> BTreeMap<String, String> {
    let mut params = BTreeMap::new();
    params.insert("data".into(), data.display().to_string());
    params.insert(
        "grid_h".into(),
        grid.grid_h.map(|h| h.to_string()).unwrap_or_else(|| "none".into()),
    );
    params.insert("values".into(), grid.values.clone().unwrap_or_else(|| "none".into()));
    params.insert("bids".into(), grid.bids.clone().unwrap_or_else(|| "none".into()));
    params.insert("players".into(), grid.players.to_string());
    params.insert("rule".into(), rule_name(grid.rule).into());
    params
}

fn parametric_set(args: &ParametricSetArgs) -> Result<Outcome, CliError> {
    let (grid, u) = build_grid(&args.grid)?;
    let (sample, phi) = load_sample(&args.data, &grid)?;
    let family = family_by_name(&args.family, grid.h())?;
    let thetas = thinned_thetas(&family, args.theta_stride)?;
    let (set, sigma) = match args.delta {
        Some(delta) => {
            let (set, schedule) =
                parametric_hoeffding_set(&sample, &grid, &u, &family, &thetas, delta)?;
            (set, schedule.sigma)
        }
        None => {
            (parametric_identified_set(&phi, &grid, &u, &family, &thetas, args.tol)?, args.tol)
        }
    };
    let mask = set.mask().expect("parametric sweeps produce grid masks");
    let included = mask.count_included();
    println!(
        "{included} of {} parameter points at row tolerance {:.6}",
        thetas.len(),
        sigma
    );

    ensure_dir(&args.out)?;
    let meta = [
        ("tolerance", format_f64(sigma)),
        ("delta", args.delta.map(format_f64).unwrap_or_else(|| "none".into())),
        ("n_obs", sample.len().to_string()),
        ("feasibility_tol", format_f64(set.feasibility_tol)),
        ("family", args.family.clone()),
        ("theta_points", thetas.len().to_string()),
    ];
    let mut header = theta_header(&family);
    header.extend_from_slice(&["minimax", "included"]);
    let rows: Vec<Vec<String>> = thetas
        .points()
        .iter()
        .enumerate()
        .map(|(k, theta)| {
            let mut cells = theta_cells(k, theta);
            cells.push(format_f64(mask.minimax[k]));
            cells.push(mask.included[k].to_string());
            cells
        })
        .collect();
    let path = args.out.join("parametric_set.csv");
    write_csv(&path, &meta, &header, &rows).map_err(write_err(&path))?;

    let mut params = grid_params(&args.grid, &args.data);
    params.insert("family".into(), args.family.clone());
    params.insert("tol".into(), format_f64(args.tol));
    params.insert(
        "delta".into(),
        args.delta.map(format_f64).unwrap_or_else(|| "none".into()),
    );
    params.insert("theta_stride".into(), args.theta_stride.to_string());
    write_manifest(&args.out, "parametric-set", params).map_err(write_err(&args.out))?;

    Ok(if included == 0 {
        Outcome::Refuted(format!(
            "parametric identified set is empty at row tolerance {:.6}",
            sigma
        ))
    } else {
        Outcome::Done
    })
}

fn parse_metric(
    spec: &str,
    alt: &UtilityKernel,
    grid: &SupportGrid,
) -> Result<MetricFn, CliError> {
    match spec {
        "revenue" => Ok(MetricFn::revenue(alt, grid)?),
        "welfare" => Ok(MetricFn::welfare(grid)?),
        other => match other.strip_prefix("constant:").and_then(|x| x.parse::<f64>().ok()) {
            Some(c) if c.is_finite() => Ok(MetricFn::constant(c)?),
            _ => Err(CliError::BadMetric(spec.to_string())),
        },
    }
}

fn counterfactual(args: &CounterfactualArgs) -> Result<Outcome, CliError> {
    let (grid, u) = build_grid(&args.grid)?;
    let (sample, phi) = load_sample(&args.data, &grid)?;
    let alt = rule_kernel(args.alt_rule);
    let metric = parse_metric(&args.metric, &alt, &grid)?;
    let result = counterfactual_bounds(&phi, &grid, &u, &alt, &metric, args.tol)?;

    let mut rows = Vec::new();
    let outcome = match result.interval {
        Some(interval) => {
            println!(
                "{} under {} in [{:.6}, {:.6}] (tolerance {}, minimax {:.9})",
                args.metric,
                rule_name(args.alt_rule),
                interval.lower,
                interval.upper,
                format_f64(args.tol),
                result.minimax
            );
            rows.push(vec![
                args.metric.clone(),
                rule_name(args.alt_rule).into(),
                format_f64(interval.lower),
                format_f64(interval.upper),
                format_f64(result.minimax),
            ]);
            Outcome::Done
        }
        None => {
            println!(
                "coupled system infeasible at tolerance {}; smallest feasible tolerance {:.6}",
                format_f64(args.tol),
                result.minimax
            );
            Outcome::Refuted(format!(
                "no consistent counterfactual at tolerance {}",
                format_f64(args.tol)
            ))
        }
    };

    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        let meta = [
            ("tolerance", format_f64(args.tol)),
            ("n_obs", sample.len().to_string()),
            ("feasibility_tol", format_f64(FEASIBILITY_TOL)),
            ("metric", args.metric.clone()),
            ("alt_rule", rule_name(args.alt_rule).into()),
        ];
        let path = dir.join("counterfactual.csv");
        write_csv(
            &path,
            &meta,
            &["metric", "alt_rule", "lower", "upper", "minimax"],
            &rows,
        )
        .map_err(write_err(&path))?;
        let mut params = grid_params(&args.grid, &args.data);
        params.insert("metric".into(), args.metric.clone());
        params.insert("alt_rule".into(), rule_name(args.alt_rule).into());
        params.insert("tol".into(), format_f64(args.tol));
        write_manifest(dir, "counterfactual", params).map_err(write_err(dir))?;
    }
    Ok(outcome)
}

fn mc_run(args: &McRunArgs) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Write {
        path: args.config.display().to_string(),
        source,
    })?;
    let config: ExperimentConfig = toml::from_str(&text).map_err(|source| CliError::Config {
        path: args.config.display().to_string(),
        source,
    })?;
    let report = run_experiment(&config)?;

    ensure_dir(&args.out)?;
    let json_path = args.out.join("report.json");
    write_json(&json_path, &report).map_err(write_err(&json_path))?;

    let meta = [
        ("delta", format_f64(config.delta)),
        ("alpha", format_f64(config.alpha)),
        ("seed", config.seed.to_string()),
        ("feasibility_tol", format_f64(FEASIBILITY_TOL)),
        ("family", config.family.clone()),
        ("theta_points", report.grid_points.to_string()),
    ];
    let header = [
        "n_obs",
        "sigma",
        "epsilon",
        "set_count",
        "excess_count",
        "excess_mass",
        "mean_lower",
        "mean_upper",
        "sd_lower",
        "sd_upper",
        "subsample_tau_plus",
        "subsample_count",
        "subsample_excess",
        "bernstein_count",
    ];
    let rows: Vec<Vec<String>> = report
        .estimates
        .iter()
        .map(|e| {
            let (mean_lo, mean_hi) = match e.mean_interval {
                Some((lo, hi)) => (format_f64(lo), format_f64(hi)),
                None => (String::new(), String::new()),
            };
            let (sd_lo, sd_hi) = match e.sd_interval {
                Some((lo, hi)) => (format_f64(lo), format_f64(hi)),
                None => (String::new(), String::new()),
            };
            let (tau, sub_count, sub_excess) = match &e.subsampling {
                Some(s) => {
                    (format_f64(s.tau_plus), s.count.to_string(), s.excess.to_string())
                }
                None => (String::new(), String::new(), String::new()),
            };
            vec![
                e.n_obs.to_string(),
                format_f64(e.sigma),
                format_f64(e.epsilon),
                e.hoeffding_count.to_string(),
                e.hoeffding_excess.to_string(),
                format_f64(e.excess_mass),
                mean_lo,
                mean_hi,
                sd_lo,
                sd_hi,
                tau,
                sub_count,
                sub_excess,
                e.bernstein_count.map(|c| c.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    let csv_path = args.out.join("estimates.csv");
    write_csv(&csv_path, &meta, &header, &rows).map_err(write_err(&csv_path))?;

    let mut params = BTreeMap::new();
    params.insert("config".into(), args.config.display().to_string());
    params.insert("family".into(), config.family.clone());
    params.insert("theta0".into(), format!("{:?}", config.theta0));
    params.insert("grid_h".into(), config.grid.h.to_string());
    params.insert("players".into(), config.grid.n.to_string());
    params.insert("seed".into(), config.seed.to_string());
    params.insert("delta".into(), format_f64(config.delta));
    params.insert("alpha".into(), format_f64(config.alpha));
    params.insert("n_list".into(), format!("{:?}", config.n_list));
    params.insert("theta_stride".into(), config.theta_stride.to_string());
    write_manifest(&args.out, "mc-run", params).map_err(write_err(&args.out))?;

    println!(
        "population set: {} of {} points (generating point included: {}); \
         {} sample sizes estimated",
        report.population.set_count,
        report.grid_points,
        report.population.theta0_included,
        report.estimates.len()
    );
    Ok(if report.population.set_count == 0 {
        Outcome::Refuted("population identified set is empty".into())
    } else {
        Outcome::Done
    })
}

fn heatmap(args: &HeatmapArgs) -> Result<Outcome, CliError> {
    let (grid, u) = build_grid(&args.grid)?;
    let (sample, phi) = load_sample(&args.data, &grid)?;
    let family = family_by_name(&args.family, grid.h())?;
    let thetas = thinned_thetas(&family, args.theta_stride)?;
    let bce = build_bce_cv(&phi, &grid, &u)?;
    let profile = parametric_minimax_profile(&bce, &family, &thetas, grid.values())?;

    ensure_dir(&args.out)?;
    let meta = [
        ("tolerance", "0".to_string()),
        ("n_obs", sample.len().to_string()),
        ("feasibility_tol", format_f64(FEASIBILITY_TOL)),
        ("family", args.family.clone()),
        ("theta_points", thetas.len().to_string()),
    ];
    let mut header = theta_header(&family);
    header.push("value");
    let rows: Vec<Vec<String>> = thetas
        .points()
        .iter()
        .zip(&profile)
        .enumerate()
        .map(|(k, (theta, &q))| {
            let mut cells = theta_cells(k, theta);
            // Feasible points sit at solver noise below zero; clamp.
            cells.push(format_f64(q.max(0.0)));
            cells
        })
        .collect();
    let path = args.out.join("heatmap.csv");
    write_csv(&path, &meta, &header, &rows).map_err(write_err(&path))?;

    let mut params = grid_params(&args.grid, &args.data);
    params.insert("family".into(), args.family.clone());
    params.insert("theta_stride".into(), args.theta_stride.to_string());
    write_manifest(&args.out, "heatmap", params).map_err(write_err(&args.out))?;
    println!("wrote {} parameter points to {}", thetas.len(), path.display());
    Ok(Outcome::Done)
}

fn ocs_prep(args: &OcsPrepArgs) -> Result<Outcome, CliError> {
    let table = ingest(&args.data)?;
    let spec = PreprocessSpec {
        bidders: args.bidders,
        per_acre: args.per_acre,
        threshold: args.threshold,
        grid_h: args.grid_h,
        rounding: args.rounding,
        seed: args.seed,
    };
    let (prepared, audit) = preprocess(&table, &spec)?;

    ensure_dir(&args.out)?;
    let meta = [
        ("grid_h", prepared.grid_h.to_string()),
        ("bid_cap", prepared.bid_cap.to_string()),
        ("scale_factor", format_f64(prepared.scale_factor)),
        ("threshold", format_f64(args.threshold)),
        ("per_acre", args.per_acre.to_string()),
        ("rounding", spec.rounding.name().to_string()),
        ("seed", args.seed.to_string()),
        ("n_obs", audit.retained.to_string()),
        ("feasibility_tol", format_f64(FEASIBILITY_TOL)),
    ];
    let rows: Vec<Vec<String>> = prepared
        .auctions
        .iter()
        .flat_map(|a| {
            a.bidder_ids.iter().zip(&a.levels).map(|(bidder, &level)| {
                vec![a.id.clone(), bidder.clone(), level.to_string()]
            })
        })
        .collect();
    let csv_path = args.out.join("prepared.csv");
    write_csv(&csv_path, &meta, &["auction_id", "bidder_id", "bid"], &rows)
        .map_err(write_err(&csv_path))?;
    let audit_path = args.out.join("audit.json");
    write_json(&audit_path, &audit).map_err(write_err(&audit_path))?;

    let mut params = BTreeMap::new();
    params.insert("data".into(), args.data.display().to_string());
    params.insert("bidders".into(), args.bidders.to_string());
    params.insert("per_acre".into(), args.per_acre.to_string());
    params.insert("threshold".into(), format_f64(args.threshold));
    params.insert("grid_h".into(), args.grid_h.to_string());
    params.insert("rounding".into(), spec.rounding.name().to_string());
    params.insert("seed".into(), args.seed.to_string());
    write_manifest(&args.out, "ocs-prep", params).map_err(write_err(&args.out))?;

    println!(
        "retained {} of {} auctions ({} failed the bidder filter, {} over the threshold)",
        audit.retained, audit.input_auctions, audit.dropped_bidder_filter,
        audit.dropped_threshold
    );
    println!(
        "scale factor {:.9} maps the largest retained bid {:.2} onto level {}",
        audit.scale_factor, audit.max_retained_bid, audit.bid_cap
    );
    println!(
        "retained normalized bids: mean {:.2}, sd {:.2}",
        audit.per_acre_mean, audit.per_acre_sd
    );
    Ok(Outcome::Done)
}

fn bbm_compare(args: &BbmCompareArgs) -> Result<Outcome, CliError> {
    let (grid, u) = build_grid(&args.grid)?;
    let (sample, phi) = load_sample(&args.data, &grid)?;
    let report = match bbm_vs_sharp_report(&phi, &grid, &u) {
        Ok(report) => report,
        Err(BoundsError::NotRationalizable) => {
            return Ok(Outcome::Refuted(
                "observed bids admit no consistent value distribution".into(),
            ));
        }
        Err(e) => return Err(e.into()),
    };
    println!("expected max bid: {:.6}", report.expected_max_bid);
    println!("sharp mean upper bound: {:.6}", report.sharp_upper);
    println!("closed-form mean bound (general): {:.6}", report.bbm_general);
    if let Some(two) = report.bbm_two_bidder {
        println!("closed-form mean bound (two bidders): {two:.6}");
    }
    println!("two-point bound: {:.6}", report.bbm_two_point);
    if let Some(ratio) = report.ratio_two_point_to_sharp {
        println!("ratio two-point to sharp: {ratio:.6}");
    }
    println!("grid step: {}", format_f64(report.grid_step));

    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        let meta = [
            ("tolerance", "0".to_string()),
            ("n_obs", sample.len().to_string()),
            ("feasibility_tol", format_f64(FEASIBILITY_TOL)),
        ];
        let header = [
            "sharp_upper",
            "expected_max_bid",
            "bbm_general",
            "bbm_two_bidder",
            "bbm_two_point",
            "ratio_two_point_to_sharp",
            "grid_step",
        ];
        let row = vec![
            format_f64(report.sharp_upper),
            format_f64(report.expected_max_bid),
            format_f64(report.bbm_general),
            report.bbm_two_bidder.map(format_f64).unwrap_or_default(),
            format_f64(report.bbm_two_point),
            report.ratio_two_point_to_sharp.map(format_f64).unwrap_or_default(),
            format_f64(report.grid_step),
        ];
        let path = dir.join("bbm.csv");
        write_csv(&path, &meta, &header, &[row]).map_err(write_err(&path))?;
        write_manifest(dir, "bbm-compare", grid_params(&args.grid, &args.data))
            .map_err(write_err(dir))?;
    }
    Ok(Outcome::Done)
}

fn bootstrap(args: &BootstrapArgs) -> Result<Outcome, CliError> {
    let (grid, u) = build_grid(&args.grid)?;
    let (sample, _) = load_sample(&args.data, &grid)?;
    ensure_dir(&args.out)?;
    let common_meta = [
        ("tolerance", format_f64(args.tol)),
        ("draws", args.draws.to_string()),
        ("seed", args.seed.to_string()),
        ("n_obs", sample.len().to_string()),
        ("feasibility_tol", format_f64(FEASIBILITY_TOL)),
    ];

    let (all_empty, written) = match &args.family {
        Some(name) => {
            let family = family_by_name(name, grid.h())?;
            let thetas = thinned_thetas(&family, args.theta_stride)?;
            let sets = bayesian_bootstrap_masks(
                &sample, &grid, &u, &family, &thetas, args.tol, args.draws, args.seed,
            )?;
            let mut counts = vec![0usize; thetas.len()];
            for set in &sets {
                let mask = set.mask().expect("bootstrap sweeps produce grid masks");
                for (count, &included) in counts.iter_mut().zip(&mask.included) {
                    *count += usize::from(included);
                }
            }
            let mut meta = common_meta.to_vec();
            meta.push(("family", name.clone()));
            meta.push(("theta_points", thetas.len().to_string()));
            let mut header = theta_header(&family);
            header.extend_from_slice(&["include_count", "include_frac"]);
            let rows: Vec<Vec<String>> = thetas
                .points()
                .iter()
                .enumerate()
                .map(|(k, theta)| {
                    let mut cells = theta_cells(k, theta);
                    cells.push(counts[k].to_string());
                    cells.push(format_f64(counts[k] as f64 / args.draws as f64));
                    cells
                })
                .collect();
            let path = args.out.join("bootstrap_sets.csv");
            write_csv(&path, &meta, &header, &rows).map_err(write_err(&path))?;
            println!(
                "{} draws over {} parameter points; max inclusion count {}",
                args.draws,
                thetas.len(),
                counts.iter().max().copied().unwrap_or(0)
            );
            (sets.iter().all(|s| s.is_empty()), path)
        }
        None => {
            let draws = bayesian_bootstrap_intervals(
                &sample, &grid, &u, |v| v, args.tol, args.draws, args.seed,
            )?;
            let rows: Vec<Vec<String>> = draws
                .iter()
                .enumerate()
                .map(|(d, bounds)| match bounds {
                    MomentBounds::Interval { interval, minimax } => vec![
                        d.to_string(),
                        "true".into(),
                        format_f64(interval.lower),
                        format_f64(interval.upper),
                        format_f64(*minimax),
                    ],
                    MomentBounds::Empty { min_tolerance } => vec![
                        d.to_string(),
                        "false".into(),
                        String::new(),
                        String::new(),
                        format_f64(*min_tolerance),
                    ],
                })
                .collect();
            let path = args.out.join("bootstrap_intervals.csv");
            write_csv(
                &path,
                &common_meta,
                &["draw", "nonempty", "lower", "upper", "minimax"],
                &rows,
            )
            .map_err(write_err(&path))?;
            let nonempty = draws.iter().filter(|b| !b.is_empty()).count();
            println!("{nonempty} of {} bootstrap mean intervals nonempty", args.draws);
            (nonempty == 0, path)
        }
    };
    let _ = written;

    let mut params = grid_params(&args.grid, &args.data);
    params.insert("family".into(), args.family.clone().unwrap_or_else(|| "none".into()));
    params.insert("draws".into(), args.draws.to_string());
    params.insert("tol".into(), format_f64(args.tol));
    params.insert("seed".into(), args.seed.to_string());
    params.insert("theta_stride".into(), args.theta_stride.to_string());
    write_manifest(&args.out, "bootstrap", params).map_err(write_err(&args.out))?;

    Ok(if all_empty {
        Outcome::Refuted("every bootstrap draw produced an empty set".into())
    } else {
        Outcome::Done
    })
}

fn subsample(args: &SubsampleArgs) -> Result<Outcome, CliError> {
    let (grid, u) = build_grid(&args.grid)?;
    let (sample, _) = load_sample(&args.data, &grid)?;
    let family = family_by_name(&args.family, grid.h())?;
    let thetas = thinned_thetas(&family, args.theta_stride)?;
    let config = SubsampleConfig {
        k: args.n_sub,
        s_fraction: args.sub_frac,
        s_override: args.sub_size,
        refine_rounds: args.refine_rounds,
        initial_sigma: args.tol,
        seed: args.seed,
    };
    let (set, stat) =
        subsampling_confidence_set(&sample, &grid, &u, &family, &thetas, args.alpha, &config)?;
    for warning in &stat.warnings {
        eprintln!("warning: {warning}");
    }
    let mask = set.mask().expect("subsampling produces a grid mask");
    let included = mask.count_included();
    println!(
        "cutoff {:.6} from {} subsamples of size {} ({} rounds); {} of {} points included",
        stat.tau_plus,
        stat.k,
        stat.s,
        stat.rounds,
        included,
        thetas.len()
    );

    ensure_dir(&args.out)?;
    let meta = [
        ("tolerance", format_f64(args.tol)),
        ("alpha", format_f64(args.alpha)),
        ("tau_plus", format_f64(stat.tau_plus)),
        ("subsamples", stat.k.to_string()),
        ("subsample_size", stat.s.to_string()),
        ("rounds", stat.rounds.to_string()),
        ("seed", args.seed.to_string()),
        ("n_obs", sample.len().to_string()),
        ("feasibility_tol", format_f64(set.feasibility_tol)),
        ("family", args.family.clone()),
        ("theta_points", thetas.len().to_string()),
    ];
    let mut header = theta_header(&family);
    header.extend_from_slice(&["minimax", "included"]);
    let rows: Vec<Vec<String>> = thetas
        .points()
        .iter()
        .enumerate()
        .map(|(k, theta)| {
            let mut cells = theta_cells(k, theta);
            cells.push(format_f64(mask.minimax[k]));
            cells.push(mask.included[k].to_string());
            cells
        })
        .collect();
    let path = args.out.join("subsample_set.csv");
    write_csv(&path, &meta, &header, &rows).map_err(write_err(&path))?;

    let mut params = grid_params(&args.grid, &args.data);
    params.insert("family".into(), args.family.clone());
    params.insert("alpha".into(), format_f64(args.alpha));
    params.insert("n_sub".into(), args.n_sub.to_string());
    params.insert("sub_frac".into(), format_f64(args.sub_frac));
    params.insert(
        "sub_size".into(),
        args.sub_size.map(|s| s.to_string()).unwrap_or_else(|| "none".into()),
    );
    params.insert("refine_rounds".into(), args.refine_rounds.to_string());
    params.insert("tol".into(), format_f64(args.tol));
    params.insert("seed".into(), args.seed.to_string());
    params.insert("theta_stride".into(), args.theta_stride.to_string());
    write_manifest(&args.out, "subsample", params).map_err(write_err(&args.out))?;

    Ok(if included == 0 {
        Outcome::Refuted(format!(
            "subsampling confidence set is empty at alpha {}",
            format_f64(args.alpha)
        ))
    } else {
        Outcome::Done
    })
}

fn symmetry_test(args: &SymmetryTestArgs) -> Result<Outcome, CliError> {
    let (grid, u) = build_grid(&args.grid)?;
    let (_, phi) = load_sample(&args.data, &grid)?;
    let verdict = ipv_symmetry_test(&phi, &grid, &u, args.tol)?;
    let label = if verdict.is_refuted() { "refuted" } else { "consistent" };
    println!(
        "symmetric independent private values: {label} (minimax {:.9}, tolerance {})",
        verdict.minimax(),
        format_f64(args.tol)
    );
    Ok(if verdict.is_refuted() {
        Outcome::Refuted(format!(
            "bid data is inconsistent with symmetric independent private values \
             at tolerance {}",
            format_f64(args.tol)
        ))
    } else {
        Outcome::Done
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bidbounds::sharp::BidDistribution;

    /// Two players, values {0,1,2}, bids {0,1}, both always bidding 1.
    fn tiny() -> (SupportGrid, BidDistribution, UtilityKernel) {
        let grid = SupportGrid::new(2, vec![0.0, 1.0, 2.0], vec![0.0, 1.0]).unwrap();
        let phi = BidDistribution::point_mass(&grid, vec![1, 1]).unwrap();
        (grid, phi, UtilityKernel::first_price())
    }

    #[test]
    fn mass_parsing_validates_and_renormalizes() {
        let pi = parse_mass("0.5,0.25,0.25", 3, "test").unwrap();
        assert_eq!(pi, vec![0.5, 0.25, 0.25]);
        assert!(parse_mass("0.5,0.25", 3, "test").is_err());
        assert!(parse_mass("0.5,0.2,0.2", 3, "test").is_err());
        assert!(parse_mass("0.5,-0.1,0.6", 3, "test").is_err());
        let shared = parse_marginals("0,0,1", 2, 3).unwrap();
        assert_eq!(shared.len(), 2);
        assert_eq!(shared[0], shared[1]);
        assert!(parse_marginals("0,0,1;1,0,0;0,1,0", 2, 3).is_err());
    }

    #[test]
    fn pinned_private_value_systems_decide_membership() {
        let (grid, phi, u) = tiny();
        // Everyone bidding 1 first-price is obedient when values sit at the
        // top, and strictly wasteful when values sit at zero.
        let high = vec![0.0, 0.0, 1.0];
        let low = vec![1.0, 0.0, 0.0];

        let pv = build_bce_pv(&phi, &grid, &u).unwrap();
        let sys = pin_pv_marginals(&pv, &phi, &grid, &[high.clone(), high.clone()]);
        assert!(lp::minimax_value(&sys).unwrap() <= FEASIBILITY_TOL);
        let sys = pin_pv_marginals(&pv, &phi, &grid, &[low.clone(), low.clone()]);
        assert!(lp::minimax_value(&sys).unwrap() > 0.1);

        let ipv = build_bce_ipv(&phi, &grid, &u).unwrap();
        let sys = pin_ipv_marginal(&ipv, &phi, &grid, &high);
        assert!(lp::minimax_value(&sys).unwrap() <= FEASIBILITY_TOL);
        let sys = pin_ipv_marginal(&ipv, &phi, &grid, &low);
        assert!(lp::minimax_value(&sys).unwrap() > 0.1);
    }

    #[test]
    fn metric_specs_parse() {
        let grid = SupportGrid::integer(2, 4).unwrap();
        let alt = UtilityKernel::second_price();
        assert!(parse_metric("revenue", &alt, &grid).is_ok());
        assert!(parse_metric("welfare", &alt, &grid).is_ok());
        assert!(parse_metric("constant:3.25", &alt, &grid).is_ok());
        assert!(matches!(
            parse_metric("constant:x", &alt, &grid),
            Err(CliError::BadMetric(_))
        ));
        assert!(matches!(parse_metric("profit", &alt, &grid), Err(CliError::BadMetric(_))));
    }

    #[test]
    fn theta_thinning_keeps_every_kth_point() {
        let family = Family::binomial(4.0);
        let full = ThetaGrid::default_for(&family);
        let thin = thinned_thetas(&family, 10).unwrap();
        assert_eq!(thin.len(), full.len().div_ceil(10));
        assert_eq!(thin.points()[1].coords(), full.points()[10].coords());
    }

    #[test]
    fn grid_args_build_or_fail() {
        let args = GridArgs {
            grid_h: Some(4),
            values: None,
            bids: None,
            players: 2,
            rule: RuleArg::First,
        };
        let (grid, _) = build_grid(&args).unwrap();
        assert_eq!(grid.values().len(), 5);
        let args = GridArgs {
            grid_h: None,
            values: None,
            bids: None,
            players: 2,
            rule: RuleArg::First,
        };
        assert!(matches!(build_grid(&args), Err(CliError::MissingGrid)));
    }
}
