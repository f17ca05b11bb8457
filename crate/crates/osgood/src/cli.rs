//! Command-line front end: certificate search, simulation, asymptotic
//! criteria, and axiom/property validation, with JSON/CSV reports.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::blowup::{self, BlowupCertificate, CertificateForm, Verification};
use crate::config::{Problem, RunConfig, SourceSpec};
use crate::error::{Error, Result};
use crate::solver::{self, SolveStatus, StepControls};
use crate::source_term::{self, geometric_grid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NO_CERTIFICATE: i32 = 3;
pub const EXIT_BLOWUP: i32 = 4;
pub const EXIT_STEP_FAILURE: i32 = 5;
pub const EXIT_VALIDATION: i32 = 6;

#[derive(Parser)]
#[command(name = "osgood", version, about = "Blow-up certification for u' = Lu + f(u)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Run-configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (default: config `output`, else the working dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for all randomized sweeps; recorded in every report.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand)]
pub enum Command {
    /// Search for a blow-up certificate (T, G), or re-verify one.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        t_grid: Option<usize>,
        /// Verify an existing certificate.json instead of searching.
        #[arg(long, value_name = "CERTIFICATE")]
        verify_only: Option<PathBuf>,
        /// Sweep a source parameter over several values, e.g. `alpha=0.5,1,2`;
        /// runs dispatch concurrently (capped by OSGOOD_THREADS).
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Integrate the mild solution and report blow-up or survival.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        horizon: Option<f64>,
        /// Divergence threshold override.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Evaluate the dimensional blow-up criteria (θγ < 2 or αγ < β).
    Criteria {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Validate kernel axioms / semigroup properties.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Entry point: returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Certify {
            common,
            t_min,
            t_max,
            t_grid,
            verify_only,
            sweep,
        } => {
            let mut cfg = RunConfig::from_path(&common.config)?;
            if let Some(v) = t_min {
                cfg.analysis.t_min = v;
            }
            if let Some(v) = t_max {
                cfg.analysis.t_max = v;
            }
            if let Some(v) = t_grid {
                cfg.analysis.t_grid = v;
            }
            cfg.validate()?;
            let out = out_dir(&common, &cfg)?;
            if let Some(path) = verify_only {
                cmd_verify_only(&cfg, common.seed, &out, &path)
            } else if let Some(sweep) = sweep {
                cmd_certify_sweep(&cfg, common.seed, &out, &sweep)
            } else {
                cmd_certify(&cfg, common.seed, &out)
            }
        }
        Command::Simulate {
            common,
            horizon,
            threshold,
        } => {
            let mut cfg = RunConfig::from_path(&common.config)?;
            if let Some(v) = horizon {
                cfg.analysis.horizon = v;
            }
            if let Some(v) = threshold {
                cfg.analysis.divergence_threshold = v;
            }
            cfg.validate()?;
            let out = out_dir(&common, &cfg)?;
            cmd_simulate(&cfg, common.seed, &out)
        }
        Command::Criteria { common } => {
            let cfg = RunConfig::from_path(&common.config)?;
            let out = out_dir(&common, &cfg)?;
            cmd_criteria(&cfg, common.seed, &out)
        }
        Command::Validate { common } => {
            let cfg = RunConfig::from_path(&common.config)?;
            let out = out_dir(&common, &cfg)?;
            cmd_validate(&cfg, common.seed, &out)
        }
    }
}

fn out_dir(common: &CommonArgs, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

fn thread_cap() -> usize {
    std::env::var("OSGOOD_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n: &usize| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Certificate serialized with vertex names so reports stay readable for
/// file-based graphs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateDoc {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "G")]
    pub set: Vec<String>,
    pub mean: f64,
    pub threshold: f64,
    pub margin: f64,
    pub form: CertificateForm,
}

impl CertificateDoc {
    fn from_certificate(cert: &BlowupCertificate, problem: &Problem) -> Self {
        CertificateDoc {
            t: cert.t,
            set: cert.set.iter().map(|&i| problem.vertex_name(i)).collect(),
            mean: cert.mean_value,
            threshold: cert.threshold,
            margin: cert.margin,
            form: cert.form,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CertifyReport {
    seed: u64,
    certificate: Option<CertificateDoc>,
}

fn cmd_certify(cfg: &RunConfig, seed: u64, out: &Path) -> Result<i32> {
    let problem = cfg.build_problem(seed)?;
    let f = cfg.build_source()?;
    let a = cfg.build_initial(&problem)?;
    let found = blowup::search_certificate(
        &problem,
        &f,
        &a,
        (cfg.analysis.t_min, cfg.analysis.t_max),
        cfg.analysis.t_grid,
    )?;
    let report = CertifyReport {
        seed,
        certificate: found
            .as_ref()
            .map(|c| CertificateDoc::from_certificate(c, &problem)),
    };
    write_json(out, "certificate.json", &report)?;
    match &report.certificate {
        Some(doc) => {
            println!(
                "certificate: T = {:.6}, |G| = {}, margin = {:.6e}",
                doc.t,
                doc.set.len(),
                doc.margin
            );
            Ok(EXIT_OK)
        }
        None => {
            println!("no certificate found on the configured range");
            Ok(EXIT_NO_CERTIFICATE)
        }
    }
}

fn cmd_verify_only(cfg: &RunConfig, seed: u64, out: &Path, path: &Path) -> Result<i32> {
    let problem = cfg.build_problem(seed)?;
    let f = cfg.build_source()?;
    let a = cfg.build_initial(&problem)?;
    let text = fs::read_to_string(path)?;
    let doc: CertificateDoc = serde_json::from_str::<CertifyReport>(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
        .and_then(|r| {
            r.certificate.ok_or_else(|| {
                Error::InvalidConfig(format!("{}: null certificate", path.display()))
            })
        })
        .or_else(|_| {
            serde_json::from_str::<CertificateDoc>(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
        })?;
    let set: Vec<usize> = doc
        .set
        .iter()
        .map(|name| problem.resolve_vertex(name))
        .collect::<Result<_>>()?;
    match blowup::verify_certificate(&problem, &f, &a, doc.t, &set) {
        Ok(Verification::Certified(cert)) => {
            let report = CertifyReport {
                seed,
                certificate: Some(CertificateDoc::from_certificate(&cert, &problem)),
            };
            write_json(out, "verify.json", &report)?;
            println!("certificate verified: margin = {:.12e}", cert.margin);
            Ok(EXIT_OK)
        }
        Ok(Verification::NotCertified { margin, .. }) => {
            println!("certificate not reproduced: margin = {margin:.6e}");
            Ok(EXIT_NO_CERTIFICATE)
        }
        Err(Error::CertificateRejected(why)) => {
            println!("certificate rejected: {why}");
            Ok(EXIT_NO_CERTIFICATE)
        }
        Err(e) => Err(e),
    }
}

fn cmd_certify_sweep(cfg: &RunConfig, seed: u64, out: &Path, sweep: &str) -> Result<i32> {
    let (param, values) = sweep
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("sweep must look like `alpha=0.5,1,2`, got `{sweep}`")))?;
    if param != "alpha" {
        return Err(Error::InvalidConfig(format!("only `alpha` sweeps are supported, got `{param}`")));
    }
    if !matches!(cfg.source, SourceSpec::Power { .. }) {
        return Err(Error::InvalidConfig("alpha sweeps need a power source".into()));
    }
    let values: Vec<f64> = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|e| Error::InvalidConfig(format!("bad sweep value `{v}`: {e}")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::InvalidConfig("empty sweep".into()));
    }
    let cap = thread_cap();
    let mut results: Vec<Option<Result<i32>>> = (0..values.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<&mut Option<Result<i32>>>> =
        results.iter_mut().map(std::sync::Mutex::new).collect();
    std::thread::scope(|scope| {
        for _ in 0..cap.min(values.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= values.len() {
                    break;
                }
                let mut run_cfg = cfg.clone();
                run_cfg.source = SourceSpec::Power { alpha: values[i] };
                let sub = out.join(format!("alpha-{}", values[i]));
                let outcome = fs::create_dir_all(&sub)
                    .map_err(Error::from)
                    .and_then(|()| cmd_certify(&run_cfg, seed, &sub));
                **slots[i].lock().unwrap() = Some(outcome);
            });
        }
    });
    drop(slots);
    let mut any_missing = false;
    for (v, r) in values.iter().zip(results) {
        match r.expect("worker filled every slot") {
            Ok(EXIT_OK) => {}
            Ok(_) => {
                println!("alpha = {v}: no certificate");
                any_missing = true;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(if any_missing { EXIT_NO_CERTIFICATE } else { EXIT_OK })
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    seed: u64,
    horizon: f64,
    status: SolveStatus,
    final_time: f64,
    final_sup_norm: f64,
    steps: usize,
}

fn cmd_simulate(cfg: &RunConfig, seed: u64, out: &Path) -> Result<i32> {
    let problem = cfg.build_problem(seed)?;
    let f = cfg.build_source()?;
    let a = cfg.build_initial(&problem)?;
    let controls = StepControls {
        rel_tol: cfg.analysis.tolerance,
        divergence_threshold: cfg.analysis.divergence_threshold,
        ..Default::default()
    };
    let trace = solver::solve(&problem, &f, &a, cfg.analysis.horizon, controls)?;
    let mut csv = fs::File::create(out.join("trace.csv"))?;
    writeln!(csv, "t,sup_norm,p_norm")?;
    for i in 0..trace.times.len() {
        writeln!(
            csv,
            "{:.12e},{:.12e},{:.12e}",
            trace.times[i], trace.sup_norms[i], trace.p_norms[i]
        )?;
    }
    let report = SimulateReport {
        seed,
        horizon: cfg.analysis.horizon,
        status: trace.status.clone(),
        final_time: *trace.times.last().unwrap(),
        final_sup_norm: *trace.sup_norms.last().unwrap(),
        steps: trace.times.len() - 1,
    };
    write_json(out, "status.json", &report)?;
    match &trace.status {
        SolveStatus::ReachedHorizon => {
            println!("reached horizon t = {}", cfg.analysis.horizon);
            Ok(EXIT_OK)
        }
        SolveStatus::BlowupDetected { t_emp, error_bar } => {
            println!("blow-up detected: T_emp = {t_emp:.6} ± {error_bar:.2e}");
            Ok(EXIT_BLOWUP)
        }
        SolveStatus::StepFailure { reason } => {
            println!("step failure: {reason}");
            Ok(EXIT_STEP_FAILURE)
        }
    }
}

#[derive(Debug, Serialize)]
struct CriteriaReport {
    seed: u64,
    /// Graph: fitted volume-growth exponent; kernel: spatial dimension.
    theta_or_alpha: f64,
    /// Kernel only: walk index β.
    beta: Option<f64>,
    kappa: f64,
    gamma: f64,
    asymptotics: source_term::AsymptoticsReport,
    volume_fit: Option<crate::graph::VolumeGrowthFit>,
    criterion: blowup::CriterionVerdict,
}

fn cmd_criteria(cfg: &RunConfig, seed: u64, out: &Path) -> Result<i32> {
    let problem = cfg.build_problem(seed)?;
    let f = cfg.build_source()?;
    let (kappa, gamma) = match (cfg.analysis.kappa, cfg.analysis.gamma, f.osgood_asymptotics) {
        (Some(k), Some(g), _) => (k, g),
        (None, None, Some((k, g))) => (k, g),
        (None, Some(g), Some((k, _))) => (k, g),
        (Some(k), None, Some((_, g))) => (k, g),
        _ => {
            return Err(Error::InvalidConfig(
                "this source has no closed-form Osgood asymptotics; set analysis.kappa and analysis.gamma".into(),
            ))
        }
    };
    // a hair of slack so closed-form equality cases survive round-off
    let asymptotics =
        source_term::check_asymptotics(&f, kappa * (1.0 + 1e-9), gamma, &geometric_grid(1.0, 1e4, 200))?;
    if !asymptotics.holds_everywhere {
        return Err(Error::InvalidConfig(format!(
            "F(1/t) ≤ κ·t^γ fails at t = {:?} for κ = {kappa}, γ = {gamma}",
            asymptotics.largest_violation
        )));
    }
    let report = match &problem {
        Problem::Graph(sg) => {
            let basepoint = match &cfg.analysis.basepoint {
                Some(name) => problem.resolve_vertex(name)?,
                None => 0,
            };
            let r_max = cfg.analysis.r_max.unwrap_or_else(|| {
                sg.graph()
                    .combinatorial_distance(basepoint)
                    .dist
                    .iter()
                    .flatten()
                    .copied()
                    .max()
                    .unwrap_or(0)
            });
            let fit = sg.graph().fit_volume_growth(basepoint, r_max)?;
            let criterion = blowup::criterion_graph(fit.theta.max(f64::MIN_POSITIVE), gamma)?;
            CriteriaReport {
                seed,
                theta_or_alpha: fit.theta,
                beta: None,
                kappa,
                gamma,
                asymptotics,
                volume_fit: Some(fit),
                criterion,
            }
        }
        Problem::Kernel(model) => {
            let bound = model.lower_bound();
            let criterion = blowup::criterion_mms(bound.alpha, bound.beta, gamma)?;
            CriteriaReport {
                seed,
                theta_or_alpha: bound.alpha,
                beta: Some(bound.beta),
                kappa,
                gamma,
                asymptotics,
                volume_fit: None,
                criterion,
            }
        }
    };
    write_json(out, "criteria.json", &report)?;
    println!(
        "criterion: {:.4} vs bound {:.4} → {}",
        report.criterion.product,
        report.criterion.bound,
        match report.criterion.verdict {
            blowup::Verdict::BlowupPredicted => "blow-up-predicted",
            blowup::Verdict::TheoremSilent => "theorem-silent",
        }
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct ValidateReport {
    seed: u64,
    pass: bool,
    jensen: Option<JensenSummary>,
    chapman_kolmogorov_worst: f64,
    submarkov_worst_excess: Option<f64>,
    axioms: Option<crate::kernel::AxiomReport>,
    lower_bound_worst_slack: Option<f64>,
}

#[derive(Debug, Serialize)]
struct JensenSummary {
    cases: usize,
    min_slack: f64,
    pass: bool,
}

fn cmd_validate(cfg: &RunConfig, seed: u64, out: &Path) -> Result<i32> {
    let problem = cfg.build_problem(seed)?;
    let f = cfg.build_source()?;
    let report = match &problem {
        Problem::Graph(sg) => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = sg.graph().len();
            let times = [0.05, 0.3, 1.0, 4.0];
            let mut min_slack = f64::INFINITY;
            let mut jensen_pass = true;
            let mut cases = 0;
            for _ in 0..25 {
                let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
                for &t in &times {
                    let rep = sg.check_jensen(&f, t, &phi)?;
                    min_slack = min_slack.min(rep.min_slack);
                    jensen_pass &= rep.pass;
                    cases += 1;
                }
            }
            let mut ck_worst: f64 = 0.0;
            for &(t, s) in &[(0.2, 0.3), (0.5, 0.5), (1.0, 2.0)] {
                ck_worst = ck_worst.max(sg.check_chapman_kolmogorov(t, s)?);
            }
            let mut mass_excess: f64 = f64::NEG_INFINITY;
            let ones = vec![1.0; n];
            for &t in &times {
                let v = sg.apply(t, &ones)?;
                let excess = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 1.0;
                mass_excess = mass_excess.max(excess);
            }
            let pass = jensen_pass && ck_worst <= 1e-8 && mass_excess <= 1e-10;
            ValidateReport {
                seed,
                pass,
                jensen: Some(JensenSummary {
                    cases,
                    min_slack,
                    pass: jensen_pass,
                }),
                chapman_kolmogorov_worst: ck_worst,
                submarkov_worst_excess: Some(mass_excess),
                axioms: None,
                lower_bound_worst_slack: None,
            }
        }
        Problem::Kernel(model) => {
            let n = model.space.len();
            let t_grid = [0.05, 0.1, 0.2, 0.5, 1.0];
            let stride = (n / 24).max(1);
            let samples: Vec<usize> = (0..n).step_by(stride).collect();
            let axioms = model.validate_axioms(&t_grid, &samples)?;
            let pairs: Vec<(usize, usize)> = samples
                .iter()
                .flat_map(|&x| samples.iter().map(move |&y| (x, y)))
                .collect();
            let slack = model.lower_bound_check(&t_grid, &pairs)?;
            let pass = axioms.passes(5e-3, 0.5) && slack >= -1e-9;
            ValidateReport {
                seed,
                pass,
                jensen: None,
                chapman_kolmogorov_worst: axioms.chapman_kolmogorov.worst,
                submarkov_worst_excess: None,
                axioms: Some(axioms),
                lower_bound_worst_slack: Some(slack),
            }
        }
    };
    write_json(out, "validation.json", &report)?;
    if report.pass {
        println!("all properties hold");
        Ok(EXIT_OK)
    } else {
        println!("validation failed; see validation.json");
        Ok(EXIT_VALIDATION)
    }
}
