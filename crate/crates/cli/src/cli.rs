//! Command-line interface.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use fnnstat_core::effects::{
    condition_label, default_grid, interaction_values, pce_curve, to_original_scale, Conditioning, PceConfig,
};
use fnnstat_core::fit::FitConfig;
use fnnstat_core::inference::{estimate_covariance, summarize_theta, CovarianceEstimate, InferenceReport};
use fnnstat_core::likelihood::{sigma_sq_hat, Family, LikelihoodSpec, SigmaSq};
use fnnstat_core::{Architecture, ColumnKind, Dataset, ResponseMeta};

use crate::error::{CliError, Result, EXIT_INPUT, EXIT_OK};
use crate::exec::Exec;
use crate::ingest::{apply_meta, read_design, standardize, IngestOptions, Schema};
use crate::model_file::Model;
use crate::output::{csv_field, emit, write_atomic};
use crate::report::{self, Format};
use crate::scenario::{self, Overrides, ScenarioFile, Study};
use crate::{diagram, plot};

pub const DEFAULT_LAMBDA: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "fnnstat", version, about = "Statistical inference for single-hidden-layer neural networks")]
pub struct Cli {
    /// Ridge penalty used when fitting.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Base seed for restarts, folds and simulations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Random restarts per fit [default: 10].
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Response family [default: gaussian].
    #[arg(long, global = true, value_enum)]
    pub family: Option<FamilyArg>,
    /// Worker threads; 1 runs everything serially. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Bernoulli,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Bernoulli => Family::Bernoulli,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column (defaults to the schema's or the model's).
    #[arg(long)]
    pub response: Option<String>,
    /// JSON schema with factor, reference-level and rename overrides.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a network and write the model JSON.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Hidden nodes.
        #[arg(long)]
        q: usize,
        /// Keep continuous covariates on their raw scale.
        #[arg(long)]
        no_standardize: bool,
        /// Model file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coefficient table with single- and multiple-parameter Wald tests.
    Summary {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partial covariate effect curve with pointwise confidence band.
    Pce {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Model column name.
        #[arg(long)]
        covariate: String,
        /// Covariate increment on the raw scale [default: one sample sd].
        #[arg(long)]
        d: Option<f64>,
        /// Condition on another covariate (its 0/1 or mean ± sd values).
        #[arg(long)]
        by: Option<String>,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Report effects and grid on the original units.
        #[arg(long)]
        original_scale: bool,
        /// CSV output (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// BIC and cross-validated RMSE over hidden-layer sizes (0 is linear).
    Select {
        #[command(flatten)]
        data: DataArgs,
        /// `lo..hi` (exclusive), `lo..=hi` or a comma list.
        #[arg(long, default_value = "0..8")]
        q_range: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Network diagram in DOT with significant nodes and edges in black.
    Diagram {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a simulation study described by a scenario JSON file.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let threads = cli.threads;
    if threads == Some(0) {
        return Err(CliError::Input("--threads must be at least 1".into()));
    }
    if let Some(l) = cli.lambda {
        if !(l >= 0.0) || !l.is_finite() {
            return Err(CliError::Input(format!("--lambda must be finite and >= 0, got {l}")));
        }
    }
    let exec = Exec::from_threads(threads.unwrap_or(0));
    match threads {
        Some(t) if t > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli, exec))
        }
        _ => dispatch(cli, exec),
    }
}

fn dispatch(cli: &Cli, exec: Exec) -> Result<()> {
    match &cli.command {
        Command::Fit {
            data,
            q,
            no_standardize,
            out,
        } => cmd_fit(cli, exec, data, *q, *no_standardize, out.as_deref()),
        Command::Summary { model, data, format, out } => {
            let loaded = Loaded::new(cli, model, data)?;
            let report = loaded.report(&loaded.covariance()?)?;
            emit(out.as_deref(), &report::render(&report, *format)?)
        }
        Command::Pce {
            model,
            data,
            covariate,
            d,
            by,
            points,
            level,
            original_scale,
            out,
            svg,
        } => {
            let loaded = Loaded::new(cli, model, data)?;
            let opts = PceOptions {
                covariate,
                d: *d,
                by: by.as_deref(),
                points: *points,
                level: *level,
                original_scale: *original_scale,
            };
            cmd_pce(&loaded, &opts, out.as_deref(), svg.as_deref())
        }
        Command::Select {
            data,
            q_range,
            folds,
            out,
            svg,
        } => cmd_select(cli, exec, data, q_range, *folds, out.as_deref(), svg.as_deref()),
        Command::Diagram { model, data, out } => {
            let loaded = Loaded::new(cli, model, data)?;
            let report = loaded.report(&loaded.covariance()?)?;
            let spec = diagram::DiagramSpec::from_report(&report, &loaded.response);
            emit(out.as_deref(), &diagram::to_dot(&spec))
        }
        Command::Simulate { scenario, out_dir } => cmd_simulate(cli, exec, scenario, out_dir),
    }
}

fn family(cli: &Cli) -> Family {
    cli.family.map_or(Family::Gaussian, Family::from)
}

fn fit_config(cli: &Cli) -> FitConfig {
    let mut c = FitConfig::default();
    if let Some(r) = cli.restarts {
        c.n_restarts = r;
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    c
}

fn ingest_options(args: &DataArgs, family: Family, standardize_covariates: bool) -> Result<IngestOptions> {
    let schema = match &args.schema {
        Some(p) => Schema::load(p)?,
        None => Schema::default(),
    };
    Ok(IngestOptions {
        response: args.response.clone(),
        standardize_covariates,
        standardize_response: family == Family::Gaussian,
        schema,
    })
}

fn load_dataset(args: &DataArgs, family: Family, standardize_covariates: bool) -> Result<Dataset> {
    let opts = ingest_options(args, family, standardize_covariates)?;
    let raw = read_design(&args.data, &opts)?;
    Ok(standardize(&raw, &opts)?.0)
}

fn cmd_fit(cli: &Cli, exec: Exec, args: &DataArgs, q: usize, no_standardize: bool, out: Option<&Path>) -> Result<()> {
    let family = family(cli);
    let lambda = cli.lambda.unwrap_or(DEFAULT_LAMBDA);
    let data = load_dataset(args, family, !no_standardize)?;
    let arch = Architecture::new(data.p(), q, family.output_activation())?;
    let spec = LikelihoodSpec::new(family, lambda)?;
    let config = fit_config(cli);
    let fit = exec.fit(&arch, &data, &spec, &config)?;
    if !fit.converged {
        eprintln!(
            "warning: best restart did not converge (gradient max-norm {:e} after {} iterations)",
            fit.grad_inf, fit.iterations
        );
    }
    let model = Model {
        arch,
        theta: fit.theta_hat,
        lambda,
        column_meta: data.column_meta.clone(),
        response_meta: data.response_meta.clone(),
    };
    emit(out, &model.to_json()?)
}

/// A saved model together with data standardized by the model's statistics.
struct Loaded {
    model: Model,
    data: Dataset,
    response: String,
}

impl Loaded {
    fn new(cli: &Cli, model_path: &Path, args: &DataArgs) -> Result<Self> {
        let text = std::fs::read_to_string(model_path).map_err(|e| CliError::io(model_path, e))?;
        let model = Model::from_json(&text).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", model_path.display())),
            other => other,
        })?;
        let family = model.family();
        if let Some(f) = cli.family {
            if Family::from(f) != family {
                return Err(CliError::Input(format!(
                    "--family {} does not match the model's {} family",
                    Family::from(f).name(),
                    family.name()
                )));
            }
        }
        let mut opts = ingest_options(args, family, false)?;
        if opts.response.is_none() && opts.schema.response.is_none() {
            opts.response = model.response_meta.as_ref().map(|m| m.name.clone());
        }
        let raw = read_design(&args.data, &opts)?;
        let response_meta = model.response_meta.clone().unwrap_or(ResponseMeta {
            name: raw.response.clone(),
            mean: 0.0,
            sd: 1.0,
        });
        let data = apply_meta(&raw, &model.column_meta, &response_meta)?;
        Ok(Self {
            model,
            data,
            response: raw.response,
        })
    }

    fn covariance(&self) -> Result<CovarianceEstimate> {
        let m = &self.model;
        let family = m.family();
        let spec = LikelihoodSpec::new(family, m.lambda)?;
        let s2 = match family {
            Family::Gaussian => Some(SigmaSq::new(sigma_sq_hat(&m.arch, &m.theta, &self.data)?)?),
            Family::Bernoulli => None,
        };
        let cov = estimate_covariance(&m.arch, &m.theta, &self.data, &spec, s2)?;
        if !cov.positive_definite {
            return Err(CliError::not_positive_definite(cov.min_eigenvalue));
        }
        Ok(cov)
    }

    fn report(&self, cov: &CovarianceEstimate) -> Result<InferenceReport> {
        let m = &self.model;
        let family = m.family();
        let s2 = match family {
            Family::Gaussian => Some(sigma_sq_hat(&m.arch, &m.theta, &self.data)?),
            Family::Bernoulli => None,
        };
        Ok(summarize_theta(&m.arch, &m.theta, cov, &self.data, family, m.lambda, s2)?)
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.data
            .column_meta
            .iter()
            .position(|c| c.name == name)
            .map(|i| i + 1)
            .ok_or_else(|| {
                let names: Vec<&str> = self.data.column_meta.iter().map(|c| c.name.as_str()).collect();
                CliError::Input(format!("unknown covariate '{name}' (model columns: {})", names.join(", ")))
            })
    }
}

struct PceOptions<'a> {
    covariate: &'a str,
    d: Option<f64>,
    by: Option<&'a str>,
    points: usize,
    level: f64,
    original_scale: bool,
}

fn cmd_pce(loaded: &Loaded, o: &PceOptions, out: Option<&Path>, svg: Option<&Path>) -> Result<()> {
    let j = loaded.column(o.covariate)?;
    let (arch, theta, data) = (&loaded.model.arch, &loaded.model.theta, &loaded.data);
    let meta = &data.column_meta[j - 1];
    if o.points == 0 {
        return Err(CliError::Input("--points must be at least 1".into()));
    }
    if let Some(d) = o.d {
        if !(d > 0.0) || !d.is_finite() {
            return Err(CliError::Input(format!("--d must be positive, got {d}")));
        }
        if meta.kind == ColumnKind::Dummy && d != 1.0 {
            return Err(CliError::Input(format!("'{}' is a dummy; its effect is always 0 to 1", meta.name)));
        }
    }
    let cov = loaded.covariance()?;
    let mut cfg = PceConfig::new(data, j)?;
    cfg.level = o.level;
    if meta.kind == ColumnKind::Dummy {
        cfg.d = 1.0;
        cfg.grid = vec![0.0];
    } else {
        if let Some(d) = o.d {
            cfg.d = d / meta.sd;
        }
        cfg.grid = default_grid(&data.column(j - 1), cfg.d, o.points);
    }
    if let Some(by) = o.by {
        let k = loaded.column(by)?;
        if k == j {
            return Err(CliError::Input("--by must name a different covariate".into()));
        }
        cfg.conditioning = Some(Conditioning {
            covariate: k,
            values: interaction_values(data, k)?.to_vec(),
        });
    }
    let curves = pce_curve(arch, theta, &cov, data, &cfg)?;
    let curves = if o.original_scale {
        curves
            .iter()
            .map(|c| to_original_scale(c, &data.column_meta, data.response_meta.as_ref()))
            .collect::<fnnstat_core::Result<Vec<_>>>()?
    } else {
        curves
    };

    let mut csv = String::from("covariate,condition,d,x,beta_hat,se,lo,hi\n");
    for c in &curves {
        let cond = condition_label(c, &data.column_meta);
        for p in &c.points {
            let _ = writeln!(csv, "{},{},{},{},{},{},{},{}", csv_field(&meta.name), csv_field(&cond), c.d, p.x, p.beta_hat, p.se, p.lo, p.hi);
        }
    }
    if let Some(path) = svg {
        let panels: Vec<plot::Panel> = curves
            .iter()
            .map(|c| {
                let mut panel = plot::pce_panel(c, &meta.name, &loaded.response, None);
                let cond = condition_label(c, &data.column_meta);
                if !cond.is_empty() {
                    panel.title = format!("{} | {cond}", panel.title);
                }
                panel
            })
            .collect();
        write_atomic(path, plot::render(&panels).as_bytes())?;
    }
    emit(out, &csv)
}

/// `lo..hi`, `lo..=hi` or `a,b,c`.
pub fn parse_q_range(s: &str) -> Result<Vec<usize>> {
    let bad = || CliError::Input(format!("invalid --q-range '{s}' (use e.g. 0..8, 1..=4 or 1,2,3)"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let list = if let Some((lo, hi)) = s.split_once("..=") {
        (num(lo)?..=num(hi)?).collect::<Vec<_>>()
    } else if let Some((lo, hi)) = s.split_once("..") {
        (num(lo)?..num(hi)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if list.is_empty() {
        return Err(bad());
    }
    let mut seen = list.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != list.len() {
        return Err(CliError::Input(format!("--q-range '{s}' repeats a value")));
    }
    Ok(list)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v}"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_select(
    cli: &Cli,
    exec: Exec,
    args: &DataArgs,
    q_range: &str,
    folds: usize,
    out: Option<&Path>,
    svg: Option<&Path>,
) -> Result<()> {
    let q_list = parse_q_range(q_range)?;
    let family = family(cli);
    let data = load_dataset(args, family, true)?;
    let spec = LikelihoodSpec::new(family, cli.lambda.unwrap_or(DEFAULT_LAMBDA))?;
    let sweep = exec.sweep(&data, &q_list, folds, &spec, &fit_config(cli))?;
    let mut csv = String::from("q,bic,cv_rmse,cv_se,error\n");
    for r in &sweep.rows {
        let err = csv_field(&r.error.as_deref().unwrap_or("").replace('\n', " "));
        let _ = writeln!(csv, "{},{},{},{},{err}", r.q, opt(r.bic), opt(r.cv_rmse), opt(r.cv_se));
    }
    if let Some(best) = sweep.best_bic() {
        eprintln!("best by BIC: q = {best}");
    }
    if let Some(best) = sweep.best_cv() {
        eprintln!("best by CV RMSE: q = {best}");
    }
    if sweep.rows.iter().all(|r| r.bic.is_none() && r.cv_rmse.is_none()) {
        emit(out, &csv)?;
        return Err(CliError::Numerical("every candidate failed".into()));
    }
    if let Some(path) = svg {
        write_atomic(path, plot::render(&plot::sweep_panels(&sweep)).as_bytes())?;
    }
    emit(out, &csv)
}

fn cmd_simulate(cli: &Cli, exec: Exec, path: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file = ScenarioFile::parse(&text).map_err(|e| match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if cli.family == Some(FamilyArg::Bernoulli) {
        return Err(CliError::Input("simulations use the Gaussian family".into()));
    }
    let overrides = Overrides {
        lambda: cli.lambda,
        seed: cli.seed,
        restarts: cli.restarts,
    };
    let base = file.scenario(&overrides)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let put = |name: &str, body: &str| write_atomic(&out_dir.join(name), body.as_bytes());
    match file.study {
        Study::Scenario => {
            let r = exec.run_scenario(&base)?;
            put("summary.csv", &scenario::summary_csv(&r))?;
            put("rates.csv", &scenario::rates_csv(&r))?;
            put("params.csv", &scenario::params_csv(&r))?;
            if r.failures == r.replicates {
                return Err(CliError::Numerical(format!("all {} replicates failed", r.replicates)));
            }
        }
        Study::Power => {
            let rows = exec.power_sweep(&base, &file.effects)?;
            put("power.csv", &scenario::power_csv(&rows))?;
            put("power.svg", &plot::render(&[plot::power_panel(&rows)]))?;
        }
        Study::Pd => {
            let mut cells = Vec::new();
            for &lambda in &file.lambdas {
                for &n in &file.ns {
                    let mut s = base.clone();
                    s.lambda = lambda;
                    s.n = n;
                    s.validate()?;
                    cells.push(s);
                }
            }
            put("pd.csv", &scenario::pd_csv(&exec.pd_study(&cells)?))?;
        }
    }
    Ok(())
}
