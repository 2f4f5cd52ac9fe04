use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mlergm::estimator::{bootstrap_se, mcmle, EstimateResult, Status};
use mlergm::experiments::{run_concentration, run_consistency, write_csv, Experiment};
use mlergm::gof::gof;
use mlergm::oracle::{exact_mle, exact_psi};
use mlergm::sampler::{derive_seed, simulate_graphs};
use mlergm::{compute_stats, Error, ErrorClass, Model, MultilevelGraph, RunConfig};

#[derive(Parser)]
#[command(name = "mlergm", version, about = "Simulate, fit and check multilevel random graph models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct Data {
    /// Node table: node_id,neighborhood_id[,attributes...]
    #[arg(long)]
    nodes: PathBuf,
    /// Edge list: tail,head
    #[arg(long)]
    edges: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Draw graphs on the node layout of --nodes.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nodes: PathBuf,
        /// Retained draws per neighborhood chain.
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Monte Carlo maximum likelihood fit.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        /// Sample draws per neighborhood.
        #[arg(long)]
        draws: Option<usize>,
        /// Parametric bootstrap replicates for standard errors.
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Goodness-of-fit at `theta` from the config (or --theta).
    Gof {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        /// Simulated replicates.
        #[arg(long)]
        draws: Option<usize>,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
    },
    /// Bootstrap standard errors at `theta` from the config (or --theta).
    Bootstrap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
    },
    /// Replication experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Exact enumeration on small neighborhoods.
    #[command(hide = true)]
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    Consistency {
        #[command(flatten)]
        common: Common,
    },
    Concentration {
        #[command(flatten)]
        common: Common,
    },
}

struct Setup {
    config: RunConfig,
    model: Model,
    out: PathBuf,
}

fn setup(common: &Common) -> Result<Setup> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        config.seed = s;
    }
    let seed = config.seed;
    config.sampler.seed = derive_seed(seed, &[0]);
    config.estimator.seed = derive_seed(seed, &[1]);
    config.gof.seed = derive_seed(seed, &[2]);
    let model = config.model.build()?;
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    Ok(Setup {
        config,
        model,
        out: common.out.clone(),
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load(data: &Data, directed: bool) -> Result<MultilevelGraph> {
    Ok(MultilevelGraph::load_files(&data.nodes, &data.edges, directed)?)
}

fn load_layout(nodes: &Path, directed: bool) -> Result<MultilevelGraph> {
    let f = File::open(nodes).with_context(|| format!("opening {}", nodes.display()))?;
    Ok(MultilevelGraph::load(f, "tail,head\n".as_bytes(), directed)?)
}

fn simulate(common: &Common, nodes: &Path, draws: Option<usize>) -> Result<()> {
    let mut s = setup(common)?;
    if let Some(d) = draws {
        s.config.sampler.n_draws = d;
    }
    let layout = load_layout(nodes, s.config.directed)?;
    let theta = s.config.theta()?;
    let graphs = simulate_graphs(&s.model, &theta, &layout, &s.config.sampler)?;
    let mut w = csv_writer(create(&s.out, "stats.csv")?);
    w.write_record(["neighborhood", "draw", "term", "value"])?;
    let terms = s.model.terms();
    for (m, g) in graphs.iter().enumerate() {
        let stats = compute_stats(g, terms)?;
        for (k, nb) in g.neighborhoods().iter().enumerate() {
            let labels = terms.labels(nb.len());
            for (label, v) in labels.iter().zip(&stats.per_neighborhood[k]) {
                w.write_record([nb.id.as_str(), &m.to_string(), label, &v.to_string()])?;
            }
        }
        g.write_edges(create(&s.out, &format!("edges_{m}.csv"))?)?;
    }
    w.flush()?;
    layout.write_nodes(create(&s.out, "nodes.csv")?)?;
    Ok(())
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn write_estimates(out: &Path, res: &EstimateResult) -> Result<()> {
    let mut w = csv_writer(create(out, "estimates.csv")?);
    w.write_record(["coordinate", "estimate", "se", "status"])?;
    for (c, name) in res.names.iter().enumerate() {
        let se = res.se.as_ref().map(|s| s[c].to_string()).unwrap_or_default();
        w.write_record([name.clone(), res.theta[c].to_string(), se, res.status.to_string()])?;
    }
    w.flush()?;
    let mut w = csv_writer(create(out, "trace.csv")?);
    let mut header: Vec<String> = ["iteration", "step_norm", "score_norm", "mc_se_norm", "min_ess", "outside_hull"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(res.names.iter().map(|n| format!("ref.{n}")));
    header.extend(res.names.iter().cloned());
    w.write_record(&header)?;
    for t in &res.trace {
        let mut rec = vec![
            t.iteration.to_string(),
            t.step_norm.to_string(),
            t.score_norm.to_string(),
            t.mc_se_norm.to_string(),
            t.min_ess.to_string(),
            t.outside_hull.to_string(),
        ];
        rec.extend(t.theta_ref.iter().map(f64::to_string));
        rec.extend(t.theta.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn estimate(common: &Common, data: &Data, draws: Option<usize>, bootstrap: Option<usize>) -> Result<()> {
    let mut s = setup(common)?;
    if let Some(d) = draws {
        s.config.estimator.draws = d;
    }
    if s.config.estimator.start.is_none() {
        s.config.estimator.start = s.config.model.init();
    }
    let graph = load(data, s.config.directed)?;
    let mut res = mcmle(&graph, &s.model, &s.config.estimator)?;
    let b = bootstrap.unwrap_or(s.config.bootstrap.replicates);
    if b > 0 && res.status == Status::Converged {
        let boot = bootstrap_se(
            &s.model,
            &res.theta,
            &graph,
            b,
            &s.config.sampler,
            &s.config.estimator,
            derive_seed(s.config.seed, &[3]),
        )?;
        res.se = Some(boot.se);
    }
    write_estimates(&s.out, &res)?;
    match res.status {
        Status::Converged => Ok(()),
        status => Err(Error::Estimation(format!("fit ended with status {status}")).into()),
    }
}

fn theta_for(s: &Setup, flag: Option<Vec<f64>>) -> Result<Vec<f64>> {
    match flag {
        Some(t) => Ok(t),
        None => Ok(s.config.theta()?),
    }
}

fn run_gof(common: &Common, data: &Data, draws: Option<usize>, theta: Option<Vec<f64>>) -> Result<()> {
    let mut s = setup(common)?;
    if let Some(d) = draws {
        s.config.gof.replicates = d;
    }
    let theta = theta_for(&s, theta)?;
    let graph = load(data, s.config.directed)?;
    let report = gof(&s.model, &theta, &graph, &s.config.gof)?;
    report.write_csv(create(&s.out, "gof.csv")?)?;
    Ok(())
}

fn run_bootstrap(common: &Common, data: &Data, b: Option<usize>, theta: Option<Vec<f64>>) -> Result<()> {
    let s = setup(common)?;
    let theta = theta_for(&s, theta)?;
    let graph = load(data, s.config.directed)?;
    let b = b.unwrap_or(s.config.bootstrap.replicates);
    let boot = bootstrap_se(
        &s.model,
        &theta,
        &graph,
        b,
        &s.config.sampler,
        &s.config.estimator,
        derive_seed(s.config.seed, &[3]),
    )?;
    let mut w = csv_writer(create(&s.out, "bootstrap.csv")?);
    w.write_record(["coordinate", "estimate", "se", "failures"])?;
    for (c, name) in s.model.names().iter().enumerate() {
        w.write_record([name.clone(), theta[c].to_string(), boot.se[c].to_string(), boot.failures.to_string()])?;
    }
    w.flush()?;
    let mut w = csv_writer(create(&s.out, "bootstrap_replicates.csv")?);
    w.write_record(["replicate", "coordinate", "estimate"])?;
    for (r, e) in boot.estimates.iter().enumerate() {
        for (c, name) in s.model.names().iter().enumerate() {
            let v = e.as_ref().map(|e| e[c].to_string()).unwrap_or_default();
            w.write_record([r.to_string(), name.clone(), v])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn experiment(common: &Common) -> Result<(Setup, Experiment)> {
    let s = setup(common)?;
    let spec = s
        .config
        .experiment
        .clone()
        .ok_or_else(|| Error::Config("missing [experiment] section".into()))?;
    let exp = Experiment {
        spec,
        directed: s.config.directed,
        seed: derive_seed(s.config.seed, &[4]),
        sampler: s.config.sampler.clone(),
        estimator: s.config.estimator.clone(),
    };
    Ok((s, exp))
}

fn consistency(common: &Common) -> Result<()> {
    let (s, exp) = experiment(common)?;
    let res = run_consistency(&s.model, &exp)?;
    write_csv(create(&s.out, "replications.csv")?, &res.rows)?;
    write_csv(create(&s.out, "summary.csv")?, &res.summary)?;
    Ok(())
}

fn concentration(common: &Common) -> Result<()> {
    let (s, exp) = experiment(common)?;
    let res = run_concentration(&s.model, &exp)?;
    write_csv(create(&s.out, "concentration.csv")?, &res.rows)?;
    write_csv(create(&s.out, "concentration_summary.csv")?, &res.summary)?;
    Ok(())
}

fn oracle(common: &Common, data: &Data) -> Result<()> {
    let s = setup(common)?;
    let graph = load(data, s.config.directed)?;
    let start = s.config.model.init();
    let theta = exact_mle(&graph, &s.model, start.as_deref())?;
    println!("coordinate,exact_mle");
    for (name, v) in s.model.names().iter().zip(theta.iter()) {
        println!("{name},{v}");
    }
    println!("neighborhood,psi");
    for (k, nb) in graph.neighborhoods().iter().enumerate() {
        println!("{},{}", nb.id, exact_psi(&s.model, &theta, &graph, k)?);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, nodes, draws } => simulate(&common, &nodes, draws),
        Command::Estimate {
            common,
            data,
            draws,
            bootstrap,
        } => estimate(&common, &data, draws, bootstrap),
        Command::Gof {
            common,
            data,
            draws,
            theta,
        } => run_gof(&common, &data, draws, theta),
        Command::Bootstrap {
            common,
            data,
            bootstrap,
            theta,
        } => run_bootstrap(&common, &data, bootstrap, theta),
        Command::Experiment(ExperimentCommand::Consistency { common }) => consistency(&common),
        Command::Experiment(ExperimentCommand::Concentration { common }) => concentration(&common),
        Command::Oracle { common, data } => oracle(&common, &data),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>().map(Error::class) {
        Some(ErrorClass::Usage) => 1,
        Some(ErrorClass::Estimation) => 2,
        Some(ErrorClass::Data) => 3,
        None if err.downcast_ref::<std::io::Error>().is_some() => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(w) = std::env::var("MLERGM_WORKERS") {
        match w.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: MLERGM_WORKERS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
