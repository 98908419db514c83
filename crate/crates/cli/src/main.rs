//! Batch front end for the parallel Glauber dynamics toolkit.
//!
//! Subcommands: `generate`, `simulate`, `exact`, `bounds`, `couple`,
//! `verify`. Every run is a pure function of its arguments; repeated
//! invocations with the same seed produce byte-identical artifacts.
//!
//! Exit codes: 0 ok, 1 usage, 2 validation, 3 cap exceeded, 4 verification
//! failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use glauber_core::bounds::{self, InequalityCheck};
use glauber_core::coupling::{self, WeightFunction};
use glauber_core::cube;
use glauber_core::dynamics::{self, Fugacities, MarginalMode, RunOptions, UpdateDist};
use glauber_core::exact;
use glauber_core::graph::{Config, Graph, GraphKind};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "glauber",
    version,
    about = "Parallel Glauber dynamics on weighted independent sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated graph as an edge-list file.
    Generate(GenerateArgs),
    /// Run the dynamics and write a trajectory summary.
    Simulate(SimulateArgs),
    /// Exact stationary distribution, detailed balance, and mixing time.
    Exact(ExactArgs),
    /// Evaluate every mixing-time bound formula.
    Bounds(BoundsArgs),
    /// Coupled-chain coalescence experiment.
    Couple(CoupleArgs),
    /// Verification sweep over the library's inequalities; CI gate.
    Verify(VerifyArgs),
}

#[derive(Args, Serialize)]
struct InstanceArgs {
    /// Graph source: an edge-list file or a spec like
    /// gen:path:8, gen:cycle:8, gen:star:8, gen:grid:3,4, gen:band:10,3,
    /// gen:er:12,0.3,42
    #[arg(long)]
    graph: String,
    /// Fugacities: a positive value (uniform) or a file of "v lambda" lines
    #[arg(long, default_value = "1.0")]
    lambda: String,
    /// Fugacity for vertices omitted from the fugacity file
    #[arg(long)]
    lambda_default: Option<f64>,
    /// Update-set distribution: single-site | single-site:activity |
    /// greedy:<a> | a JSON file
    #[arg(long, default_value = "single-site")]
    dist: String,
}

#[derive(Args, Serialize)]
struct OutputArgs {
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the resolved run configuration to this path
    #[arg(long)]
    dump_config: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Serialize)]
struct GenerateArgs {
    /// Generator spec (gen:...)
    #[arg(long)]
    graph: String,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 10_000)]
    slots: u64,
    #[arg(long, default_value_t = 0)]
    burn_in: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip per-configuration visit counts (occupancy only)
    #[arg(long)]
    no_counts: bool,
    /// Cap on distinct counted configurations
    #[arg(long, default_value_t = 1 << 20)]
    config_cap: usize,
    /// Record the full per-slot trace
    #[arg(long)]
    trace: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct ExactArgs {
    #[command(flatten)]
    #[serde(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Cap on the number of feasible configurations
    #[arg(long, default_value_t = exact::DEFAULT_MATRIX_CAP)]
    omega_cap: usize,
    #[arg(long, default_value_t = exact::DEFAULT_ITERATION_CAP)]
    iter_cap: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MarginalSource {
    /// Exact marginals of --dist
    FromDist,
    /// q_v = 1/n
    Uniform,
    /// q_v = 1/(d_v + 1)
    Degree,
    /// q_v = (1 + lambda_v)/gamma
    Activity,
}

#[derive(Args, Serialize)]
struct BoundsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Where the per-vertex update marginals come from
    #[arg(long, value_enum, default_value_t = MarginalSource::FromDist)]
    qv: MarginalSource,
    /// Optional weight function file ("v f" lines) for the general bound
    #[arg(long)]
    weights: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct CoupleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    #[arg(long, default_value_t = 100)]
    slots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional weight function file ("v f" lines); uniform when omitted
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = exact::DEFAULT_MATRIX_CAP)]
    omega_cap: usize,
    /// Perturb one transition-matrix entry by 1e-3 before checking
    #[arg(long)]
    inject_fault: bool,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<glauber_core::Error> for CliError {
    fn from(e: glauber_core::Error) -> Self {
        use glauber_core::Error::*;
        let code = match e {
            EnumerationCap { .. }
            | CapExceeded { .. }
            | TooManyVertices { .. }
            | IterationCap { .. } => 3,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Exact(args) => cmd_exact(&args),
        Command::Bounds(args) => cmd_bounds(&args),
        Command::Couple(args) => cmd_couple(&args),
        Command::Verify(args) => cmd_verify(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn parse_graph_spec(spec: &str) -> Result<Graph, CliError> {
    if let Some(rest) = spec.strip_prefix("gen:") {
        let (kind, params) = rest
            .split_once(':')
            .ok_or_else(|| CliError::usage(format!("generator spec {spec:?} needs parameters")))?;
        let nums: Vec<&str> = params.split(',').collect();
        let usize_at = |i: usize| -> Result<usize, CliError> {
            nums.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::usage(format!("bad parameter in {spec:?}")))
        };
        let kind = match (kind, nums.len()) {
            ("path", 1) => GraphKind::Path { n: usize_at(0)? },
            ("cycle", 1) => GraphKind::Cycle { n: usize_at(0)? },
            ("star", 1) => GraphKind::Star { n: usize_at(0)? },
            ("grid", 2) => GraphKind::Grid {
                rows: usize_at(0)?,
                cols: usize_at(1)?,
            },
            ("band", 2) => GraphKind::Band {
                n: usize_at(0)?,
                width: usize_at(1)?,
            },
            ("er", 3) => {
                let p: f64 = nums[1]
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad edge probability in {spec:?}")))?;
                let seed: u64 = nums[2]
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad seed in {spec:?}")))?;
                GraphKind::ErdosRenyi {
                    n: usize_at(0)?,
                    p,
                    seed,
                }
            }
            _ => return Err(CliError::usage(format!("unknown generator spec {spec:?}"))),
        };
        Ok(Graph::generate(&kind)?)
    } else {
        let text = fs::read_to_string(spec)
            .map_err(|e| CliError::validation(format!("cannot read graph file {spec:?}: {e}")))?;
        Ok(Graph::load_edge_list(&text)?)
    }
}

fn parse_lambda_spec(spec: &str, n: usize, default: Option<f64>) -> Result<Fugacities, CliError> {
    if let Ok(value) = spec.parse::<f64>() {
        return Ok(Fugacities::uniform(n, value)?);
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| CliError::validation(format!("cannot read fugacity file {spec:?}: {e}")))?;
    Ok(Fugacities::parse(&text, n, default)?)
}

fn parse_dist_spec(spec: &str, g: &Graph, fug: &Fugacities) -> Result<UpdateDist, CliError> {
    match spec {
        "single-site" => Ok(UpdateDist::single_site_uniform(g.n())),
        "single-site:activity" => {
            let params = cube::cube_metric_params(g, fug);
            Ok(UpdateDist::single_site(params.q)?)
        }
        _ => {
            if let Some(a) = spec.strip_prefix("greedy:") {
                let a: f64 = a
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad activation in {spec:?}")))?;
                return Ok(UpdateDist::random_greedy(vec![a; g.n()])?);
            }
            let text = fs::read_to_string(spec).map_err(|e| {
                CliError::validation(format!("cannot read distribution file {spec:?}: {e}"))
            })?;
            Ok(UpdateDist::from_json(&text)?)
        }
    }
}

fn load_instance(args: &InstanceArgs) -> Result<(Graph, Fugacities, UpdateDist), CliError> {
    let g = parse_graph_spec(&args.graph)?;
    let fug = parse_lambda_spec(&args.lambda, g.n(), args.lambda_default)?;
    let dist = parse_dist_spec(&args.dist, &g, &fug)?;
    if let Some(width) = dist.width() {
        if width != g.n() {
            return Err(CliError::validation(format!(
                "distribution is over {width} vertices but the graph has {}",
                g.n()
            )));
        }
    }
    Ok((g, fug, dist))
}

fn parse_weight_file(path: &PathBuf, n: usize) -> Result<WeightFunction, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read weight file {path:?}: {e}")))?;
    let values = Fugacities::parse(&text, n, None)?;
    Ok(WeightFunction::from_values(values.values().to_vec())?)
}

fn write_output(out: &Option<PathBuf>, mut content: String) -> Result<(), CliError> {
    if !content.ends_with('\n') {
        content.push('\n');
    }
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::validation(format!("cannot write {path:?}: {e}"))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn dump_config<T: Serialize>(
    command: &str,
    args: &T,
    path: &Option<PathBuf>,
) -> Result<(), CliError> {
    if let Some(path) = path {
        let body = serde_json::json!({ "command": command, "args": args });
        let text = serde_json::to_string_pretty(&body).expect("serializable");
        fs::write(path, text + "\n")
            .map_err(|e| CliError::validation(format!("cannot write {path:?}: {e}")))?;
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<(), CliError> {
    if !eps.is_finite() || eps <= 0.0 || eps >= 1.0 {
        return Err(CliError::usage(format!(
            "--eps must lie in (0,1), got {eps}"
        )));
    }
    Ok(())
}

/// Rejects distributions whose support is unusable before running anything.
fn gate_distribution(dist: &UpdateDist, g: &Graph) -> Result<(), CliError> {
    let report = dist.validate(g);
    if let Some(m) = report.first_dependent_set {
        return Err(CliError::validation(format!(
            "update set not independent: {m}"
        )));
    }
    if !report.normalized {
        return Err(CliError::validation(format!(
            "update-set distribution mass {} is not 1",
            report.total_mass
        )));
    }
    if !report.covers_all_vertices {
        eprintln!(
            "warning: vertices {:?} are never updated; the chain is reducible",
            report.uncovered_vertices
        );
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    dump_config("generate", args, &args.output.dump_config)?;
    if !args.graph.starts_with("gen:") {
        return Err(CliError::usage("generate needs a gen:... graph spec"));
    }
    let g = parse_graph_spec(&args.graph)?;
    write_output(&args.output.out, g.to_edge_list_string())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    dump_config("simulate", args, &args.output.dump_config)?;
    let (g, fug, dist) = load_instance(&args.instance)?;
    gate_distribution(&dist, &g)?;
    let mut opts = RunOptions::new(args.slots, args.burn_in, args.seed);
    opts.count_configs = !args.no_counts;
    opts.config_cap = args.config_cap;
    opts.record_trace = args.trace || args.format == Format::Csv;
    let trajectory = dynamics::run_chain(&g, &fug, &dist, &opts)?;
    match args.format {
        Format::Json => {
            let body = serde_json::json!({
                "n": g.n(),
                "edges": g.edge_count(),
                "seed": args.seed,
                "slots": trajectory.slots,
                "burn_in": trajectory.burn_in,
                "counted": trajectory.counted,
                "counts": trajectory.counts,
                "empirical": trajectory.empirical(),
                "occupancy": trajectory.occupancy,
                "final_config": trajectory.final_config.bits(),
            });
            write_output(
                &args.output.out,
                serde_json::to_string_pretty(&body).unwrap(),
            )
        }
        Format::Csv => {
            let mut csv = String::from("slot,bitmask\n");
            for (i, bits) in trajectory
                .trace
                .as_deref()
                .unwrap_or(&[])
                .iter()
                .enumerate()
            {
                let _ = writeln!(csv, "{},{}", i + 1, bits);
            }
            write_output(&args.output.out, csv)
        }
    }
}

fn cmd_exact(args: &ExactArgs) -> Result<(), CliError> {
    dump_config("exact", args, &args.output.dump_config)?;
    check_eps(args.eps)?;
    let (g, fug, dist) = load_instance(&args.instance)?;
    gate_distribution(&dist, &g)?;
    let st = exact::product_form(&g, &fug, args.omega_cap)?;
    let p = exact::build_matrix(&g, &fug, &dist, args.omega_cap)?;
    let balance = exact::check_detailed_balance(&p, &st.pi, 1e-12)?;
    let irreducible = exact::is_irreducible(&p);
    let mix = exact::exact_mixing_time(&p, &st.pi, args.eps, args.iter_cap)?;
    match args.format {
        Format::Json => {
            let body = serde_json::json!({
                "omega": st.omega.iter().map(|c| c.bits()).collect::<Vec<_>>(),
                "z": st.z,
                "pi": st.pi,
                "epsilon": mix.epsilon,
                "t_mix": mix.t_mix,
                "worst_start": mix.worst_start.bits(),
                "tv_curve": mix.tv_curve,
                "detailed_balance_max_violation": balance.max_violation,
                "detailed_balance_passed": balance.passed,
                "irreducible": irreducible,
            });
            write_output(
                &args.output.out,
                serde_json::to_string_pretty(&body).unwrap(),
            )
        }
        Format::Csv => {
            let mut csv = String::from("t,tv\n");
            for (t, tv) in mix.tv_curve.iter().enumerate() {
                let _ = writeln!(csv, "{t},{tv}");
            }
            write_output(&args.output.out, csv)
        }
    }
}

fn cmd_bounds(args: &BoundsArgs) -> Result<(), CliError> {
    dump_config("bounds", args, &args.output.dump_config)?;
    check_eps(args.eps)?;
    let (g, fug, dist) = load_instance(&args.instance)?;
    let q = match args.qv {
        MarginalSource::FromDist => dist.update_marginals(&g, MarginalMode::Exact)?.q,
        MarginalSource::Uniform => vec![1.0 / g.n() as f64; g.n()],
        MarginalSource::Degree => bounds::degree_marginals(&g),
        MarginalSource::Activity => cube::cube_metric_params(&g, &fug).q,
    };
    let mut reports = Vec::new();
    if let Some(path) = &args.weights {
        let f = parse_weight_file(path, g.n())?;
        reports.push(
            serde_json::to_value(bounds::custom_weight_bound_from_marginals(
                &g, &fug, &q, &f, args.eps,
            ))
            .unwrap(),
        );
    }
    reports.push(
        serde_json::to_value(bounds::activity_weight_bound_from_marginals(
            &g, &fug, &q, args.eps,
        ))
        .unwrap(),
    );
    reports.push(
        serde_json::to_value(bounds::inverse_marginal_bound_from_marginals(
            &g, &fug, &q, args.eps,
        ))
        .unwrap(),
    );
    match bounds::degree_weight_bound_from_marginals(&g, &fug, &q, args.eps) {
        Ok(report) => reports.push(serde_json::to_value(report).unwrap()),
        Err(e) => reports.push(serde_json::json!({
            "formula": "degree_weight",
            "epsilon": args.eps,
            "applicable": false,
            "failed_condition": e.to_string(),
        })),
    }
    reports.push(serde_json::to_value(cube::cube_metric_bound(&g, &fug, args.eps)).unwrap());
    write_output(
        &args.output.out,
        serde_json::to_string_pretty(&serde_json::Value::Array(reports)).unwrap(),
    )
}

fn cmd_couple(args: &CoupleArgs) -> Result<(), CliError> {
    dump_config("couple", args, &args.output.dump_config)?;
    let (g, fug, dist) = load_instance(&args.instance)?;
    gate_distribution(&dist, &g)?;
    let f = match &args.weights {
        Some(path) => parse_weight_file(path, g.n())?,
        None => WeightFunction::uniform(g.n()),
    };
    let report =
        coupling::coalescence_experiment(&g, &fug, &dist, &f, args.pairs, args.slots, args.seed)?;
    match args.format {
        Format::Csv => {
            let mut csv = String::from("slot,coalesced_fraction,mean_phi\n");
            for s in &report.per_slot {
                let _ = writeln!(csv, "{},{},{}", s.slot, s.coalesced_fraction, s.mean_phi);
            }
            write_output(&args.output.out, csv)
        }
        Format::Json => write_output(
            &args.output.out,
            serde_json::to_string_pretty(&report).unwrap(),
        ),
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    dump_config("verify", args, &args.output.dump_config)?;
    let (g, fug, dist) = load_instance(&args.instance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut checks: Vec<InequalityCheck> = Vec::new();

    // Distribution shape and the support condition.
    let report = dist.validate(&g);
    checks.push(InequalityCheck::le(
        "support sets independent (violations)",
        if report.support_independent { 0.0 } else { 1.0 },
        0.0,
        0.0,
    ));
    checks.push(InequalityCheck::le(
        "distribution normalized |mass - 1|",
        (report.total_mass - 1.0).abs(),
        0.0,
        1e-12,
    ));
    checks.push(InequalityCheck::le(
        "support condition q_v > 0 (uncovered vertices)",
        report.uncovered_vertices.len() as f64,
        0.0,
        0.0,
    ));
    if !report.support_independent || !report.normalized {
        // Nothing downstream is meaningful.
        return finish_verify(&args.output.out, checks);
    }

    // Feasibility preservation along a simulated trajectory.
    let mut config = Config::EMPTY;
    let mut infeasible = 0u32;
    for _ in 0..2000 {
        let (m, coins) = dynamics::draw_update(&dist, &g, &mut rng)?;
        config = dynamics::step(&g, &fug, config, m, &coins)?;
        if !g.is_independent(config) {
            infeasible += 1;
        }
    }
    checks.push(InequalityCheck::le(
        "feasibility preserved over 2000 slots (violations)",
        infeasible as f64,
        0.0,
        0.0,
    ));

    // Simultaneous vs sequential updates.
    let omega = g.enumerate_independent_sets(args.omega_cap).ok();
    let mut mismatches = 0u32;
    if let Some(omega) = &omega {
        let sets: Vec<Config> = omega
            .iter()
            .copied()
            .filter(|m| (1..=4).contains(&m.len()))
            .collect();
        for m in sets {
            let sigma = omega[rng.random_range(0..omega.len())];
            let coins: Vec<f64> = (0..m.len()).map(|_| rng.random::<f64>()).collect();
            let simultaneous = dynamics::step(&g, &fug, sigma, m, &coins)?;
            for order in permutations(&m.to_vertices()) {
                if dynamics::step_sequential(&g, &fug, sigma, &order, &coins)? != simultaneous {
                    mismatches += 1;
                }
            }
        }
    } else {
        use rand::seq::SliceRandom;
        for _ in 0..200 {
            let sigma = dynamics::sample_feasible(&g, &fug, &mut rng);
            let m = dist.sample_update_set(&g, &mut rng)?;
            let coins: Vec<f64> = (0..m.len()).map(|_| rng.random::<f64>()).collect();
            let simultaneous = dynamics::step(&g, &fug, sigma, m, &coins)?;
            let mut order = m.to_vertices();
            order.shuffle(&mut rng);
            if dynamics::step_sequential(&g, &fug, sigma, &order, &coins)? != simultaneous {
                mismatches += 1;
            }
        }
    }
    checks.push(InequalityCheck::le(
        "simultaneous = sequential updates (mismatches)",
        mismatches as f64,
        0.0,
        0.0,
    ));

    // Adjacent-pair drift against its bound, exhaustive over feasible pairs.
    if let Some(omega) = &omega {
        if let Ok(marginals) = dist.update_marginals(&g, MarginalMode::Exact) {
            let f = WeightFunction::uniform(g.n());
            let mut max_excess = f64::NEG_INFINITY;
            let mut any = false;
            for &sigma in omega {
                for v in 0..g.n() {
                    if sigma.contains(v) || g.neighbors(v) & sigma.bits() != 0 {
                        continue;
                    }
                    let drift =
                        coupling::exact_adjacent_drift(&g, &fug, &marginals.q, &f, sigma, v)?;
                    max_excess = max_excess.max(drift.exact - drift.rhs);
                    any = true;
                }
            }
            if any {
                checks.push(InequalityCheck::le(
                    "adjacent drift <= neighbor-sum bound (max excess)",
                    max_excess,
                    0.0,
                    1e-9,
                ));
            }
        }
    }

    // Transition-matrix checks, optionally with an injected fault.
    if omega.is_some() {
        let mut p = exact::build_matrix(&g, &fug, &dist, args.omega_cap)?;
        if args.inject_fault {
            let j = p.size() - 1;
            p.perturb_entry(0, j, 1e-3);
        }
        let st = exact::product_form(&g, &fug, args.omega_cap)?;
        checks.push(InequalityCheck::le(
            "rows sum to 1 (max deviation)",
            p.max_row_sum_deviation(),
            0.0,
            1e-12,
        ));
        let balance = exact::check_detailed_balance(&p, &st.pi, 1e-12)?;
        checks.push(InequalityCheck::le(
            "detailed balance (max violation)",
            balance.max_violation,
            0.0,
            1e-12,
        ));
        checks.push(InequalityCheck::le(
            "product form stationary (residual)",
            exact::stationary_residual(&p, &st.pi),
            0.0,
            1e-10,
        ));
    }

    // Contraction inequality on the configuration cube.
    let params = cube::cube_metric_params(&g, &fug);
    if g.n() <= cube::CONTRACTION_CHECK_MAX_VERTICES && params.a < 2.0 {
        let mut metric = cube::CubeMetric::new(&g, &fug)?;
        let mut max_excess = f64::NEG_INFINITY;
        let exhaustive = g.n() <= 8;
        let cases: Vec<(Config, usize)> = if exhaustive {
            (0u64..(1 << g.n()))
                .flat_map(|mask| (0..g.n()).map(move |v| (Config::from_bits(mask), v)))
                .filter(|(sigma, v)| !sigma.contains(*v))
                .collect()
        } else {
            (0..200)
                .map(|_| {
                    let mask = rng.random::<u64>() & g.vertex_mask();
                    let v = rng.random_range(0..g.n());
                    (Config::from_bits(mask).without(v), v)
                })
                .collect()
        };
        for (sigma, v) in cases {
            let check = cube::cube_contraction_check_with(&mut metric, sigma, v)?;
            max_excess = max_excess.max(check.lhs - check.rhs);
        }
        checks.push(InequalityCheck::le(
            if exhaustive {
                "cube contraction inequality, exhaustive (max excess)"
            } else {
                "cube contraction inequality, sampled (max excess)"
            },
            max_excess,
            0.0,
            1e-9,
        ));
    }

    finish_verify(&args.output.out, checks)
}

fn finish_verify(out: &Option<PathBuf>, checks: Vec<InequalityCheck>) -> Result<(), CliError> {
    let all_hold = checks.iter().all(|c| c.holds);
    write_output(out, serde_json::to_string_pretty(&checks).unwrap())?;
    if all_hold {
        Ok(())
    } else {
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| !c.holds)
            .map(|c| c.context.as_str())
            .collect();
        Err(CliError {
            code: 4,
            message: format!("verification failed: {failed:?}"),
        })
    }
}
