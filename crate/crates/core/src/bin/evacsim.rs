use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evacsim::experiment::{self, parse_grid, GraphSource, Recipe, Users};
use evacsim::{generate_synthetic, parse_config, parse_graph, serialize_graph, Error, GeneratorParams};

#[derive(Parser)]
#[command(name = "evacsim", version, about = "Ship evacuation simulator with stale navigation advice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment recipe or a custom grid.
    Run(RunArgs),
    /// Generate a synthetic multi-deck graph file.
    GenGraph(GenArgs),
    /// Parse and validate a graph file.
    Validate { graph: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// sweep-sod, sweep-pod, random-deployment, sweep-poe, combined or custom.
    #[arg(long, conflicts_with = "grid")]
    recipe: Option<Recipe>,
    /// Custom grid, e.g. `pod=0.1|0.2,sod=1|3,poe=0`.
    #[arg(long)]
    grid: Option<String>,
    /// Scenario file with key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph file, or `synthetic` for the generated 346-node ship graph
    /// (the default).
    #[arg(long)]
    graph: Option<String>,
    /// Master seed; EVACSIM_SEED takes precedence.
    #[arg(long)]
    seed: Option<u64>,
    /// Paired runs per grid point.
    #[arg(long)]
    runs: Option<usize>,
    /// `all` or `random:<n>`.
    #[arg(long)]
    users: Option<Users>,
    /// Worker threads; output does not depend on this.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory [default: results].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep run 0's random placement for every run.
    #[arg(long)]
    fixed_placement: bool,
    /// Freeze the traversal-time field after initialization.
    #[arg(long)]
    static_field: bool,
    /// Quiet: skip the summary table.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 3)]
    decks: u32,
    #[arg(long, default_value_t = 346)]
    nodes: usize,
    #[arg(long, default_value_t = 600)]
    passages: usize,
    #[arg(long, default_value_t = 5)]
    stairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("EVACSIM_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Config(format!("EVACSIM_SEED is not an integer: `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let (mut cfg, mut spec) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => parse_config("").map_err(|e| Failure::Config(e.to_string()))?,
    };

    if let Some(recipe) = args.recipe {
        let preset = recipe.preset();
        spec.recipe = recipe;
        if recipe != Recipe::Custom {
            spec.grid = preset.grid;
            spec.runs = preset.runs;
            spec.users = preset.users;
            if let Some(flag) = preset.static_field {
                cfg.static_field = flag;
            }
        }
    }
    if let Some(grid) = &args.grid {
        spec.recipe = Recipe::Custom;
        spec.grid = parse_grid(grid, &cfg).map_err(|e| Failure::Config(e.to_string()))?;
    }
    if let Some(graph) = &args.graph {
        spec.graph = if graph == "synthetic" {
            GraphSource::Synthetic(GeneratorParams::ship(), 0)
        } else {
            GraphSource::File(PathBuf::from(graph))
        };
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(seed) = env_seed()? {
        cfg.master_seed = seed;
    }
    if let Some(runs) = args.runs {
        spec.runs = runs;
    }
    if let Some(users) = args.users {
        spec.users = users;
    }
    spec.fixed_placement |= args.fixed_placement;
    cfg.static_field |= args.static_field;
    if let Some(out) = &args.out {
        spec.out = out.clone();
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    spec.validate().map_err(|e| Failure::Config(e.to_string()))?;

    let graph = spec.graph.load()?;
    let output = experiment::run_parallel(&graph, &cfg, &spec, args.workers)?;
    let (runs_path, agg_path) = experiment::write_outputs(&output, &spec.out)?;
    if !args.quiet {
        println!(
            "recipe {} | graph {} nodes / {} edges | seed {} | {} run(s) x {} grid point(s)",
            spec.recipe,
            graph.node_count(),
            graph.edge_count(),
            cfg.master_seed,
            spec.runs,
            spec.grid.len()
        );
        print!("{}", experiment::summary_table(&output.aggregates));
        println!("wrote {} and {}", runs_path.display(), agg_path.display());
    }
    Ok(())
}

fn gen_graph(args: GenArgs) -> Result<(), Failure> {
    let params = GeneratorParams::new(args.decks, args.nodes, args.passages, args.stairs);
    let graph = generate_synthetic(&params, args.seed).map_err(|e| Failure::Config(e.to_string()))?;
    fs::write(&args.out, serialize_graph(&graph))
        .map_err(|e| Failure::Io(format!("{}: {e}", args.out.display())))?;
    println!(
        "wrote {} ({} nodes, {} edges)",
        args.out.display(),
        graph.node_count(),
        graph.edge_count()
    );
    Ok(())
}

fn validate(path: PathBuf) -> Result<(), Failure> {
    let text =
        fs::read_to_string(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let graph = parse_graph(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    println!(
        "{}: ok ({} nodes, {} edges, exit {})",
        path.display(),
        graph.node_count(),
        graph.edge_count(),
        graph.exit()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::GenGraph(args) => gen_graph(args),
        Command::Validate { graph } => validate(graph),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
