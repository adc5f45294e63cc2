use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use boxplan::oracle::enumerate_plan;
use boxplan::scene_io::{
    bench, gen_grid, gen_village, plot_svg, BenchRow, PathFile, PlotOptions, PreprocCache, SceneFile, VillageParams,
};
use boxplan::smooth::{PlanningQuery, SmoothParams};
use boxplan::{PlanError, PlanOutcome, Planner};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

/// Smooth path planning through unions of axis-aligned boxes.
#[derive(Parser)]
#[command(name = "boxplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the line graph of a scene and save it as a cache.
    Preprocess {
        scene: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Plan a path using a preprocessed cache.
    Plan {
        cache: PathBuf,
        /// Scene the cache was built from.
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print a saved path and its derivatives at one time.
    Eval {
        path: PathBuf,
        #[arg(long)]
        t: f64,
    },
    /// Generate a benchmark scene.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Draw a scene, and optionally a path, as SVG.
    Plot {
        scene: PathBuf,
        path: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Time preprocessing and planning on grid scenes; prints CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,40")]
        sides: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare the planner with exhaustive sequence enumeration (small scenes).
    Verify {
        scene: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        /// Longest box sequence to enumerate (default: boxes + 2).
        #[arg(long)]
        max_length: Option<usize>,
    },
}

#[derive(Subcommand)]
enum GenKind {
    Grid {
        #[arg(long)]
        side: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    Village {
        #[arg(long)]
        side: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        walk_length: usize,
        #[arg(long, default_value_t = 5)]
        anchor_spacing: usize,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = 5.0)]
        ceiling: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct QueryArgs {
    /// Initial point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    init: Vec<f64>,
    /// Terminal point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    term: Vec<f64>,
    /// Final time.
    #[arg(short = 'T', long = "duration")]
    duration: f64,
    /// Weight of each derivative's squared L2 norm, starting at the first.
    #[arg(long, value_delimiter = ',', required = true)]
    alpha: Vec<f64>,
    /// Bézier degree (default 2D + 1).
    #[arg(long)]
    degree: Option<usize>,
    /// Initial value of derivatives 1, 2, …; repeat per order.
    #[arg(long = "init-derivative", allow_hyphen_values = true, num_args = 1)]
    init_derivatives: Vec<String>,
    /// Final value of derivatives 1, 2, …; repeat per order.
    #[arg(long = "term-derivative", allow_hyphen_values = true, num_args = 1)]
    term_derivatives: Vec<String>,
}

impl QueryArgs {
    fn query(&self) -> Result<(PlanningQuery, SmoothParams), PlanError> {
        let parse = |items: &[String]| -> Result<Vec<Vec<f64>>, PlanError> {
            items
                .iter()
                .map(|s| {
                    s.split(',')
                        .map(|v| {
                            v.trim()
                                .parse::<f64>()
                                .map_err(|e| PlanError::InvalidInput(format!("bad derivative value {v:?}: {e}")))
                        })
                        .collect()
                })
                .collect()
        };
        let query = PlanningQuery::new(self.init.clone(), self.term.clone(), self.duration, self.alpha.clone())
            .with_boundary_derivatives(parse(&self.init_derivatives)?, parse(&self.term_derivatives)?);
        let params = SmoothParams {
            degree: self.degree,
            ..SmoothParams::default()
        };
        Ok((query, params))
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(EXIT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    if let Ok(threads) = std::env::var("BOXPLAN_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: BOXPLAN_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::from(EXIT_ERROR);
            }
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(command: Command) -> Result<u8, PlanError> {
    match command {
        Command::Preprocess { scene, output } => {
            let scene = SceneFile::load(&scene)?;
            let planner = Planner::preprocess(scene.to_box_set()?)?;
            PreprocCache::new(&scene, planner.graph())?.save(&output)?;
            println!(
                "boxes {} vertices {} edges {}",
                scene.num_boxes(),
                planner.graph().vertices().len(),
                planner.graph().edges().len()
            );
        }
        Command::Plan {
            cache,
            scene,
            query,
            output,
        } => {
            let scene = SceneFile::load(&scene)?;
            let graph = PreprocCache::load(&cache)?.to_graph(&scene)?;
            let planner = Planner::from_graph(scene.to_box_set()?, graph)?;
            let (query, params) = query.query()?;
            match planner.plan(&query, &params)? {
                PlanOutcome::Infeasible => {
                    println!("infeasible");
                    return Ok(EXIT_INFEASIBLE);
                }
                PlanOutcome::Found(plan) => {
                    PathFile::new(&plan.smooth.path, &plan.smooth.times)?.save(&output)?;
                    println!(
                        "boxes {} cost {:.6e} smooth iterations {}",
                        plan.polygonal.num_segments(),
                        plan.cost(),
                        plan.smooth.stats.iterations
                    );
                }
            }
        }
        Command::Eval { path, t } => {
            let file = PathFile::load(&path)?;
            let curve = file.to_path()?;
            for order in 0..=file.derivatives {
                let value = curve.eval_derivative(t, order)?;
                let text: Vec<String> = value.iter().map(|x| format!("{x:.17e}")).collect();
                println!("{order} {}", text.join(" "));
            }
        }
        Command::Gen { kind } => match kind {
            GenKind::Grid { side, seed, output } => gen_grid(side, seed)?.save(&output)?,
            GenKind::Village {
                side,
                seed,
                walk_length,
                anchor_spacing,
                radius,
                ceiling,
                output,
            } => {
                let params = VillageParams {
                    walk_length,
                    anchor_spacing,
                    radius,
                    ceiling,
                    ..VillageParams::default()
                };
                let village = gen_village(side, seed, &params)?;
                village.scene.save(&output)?;
                println!(
                    "boxes {} building cells {}",
                    village.scene.num_boxes(),
                    village.building_cells.len()
                );
            }
        },
        Command::Plot { scene, path, output } => {
            let scene = SceneFile::load(&scene)?;
            let path = path.map(|p| PathFile::load(&p)).transpose()?;
            std::fs::write(output, plot_svg(&scene, path.as_ref(), &PlotOptions::default())?)?;
        }
        Command::Bench { sides, seed } => {
            println!("{}", BenchRow::CSV_HEADER);
            for row in bench(&sides, seed, &SmoothParams::default())? {
                println!("{}", row.to_csv());
            }
        }
        Command::Verify {
            scene,
            query,
            max_length,
        } => {
            let scene = SceneFile::load(&scene)?;
            let (query, params) = query.query()?;
            let set = scene.to_box_set()?;
            let oracle = enumerate_plan(&set, &query, &params, max_length)?;
            let planner = Planner::preprocess(set)?;
            let outcome = planner.plan(&query, &params)?;
            match (oracle, outcome.plan()) {
                (None, None) => {
                    println!("infeasible (planner and enumeration agree)");
                    return Ok(EXIT_INFEASIBLE);
                }
                (Some(best), Some(plan)) => {
                    println!("planner cost {:.9e} sequence {:?}", plan.cost(), plan.polygonal.boxes());
                    println!("enumeration cost {:.9e} sequence {:?}", best.best_cost, best.best_sequence);
                    println!(
                        "sequences {} distinct curves {} relative gap {:.3e}",
                        best.feasible_sequences,
                        best.distinct_curves,
                        (plan.cost() - best.best_cost) / best.best_cost.abs().max(f64::MIN_POSITIVE)
                    );
                }
                (oracle, _) => {
                    return Err(PlanError::InvalidInput(format!(
                        "feasibility disagrees: planner {}, enumeration {}",
                        if outcome.plan().is_some() { "feasible" } else { "infeasible" },
                        if oracle.is_some() { "feasible" } else { "infeasible" }
                    )));
                }
            }
        }
    }
    Ok(0)
}
