use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ksnpp::bench::{bench_case, to_csv, to_table, BenchRow};
use ksnpp::expansion::ExpansionParams;
use ksnpp::mapgen::{self, GenParams};
use ksnpp::oracle::{default_lmax, oracle_k_snpp};
use ksnpp::record::{compare, RunRecord};
use ksnpp::tree::{PlanError, Planner, PlannerOptions};
use ksnpp::{fixtures, Cell, GridMap};
use log::info;

#[derive(Parser)]
#[command(name = "ksnpp", version, about = "k shortest non-homotopic paths on occupancy grids")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the tree planner.
    Plan(PlanArgs),
    /// Run the exhaustive homotopy-augmented search.
    Oracle(OracleArgs),
    /// Compare two run records.
    Compare(CompareArgs),
    /// Time the tree planner against the oracle.
    Bench(BenchArgs),
    /// Generate a random map.
    Gen(GenArgs),
}

#[derive(Args)]
struct MapArgs {
    /// Map file (`.pgm` or ASCII).
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    map: Option<PathBuf>,
    /// Built-in fixture name instead of a map file.
    #[arg(long)]
    fixture: Option<String>,
    /// Cell size in meters for PGM maps.
    #[arg(long, default_value_t = 1.0)]
    cell_size: f64,
    /// Robot radius in meters.
    #[arg(long, default_value_t = 1.0)]
    robot_radius: f64,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Start cell as `row,col`; defaults to the fixture's.
    #[arg(long, value_parser = parse_cell)]
    start: Option<Cell>,
    /// Goal cell as `row,col`; defaults to the fixture's.
    #[arg(long, value_parser = parse_cell)]
    goal: Option<Cell>,
    #[arg(short, default_value_t = 1)]
    k: usize,
    /// JSON output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    q: QueryArgs,
    /// Disable relative-optimality pruning.
    #[arg(long)]
    no_prune: bool,
    /// Expansion cap.
    #[arg(long, default_value_t = 100_000)]
    cap: usize,
    /// Near/far alignment tolerance in cells.
    #[arg(long)]
    eps: Option<f64>,
    /// Write an SVG rendering.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    q: QueryArgs,
    /// Word-length bound; defaults to 2k+2.
    #[arg(long)]
    lmax: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    /// Per-class length tolerance in meters.
    #[arg(long, default_value_t = 1.5)]
    tol: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of map files; otherwise maps are generated.
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Number of generated maps.
    #[arg(long, default_value_t = 10)]
    count: u64,
    #[arg(long, default_value_t = 300)]
    size: usize,
    #[arg(long, default_value_t = 15)]
    obstacles: usize,
    /// Seed of the first generated map.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Comma-separated k values.
    #[arg(short, value_delimiter = ',', default_value = "1,2,3,4")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    cell_size: f64,
    #[arg(long, default_value_t = 1.0)]
    robot_radius: f64,
    /// CSV output file; the table goes to stdout either way.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 2)]
    obstacles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    cell_size: f64,
    #[arg(long, default_value_t = 1.0)]
    robot_radius: f64,
    /// ASCII map output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with a specific exit code.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn parse_cell(s: &str) -> Result<Cell, String> {
    let (r, c) = s.split_once(',').ok_or_else(|| format!("expected `row,col`, got `{s}`"))?;
    let r = r.trim().parse().map_err(|_| format!("bad row in `{s}`"))?;
    let c = c.trim().parse().map_err(|_| format!("bad column in `{s}`"))?;
    Ok(Cell::new(r, c))
}

struct Query {
    map: GridMap,
    name: String,
    start: Cell,
    goal: Cell,
}

fn load_query(q: &QueryArgs) -> Result<Query> {
    if q.k == 0 {
        bail!("k must be at least 1");
    }
    let (map, name, fs, fg) = match (&q.map.map, &q.map.fixture) {
        (Some(p), _) => {
            let m = GridMap::load_path(p, q.map.cell_size, q.map.robot_radius)
                .with_context(|| format!("loading {}", p.display()))?;
            (m, file_name(p), None, None)
        }
        (None, Some(n)) => {
            let f = fixtures::by_name(n).ok_or_else(|| anyhow!("unknown fixture `{n}`"))?;
            (f.map, format!("fixture:{n}"), Some(f.start), Some(f.goal))
        }
        (None, None) => bail!("either --map or --fixture is required"),
    };
    let start = q.start.or(fs).ok_or_else(|| anyhow!("--start is required"))?;
    let goal = q.goal.or(fg).ok_or_else(|| anyhow!("--goal is required"))?;
    for (what, c) in [("start", start), ("goal", goal)] {
        if !map.contains(c) {
            bail!("{what} {c} lies outside the {}x{} map", map.width(), map.height());
        }
        if !map.is_free(c) {
            return Err(Exit(2, format!("{what} {c} is in collision")).into());
        }
    }
    Ok(Query { map, name, start, goal })
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn write_json(rec: &RunRecord, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(rec)?;
    match out {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_plan(a: &PlanArgs) -> Result<()> {
    let q = load_query(&a.q)?;
    let mut opts = PlannerOptions::new(a.q.k);
    opts.prune = !a.no_prune;
    opts.expansion_cap = a.cap;
    if let Some(eps) = a.eps {
        let mut p = ExpansionParams::for_map(&q.map);
        p.eps = eps * q.map.cell_size();
        opts.params = Some(p);
    }
    let mut planner = Planner::new(&q.map, q.start, q.goal, opts).map_err(|e| match e {
        PlanError::StartBlocked(_) | PlanError::GoalBlocked(_) => anyhow::Error::new(Exit(2, e.to_string())),
        e => e.into(),
    })?;
    let out = planner.run()?;
    info!("{} expansions, {} results", out.stats.expansions, out.results.len());
    let rec = RunRecord::from_tree(&q.name, q.start, q.goal, a.q.k, !a.no_prune, &out);
    write_json(&rec, a.q.out.as_deref())?;
    if let Some(p) = &a.svg {
        let paths: Vec<Vec<Cell>> = out.results.iter().map(|r| r.cells.clone()).collect();
        let svg = ksnpp::svg::render(&q.map, planner.nodes(), &paths, q.start, q.goal);
        fs::write(p, svg).with_context(|| format!("writing {}", p.display()))?;
    }
    if out.incomplete {
        return Err(Exit(3, format!("expansion cap of {} reached; results are partial", a.cap)).into());
    }
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> Result<()> {
    let q = load_query(&a.q)?;
    let lmax = a.lmax.unwrap_or_else(|| default_lmax(a.q.k));
    let out = oracle_k_snpp(&q.map, q.start, q.goal, a.q.k, lmax);
    info!("{} states settled", out.expansions);
    let rec = RunRecord::from_oracle(&q.name, q.start, q.goal, a.q.k, q.map.cell_size(), &out);
    write_json(&rec, a.q.out.as_deref())
}

fn read_record(p: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let (ra, rb) = (read_record(&a.a)?, read_record(&a.b)?);
    let cmp = compare(&ra, &rb, a.tol)?;
    println!("{cmp}");
    if !cmp.matched {
        return Err(Exit(4, "records differ".into()).into());
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    if a.trials == 0 {
        bail!("--trials must be at least 1");
    }
    if a.k.contains(&0) {
        bail!("k must be at least 1");
    }
    let mut maps: Vec<(String, GridMap, u64)> = Vec::new();
    match &a.maps {
        Some(dir) => {
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)
                .with_context(|| format!("reading {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            paths.sort();
            for (i, p) in paths.iter().enumerate() {
                let m = GridMap::load_path(p, a.cell_size, a.robot_radius)
                    .with_context(|| format!("loading {}", p.display()))?;
                maps.push((file_name(p), m, i as u64));
            }
        }
        None => {
            for seed in a.seed..a.seed + a.count {
                let mut gp = GenParams::new(a.size, a.size, a.obstacles, seed);
                gp.cell_size = a.cell_size;
                gp.robot_radius = a.robot_radius;
                let m = mapgen::generate(&gp)?;
                maps.push((format!("gen-{}-{}-{seed}", a.size, a.obstacles), m, seed));
            }
        }
    }
    let mut rows: Vec<BenchRow> = Vec::new();
    for (name, map, seed) in &maps {
        let (s, g) = mapgen::random_query(map, *seed).ok_or_else(|| anyhow!("{name}: no free cells"))?;
        for &k in &a.k {
            let row = bench_case(map, name, s, g, k, a.trials)?;
            info!("{name} k={k}: {:.1}%", row.ratio_pct);
            rows.push(row);
        }
    }
    print!("{}", to_table(&rows));
    if let Some(p) = &a.csv {
        fs::write(p, to_csv(&rows)).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let mut gp = GenParams::new(a.width, a.height, a.obstacles, a.seed);
    gp.cell_size = a.cell_size;
    gp.robot_radius = a.robot_radius;
    let map = mapgen::generate(&gp)?;
    match &a.out {
        Some(p) => {
            let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            map.write_ascii(std::io::BufWriter::new(f))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            map.write_ascii(&mut lock)?;
            lock.flush()?;
        }
    }
    if let Some((s, g)) = mapgen::random_query(&map, a.seed) {
        eprintln!("suggested query: --start {s} --goal {g}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KSNPP_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let res = match &cli.cmd {
        Cmd::Plan(a) => cmd_plan(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Gen(a) => cmd_gen(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.downcast_ref::<Exit>().map_or(1, |x| x.0))
        }
    }
}
