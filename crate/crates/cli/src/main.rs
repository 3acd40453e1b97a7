use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use carleson_core::harness::{self, plot, RunConfig};
use carleson_core::Error;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "carleson", version, about = "Tile decompositions of a dyadic Carleson operator model")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Grid resolution, 2^K cells.
    #[arg(long = "K", global = true)]
    resolution: Option<u32>,

    #[arg(long, global = true)]
    k_min: Option<u32>,

    #[arg(long, global = true)]
    k_max: Option<u32>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Test function, e.g. `indicator:0.25`, `levels:3=0.0625,1=0.25`, `random_step:32,6`.
    #[arg(long, global = true)]
    f: Option<String>,

    /// Linearizing function: `constant:n0`, `chirp`, `random_piecewise:blocks`.
    #[arg(long = "N", global = true)]
    n: Option<String>,

    /// `all` or a comma-separated subset of `a,b,c,d,corollaries,oq`.
    #[arg(long, global = true)]
    check: Option<String>,

    #[arg(long = "C_G", global = true)]
    c_g: Option<f64>,

    #[arg(long, global = true)]
    c_forest: Option<f64>,

    /// Pass-constant override `name=value`; repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0, global = true)]
    threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write `f.csv` and `N.csv`.
    Generate,
    /// Write `decomposition.json`.
    Decompose,
    /// Write `report.json` and `report.csv`.
    Verify,
    /// Write `tiles.svg`, `decay.svg` and `counting.svg`.
    Plot,
    /// Everything above.
    All,
    /// Run the seeded instance suite and write `suite.json`.
    Suite {
        /// Number of suite members, seeds `0..count`.
        #[arg(long, default_value_t = 20)]
        count: u64,
    },
}

enum Failure {
    Checks,
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig, Failure> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p).map_err(|e| Failure::Config(anyhow::Error::new(e).context(format!("reading {}", p.display()))))?,
            None => RunConfig::default(),
        };
        let mut overrides = std::collections::BTreeMap::new();
        for o in &self.overrides {
            let (name, v) = o
                .split_once('=')
                .ok_or_else(|| Failure::Config(anyhow::anyhow!("override `{o}` is not NAME=VALUE")))?;
            let v: f64 = v.parse().map_err(|_| Failure::Config(anyhow::anyhow!("override `{o}` has a bad value")))?;
            overrides.insert(name.to_string(), v);
        }
        let flags = RunConfig {
            resolution: self.resolution,
            k_min: self.k_min,
            k_max: self.k_max,
            seed: self.seed,
            f: self.f.clone(),
            n: self.n.clone(),
            check: self.check.clone(),
            c_g: self.c_g,
            c_forest: self.c_forest,
            output: self.out.clone(),
            overrides,
            ..RunConfig::default()
        };
        Ok(base.merged(flags))
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::InvalidArgument(_) => Failure::Config(e.into()),
        other => Failure::Runtime(other.into()),
    }
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Runtime)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = cli.run_config()?;
    let resolved = cfg.resolve().map_err(classify)?;
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::Runtime)?;

    if let Command::Suite { count } = cli.command {
        let (summary, _) = harness::run_suite(&cfg, 0..count).map_err(classify)?;
        let json = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Runtime(e.into()))?;
        write(&dir, "suite.json", json)?;
        for (name, w) in &summary.worst {
            println!("{name:24} max_ratio={:<12.6e} seed={:<3} failures={}", w.ratio, w.seed, w.failures);
        }
        println!(
            "lweak1 per-n maxima {:?}, Mann-Kendall z={:.3} p={:.3}",
            summary.lweak1_by_level, summary.lweak1_trend.z, summary.lweak1_trend.p_value
        );
        return if summary.passed { Ok(()) } else { Err(Failure::Checks) };
    }

    if matches!(cli.command, Command::Generate | Command::All) {
        let f = resolved.f.generate(resolved.resolution, resolved.seed).map_err(classify)?;
        let n = resolved.n.generate(resolved.resolution, resolved.seed).map_err(classify)?;
        let mut buf = Vec::new();
        f.write_csv(&mut buf).map_err(classify)?;
        write(&dir, "f.csv", &buf)?;
        buf.clear();
        n.write_csv(&mut buf).map_err(classify)?;
        write(&dir, "N.csv", &buf)?;
        if matches!(cli.command, Command::Generate) {
            return Ok(());
        }
    }

    let analysis = harness::decompose(&resolved).map_err(classify)?;
    if matches!(cli.command, Command::Decompose | Command::All) {
        write(&dir, "decomposition.json", harness::decomposition_json(&analysis).map_err(classify)?)?;
        if matches!(cli.command, Command::Decompose) {
            return Ok(());
        }
    }

    let report = harness::verify(&resolved, &analysis).map_err(classify)?;
    if matches!(cli.command, Command::Verify | Command::All) {
        write(&dir, "report.json", report.to_json().map_err(classify)?)?;
        let mut csv = Vec::new();
        report.write_csv(&mut csv).map_err(classify)?;
        write(&dir, "report.csv", &csv)?;
    }
    if matches!(cli.command, Command::Plot | Command::All) {
        write(&dir, "tiles.svg", plot::tiles_svg(&analysis))?;
        write(&dir, "decay.svg", plot::decay_svg(&report))?;
        let counting = analysis
            .mass
            .layers
            .values()
            .flat_map(|ls| ls.first())
            .find(|l| !l.maximal.is_empty())
            .map(|l| plot::counting_svg(&l.counting, &format!("counting function n={} layer 0", l.n)))
            .unwrap_or_else(|| plot::counting_svg(&[], "counting function"));
        write(&dir, "counting.svg", counting)?;
    }

    let failing: Vec<_> = report.failing().collect();
    for c in failing.iter().take(20) {
        eprintln!("FAIL {} ratio={:e} limit={:?} {:?}", c.name, c.ratio, c.limit, c.context);
    }
    println!(
        "{} checks, {} failing, K={} seed={} f={} N={}",
        report.checks.len(),
        failing.len(),
        report.meta.resolution,
        report.meta.seed,
        report.meta.f,
        report.meta.n
    );
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
