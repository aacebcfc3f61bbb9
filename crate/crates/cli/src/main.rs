use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use revhom::Coupling;
use revhom_cli::{run, CliError, Kind, RunConfig};

#[derive(Parser)]
#[command(name = "revhom", version, about = "Bifurcations of symmetric homoclinic orbits in a reversible 4D example")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// β₁ values at which the x₂-block has a bounded solution.
    Resonance(Flags),
    /// Melnikov coefficients and classification at the bifurcation point.
    Melnikov(Flags),
    /// One symmetric homoclinic orbit from the collocation BVP.
    Solve(Flags),
    /// Branch continuation with fold/branch-point detection.
    Continue(Flags),
    /// Complex-time monodromy of the planar variational blocks.
    Monodromy(Flags),
    /// All diagram and profile data sets.
    Figures(Flags),
}

#[derive(Args, Default)]
#[command(allow_negative_numbers = true)]
struct Flags {
    /// JSON run configuration; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    beta3: Option<f64>,
    /// Resonance index; a comma-separated list for `resonance`.
    #[arg(long, value_delimiter = ',')]
    ell: Option<Vec<u32>>,
    /// Coefficient of x₁x₂² in ẋ₃: `beta1` or a number.
    #[arg(long)]
    coupling: Option<String>,
    /// saddle-node, transcritical or pitchfork.
    #[arg(long)]
    mode: Option<String>,
    /// Fixed quadrature half-width (default: automatic).
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    t_half: Option<f64>,
    #[arg(long)]
    intervals: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Continuation parameter (beta1, beta2, beta3).
    #[arg(long)]
    param: Option<String>,
    /// Continuation range `a,b`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    range: Option<Vec<f64>>,
    #[arg(long)]
    ds: Option<f64>,
    #[arg(long)]
    ds_min: Option<f64>,
    #[arg(long)]
    ds_max: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    direction: Option<f64>,
    /// Do not switch branches at a β₁ branch point.
    #[arg(long)]
    no_switch: bool,
    /// Monodromy blocks, e.g. `1,2`.
    #[arg(long, value_delimiter = ',')]
    blocks: Option<Vec<u8>>,
    /// Chart radii, e.g. `1e-3,1e-4`.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Output directory for artifact files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render SVG plots.
    #[arg(long)]
    svg: bool,
}

fn resolve(kind: Kind, f: Flags) -> Result<RunConfig, CliError> {
    let mut c = match &f.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    c.kind = Some(kind);
    let p = &mut c.params;
    if let Some(v) = f.s {
        p.s = v;
    }
    if let Some(v) = f.beta1 {
        p.beta1 = Some(v);
    }
    if let Some(v) = f.beta2 {
        p.beta2 = v;
    }
    if let Some(v) = f.beta3 {
        p.beta3 = v;
    }
    if let Some(v) = f.ell {
        p.ell = v;
    }
    if let Some(g) = f.coupling {
        c.coupling = match g.as_str() {
            "beta1" => Coupling::Beta1,
            other => Coupling::Fixed(other.parse().map_err(|_| CliError::Usage(format!("invalid coupling `{other}`")))?),
        };
    }
    if let Some(m) = f.mode {
        c.mode = Some(m.parse().map_err(CliError::Solver)?);
    }
    if f.window.is_some() {
        c.window = f.window;
    }
    if let Some(v) = f.t_half {
        c.bvp.t_half = v;
    }
    if let Some(v) = f.intervals {
        c.bvp.intervals = v;
    }
    if let Some(v) = f.tol {
        c.bvp.tol = v;
    }
    if let Some(v) = f.max_iter {
        c.bvp.max_iter = v;
    }
    if let Some(v) = f.param {
        c.param = v;
    }
    if let Some(r) = f.range {
        if r.len() != 2 {
            return Err(CliError::Usage("--range takes two values `a,b`".into()));
        }
        c.range = Some([r[0], r[1]]);
    }
    let cs = &mut c.continuation;
    if let Some(v) = f.ds {
        cs.ds = v;
    }
    if let Some(v) = f.ds_min {
        cs.ds_min = v;
    }
    if let Some(v) = f.ds_max {
        cs.ds_max = v;
    }
    if let Some(v) = f.max_steps {
        cs.max_steps = v;
    }
    if let Some(v) = f.direction {
        cs.direction = v;
    }
    if f.no_switch {
        c.switch = false;
    }
    if let Some(v) = f.blocks {
        c.blocks = v;
    }
    if let Some(v) = f.epsilons {
        c.epsilons = v;
    }
    if f.out.is_some() {
        c.output.dir = f.out;
    }
    if f.svg {
        c.output.svg = true;
    }
    if kind == Kind::Figures && c.output.dir.is_none() {
        c.output.dir = Some(PathBuf::from("figures"));
    }
    Ok(c)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match cli.command {
        Command::Resonance(f) => (Kind::Resonance, f),
        Command::Melnikov(f) => (Kind::Melnikov, f),
        Command::Solve(f) => (Kind::Solve, f),
        Command::Continue(f) => (Kind::Continue, f),
        Command::Monodromy(f) => (Kind::Monodromy, f),
        Command::Figures(f) => (Kind::Figures, f),
    };
    let outcome = resolve(kind, flags).and_then(|config| {
        let artifacts = run(&config)?;
        if let Some(dir) = &config.output.dir {
            artifacts.write_to(dir)?;
        }
        Ok(artifacts)
    });
    match outcome {
        Ok(a) => {
            print!("{}", a.stdout);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("revhom: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
