use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sparsedom::dyadic::{build_family_for, shifted_lattices};
use sparsedom::rispaces::space_norm;
use sparsedom::verify::run_suite;
use sparsedom::weights::{a1_constant, ainfty_constant, ap_constant};
use sparsedom::{GridFunction, LabError, Result, SpaceKind, SpaceSpec, Weight, YoungFunction};

#[derive(Parser)]
#[command(name = "lab", version, about = "Dyadic harmonic analysis laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment suite and write CSV and JSON reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print dyadic weight constants as CSV rows `weight,p,constant`.
    Weights {
        #[arg(long)]
        weight: PathBuf,
        /// Comma-separated exponents; `1` gives A_1 and `inf` gives A_inf.
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<String>,
    },
    /// Print the norm of a function in a rearrangement-invariant space.
    Norm {
        /// Inline JSON, a JSON file, or `lebesgue:P`, `lorentz:P:Q`,
        /// `weak:P`, `orlicz-power:P`, `zygmund:ALPHA`.
        #[arg(long)]
        space: String,
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        weight: Option<PathBuf>,
        /// Grid dimension of CSV input.
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Build the stopping-time sparse family of a function tuple and print it as JSON.
    Sparse {
        #[arg(long = "fn", value_delimiter = ',', required = true, num_args = 1..)]
        functions: Vec<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        threshold: f64,
        /// Index of the one-third shifted lattice (0 is the standard one).
        #[arg(long, default_value_t = 0)]
        lattice: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
}

fn load_function(path: &Path, dim: usize) -> Result<GridFunction> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        GridFunction::from_csv(&text, dim)
    } else {
        GridFunction::from_json(&text)
    }
}

fn parse_space(spec: &str) -> Result<SpaceSpec> {
    let trimmed = spec.trim();
    if trimmed.starts_with('{') {
        return Ok(serde_json::from_str(trimmed)?);
    }
    if Path::new(trimmed).is_file() {
        return Ok(serde_json::from_str(&read(Path::new(trimmed))?)?);
    }
    let parts: Vec<&str> = trimmed.split(':').collect();
    let num = |i: usize| -> Result<f64> {
        parts
            .get(i)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| LabError::Config(format!("bad space `{spec}`")))
    };
    match parts[0] {
        "lebesgue" => SpaceSpec::lebesgue(num(1)?),
        "lorentz" => SpaceSpec::lorentz(num(1)?, num(2)?),
        "weak" => SpaceSpec::weak(num(1)?),
        "orlicz-power" => SpaceSpec::orlicz(YoungFunction::power(num(1)?)?),
        "zygmund" => SpaceSpec::new(SpaceKind::Orlicz {
            phi: YoungFunction::zygmund(num(1)?)?,
        }),
        _ => Err(LabError::Config(format!("unknown space `{spec}`"))),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out } => {
            let outcome = run_suite(&config, &out)?;
            for r in &outcome.reports {
                let budget = r.budget.map_or_else(|| "-".to_string(), |b| format!("{b:e}"));
                println!(
                    "{} {} {} max={:e} budget={budget}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.id,
                    r.target,
                    r.max_ratio
                );
                for n in &r.notes {
                    println!("    {n}");
                }
            }
            Ok(outcome.pass)
        }
        Command::Weights { weight, p } => {
            let w = Weight::from_json(&read(&weight)?)?;
            let lattices = shifted_lattices(w.dim(), w.level())?;
            let id = weight.file_stem().map_or_else(|| "weight".into(), |s| s.to_string_lossy().into_owned());
            println!("weight,p,constant");
            for item in p {
                let c = match item.trim() {
                    "1" => a1_constant(&w, &lattices)?,
                    "inf" => ainfty_constant(&w, &lattices)?,
                    s => {
                        let v: f64 = s.parse().map_err(|_| LabError::Config(format!("bad exponent `{s}`")))?;
                        ap_constant(&w, v, &lattices)?
                    }
                };
                println!("{id},{},{c:e}", item.trim());
            }
            Ok(true)
        }
        Command::Norm {
            space,
            function,
            weight,
            dim,
        } => {
            let x = parse_space(&space)?;
            let f = load_function(&function, dim)?;
            let w = weight.map(|p| read(&p).and_then(|t| Weight::from_json(&t))).transpose()?;
            println!("{:e}", space_norm(&f, &x, w.as_ref())?);
            Ok(true)
        }
        Command::Sparse {
            functions,
            threshold,
            lattice,
            dim,
        } => {
            let fs: Vec<GridFunction> = functions.iter().map(|p| load_function(p, dim)).collect::<Result<_>>()?;
            let first = fs.first().ok_or_else(|| LabError::Config("no functions given".into()))?;
            let lattices = shifted_lattices(first.dim(), first.level())?;
            let lat = lattices
                .get(lattice)
                .ok_or_else(|| LabError::Config(format!("lattice index {lattice} out of range")))?;
            let refs: Vec<&GridFunction> = fs.iter().collect();
            let family = build_family_for(&refs, lat, threshold)?;
            let report = family.verify_sparsity(family.claimed_eta());
            println!("{}", family.to_json()?);
            eprintln!(
                "{} cubes, min core ratio {}, sparse at eta {}: {}",
                family.len(),
                report.min_ratio,
                family.claimed_eta(),
                report.holds
            );
            Ok(report.holds)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
