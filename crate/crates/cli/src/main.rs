//! `obl`: scenario configs in, JSON reports and SVG/CSV figures out.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

const FIGURES: &str = "\
Figures (SVG via --svg):
  outb    orbit           orbit of the outer billiard map around a table
  vct     construct       table traced by a closed family of n-gons
  3pf     construct3      table with a curve of 3-periodic points
  dif     identity3       triangle with three reflecting circles
  round   rounded-square  arc square with an open set of 4-periodic points
  septa   rotate-polygon  triangle turning inside a regular (3n+1)-gon

Exit status: 0 success, 1 numeric or verification failure, 2 configuration error.
Seeding: --seed, else OBL_SEED, else 0.";

#[derive(Parser, Debug)]
#[command(name = "obl", version, about = "Outer billiards laboratory", after_help = FIGURES)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Random seed for every randomized step.
    #[arg(long, global = true, env = "OBL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// JSON report path; stdout when absent.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// SVG figure path.
    #[arg(long, global = true)]
    pub svg: Option<PathBuf>,
    /// CSV data path.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Tolerance override `name=value`; repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Iterate the outer billiard map.
    Orbit {
        /// Table JSON file.
        #[arg(long)]
        table: PathBuf,
        /// Start point `x,y`.
        #[arg(long, value_parser = commands::parse_point)]
        start: outer_billiards::Vec2,
        #[arg(long, default_value_t = 12)]
        steps: usize,
    },
    /// Newton search for an n-periodic orbit of rotation number k.
    Periodic {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Initial guess `x,y`.
        #[arg(long, value_parser = commands::parse_point)]
        guess: outer_billiards::Vec2,
    },
    /// Bracket-growth rank over random polygons.
    Rank {
        #[arg(long, default_value_t = 3)]
        n_min: usize,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Table with a curve of 3-periodic points from an equivariant loop.
    Construct3 {
        /// Loop JSON file (list of `{m, re, im}`); random when absent.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Norm of the random perturbation.
        #[arg(long, default_value_t = 0.05)]
        perturbation: f64,
        /// Frequency solved for; picked by conditioning when absent.
        #[arg(long, allow_hyphen_values = true)]
        free: Option<i32>,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Table with a curve of n-periodic points by shooting.
    Construct {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Norm of the random control seed.
        #[arg(long, default_value_t = 0.01)]
        size: f64,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Identity example and the obstruction family.
    Identity3 {
        #[arg(long, default_value_t = 21)]
        samples: usize,
        #[arg(long, default_value_t = 0.05)]
        amplitude: f64,
    },
    /// Open set of 4-periodic points of the arc square.
    RoundedSquare {
        #[arg(long, default_value_t = 2.0)]
        side: f64,
        #[arg(long, default_value_t = 4.0)]
        arc_radius: f64,
        #[arg(long, default_value_t = 0.05)]
        disk: f64,
        #[arg(long, default_value_t = 41)]
        grid: usize,
    },
    /// Turn a triangle inside the regular (3n+1)-gon by parallel slides.
    RotatePolygon {
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Step along a non-affine deformation before rotating.
        #[arg(long)]
        deform: Option<f64>,
    },
    /// Run the acceptance suite.
    Verify {
        /// `all` or a comma-separated list of criterion numbers.
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.common, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("obl: {e}");
            ExitCode::from(e.code())
        }
    }
}
