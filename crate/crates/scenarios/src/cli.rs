//! Command-line front end. Exit codes: 0 pass, 1 tolerance failure,
//! 2 usage or input error.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use ymlab_convexity::envelope::{export, gk_envelope, EnvelopeHeader, EnvelopeParams};
use ymlab_core::measure::DiscreteMeasure;
use ymlab_core::transform::{catalog, to_ball_point};
use ymlab_core::transport::kantorovich;
use ymlab_core::vecops;
use ymlab_core::young::{estimate, EstimateParams, SampledSequence, YoungTriple};

use crate::characterisation::{verify_characterisation, PiecewiseAffine};
use crate::config::{resolve_spec, ScenarioConfig};
use crate::gallery::lookup_integrand;
use crate::report::Report;
use crate::{Result, ScenarioError};

#[derive(Debug, Parser)]
#[command(name = "ymlab", version, about = "Generalized Young measure laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a gallery scenario and check its tolerances.
    Scenario {
        id: String,
        /// JSON overrides of the scenario defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for report.json, CSV tables and SVG plots.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lamination envelope of g_k on [-4k, 4k]^4.
    Envelope {
        #[arg(long)]
        k: f64,
        /// Nodes per axis.
        #[arg(long, default_value_t = 33)]
        grid: usize,
        /// Output stem for the .bin/.json pair.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bounded-Lipschitz distance between two discrete measures.
    Distance {
        #[arg(long)]
        m1: PathBuf,
        #[arg(long)]
        m2: PathBuf,
        /// `euclidean` or `ball`.
        #[arg(long, default_value = "euclidean")]
        metric: String,
    },
    /// Estimate the limit triple of a sampled sequence.
    Estimate {
        #[arg(long)]
        seq: PathBuf,
        /// `sphere` or `logsin`.
        #[arg(long, default_value = "sphere")]
        spec: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a triple against the gradient of a piecewise affine function.
    VerifyCharacterisation {
        #[arg(long)]
        triple: PathBuf,
        #[arg(long)]
        u: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

/// On-disk form of a [`SampledSequence`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceFile {
    pub mu: DiscreteMeasure,
    pub cell_of: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub fields: Vec<Vec<Vec<f64>>>,
}

impl SequenceFile {
    pub fn into_sequence(self) -> Result<SampledSequence> {
        Ok(SampledSequence::new(self.mu, self.cell_of, self.centers, self.labels, self.fields)?)
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.id.as_str() {
        "oscillation" => crate::gallery::oscillation(cfg),
        "concentration" => crate::gallery::concentration(cfg),
        "counterexample" => crate::gallery::counterexample(cfg),
        "area_strict" => crate::strict::area_strict(cfg),
        "reshetnyak" => crate::strict::reshetnyak(cfg),
        "characterisation" => crate::characterisation::characterisation(cfg),
        "inhomogenize_singular" => crate::inhomogenize::singular_scenario(cfg),
        "inhomogenize_ac" => crate::inhomogenize::ac_scenario(cfg),
        other => Err(ScenarioError::UnknownScenario(other.into())),
    }
}

/// `Ok(true)` when every check passed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Scenario { id, config, out } => {
            let mut cfg = match config {
                Some(path) => ScenarioConfig::from_json(&fs::read_to_string(path)?, &id)?,
                None => ScenarioConfig::default_for(&id)?,
            };
            if out.is_some() {
                cfg.out_dir = out;
            }
            let report = run_scenario(&cfg)?;
            print!("{}", report.summary());
            if let Some(dir) = &cfg.out_dir {
                for path in report.write(dir)? {
                    println!("wrote {}", path.display());
                }
            }
            Ok(report.pass())
        }
        Command::Envelope { k, grid, out } => {
            let (env, report) = gk_envelope(k, grid, EnvelopeParams::default())?;
            let at_zero = env.values()[env.center_index()];
            println!("R g_k(0) = {at_zero:.9}  ratio to k = {:.9}", at_zero / k);
            println!(
                "iterations {}  converged {}  clamp rate {:.3}{}",
                report.iterations,
                report.converged,
                report.clamp_rate,
                if report.clamp_warning { " (warning)" } else { "" }
            );
            if let Some(stem) = out {
                export(&env, &EnvelopeHeader::new(&env, Some(k), &report), &stem)?;
                println!("wrote {}.bin and {}.json", stem.display(), stem.display());
            }
            Ok(report.converged)
        }
        Command::Distance { m1, m2, metric } => {
            let a = DiscreteMeasure::from_json(&fs::read_to_string(m1)?)?;
            let b = DiscreteMeasure::from_json(&fs::read_to_string(m2)?)?;
            let result = match metric.as_str() {
                "euclidean" => kantorovich(&a, &b, vecops::dist)?,
                "ball" => kantorovich(&a, &b, |x, y| vecops::dist(&to_ball_point(x), &to_ball_point(y)))?,
                other => return Err(ScenarioError::Config(format!("unknown metric '{other}'"))),
            };
            println!("{}", serde_json::to_string(&result)?);
            Ok(true)
        }
        Command::Estimate { seq, spec, out } => {
            let file: SequenceFile = serde_json::from_str(&fs::read_to_string(seq)?)?;
            let seq = file.into_sequence()?;
            let spec = resolve_spec(&spec, seq.target_dim())?;
            let triple = estimate(&seq, &spec, EstimateParams::for_spec(&spec))?;
            match out {
                Some(path) => fs::write(path, triple.to_json())?,
                None => println!("{}", triple.to_json()),
            }
            Ok(true)
        }
        Command::VerifyCharacterisation { triple, u, tol } => {
            let nu = YoungTriple::from_json(&fs::read_to_string(triple)?, catalog::lookup)?;
            let u = PiecewiseAffine::from_json(&fs::read_to_string(u)?)?;
            let battery = ScenarioConfig::default_for("characterisation")?
                .battery
                .iter()
                .map(|id| lookup_integrand(id, 1))
                .collect::<Result<Vec<_>>>()?;
            let report = verify_characterisation(&nu, &u, &battery, tol)?;
            print!("{}", report.summary());
            Ok(report.pass())
        }
    }
}
