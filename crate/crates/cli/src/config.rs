//! Run configuration: TOML file plus command-line overrides.
//!
//! Every field has a documented default; a value given on the command line
//! overrides the same value from `--config <file>`, which overrides the
//! default. Validation failures are reported as plain strings and map to
//! exit code 1 in `main`.

use std::path::PathBuf;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use pvi_core::lagrangian::Order;
use pvi_core::stepper::{InitMode, Predictor, SolverConfig};
use pvi_core::systems::BuiltinName;
use pvi_core::{OracleConfig, QuadratureRule};

/// Shared command-line flags. Everything is optional here; defaults are
/// applied during resolution.
#[derive(clap::Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Built-in system name (see `pvi list-systems`).
    #[arg(long)]
    pub system: Option<String>,

    /// Perturbation strength (>= 0). Default 0.0075.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Time step (> 0). Default 2*pi, one period of the built-in
    /// time-dependent perturbations.
    #[arg(long)]
    pub tau: Option<f64>,

    /// Truncation order: 0, 1, 2 or inf. Default 1.
    #[arg(long)]
    pub order: Option<String>,

    /// Number of steps; a completed run holds steps + 1 points. Default 100.
    #[arg(long)]
    pub steps: Option<usize>,

    /// Second-point initialization: "oracle" (reference integration of the
    /// full system) or "unperturbed" (analytic unperturbed flow).
    /// Default oracle.
    #[arg(long, value_name = "MODE")]
    pub init_mode: Option<String>,

    /// TOML configuration file; explicit flags override file values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output path. Defaults: integrate.csv / poincare.csv / converge.json /
    /// check.json per subcommand.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Seed grid for `poincare`: "R0:R1:COUNT[@ANGLES]" places COUNT radii
    /// evenly on [R0, R1], each at ANGLES equally spaced polar angles
    /// (default 1, along the positive x axis). Default "0.3:2.0:30@1".
    #[arg(long, value_name = "SPEC")]
    pub seed_grid: Option<String>,
}

/// On-disk configuration. Top level is flat; solver, quadrature and oracle
/// settings live in nested sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub system: Option<String>,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub order: Option<String>,
    pub steps: Option<usize>,
    pub init_mode: Option<String>,
    pub out: Option<String>,
    pub seed_grid: Option<String>,
    /// Inline initial condition, e.g. [1.2, 0.0]. Default [1.2, 0.0].
    pub initial: Option<Vec<f64>>,
    /// Alternative to `initial`: file with one whitespace- or
    /// comma-separated point per line; the first point is used.
    pub initial_file: Option<String>,
    /// Epsilon sweep for `converge`. Default: seven values log-spaced on
    /// [1e-5, 1e-2].
    pub epsilons: Option<Vec<f64>>,
    pub solver: SolverSection,
    pub quadrature: QuadratureSection,
    pub oracle: OracleSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub residual_tol: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub stagnation_tol: f64,
    /// "unperturbed-push" or "extrapolation".
    pub predictor: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            residual_tol: d.residual_tol,
            max_iterations: d.max_iterations,
            damping: d.damping,
            stagnation_tol: d.stagnation_tol,
            predictor: "unperturbed-push".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSection {
    pub points_per_panel: usize,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection { points_per_panel: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step_rejections: usize,
    pub initial_step: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        let d = OracleConfig::default();
        OracleSection {
            abs_tol: d.abs_tol,
            rel_tol: d.rel_tol,
            max_step_rejections: d.max_step_rejections,
            initial_step: d.initial_step,
        }
    }
}

/// Fully resolved run configuration with concrete values everywhere.
pub struct Resolved {
    pub system: BuiltinName,
    pub epsilon: f64,
    pub tau: f64,
    pub order: Order,
    pub steps: usize,
    pub init_mode: InitMode,
    pub out: PathBuf,
    pub seed_grid: String,
    pub initial: DVector<f64>,
    pub epsilons: Vec<f64>,
    pub solver: SolverConfig,
    pub quad: QuadratureRule,
    pub oracle_cfg: OracleConfig,
    /// The resolved configuration as JSON, embedded in output metadata so a
    /// run can be reproduced from its artifact alone.
    pub echo: serde_json::Value,
}

fn parse_initial_file(path: &str) -> Result<Vec<f64>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read initial-condition file `{path}`: {e}"))?;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        return line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| format!("bad number `{s}` in `{path}`"))
            })
            .collect();
    }
    Err(format!("initial-condition file `{path}` holds no data"))
}

/// Parse a seed-grid spec "R0:R1:COUNT[@ANGLES]" into seed points.
pub fn parse_seed_grid(spec: &str) -> Result<Vec<DVector<f64>>, String> {
    let err = || {
        format!("seed grid `{spec}` must have the form R0:R1:COUNT[@ANGLES]")
    };
    let (radial, angles) = match spec.split_once('@') {
        Some((r, a)) => (r, a.parse::<usize>().map_err(|_| err())?),
        None => (spec, 1),
    };
    let parts: Vec<&str> = radial.split(':').collect();
    if parts.len() != 3 || angles == 0 {
        return Err(err());
    }
    let r0: f64 = parts[0].parse().map_err(|_| err())?;
    let r1: f64 = parts[1].parse().map_err(|_| err())?;
    let count: usize = parts[2].parse().map_err(|_| err())?;
    if count == 0 || r0 <= 0.0 || r1 < r0 {
        return Err(format!(
            "seed grid `{spec}` needs 0 < R0 <= R1 and COUNT >= 1"
        ));
    }
    let mut seeds = Vec::with_capacity(count * angles);
    for i in 0..count {
        let r = if count == 1 {
            r0
        } else {
            r0 + (r1 - r0) * i as f64 / (count - 1) as f64
        };
        for a in 0..angles {
            let phi = 2.0 * std::f64::consts::PI * a as f64 / angles as f64;
            seeds.push(nalgebra::dvector![r * phi.cos(), r * phi.sin()]);
        }
    }
    Ok(seeds)
}

pub fn resolve(args: &CommonArgs, default_out: &str) -> Result<Resolved, String> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
            toml::from_str(&text).map_err(|e| format!("bad config file: {e}"))?
        }
        None => FileConfig::default(),
    };

    let system_name = args
        .system
        .clone()
        .or(file.system.clone())
        .ok_or_else(|| "missing system name (--system or `system` in the config file)".to_string())?;
    let system = BuiltinName::parse(&system_name).map_err(|e| e.to_string())?;

    let epsilon = args.epsilon.or(file.epsilon).unwrap_or(0.0075);
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(format!("epsilon must be finite and >= 0, got {epsilon}"));
    }
    let tau = args
        .tau
        .or(file.tau)
        .unwrap_or(2.0 * std::f64::consts::PI);
    if tau <= 0.0 || !tau.is_finite() {
        return Err(format!("tau must be finite and > 0, got {tau}"));
    }
    let order_str = args
        .order
        .clone()
        .or(file.order.clone())
        .unwrap_or_else(|| "1".into());
    let order = Order::parse(&order_str).map_err(|e| e.to_string())?;
    if order == Order::LinfClosed && system != BuiltinName::RotorOscillator {
        return Err("order `inf` is only available for rotor-oscillator".into());
    }
    if order == Order::LinfClosed && epsilon == 0.0 {
        return Err("order `inf` requires epsilon > 0".into());
    }
    let steps = args.steps.or(file.steps).unwrap_or(100);
    if steps == 0 {
        return Err("steps must be >= 1".into());
    }

    let oracle_cfg = OracleConfig {
        abs_tol: file.oracle.abs_tol,
        rel_tol: file.oracle.rel_tol,
        max_step_rejections: file.oracle.max_step_rejections,
        initial_step: file.oracle.initial_step,
    };
    let init_str = args
        .init_mode
        .clone()
        .or(file.init_mode.clone())
        .unwrap_or_else(|| "oracle".into());
    let init_mode = match init_str.as_str() {
        "oracle" => InitMode::OracleFlow(oracle_cfg.clone()),
        "unperturbed" => InitMode::UnperturbedFlow,
        other => {
            return Err(format!(
                "init-mode must be `oracle` or `unperturbed`, got `{other}`"
            ))
        }
    };

    let predictor = match file.solver.predictor.as_str() {
        "unperturbed-push" => Predictor::UnperturbedPush,
        "extrapolation" => Predictor::PreviousStepExtrapolation,
        other => {
            return Err(format!(
                "solver.predictor must be `unperturbed-push` or `extrapolation`, got `{other}`"
            ))
        }
    };
    let solver = SolverConfig {
        residual_tol: file.solver.residual_tol,
        max_iterations: file.solver.max_iterations,
        damping: file.solver.damping,
        stagnation_tol: file.solver.stagnation_tol,
        predictor,
    };
    if file.quadrature.points_per_panel < 2 {
        return Err("quadrature.points_per_panel must be >= 2".into());
    }
    let quad = QuadratureRule::gauss_legendre(file.quadrature.points_per_panel);

    let initial = match (&file.initial, &file.initial_file) {
        (Some(v), _) => v.clone(),
        (None, Some(path)) => parse_initial_file(path)?,
        (None, None) => vec![1.2, 0.0],
    };
    if initial.len() != 2 {
        return Err(format!(
            "initial condition must have dimension 2, got {}",
            initial.len()
        ));
    }
    if initial.iter().any(|v| !v.is_finite()) {
        return Err("initial condition must be finite".into());
    }

    let epsilons = file.epsilons.clone().unwrap_or_else(|| {
        vec![1e-5, 3.16e-5, 1e-4, 3.16e-4, 1e-3, 3.16e-3, 1e-2]
    });

    let seed_grid = args
        .seed_grid
        .clone()
        .or(file.seed_grid.clone())
        .unwrap_or_else(|| "0.3:2.0:30@1".into());
    parse_seed_grid(&seed_grid)?;

    let out = args
        .out
        .clone()
        .or_else(|| file.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(default_out));

    let echo = serde_json::json!({
        "system": system.as_str(),
        "epsilon": epsilon,
        "tau": tau,
        "order": order.as_str(),
        "steps": steps,
        "init_mode": init_str,
        "initial": initial,
        "seed_grid": seed_grid,
        "epsilons": epsilons,
        "solver": {
            "residual_tol": solver.residual_tol,
            "max_iterations": solver.max_iterations,
            "damping": solver.damping,
            "stagnation_tol": solver.stagnation_tol,
            "predictor": file.solver.predictor,
        },
        "quadrature": { "points_per_panel": file.quadrature.points_per_panel },
        "oracle": {
            "abs_tol": oracle_cfg.abs_tol,
            "rel_tol": oracle_cfg.rel_tol,
            "max_step_rejections": oracle_cfg.max_step_rejections,
            "initial_step": oracle_cfg.initial_step,
        },
    });

    Ok(Resolved {
        system,
        epsilon,
        tau,
        order,
        steps,
        init_mode,
        out,
        seed_grid,
        initial: DVector::from_vec(initial),
        epsilons,
        solver,
        quad,
        oracle_cfg,
        echo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
system = "fieldline"
epsilon = 0.0075
tau = 6.283185307179586
order = "1"
steps = 500
init_mode = "oracle"
initial = [1.2, 0.0]

[solver]
residual_tol = 1e-12
max_iterations = 50

[quadrature]
points_per_panel = 8

[oracle]
rel_tol = 1e-12
"#;

    #[test]
    fn config_round_trip_is_semantically_identical() {
        let parsed: FileConfig = toml::from_str(EXAMPLE).unwrap();
        let reserialized = toml::to_string(&parsed).unwrap();
        let reparsed: FileConfig = toml::from_str(&reserialized).unwrap();
        assert_eq!(parsed, reparsed);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join(format!("pvi-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(&path, EXAMPLE).unwrap();
        let args = CommonArgs {
            steps: Some(7),
            epsilon: Some(0.5),
            config: Some(path),
            ..Default::default()
        };
        let r = resolve(&args, "out.csv").unwrap();
        assert_eq!(r.steps, 7);
        assert_eq!(r.epsilon, 0.5);
        assert_eq!(r.tau, 6.283185307179586); // from the file
    }

    #[test]
    fn missing_system_is_a_config_error() {
        let err = match resolve(&CommonArgs::default(), "out.csv") {
            Err(e) => e,
            Ok(_) => panic!("resolution without a system must fail"),
        };
        assert!(err.contains("missing system"), "{err}");
    }

    #[test]
    fn seed_grid_parsing() {
        assert_eq!(parse_seed_grid("0.3:2.0:30").unwrap().len(), 30);
        let seeds = parse_seed_grid("1.0:2.0:5@4").unwrap();
        assert_eq!(seeds.len(), 20);
        assert!(parse_seed_grid("x:2:3").is_err());
        assert!(parse_seed_grid("2.0:1.0:3").is_err());
        assert!(parse_seed_grid("1.0:2.0:0").is_err());
    }
}
