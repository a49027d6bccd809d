//! Experiment configuration: one JSON document per run.
//!
//! Command-line flags are shorthand that compiles into this structure, so
//! a run can always be reproduced from the `config.json` copy written into
//! its output directory.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use desslab::riccati::DareOptions;
use desslab::ring::SensorMode;

/// Loop configuration for impulse experiments; the closed-loop variants
/// synthesize the optimal gain first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopMode {
    Open,
    FastOnly,
    SlowOnly,
    Diverse,
}

impl LoopMode {
    pub fn sensor_mode(&self) -> Option<SensorMode> {
        match self {
            LoopMode::Open => None,
            LoopMode::FastOnly => Some(SensorMode::FastOnly),
            LoopMode::SlowOnly => Some(SensorMode::SlowOnly),
            LoopMode::Diverse => Some(SensorMode::Diverse),
        }
    }
}

pub fn parse_loop_mode(text: &str) -> Result<LoopMode, String> {
    match text {
        "open" => Ok(LoopMode::Open),
        "fast" | "fast-only" => Ok(LoopMode::FastOnly),
        "slow" | "slow-only" => Ok(LoopMode::SlowOnly),
        "diverse" => Ok(LoopMode::Diverse),
        other => Err(format!(
            "unknown mode `{other}` (expected open, fast, slow, or diverse)"
        )),
    }
}

pub fn parse_sensor_mode(text: &str) -> Result<SensorMode, String> {
    match parse_loop_mode(text)? {
        LoopMode::Open => Err("this experiment needs a sensing mode, not `open`".into()),
        LoopMode::FastOnly => Ok(SensorMode::FastOnly),
        LoopMode::SlowOnly => Ok(SensorMode::SlowOnly),
        LoopMode::Diverse => Ok(SensorMode::Diverse),
    }
}

fn default_node() -> usize {
    1
}
fn default_horizon() -> usize {
    20
}
fn default_ablate_horizon() -> usize {
    120
}
fn default_bisect_tol() -> f64 {
    1e-6
}
fn default_of_delay() -> usize {
    1
}
fn default_of_epsilon() -> f64 {
    1e-6
}

/// The experiment to run and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    /// Open- or closed-loop impulse response at one parameter point.
    Impulse {
        n: usize,
        a: f64,
        mode: LoopMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<usize>,
        d: usize,
        #[serde(default = "default_horizon")]
        horizon: usize,
        #[serde(default = "default_node")]
        node: usize,
    },
    /// Full-control synthesis (or its state-feedback dual) at one point.
    Synth {
        n: usize,
        a: f64,
        mode: SensorMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<usize>,
        d: usize,
        #[serde(default)]
        dual: bool,
    },
    /// Cost as a function of instability over `a_start..=a_stop`.
    SweepA {
        n_list: Vec<usize>,
        a_start: f64,
        a_stop: f64,
        a_step: f64,
        mode: SensorMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<usize>,
        d: usize,
        #[serde(default)]
        workers: usize,
    },
    /// Cost versus delay for all three sensing architectures.
    SweepDelay {
        n: usize,
        a: f64,
        q: usize,
        d_min: usize,
        d_max: usize,
        #[serde(default)]
        workers: usize,
    },
    /// Fast-only stability breaking point.
    Breakpoint {
        n: usize,
        q: usize,
        #[serde(default = "default_bisect_tol")]
        tol: f64,
    },
    /// Intact-versus-ablated knockout experiment.
    Ablate {
        n: usize,
        a: f64,
        mode: SensorMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<usize>,
        d: usize,
        #[serde(default = "default_ablate_horizon")]
        horizon: usize,
    },
    /// Output-feedback synthesis with actuation and sensing delays.
    Ofsynth {
        n: usize,
        a: f64,
        #[serde(default = "default_of_delay")]
        d: usize,
        #[serde(default = "default_of_epsilon")]
        epsilon: f64,
    },
}

/// Emitted file kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

pub fn parse_format(text: &str) -> Result<Format, String> {
    match text {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        "svg" => Ok(Format::Svg),
        other => Err(format!("unknown format `{other}` (expected csv, json, or svg)")),
    }
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

/// Where and what to write.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]

pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl OutputConfig {
    /// Default directory: the `DESSLAB_OUT` environment variable, falling
    /// back to `desslab-out`.
    pub fn default_dir() -> PathBuf {
        std::env::var_os("DESSLAB_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("desslab-out"))
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: Self::default_dir(), formats: default_formats() }
    }
}

/// Solver overrides; unset fields take the library defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]

pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinv_rel_tol: Option<f64>,
}

impl SolverConfig {
    pub fn to_options(self) -> DareOptions {
        let defaults = DareOptions::default();
        DareOptions {
            tol_rel: self.tol_rel.unwrap_or(defaults.tol_rel),
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            divergence_norm: self.divergence_norm.unwrap_or(defaults.divergence_norm),
            pinv_rel_tol: self.pinv_rel_tol.unwrap_or(defaults.pinv_rel_tol),
        }
    }
}

/// The full run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]

pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }
}

/// Expands an inclusive `start..=stop` grid with the given step. Values are
/// computed as `start + i * step`, never by accumulation, so the grid is
/// reproducible.
pub fn expand_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    if step <= 0.0 || step.is_nan() {
        return Err(format!("grid step must be positive, got {step}"));
    }
    if stop < start {
        return Err(format!("grid stop {stop} is below start {start}"));
    }
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let value = start + i as f64 * step;
        if value > stop + step * 1e-9 {
            break;
        }
        grid.push(value);
        i += 1;
    }
    Ok(grid)
}

/// Parses `lo..hi` (inclusive) or a single integer.
pub fn parse_delay_range(text: &str) -> Result<(usize, usize), String> {
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| format!("bad range start `{lo}`"))?;
        let hi: usize = hi.trim().parse().map_err(|_| format!("bad range end `{hi}`"))?;
        if hi < lo {
            return Err(format!("empty delay range {lo}..{hi}"));
        }
        Ok((lo, hi))
    } else {
        let d: usize = text.trim().parse().map_err(|_| format!("bad delay `{text}`"))?;
        Ok((d, d))
    }
}

/// Parses `start:stop:step`.
pub fn parse_grid_spec(text: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid must be start:stop:step, got `{text}`"));
    }
    let parse = |s: &str| -> Result<f64, String> {
        s.trim().parse().map_err(|_| format!("bad grid number `{s}`"))
    };
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_json() {
        let config = ExperimentConfig {
            experiment: Experiment::Impulse {
                n: 5,
                a: 1.856,
                mode: LoopMode::Diverse,
                q: Some(1),
                d: 3,
                horizon: 20,
                node: 1,
            },
            output: OutputConfig { dir: PathBuf::from("out"), formats: default_formats() },
            solver: SolverConfig::default(),
        };
        let text = config.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn malformed_configs_are_rejected() {
        // unknown experiment tag
        let text = r#"{"experiment":"frobnicate","n":5,"output":{"dir":"x"}}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
        // missing required field
        let text = r#"{"experiment":"breakpoint","n":5,"output":{"dir":"x"}}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
        // missing output block
        let text = r#"{"experiment":"breakpoint","n":5,"q":1}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn grid_expansion_is_inclusive_and_exact() {
        let grid = expand_grid(1.0, 2.0, 0.25).unwrap();
        assert_eq!(grid, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert!(expand_grid(1.0, 0.5, 0.1).is_err());
        assert!(expand_grid(1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn delay_range_parsing() {
        assert_eq!(parse_delay_range("1..8").unwrap(), (1, 8));
        assert_eq!(parse_delay_range("4").unwrap(), (4, 4));
        assert!(parse_delay_range("5..2").is_err());
        assert!(parse_delay_range("x..2").is_err());
    }

    #[test]
    fn grid_spec_parsing() {
        assert_eq!(parse_grid_spec("1.0:2.0:0.05").unwrap(), (1.0, 2.0, 0.05));
        assert!(parse_grid_spec("1.0:2.0").is_err());
    }

    #[test]
    fn mode_parsing_accepts_short_names() {
        assert_eq!(parse_loop_mode("fast").unwrap(), LoopMode::FastOnly);
        assert_eq!(parse_loop_mode("slow-only").unwrap(), LoopMode::SlowOnly);
        assert!(parse_sensor_mode("open").is_err());
    }
}
