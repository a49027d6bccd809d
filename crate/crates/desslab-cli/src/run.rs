//! Experiment dispatch: builds the requested plant, runs the synthesis or
//! sweep, and writes the artifacts.
//!
//! Exit-code contract: configuration and I/O problems are failures
//! (exit 2), an iteration-capped solve on the experiment's headline
//! synthesis is reported distinctly (exit 3), and divergence is ordinary
//! data (exit 0) because infinite cost is a result, not a fault.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde_json::Value;

use desslab::ifp;
use desslab::ofsynth;
use desslab::riccati::{fc_synthesis, sf_dual_synthesis, SolveStatus, SynthesisResult};
use desslab::ring::{augment, RingSpec, SensorConfig, SensorMode};
use desslab::sim::{self, Trajectory};
use desslab::sweep;

use crate::config::{Experiment, ExperimentConfig, Format, LoopMode};
use crate::emit::{
    format_float, heatmap_svg, json_matrix, json_num, json_object, write_bytes, write_csv,
    write_json, HeatmapOptions,
};

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(msg) => write!(f, "configuration error: {msg}"),
            RunError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl From<desslab::Error> for RunError {
    fn from(e: desslab::Error) -> Self {
        RunError::Config(e.to_string())
    }
}

pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub max_iter_exceeded: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.max_iter_exceeded {
            3
        } else {
            0
        }
    }
}

struct Emitter<'c> {
    config: &'c ExperimentConfig,
    files: Vec<PathBuf>,
}

impl<'c> Emitter<'c> {
    fn new(config: &'c ExperimentConfig) -> Result<Self, RunError> {
        let dir = &config.output.dir;
        std::fs::create_dir_all(dir)
            .map_err(|e| RunError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { config, files: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.output.dir.join(name)
    }

    fn record(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    fn io(path: &Path, result: std::io::Result<()>) -> Result<(), RunError> {
        result.map_err(|e| RunError::Io(format!("cannot write {}: {e}", path.display())))
    }

    fn config_copy(&mut self) -> Result<(), RunError> {
        let path = self.path("config.json");
        Self::io(&path, write_bytes(&path, self.config.to_json().as_bytes()))?;
        self.record(path);
        Ok(())
    }

    fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
        footer: Option<&str>,
    ) -> Result<(), RunError> {
        if !self.config.output.wants(Format::Csv) {
            return Ok(());
        }
        let path = self.path(name);
        Self::io(&path, write_csv(&path, header, rows, footer))?;
        self.record(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), RunError> {
        if !self.config.output.wants(Format::Json) {
            return Ok(());
        }
        let path = self.path(name);
        Self::io(&path, write_json(&path, value))?;
        self.record(path);
        Ok(())
    }

    fn svg(&mut self, name: &str, matrix: &DMatrix<f64>, opts: &HeatmapOptions) -> Result<(), RunError> {
        if !self.config.output.wants(Format::Svg) {
            return Ok(());
        }
        let path = self.path(name);
        Self::io(&path, write_bytes(&path, heatmap_svg(matrix, opts).as_bytes()))?;
        self.record(path);
        Ok(())
    }
}

fn sensors_for(mode: SensorMode, q: Option<usize>, d: usize) -> SensorConfig {
    match mode {
        SensorMode::FastOnly => SensorConfig::fast_only(q.unwrap_or(1), d),
        SensorMode::SlowOnly => SensorConfig::slow_only(d),
        SensorMode::Diverse => SensorConfig::diverse(q.unwrap_or(1), d),
    }
}

fn status_str(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::Diverged => "diverged",
        SolveStatus::MaxIterExceeded => "max-iter-exceeded",
    }
}

fn trajectory_rows(traj: &Trajectory) -> Vec<Vec<String>> {
    let state_dim = traj.states[0].len();
    let mut rows = Vec::with_capacity(traj.states.len());
    for t in 0..traj.states.len() {
        let mut row = Vec::with_capacity(1 + 2 * state_dim);
        row.push(t.to_string());
        for i in 0..state_dim {
            row.push(format_float(traj.states[t][i]));
        }
        for i in 0..state_dim {
            // the final sample has no applied input
            row.push(if t < traj.inputs.len() {
                format_float(traj.inputs[t][i])
            } else {
                String::new()
            });
        }
        rows.push(row);
    }
    rows
}

fn trajectory_header(state_dim: usize) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    for i in 1..=state_dim {
        header.push(format!("x_{i}"));
    }
    for i in 1..=state_dim {
        header.push(format!("u_{i}"));
    }
    header
}

fn emit_trajectory(
    emitter: &mut Emitter,
    stem: &str,
    traj: &Trajectory,
) -> Result<(), RunError> {
    let header_owned = trajectory_header(traj.states[0].len());
    let header: Vec<&str> = header_owned.iter().map(String::as_str).collect();
    let footer = format!("empirical_cost = {}", format_float(traj.empirical_cost));
    emitter.csv(&format!("{stem}.csv"), &header, &trajectory_rows(traj), Some(&footer))?;
    let opts = HeatmapOptions { row_block: Some(traj.n), ..Default::default() };
    emitter.svg(&format!("{stem}.svg"), &traj.states_matrix(), &opts)?;
    Ok(())
}

fn synthesis_json(synthesis: &SynthesisResult) -> Vec<(&'static str, Value)> {
    vec![
        ("status", Value::String(status_str(synthesis.status).into())),
        ("iterations", Value::from(synthesis.iterations as u64)),
        ("cost_per_node", json_num(synthesis.cost_per_node)),
        ("cost_total", json_num(synthesis.cost_total)),
        ("closed_loop_radius", json_num(synthesis.closed_loop_radius)),
    ]
}

/// Runs one experiment and writes its artifacts.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    let mut emitter = Emitter::new(config)?;
    emitter.config_copy()?;
    let opts = config.solver.to_options();
    opts.validate().map_err(|e| RunError::Config(e.to_string()))?;
    let mut max_iter_exceeded = false;

    match &config.experiment {
        Experiment::Impulse { n, a, mode, q, d, horizon, node } => {
            let spec = RingSpec::new(*n, *a)?;
            let (traj, synthesis) = match mode {
                LoopMode::Open => {
                    let sensors = SensorConfig::slow_only(*d);
                    let plant = augment(&spec, &sensors)?;
                    (sim::open_loop_impulse(&plant, *node, *horizon)?, None)
                }
                _ => {
                    let sensors = sensors_for(mode.sensor_mode().unwrap(), *q, *d);
                    let plant = augment(&spec, &sensors)?;
                    let synthesis = fc_synthesis(&plant, &opts);
                    max_iter_exceeded |= synthesis.status == SolveStatus::MaxIterExceeded;
                    let traj = sim::closed_loop_impulse(&plant, &synthesis.gain, *node, *horizon)?;
                    (traj, Some(synthesis))
                }
            };
            emit_trajectory(&mut emitter, "trajectory", &traj)?;
            let mut fields = vec![
                ("n", Value::from(*n as u64)),
                ("a", json_num(*a)),
                ("mode", serde_json::to_value(mode).unwrap()),
                ("d", Value::from(*d as u64)),
                ("node", Value::from(*node as u64)),
                ("horizon", Value::from(*horizon as u64)),
                ("classification", Value::String(traj.classification.to_string())),
                ("empirical_cost", json_num(traj.empirical_cost)),
            ];
            if let Some(q) = q {
                fields.push(("q", Value::from(*q as u64)));
            }
            if let Some(synthesis) = &synthesis {
                fields.extend(synthesis_json(synthesis));
            }
            emitter.json("summary.json", &json_object(fields))?;
        }

        Experiment::Synth { n, a, mode, q, d, dual } => {
            let spec = RingSpec::new(*n, *a)?;
            let sensors = sensors_for(*mode, *q, *d);
            let plant = augment(&spec, &sensors)?;
            let synthesis = if *dual {
                sf_dual_synthesis(&plant, &opts)
            } else {
                fc_synthesis(&plant, &opts)
            };
            max_iter_exceeded |= synthesis.status == SolveStatus::MaxIterExceeded;

            let mut fields = vec![
                ("n", Value::from(*n as u64)),
                ("a", json_num(*a)),
                ("mode", serde_json::to_value(mode).unwrap()),
                ("d", Value::from(*d as u64)),
                ("dual", Value::Bool(*dual)),
            ];
            if let Some(q) = q {
                fields.push(("q", Value::from(*q as u64)));
            }
            fields.extend(synthesis_json(&synthesis));
            if !*dual {
                let part = ifp::partition(&synthesis.gain, *n, *d)?;
                fields.push((
                    "ifp_block_norms",
                    Value::Array(part.block_norms.iter().map(|v| json_num(*v)).collect()),
                ));
            }
            emitter.json("synthesis.json", &json_object(fields))?;

            let gain_header_owned: Vec<String> = std::iter::once("row".to_string())
                .chain((1..=synthesis.gain.ncols()).map(|j| format!("c_{j}")))
                .collect();
            let gain_header: Vec<&str> = gain_header_owned.iter().map(String::as_str).collect();
            let gain_rows: Vec<Vec<String>> = (0..synthesis.gain.nrows())
                .map(|i| {
                    std::iter::once((i + 1).to_string())
                        .chain((0..synthesis.gain.ncols()).map(|j| format_float(synthesis.gain[(i, j)])))
                        .collect()
                })
                .collect();
            emitter.csv("gain.csv", &gain_header, &gain_rows, None)?;
            let svg_opts = HeatmapOptions {
                row_block: if *dual { None } else { Some(*n) },
                ..Default::default()
            };
            emitter.svg("gain.svg", &synthesis.gain, &svg_opts)?;
        }

        Experiment::SweepA { n_list, a_start, a_stop, a_step, mode, q, d, workers } => {
            let grid = crate::config::expand_grid(*a_start, *a_stop, *a_step)
                .map_err(RunError::Config)?;
            let sensors = sensors_for(*mode, *q, *d);
            let rows = sweep::sweep_cost_vs_a(n_list, &grid, &sensors, &opts, *workers)?;
            emit_sweep_rows(&mut emitter, "sweep_a", &rows)?;
        }

        Experiment::SweepDelay { n, a, q, d_min, d_max, workers } => {
            if d_max < d_min {
                return Err(RunError::Config(format!("empty delay range {d_min}..{d_max}")));
            }
            let d_range: Vec<usize> = (*d_min..=*d_max).collect();
            let rows = sweep::sweep_cost_vs_delay(*n, *a, *q, &d_range, &opts, *workers)?;
            emit_sweep_rows(&mut emitter, "sweep_delay", &rows)?;
        }

        Experiment::Breakpoint { n, q, tol } => {
            let bp = sweep::find_breakpoint(*n, *q, *tol, &opts)?;
            let value = json_object(vec![
                ("n", Value::from(bp.n as u64)),
                ("q", Value::from(bp.q as u64)),
                ("a_analytic", json_num(bp.a_analytic)),
                ("a_empirical", json_num(bp.a_empirical)),
                ("gap", json_num(bp.gap)),
            ]);
            emitter.json("breakpoint.json", &value)?;
        }

        Experiment::Ablate { n, a, mode, q, d, horizon } => {
            let spec = RingSpec::new(*n, *a)?;
            let sensors = sensors_for(*mode, *q, *d);
            let report = ifp::ablation_study(&spec, &sensors, &opts, *horizon)
                .map_err(|e| RunError::Config(e.to_string()))?;

            // regenerate both loops for the trajectory artifacts
            let plant = augment(&spec, &sensors)?;
            let synthesis = fc_synthesis(&plant, &opts);
            let intact = sim::closed_loop_impulse(&plant, &synthesis.gain, 1, *horizon)?;
            let ablated_gain = ifp::ablate(&synthesis.gain, *n, *d)?;
            let ablated = sim::closed_loop_impulse(&plant, &ablated_gain, 1, *horizon)?;
            emit_trajectory(&mut emitter, "intact", &intact)?;
            emit_trajectory(&mut emitter, "ablated", &ablated)?;

            let value = json_object(vec![
                ("n", Value::from(*n as u64)),
                ("a", json_num(*a)),
                ("mode", serde_json::to_value(mode).unwrap()),
                ("d", Value::from(*d as u64)),
                ("horizon", Value::from(*horizon as u64)),
                (
                    "intact_classification",
                    Value::String(report.intact_classification.to_string()),
                ),
                ("intact_cost_per_node", json_num(report.intact_cost_per_node)),
                (
                    "ablated_classification",
                    Value::String(report.ablated_classification.to_string()),
                ),
                ("ablated_empirical_cost", json_num(report.ablated_empirical_cost)),
                ("ablated_spectral_radius", json_num(report.ablated_spectral_radius)),
                ("alternation_detected", Value::Bool(report.alternation_detected)),
            ]);
            emitter.json("ablation.json", &value)?;
        }

        Experiment::Ofsynth { n, a, d, epsilon } => {
            let spec = RingSpec::new(*n, *a)?;
            let eye = DMatrix::identity(*n, *n);
            let plant = ofsynth::build_of_plant(&spec, &eye, &eye, *d, *d)?;
            let weights = ofsynth::OFWeights::with_epsilon(&plant, *epsilon);
            let gains = ofsynth::of_synthesis(&plant, &weights, &opts)
                .map_err(|e| RunError::Config(e.to_string()))?;

            let summary = json_object(vec![
                ("n", Value::from(*n as u64)),
                ("a", json_num(*a)),
                ("d", Value::from(*d as u64)),
                ("epsilon", json_num(*epsilon)),
                ("residual_l2", json_num(gains.residual_l2)),
                ("residual_k3", json_num(gains.residual_k3)),
                ("control_radius", json_num(gains.control_radius)),
                ("filter_radius", json_num(gains.filter_radius)),
                ("observer_gain", json_matrix(&gains.l)),
                ("controller_gain", json_matrix(&gains.k)),
            ]);
            emitter.json("of_summary.json", &summary)?;

            let report = ofsynth::ifp_report(&gains, &plant);
            let pathways = Value::Array(
                report
                    .pathways
                    .iter()
                    .map(|p| {
                        json_object(vec![
                            ("name", Value::String(p.name.label().into())),
                            ("dimension", Value::from(p.dimension as u64)),
                            ("magnitude", json_num(p.magnitude)),
                        ])
                    })
                    .collect(),
            );
            emitter.json("ifp_report.json", &json_object(vec![("pathways", pathways)]))?;

            let obs_opts = HeatmapOptions { row_block: Some(*n), ..Default::default() };
            emitter.svg("observer_gain.svg", &gains.l, &obs_opts)?;
            emitter.svg("controller_gain.svg", &gains.k, &HeatmapOptions::default())?;
        }
    }

    Ok(RunOutcome { files: emitter.files, max_iter_exceeded })
}

/// Pinned sweep-table schema.
pub const SWEEP_HEADER: [&str; 9] = [
    "n",
    "a",
    "q",
    "d",
    "mode",
    "cost_per_node",
    "cost_total",
    "stabilizable",
    "closed_loop_radius",
];

pub fn sweep_row_strings(row: &sweep::SweepRow) -> Vec<String> {
    vec![
        row.n.to_string(),
        format_float(row.a),
        row.q.map(|q| q.to_string()).unwrap_or_default(),
        row.d.to_string(),
        row.mode.to_string(),
        format_float(row.cost_per_node),
        format_float(row.cost_total),
        row.stabilizable.to_string(),
        row.closed_loop_radius.map(format_float).unwrap_or_default(),
    ]
}

fn emit_sweep_rows(
    emitter: &mut Emitter,
    stem: &str,
    rows: &[sweep::SweepRow],
) -> Result<(), RunError> {
    let table: Vec<Vec<String>> = rows.iter().map(sweep_row_strings).collect();
    emitter.csv(&format!("{stem}.csv"), &SWEEP_HEADER, &table, None)?;
    let json_rows = Value::Array(
        rows.iter()
            .map(|row| {
                json_object(vec![
                    ("n", Value::from(row.n as u64)),
                    ("a", json_num(row.a)),
                    (
                        "q",
                        row.q.map(|q| Value::from(q as u64)).unwrap_or(Value::Null),
                    ),
                    ("d", Value::from(row.d as u64)),
                    ("mode", Value::String(row.mode.to_string())),
                    ("cost_per_node", json_num(row.cost_per_node)),
                    ("cost_total", json_num(row.cost_total)),
                    ("stabilizable", Value::Bool(row.stabilizable)),
                    (
                        "closed_loop_radius",
                        row.closed_loop_radius.map(json_num).unwrap_or(Value::Null),
                    ),
                ])
            })
            .collect(),
    );
    emitter.json(&format!("{stem}.json"), &json_rows)?;
    Ok(())
}
