//! Deterministic parameter-sweep experiments: cost versus instability,
//! breaking points versus system size, cost versus delay, and the ablation
//! grid.
//!
//! Every grid cell is a pure function of its parameters. Cells are
//! evaluated on a thread pool of configurable width and merged back in
//! grid order, so the output bytes never depend on the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::ifp::{ablation_study, AblationReport};
use crate::riccati::{classify_stabilizable, fc_synthesis, DareOptions};
use crate::ring::{augment, RingSpec, SensorConfig, SensorMode};
use crate::sim::Classification;
use crate::{Error, Result};

/// One evaluated grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub a: f64,
    /// Fast eigenvector count; absent for slow-only sensing.
    pub q: Option<usize>,
    pub d: usize,
    pub mode: SensorMode,
    pub cost_per_node: f64,
    pub cost_total: f64,
    pub stabilizable: bool,
    /// Spectral radius of the optimal closed loop; absent when the
    /// configuration is not stabilizable.
    pub closed_loop_radius: Option<f64>,
    /// Filled only by experiments that also simulate.
    pub classification: Option<Classification>,
}

/// Analytic breaking point versus the bisection of the solver-based
/// stabilizability test.
#[derive(Debug, Clone, Serialize)]
pub struct BreakPoint {
    pub n: usize,
    pub q: usize,
    pub a_analytic: f64,
    pub a_empirical: f64,
    pub gap: f64,
}

/// Ablation grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct AblationCell {
    pub n: usize,
    pub a: f64,
    pub d: usize,
    pub mode: SensorMode,
    pub report: AblationReport,
}

/// Ordered parallel map: output index i holds f(cells[i]) regardless of
/// the worker count (0 means the library default).
fn map_cells<I, T, F>(cells: Vec<I>, workers: usize, f: F) -> Vec<T>
where
    I: Send + Sync,
    T: Send,
    F: Fn(&I) -> T + Send + Sync,
{
    if workers == 1 {
        return cells.iter().map(f).collect();
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    match builder.build() {
        Ok(pool) => pool.install(|| cells.par_iter().map(f).collect()),
        Err(_) => cells.iter().map(f).collect(),
    }
}

fn eval_cell(n: usize, a: f64, sensors: &SensorConfig, opts: &DareOptions) -> Result<SweepRow> {
    let spec = RingSpec::new(n, a)?;
    let plant = augment(&spec, sensors)?;
    let synthesis = fc_synthesis(&plant, opts);
    let stabilizable = synthesis.stabilizing();
    Ok(SweepRow {
        n,
        a,
        q: match sensors.mode {
            SensorMode::SlowOnly => None,
            _ => Some(sensors.q),
        },
        d: sensors.d,
        mode: sensors.mode,
        cost_per_node: if stabilizable { synthesis.cost_per_node } else { f64::INFINITY },
        cost_total: if stabilizable { synthesis.cost_total } else { f64::INFINITY },
        stabilizable,
        closed_loop_radius: stabilizable.then_some(synthesis.closed_loop_radius),
        classification: None,
    })
}

/// Cost as a function of instability for each system size, one row per
/// `(n, a)` in ascending grid order.
pub fn sweep_cost_vs_a(
    n_list: &[usize],
    a_grid: &[f64],
    sensors: &SensorConfig,
    opts: &DareOptions,
    workers: usize,
) -> Result<Vec<SweepRow>> {
    if a_grid.is_empty() {
        return Err(Error::InvalidParameter("instability grid is empty".into()));
    }
    if a_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "instability grid must be strictly ascending".into(),
        ));
    }
    let mut sizes = n_list.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let cells: Vec<(usize, f64)> = sizes
        .iter()
        .flat_map(|&n| a_grid.iter().map(move |&a| (n, a)))
        .collect();
    map_cells(cells, workers, |&(n, a)| eval_cell(n, a, sensors, opts))
        .into_iter()
        .collect()
}

/// Largest instability a fast-only architecture with `q` eigenvector
/// sensors can survive on an `n`-node ring: the scale at which the
/// `(q+1)`-th largest eigenvalue magnitude reaches 1. Infinite when no
/// further mode can ever go unstable.
pub fn analytic_breakpoint(n: usize, q: usize) -> f64 {
    let mut magnitudes: Vec<f64> = (0..n)
        .map(|k| (1.0 + 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()).abs())
        .collect();
    magnitudes.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let s = magnitudes[q];
    if s <= 1e-12 {
        f64::INFINITY
    } else {
        3.0 / s
    }
}

/// Locates the empirical breaking point by bisecting the solver-based
/// stabilizability test over `a` in `[1, 3n]`.
///
/// Fast-only stabilizability does not depend on the delay (the delay
/// states are unobserved and unpenalized), so the probe runs at `d = 0`
/// where each solve is cheapest.
pub fn find_breakpoint(
    n: usize,
    q: usize,
    bisect_tol: f64,
    opts: &DareOptions,
) -> Result<BreakPoint> {
    if q < 1 || q >= n {
        return Err(Error::InvalidParameter(format!(
            "breakpoint search needs 1 <= q < n, got q={q}, n={n}"
        )));
    }
    if bisect_tol <= 0.0 || bisect_tol.is_nan() {
        return Err(Error::InvalidParameter("bisection tolerance must be positive".into()));
    }
    let a_analytic = analytic_breakpoint(n, q);
    // Near the boundary the iteration hits its cap and the spectral-radius
    // fallback decides. The fallback radius is the largest uncovered
    // eigenvalue magnitude, which does not depend on how far the iterate
    // got, so a modest budget classifies boundary cells exactly and keeps
    // the bisection cheap.
    let probe_opts = DareOptions { max_iter: opts.max_iter.min(10_000), ..*opts };
    let stabilizable = |a: f64| -> Result<bool> {
        let spec = RingSpec::new(n, a)?;
        let plant = augment(&spec, &SensorConfig::fast_only(q, 0))?;
        Ok(classify_stabilizable(&plant, &probe_opts))
    };

    let mut lo = 1.0;
    let mut hi = 3.0 * n as f64;
    if stabilizable(hi)? {
        // every reachable instability is covered; no finite breaking point
        return Ok(BreakPoint {
            n,
            q,
            a_analytic,
            a_empirical: f64::INFINITY,
            gap: if a_analytic.is_infinite() { 0.0 } else { f64::INFINITY },
        });
    }
    if !stabilizable(lo)? {
        return Err(Error::SynthesisFailed(format!(
            "neutrally stable ring (a=1) unexpectedly unstabilizable for n={n}, q={q}"
        )));
    }
    while hi - lo > bisect_tol {
        let mid = 0.5 * (lo + hi);
        if stabilizable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a_empirical = 0.5 * (lo + hi);
    Ok(BreakPoint { n, q, a_analytic, a_empirical, gap: (a_analytic - a_empirical).abs() })
}

/// Cost versus delay for all three sensing architectures; rows ordered by
/// delay, fast-only before slow-only before diverse within each delay.
pub fn sweep_cost_vs_delay(
    n: usize,
    a: f64,
    q: usize,
    d_range: &[usize],
    opts: &DareOptions,
    workers: usize,
) -> Result<Vec<SweepRow>> {
    if d_range.is_empty() {
        return Err(Error::InvalidParameter("delay range is empty".into()));
    }
    let cells: Vec<SensorConfig> = d_range
        .iter()
        .flat_map(|&d| {
            [
                SensorConfig::fast_only(q, d),
                SensorConfig::slow_only(d),
                SensorConfig::diverse(q, d),
            ]
        })
        .collect();
    map_cells(cells, workers, |sensors| eval_cell(n, a, sensors, opts))
        .into_iter()
        .collect()
}

/// Runs the knockout experiment on every `(a, mode)` cell.
pub fn ablation_grid(
    n: usize,
    a_list: &[f64],
    d: usize,
    modes: &[SensorMode],
    opts: &DareOptions,
    horizon: usize,
    workers: usize,
) -> Result<Vec<AblationCell>> {
    if modes
        .iter()
        .any(|m| !matches!(m, SensorMode::SlowOnly | SensorMode::Diverse))
    {
        return Err(Error::InvalidParameter(
            "ablation grid modes must have internal states (slow-only or diverse)".into(),
        ));
    }
    let cells: Vec<(f64, SensorMode)> = a_list
        .iter()
        .flat_map(|&a| modes.iter().map(move |&m| (a, m)))
        .collect();
    map_cells(cells, workers, |&(a, mode)| -> Result<AblationCell> {
        let spec = RingSpec::new(n, a)?;
        let sensors = match mode {
            SensorMode::SlowOnly => SensorConfig::slow_only(d),
            _ => SensorConfig::diverse(1, d),
        };
        let report = ablation_study(&spec, &sensors, opts, horizon)?;
        Ok(AblationCell { n, a, d, mode, report })
    })
    .into_iter()
    .collect()
}
