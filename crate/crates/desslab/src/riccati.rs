//! Discrete algebraic Riccati solver for the zero-measurement-noise regime,
//! plus full-control synthesis and its state-feedback dual.
//!
//! With no sensor noise the innovation Gramian `C P C'` can be singular, so
//! the solver runs the fixed-point (value) iteration with a
//! tolerance-truncated pseudo-inverse instead of a Hamiltonian-pencil
//! method, and divergence is reported as a value rather than an error: an
//! unstabilizable configuration has infinite cost, which sweeps tabulate
//! as data.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::linalg::{inf_norm, pseudo_inverse, spectral_radius, symmetrize};
use crate::ring::AugmentedPlant;

/// Solver knobs. The defaults are tight enough that converged gains are
/// deadbeat to well below the 1e-8 trajectory tolerances used downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DareOptions {
    /// Relative fixed-point tolerance on the iterate update.
    pub tol_rel: f64,
    /// Iteration cap; exceeding it is reported distinctly from divergence.
    pub max_iter: usize,
    /// Infinity-norm threshold at which the iteration is declared divergent.
    pub divergence_norm: f64,
    /// Relative singular-value cutoff for pseudo-inversion.
    pub pinv_rel_tol: f64,
}

impl Default for DareOptions {
    fn default() -> Self {
        Self {
            tol_rel: 1e-11,
            max_iter: 200_000,
            divergence_norm: 1e12,
            pinv_rel_tol: 1e-9,
        }
    }
}

impl DareOptions {
    /// All knobs strictly positive, with both relative tolerances below 1.
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.tol_rel > 0.0
            && self.tol_rel < 1.0
            && self.max_iter > 0
            && self.divergence_norm > 0.0
            && self.pinv_rel_tol > 0.0
            && self.pinv_rel_tol < 1.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidParameter(format!("solver options out of range: {self:?}")))
        }
    }
}

/// Outcome of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    Diverged,
    MaxIterExceeded,
}

/// Raw solver output.
///
/// `last_bounded` is the most recent iterate whose norm stayed at or below
/// the square root of the divergence threshold. When the iteration blows up
/// along undetectable unstable directions, the observable part of that
/// iterate has long converged while it is still small enough that rounding
/// noise from the huge final iterates has not leaked into it; gains
/// extracted from it reproduce the optimal action on the covered modes.
#[derive(Debug, Clone)]
pub struct DareSolution {
    pub p: DMatrix<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub last_bounded: DMatrix<f64>,
}

/// Solves `P = A'PA - A'PB (R + B'PB)^+ B'PA + Q` by iterating from
/// `P_0 = Q`, where `^+` is the truncated pseudo-inverse.
pub fn solve_dare_sf(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &DareOptions,
) -> DareSolution {
    let n = a.nrows();
    assert!(a.is_square(), "state matrix must be square");
    assert_eq!(b.nrows(), n, "input matrix row count must match the state");
    assert_eq!(q.shape(), (n, n), "state cost must be n-by-n");
    assert_eq!(r.shape(), (b.ncols(), b.ncols()), "input cost must be m-by-m");
    opts.validate().expect("solver options must be in range");

    let at = a.transpose();
    let bt = b.transpose();
    let snapshot_cap = opts.divergence_norm.sqrt();

    let mut p = q.clone();
    let mut last_bounded = p.clone();
    for iteration in 1..=opts.max_iter {
        let pa = &p * a;
        let pb = &p * b;
        let gram = r + &bt * &pb;
        let gain_core = pseudo_inverse(&gram, opts.pinv_rel_tol);
        let s = &bt * &pa;
        let mut next = &at * &pa - s.transpose() * (&gain_core * &s) + q;
        symmetrize(&mut next);

        let norm = inf_norm(&next);
        if norm <= snapshot_cap {
            last_bounded.copy_from(&next);
        }
        if norm > opts.divergence_norm {
            return DareSolution {
                p: next,
                status: SolveStatus::Diverged,
                iterations: iteration,
                last_bounded,
            };
        }
        if inf_norm(&(&next - &p)) <= opts.tol_rel * (1.0 + norm) {
            return DareSolution {
                last_bounded: next.clone(),
                p: next,
                status: SolveStatus::Converged,
                iterations: iteration,
            };
        }
        p = next;
    }
    DareSolution {
        p,
        status: SolveStatus::MaxIterExceeded,
        iterations: opts.max_iter,
        last_bounded,
    }
}

/// Synthesis output for both the full-control problem and its dual.
///
/// For full control `gain` is the N-by-p output injection `L` with closed
/// loop `A - L C`; for the dual it is the p-by-N state feedback `K` with
/// closed loop `A' - C' K`, and `gain` transposes onto the primal `L`.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub p: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub cost_total: f64,
    pub cost_per_node: f64,
    pub closed_loop_radius: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl SynthesisResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Finite cost with a stable closed loop.
    pub fn stabilizing(&self) -> bool {
        self.cost_total.is_finite() && self.closed_loop_radius < 1.0
    }
}

/// Optimal full-control synthesis: `u(t) = -L y(t)`.
///
/// Solves the dual Riccati equation on `(A', C')` with state cost
/// `Q = B1 B1'` (only ring states are penalized) and zero input cost, then
/// forms `L = A P C' (C P C')^+`. The quadratic cost is `Tr(B1' P B1)`,
/// reported both raw and normalized by the node count; a divergent
/// iteration yields infinite cost and the gain extracted from the last
/// bounded iterate, which still acts optimally on the covered directions.
pub fn fc_synthesis(plant: &AugmentedPlant, opts: &DareOptions) -> SynthesisResult {
    let q = &plant.b1 * plant.b1.transpose();
    let p_out = plant.dims.outputs;
    let r = DMatrix::zeros(p_out, p_out);
    let sol = solve_dare_sf(&plant.a.transpose(), &plant.c.transpose(), &q, &r, opts);

    let p_gain = match sol.status {
        SolveStatus::Converged => &sol.p,
        _ => &sol.last_bounded,
    };
    let ct = plant.c.transpose();
    let innovations = &plant.c * p_gain * &ct;
    let gain = &plant.a * p_gain * &ct * pseudo_inverse(&innovations, opts.pinv_rel_tol);
    let closed_loop_radius = spectral_radius(&(&plant.a - &gain * &plant.c));

    let cost_total = match sol.status {
        SolveStatus::Converged => trace_quadratic(&plant.b1, &sol.p),
        SolveStatus::Diverged => f64::INFINITY,
        // The iterate approaches the cost from below; if its gain already
        // stabilizes, report the near-converged value, else infinity.
        SolveStatus::MaxIterExceeded => {
            if closed_loop_radius < 1.0 {
                trace_quadratic(&plant.b1, &sol.p)
            } else {
                f64::INFINITY
            }
        }
    };

    SynthesisResult {
        p: sol.p,
        gain,
        cost_total,
        cost_per_node: cost_total / plant.dims.n as f64,
        closed_loop_radius,
        status: sol.status,
        iterations: sol.iterations,
    }
}

/// Same fixed point as [`solve_dare_sf`] on the transposed data, iterated
/// in the prediction-correction arrangement
/// `P <- A (P - P C' (R + C P C')^+ C P) A' + Q`.
///
/// The dual synthesis goes through this routine so that it shares no
/// floating-point path with the full-control route; agreement between the
/// two is then a real numerical check rather than an identity.
fn solve_dare_corrected(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &DareOptions,
) -> DareSolution {
    let n = a.nrows();
    assert!(a.is_square(), "state matrix must be square");
    assert_eq!(c.ncols(), n, "output matrix column count must match the state");
    assert_eq!(q.shape(), (n, n), "state cost must be n-by-n");
    assert_eq!(r.shape(), (c.nrows(), c.nrows()), "output cost must be p-by-p");
    opts.validate().expect("solver options must be in range");

    let ct = c.transpose();
    let snapshot_cap = opts.divergence_norm.sqrt();
    let mut p = q.clone();
    let mut last_bounded = p.clone();
    for iteration in 1..=opts.max_iter {
        let pc = &p * &ct;
        let gram = r + c * &pc;
        let corrected = &p - &pc * pseudo_inverse(&gram, opts.pinv_rel_tol) * pc.transpose();
        let mut next = a * corrected * a.transpose() + q;
        symmetrize(&mut next);

        let norm = inf_norm(&next);
        if norm <= snapshot_cap {
            last_bounded.copy_from(&next);
        }
        if norm > opts.divergence_norm {
            return DareSolution {
                p: next,
                status: SolveStatus::Diverged,
                iterations: iteration,
                last_bounded,
            };
        }
        if inf_norm(&(&next - &p)) <= opts.tol_rel * (1.0 + norm) {
            return DareSolution {
                last_bounded: next.clone(),
                p: next,
                status: SolveStatus::Converged,
                iterations: iteration,
            };
        }
        p = next;
    }
    DareSolution {
        p,
        status: SolveStatus::MaxIterExceeded,
        iterations: opts.max_iter,
        last_bounded,
    }
}

/// State-feedback dual: perfect sensing, actuation through `C'`.
///
/// Built from the transposed plant with its own solver arrangement rather
/// than by transposing the full-control result, so cost agreement between
/// the two routes is a genuine numerical check. Returns `K` with `K' = L`
/// entrywise up to rounding.
pub fn sf_dual_synthesis(plant: &AugmentedPlant, opts: &DareOptions) -> SynthesisResult {
    let a_dual = plant.a.transpose();
    let b_dual = plant.c.transpose();
    let q = &plant.b1 * plant.b1.transpose();
    let p_out = plant.dims.outputs;
    let r = DMatrix::zeros(p_out, p_out);
    let sol = solve_dare_corrected(&plant.a, &plant.c, &q, &r, opts);

    let p_gain = match sol.status {
        SolveStatus::Converged => &sol.p,
        _ => &sol.last_bounded,
    };
    let pb = p_gain * &b_dual;
    let gram = b_dual.transpose() * &pb;
    let gain = pseudo_inverse(&gram, opts.pinv_rel_tol) * pb.transpose() * &a_dual;
    let closed_loop_radius = spectral_radius(&(&a_dual - &b_dual * &gain));

    let cost_total = match sol.status {
        SolveStatus::Converged => trace_quadratic(&plant.b1, &sol.p),
        SolveStatus::Diverged => f64::INFINITY,
        SolveStatus::MaxIterExceeded => {
            if closed_loop_radius < 1.0 {
                trace_quadratic(&plant.b1, &sol.p)
            } else {
                f64::INFINITY
            }
        }
    };

    SynthesisResult {
        p: sol.p,
        gain,
        cost_total,
        cost_per_node: cost_total / plant.dims.n as f64,
        closed_loop_radius,
        status: sol.status,
        iterations: sol.iterations,
    }
}

/// True when the optimal full-control loop stabilizes the plant.
///
/// A converged solve answers directly. When the iteration cap is hit the
/// plant sits numerically at a stability boundary, and the spectral radius
/// of the last bounded gain's closed loop decides; for fast-only sensing
/// this agrees with counting the uncovered eigenvalue magnitudes against 1.
pub fn classify_stabilizable(plant: &AugmentedPlant, opts: &DareOptions) -> bool {
    let synthesis = fc_synthesis(plant, opts);
    match synthesis.status {
        SolveStatus::Diverged => false,
        _ => synthesis.closed_loop_radius < 1.0,
    }
}

/// `Tr(B' P B)`.
fn trace_quadratic(b: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    (b.transpose() * p * b).trace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{augment, RingSpec, SensorConfig};

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn options_validation() {
        assert!(DareOptions::default().validate().is_ok());
        assert!(DareOptions { tol_rel: 0.0, ..Default::default() }.validate().is_err());
        assert!(DareOptions { tol_rel: 1.5, ..Default::default() }.validate().is_err());
        assert!(DareOptions { max_iter: 0, ..Default::default() }.validate().is_err());
        assert!(DareOptions { pinv_rel_tol: 1.0, ..Default::default() }.validate().is_err());
        assert!(DareOptions { divergence_norm: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn scalar_dare_stable_plant() {
        let sol = solve_dare_sf(&scalar(0.5), &scalar(1.0), &scalar(1.0), &scalar(0.0), &DareOptions::default());
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn scalar_dare_uncontrollable_unstable_diverges() {
        let sol = solve_dare_sf(&scalar(2.0), &scalar(0.0), &scalar(1.0), &scalar(0.0), &DareOptions::default());
        assert_eq!(sol.status, SolveStatus::Diverged);
    }

    #[test]
    fn scalar_dare_deadbeat() {
        let opts = DareOptions::default();
        let sol = solve_dare_sf(&scalar(1.0), &scalar(1.0), &scalar(1.0), &scalar(0.0), &opts);
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-10);
        // gain (B'PB)^+ B'PA = 1, closed loop 1 - 1 = 0
        let gain = sol.p[(0, 0)] / sol.p[(0, 0)];
        assert!((gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dare_residual_and_shape_invariants() {
        let spec = RingSpec::new(5, 1.856).unwrap();
        for sensors in [
            SensorConfig::slow_only(3),
            SensorConfig::diverse(1, 3),
            SensorConfig::slow_only(0),
        ] {
            let plant = augment(&spec, &sensors).unwrap();
            let opts = DareOptions::default();
            let q = &plant.b1 * plant.b1.transpose();
            let p_out = plant.dims.outputs;
            let r = DMatrix::zeros(p_out, p_out);
            let sol = solve_dare_sf(&plant.a.transpose(), &plant.c.transpose(), &q, &r, &opts);
            assert_eq!(sol.status, SolveStatus::Converged);

            // residual ||P - F(P)|| <= tol_rel (1 + ||P||)
            let at = plant.a.transpose();
            let bt = plant.c.clone();
            let pa = &sol.p * &at;
            let s = &bt * &pa;
            let gram = &bt * &sol.p * bt.transpose();
            let mut fp = at.transpose() * &pa
                - s.transpose() * pseudo_inverse(&gram, opts.pinv_rel_tol) * &s
                + &q;
            symmetrize(&mut fp);
            let residual = inf_norm(&(&fp - &sol.p));
            assert!(residual <= opts.tol_rel * (1.0 + inf_norm(&sol.p)) * 4.0,
                "residual {residual} too large");

            // symmetry and positive semidefiniteness
            assert!(inf_norm(&(&sol.p - &sol.p.transpose())) < 1e-9);
            let eigs = sol.p.clone().symmetric_eigen().eigenvalues;
            assert!(eigs.iter().all(|&e| e >= -1e-9));
        }
    }

    #[test]
    fn slow_only_cost_matches_open_loop_prefix_energy() {
        // independent oracle: with sensing delayed d steps the loop cannot
        // act before t = d, so the optimal cost per node is the open-loop
        // impulse energy over t = 0..=d, and everything is zeroed after.
        let spec = RingSpec::new(5, 1.856).unwrap();
        let plant = augment(&spec, &SensorConfig::slow_only(3)).unwrap();
        let result = fc_synthesis(&plant, &DareOptions::default());
        assert!(result.converged());
        let ring = crate::ring::build_ring_matrix(&spec);
        let mut x = DMatrix::identity(5, 5);
        let mut prefix_energy = 0.0;
        for _ in 0..=3 {
            prefix_energy += x.iter().map(|v| v * v).sum::<f64>();
            x = &ring * x;
        }
        let per_node = prefix_energy / 5.0;
        assert!(
            (result.cost_per_node - per_node).abs() < 1e-6,
            "dare {} vs prefix oracle {per_node}",
            result.cost_per_node
        );
        assert!(result.closed_loop_radius < 1e-2);
    }

    #[test]
    fn diverse_cost_matches_modal_oracle() {
        // independent oracle: the fast row kills the uniform mode at t = 1,
        // the remaining modes run open loop until the delayed information
        // arrives, and everything is zero from t = d + 1
        let spec = RingSpec::new(5, 1.856).unwrap();
        let plant = augment(&spec, &SensorConfig::diverse(1, 3)).unwrap();
        let result = fc_synthesis(&plant, &DareOptions::default());
        assert!(result.converged());

        let eig = crate::ring::ring_eigensystem(&spec);
        let lam1 = eig.pairs[1].value;
        let lam2 = eig.pairs[3].value;
        let mut oracle = 1.0;
        for t in 1..=3 {
            oracle += 0.4 * (lam1.powi(2 * t) + lam2.powi(2 * t));
        }
        assert!(
            (result.cost_per_node - oracle).abs() < 1e-6,
            "dare {} vs modal oracle {oracle}",
            result.cost_per_node
        );
    }

    #[test]
    fn fast_only_at_breaking_point_diverges() {
        let spec = RingSpec::new(5, 1.856).unwrap();
        let plant = augment(&spec, &SensorConfig::fast_only(1, 3)).unwrap();
        let result = fc_synthesis(&plant, &DareOptions::default());
        assert_eq!(result.status, SolveStatus::Diverged);
        assert!(result.cost_per_node.is_infinite());
        assert!(result.cost_total.is_infinite());
        // the salvaged gain still handles the covered mode but cannot
        // stabilize the uncovered pair
        assert!(result.closed_loop_radius > 1.0);
        assert!(result.closed_loop_radius < 1.01);
    }

    #[test]
    fn classify_stabilizable_around_breaking_point() {
        let opts = DareOptions::default();
        for (a, q, want) in [(1.85, 1, true), (1.856, 1, false), (1.856, 3, true)] {
            let spec = RingSpec::new(5, a).unwrap();
            let plant = augment(&spec, &SensorConfig::fast_only(q, 0)).unwrap();
            assert_eq!(classify_stabilizable(&plant, &opts), want, "a={a}, q={q}");
            // must agree with the analytic uncovered-mode count
            let unstable = crate::ring::ring_eigensystem(&spec).unstable_count();
            assert_eq!(unstable <= q, want);
        }
    }

    #[test]
    fn dual_matches_full_control() {
        let opts = DareOptions::default();
        let spec = RingSpec::new(5, 1.856).unwrap();
        for sensors in [SensorConfig::slow_only(3), SensorConfig::diverse(1, 3)] {
            let plant = augment(&spec, &sensors).unwrap();
            let fc = fc_synthesis(&plant, &opts);
            let dual = sf_dual_synthesis(&plant, &opts);
            assert!(fc.converged() && dual.converged());
            let rel = (fc.cost_total - dual.cost_total).abs() / fc.cost_total;
            assert!(rel < 1e-9, "cost mismatch {rel}");
            let gain_gap = inf_norm(&(&dual.gain.transpose() - &fc.gain));
            assert!(gain_gap < 1e-9 * (1.0 + inf_norm(&fc.gain)), "gain gap {gain_gap}");
        }
    }

    #[test]
    fn dual_zero_delay_is_textbook_state_feedback() {
        let opts = DareOptions::default();
        let spec = RingSpec::new(5, 1.0).unwrap();
        let plant = augment(&spec, &SensorConfig::slow_only(0)).unwrap();
        let dual = sf_dual_synthesis(&plant, &opts);
        assert!(dual.converged());
        assert!(dual.closed_loop_radius < 1e-6);
        // full sensing, full actuation, no input cost: the optimal feedback
        // cancels the dynamics outright
        let ring = crate::ring::build_ring_matrix(&spec);
        assert!(inf_norm(&(&dual.gain - &ring.transpose())) < 1e-8);
    }

    #[test]
    fn fast_only_cost_is_delay_invariant() {
        let opts = DareOptions::default();
        let spec = RingSpec::new(5, 1.5).unwrap();
        let baseline = fc_synthesis(
            &augment(&spec, &SensorConfig::fast_only(1, 0)).unwrap(),
            &opts,
        );
        assert!(baseline.converged());
        for d in 1..=4 {
            let result = fc_synthesis(
                &augment(&spec, &SensorConfig::fast_only(1, d)).unwrap(),
                &opts,
            );
            let rel = (result.cost_per_node - baseline.cost_per_node).abs()
                / baseline.cost_per_node;
            assert!(rel < 1e-9, "d={d} drifted by {rel}");
        }
    }

    #[test]
    fn slow_only_cost_grows_with_delay() {
        let opts = DareOptions::default();
        let spec = RingSpec::new(5, 1.856).unwrap();
        let mut previous = 0.0;
        for d in 0..=4 {
            let result = fc_synthesis(
                &augment(&spec, &SensorConfig::slow_only(d)).unwrap(),
                &opts,
            );
            assert!(result.converged());
            assert!(result.cost_per_node > previous);
            previous = result.cost_per_node;
        }
    }
}
