//! Output feedback with delayed actuation and delayed sensing: block plant
//! assembly, the two-Riccati synthesis, the simplified one-delay observer
//! recursion, and the taxonomy of internal feedback pathways it exposes.
//!
//! The augmented state is `[x_r, x_a, x_s]`: physical ring states, the
//! actuation delay chain (`d_a` blocks of `m`), and the sensing delay chain
//! (`d_s` blocks of `p`). Control enters the head of the actuation chain
//! and is applied to the ring from its tail; measurements enter the head of
//! the sensing chain and are read from its tail.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg::{fro_norm, pseudo_inverse, spectral_radius};
use crate::riccati::{solve_dare_sf, DareOptions, SolveStatus};
use crate::ring::{build_ring_matrix, RingSpec};
use crate::{Error, Result};

/// Block-downshift matrix `Z`: `blocks * size` square, with identity
/// blocks of the given size on the first block sub-diagonal. Applying it
/// `blocks` times annihilates every vector.
pub fn block_downshift(blocks: usize, size: usize) -> DMatrix<f64> {
    let dim = blocks * size;
    let mut z = DMatrix::zeros(dim, dim);
    for b in 1..blocks {
        z.view_mut((b * size, (b - 1) * size), (size, size))
            .copy_from(&DMatrix::identity(size, size));
    }
    z
}

/// Dimension record for the output-feedback plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OFDims {
    /// Ring nodes.
    pub n: usize,
    /// Physical actuators.
    pub m: usize,
    /// Physical sensors.
    pub p: usize,
    /// Actuation delay steps.
    pub d_a: usize,
    /// Sensing delay steps.
    pub d_s: usize,
    /// Augmented state dimension `n + d_a m + d_s p`.
    pub state: usize,
    /// Input dimension `m + d_s p` (physical input plus internal wires).
    pub inputs: usize,
}

/// Delay-augmented output-feedback plant.
#[derive(Debug, Clone)]
pub struct OFPlant {
    pub a: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub a_r: DMatrix<f64>,
    pub b_2r: DMatrix<f64>,
    pub c_r: DMatrix<f64>,
    pub dims: OFDims,
}

/// Assembles the block plant. Zero delays collapse the corresponding chain:
/// with `d_a = d_s = 0` this is the plain `(A_r, B_2r, C_r)` system.
/// Disturbances always enter the ring states only.
pub fn build_of_plant(
    spec: &RingSpec,
    b_2r: &DMatrix<f64>,
    c_r: &DMatrix<f64>,
    d_a: usize,
    d_s: usize,
) -> Result<OFPlant> {
    let n = spec.n;
    if b_2r.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "actuation matrix must have {n} rows, got {}",
            b_2r.nrows()
        )));
    }
    if c_r.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "sensing matrix must have {n} columns, got {}",
            c_r.ncols()
        )));
    }
    let m = b_2r.ncols();
    let p = c_r.nrows();
    let state = n + d_a * m + d_s * p;
    let inputs = m + d_s * p;
    let a_r = build_ring_matrix(spec);

    let mut a = DMatrix::zeros(state, state);
    a.view_mut((0, 0), (n, n)).copy_from(&a_r);
    let act_offset = n;
    let sen_offset = n + d_a * m;
    if d_a > 0 {
        // ring reads the most-delayed actuation block
        a.view_mut((0, act_offset + (d_a - 1) * m), (n, m)).copy_from(b_2r);
        a.view_mut((act_offset, act_offset), (d_a * m, d_a * m))
            .copy_from(&block_downshift(d_a, m));
    }
    if d_s > 0 {
        // sensing chain head receives the current measurement
        a.view_mut((sen_offset, 0), (p, n)).copy_from(c_r);
        a.view_mut((sen_offset, sen_offset), (d_s * p, d_s * p))
            .copy_from(&block_downshift(d_s, p));
    }

    let mut b2 = DMatrix::zeros(state, inputs);
    if d_a > 0 {
        b2.view_mut((act_offset, 0), (m, m)).copy_from(&DMatrix::identity(m, m));
    } else {
        b2.view_mut((0, 0), (n, m)).copy_from(b_2r);
    }
    if d_s > 0 {
        b2.view_mut((sen_offset, m), (d_s * p, d_s * p))
            .copy_from(&DMatrix::identity(d_s * p, d_s * p));
    }

    let mut b1 = DMatrix::zeros(state, n);
    b1.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));

    let mut c = DMatrix::zeros(p, state);
    if d_s > 0 {
        c.view_mut((0, state - p), (p, p)).copy_from(&DMatrix::identity(p, p));
    } else {
        c.view_mut((0, 0), (p, n)).copy_from(c_r);
    }

    Ok(OFPlant {
        a,
        b2,
        b1,
        c,
        a_r,
        b_2r: b_2r.clone(),
        c_r: c_r.clone(),
        dims: OFDims { n, m, p, d_a, d_s, state, inputs },
    })
}

/// Quadratic weights for the two Riccati equations.
#[derive(Debug, Clone)]
pub struct OFWeights {
    /// State cost (controller equation).
    pub q: DMatrix<f64>,
    /// Input cost (controller equation).
    pub r_u: DMatrix<f64>,
    /// Process noise covariance (filter equation).
    pub w: DMatrix<f64>,
    /// Sensor noise covariance (filter equation).
    pub v: DMatrix<f64>,
}

impl OFWeights {
    /// Defaults mirroring the full-control setup: only physical states are
    /// penalized, disturbances hit the ring, and small positive input and
    /// sensor-noise weights keep both equations classically well posed
    /// while approximating the noise-free regime.
    pub fn default_for(plant: &OFPlant) -> Self {
        Self::with_epsilon(plant, 1e-6)
    }

    pub fn with_epsilon(plant: &OFPlant, epsilon: f64) -> Self {
        let dims = plant.dims;
        let mut q = DMatrix::zeros(dims.state, dims.state);
        q.view_mut((0, 0), (dims.n, dims.n))
            .copy_from(&DMatrix::identity(dims.n, dims.n));
        Self {
            q,
            r_u: DMatrix::identity(dims.inputs, dims.inputs) * epsilon,
            w: &plant.b1 * plant.b1.transpose(),
            v: DMatrix::identity(dims.p, dims.p) * epsilon,
        }
    }
}

/// Controller and observer gains with their structural block partition.
///
/// The observer gain splits by state block into `[L1; L2; L3]`; the
/// physical-input rows of the controller gain split by state block into
/// `[K1 K2 K3]`. The block layout forces `L2` (corrections to the
/// actuation-chain estimate, which is noiseless and fully known) and `K3`
/// (reaction to sensing-chain states, which carry no cost and feed nothing)
/// to vanish; `residual_l2`/`residual_k3` record how close to zero they
/// came out.
#[derive(Debug, Clone)]
pub struct OFGains {
    /// Full controller gain, `(m + d_s p)`-by-N.
    pub k: DMatrix<f64>,
    /// Full observer gain, N-by-p.
    pub l: DMatrix<f64>,
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub l3: DMatrix<f64>,
    pub k1: DMatrix<f64>,
    pub k2: DMatrix<f64>,
    pub k3: DMatrix<f64>,
    pub residual_l2: f64,
    pub residual_k3: f64,
    pub control_radius: f64,
    pub filter_radius: f64,
}

impl OFGains {
    /// `[L1; L2; L3]` restacked, equal to the full observer gain.
    pub fn restack_l(&self) -> DMatrix<f64> {
        let rows = self.l1.nrows() + self.l2.nrows() + self.l3.nrows();
        let mut l = DMatrix::zeros(rows, self.l1.ncols());
        l.view_mut((0, 0), self.l1.shape()).copy_from(&self.l1);
        l.view_mut((self.l1.nrows(), 0), self.l2.shape()).copy_from(&self.l2);
        l.view_mut((self.l1.nrows() + self.l2.nrows(), 0), self.l3.shape())
            .copy_from(&self.l3);
        l
    }

    /// `[K1 K2 K3]` restacked, equal to the physical-input rows of the full
    /// controller gain.
    pub fn restack_k_rows(&self) -> DMatrix<f64> {
        let cols = self.k1.ncols() + self.k2.ncols() + self.k3.ncols();
        let mut k = DMatrix::zeros(self.k1.nrows(), cols);
        k.view_mut((0, 0), self.k1.shape()).copy_from(&self.k1);
        k.view_mut((0, self.k1.ncols()), self.k2.shape()).copy_from(&self.k2);
        k.view_mut((0, self.k1.ncols() + self.k2.ncols()), self.k3.shape())
            .copy_from(&self.k3);
        k
    }
}

/// Solves the controller equation on `(A, B2)` and the filter equation on
/// `(A', C')`, then partitions the gains at the state-block boundaries.
pub fn of_synthesis(plant: &OFPlant, weights: &OFWeights, opts: &DareOptions) -> Result<OFGains> {
    let dims = plant.dims;

    let control = solve_dare_sf(&plant.a, &plant.b2, &weights.q, &weights.r_u, opts);
    if control.status != SolveStatus::Converged {
        return Err(Error::SynthesisFailed(format!(
            "controller equation: {:?}",
            control.status
        )));
    }
    let filter = solve_dare_sf(
        &plant.a.transpose(),
        &plant.c.transpose(),
        &weights.w,
        &weights.v,
        opts,
    );
    if filter.status != SolveStatus::Converged {
        return Err(Error::SynthesisFailed(format!(
            "filter equation: {:?}",
            filter.status
        )));
    }

    let pb = &control.p * &plant.b2;
    let gram = &weights.r_u + plant.b2.transpose() * &pb;
    let k = pseudo_inverse(&gram, opts.pinv_rel_tol) * pb.transpose() * &plant.a;

    let ct = plant.c.transpose();
    let innovations = &plant.c * &filter.p * &ct + &weights.v;
    let l = &plant.a * &filter.p * &ct * pseudo_inverse(&innovations, opts.pinv_rel_tol);

    let (n, m, p) = (dims.n, dims.m, dims.p);
    let (act, sen) = (dims.d_a * m, dims.d_s * p);
    let l1 = l.view((0, 0), (n, p)).clone_owned();
    let l2 = l.view((n, 0), (act, p)).clone_owned();
    let l3 = l.view((n + act, 0), (sen, p)).clone_owned();
    let k1 = k.view((0, 0), (m, n)).clone_owned();
    let k2 = k.view((0, n), (m, act)).clone_owned();
    let k3 = k.view((0, n + act), (m, sen)).clone_owned();

    Ok(OFGains {
        residual_l2: fro_norm(&l2),
        residual_k3: fro_norm(&k3),
        control_radius: spectral_radius(&(&plant.a - &plant.b2 * &k)),
        filter_radius: spectral_radius(&(&plant.a - &l * &plant.c)),
        k,
        l,
        l1,
        l2,
        l3,
        k1,
        k2,
        k3,
    })
}

/// Joint trajectory of the true ring state, the observer's ring estimate,
/// the delayed innovation, and the physical input.
#[derive(Debug, Clone)]
pub struct OFTrajectory {
    pub x_r: Vec<DVector<f64>>,
    pub x_hat_r: Vec<DVector<f64>>,
    pub delta: Vec<DVector<f64>>,
    pub u_r: Vec<DVector<f64>>,
}

fn ring_impulse(n: usize, node: usize) -> Result<DVector<f64>> {
    if node < 1 || node > n {
        return Err(Error::InvalidParameter(format!(
            "impulse node must satisfy 1 <= node <= {n}, got {node}"
        )));
    }
    let mut x = DVector::zeros(n);
    x[node - 1] = 1.0;
    Ok(x)
}

/// Simplified single-delay recursion.
///
/// Valid for `d_a = d_s = 1` given the structural zeros: the observer
/// tracks the actuation state exactly, so the whole loop reduces to three
/// coupled updates in `x_hat_r` and the delayed innovation `delta`:
///
/// ```text
/// u_r(t)        = -(K1 x_hat_r(t) + K2 x_a(t))
/// delta(t+1)    = C_r x_r(t) - C_r x_hat_r(t) - L3 delta(t)
/// x_hat_r(t+1)  = A_r x_hat_r(t) + B_2r x_a(t) + L1 delta(t)
/// ```
pub fn simulate_of(
    plant: &OFPlant,
    gains: &OFGains,
    horizon: usize,
    impulse_node: usize,
) -> Result<OFTrajectory> {
    if plant.dims.d_a != 1 || plant.dims.d_s != 1 {
        return Err(Error::InvalidParameter(
            "the simplified recursion requires d_a = d_s = 1".into(),
        ));
    }
    let dims = plant.dims;
    let mut x_r = ring_impulse(dims.n, impulse_node)?;
    let mut x_a = DVector::zeros(dims.m);
    let mut x_hat_r = DVector::zeros(dims.n);
    let mut delta = DVector::zeros(dims.p);

    let mut out = OFTrajectory {
        x_r: vec![x_r.clone()],
        x_hat_r: vec![x_hat_r.clone()],
        delta: vec![delta.clone()],
        u_r: Vec::with_capacity(horizon),
    };
    for _ in 0..horizon {
        let u_r = -(&gains.k1 * &x_hat_r + &gains.k2 * &x_a);
        let delta_next = &plant.c_r * &x_r - &plant.c_r * &x_hat_r - &gains.l3 * &delta;
        let x_hat_next = &plant.a_r * &x_hat_r + &plant.b_2r * &x_a + &gains.l1 * &delta;
        let x_r_next = &plant.a_r * &x_r + &plant.b_2r * &x_a;

        x_r = x_r_next;
        x_a = u_r.clone();
        x_hat_r = x_hat_next;
        delta = delta_next;

        out.u_r.push(u_r);
        out.x_r.push(x_r.clone());
        out.x_hat_r.push(x_hat_r.clone());
        out.delta.push(delta.clone());
    }
    Ok(out)
}

/// Full block simulation: plant recursion on the assembled matrices with a
/// complete N-dimensional observer. Works for any delays and is the
/// reference the simplified recursion is checked against.
pub fn simulate_of_full(
    plant: &OFPlant,
    gains: &OFGains,
    horizon: usize,
    impulse_node: usize,
) -> Result<OFTrajectory> {
    let dims = plant.dims;
    let mut x = &plant.b1 * ring_impulse(dims.n, impulse_node)?;
    let mut x_hat = DVector::<f64>::zeros(dims.state);

    let slice_r = |v: &DVector<f64>| v.rows(0, dims.n).clone_owned();
    let mut out = OFTrajectory {
        x_r: vec![slice_r(&x)],
        x_hat_r: vec![slice_r(&x_hat)],
        delta: vec![&plant.c * &x - &plant.c * &x_hat],
        u_r: Vec::with_capacity(horizon),
    };
    for _ in 0..horizon {
        let y = &plant.c * &x;
        let u = -(&gains.k * &x_hat);
        let innovation = &y - &plant.c * &x_hat;
        let x_next = &plant.a * &x + &plant.b2 * &u;
        let x_hat_next = &plant.a * &x_hat + &plant.b2 * &u + &gains.l * &innovation;
        x = x_next;
        x_hat = x_hat_next;
        out.u_r.push(u.rows(0, dims.m).clone_owned());
        out.x_r.push(slice_r(&x));
        out.x_hat_r.push(slice_r(&x_hat));
        out.delta.push(&plant.c * &x - &plant.c * &x_hat);
    }
    Ok(out)
}

/// Dynamics of the joint `[x; x_hat]` system; its spectrum is the union of
/// the control and filter closed-loop spectra.
pub fn assembled_closed_loop(plant: &OFPlant, gains: &OFGains) -> DMatrix<f64> {
    let n = plant.dims.state;
    let bk = &plant.b2 * &gains.k;
    let lc = &gains.l * &plant.c;
    let mut joint = DMatrix::zeros(2 * n, 2 * n);
    joint.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    joint.view_mut((0, n), (n, n)).copy_from(&(-&bk));
    joint.view_mut((n, 0), (n, n)).copy_from(&lc);
    joint.view_mut((n, n), (n, n)).copy_from(&(&plant.a - &bk - &lc));
    joint
}

/// The five internal feedback pathways of the delayed output-feedback
/// controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PathwayName {
    /// Observer writes into its sensing-delay estimate (the `L3` loop).
    #[serde(rename = "IFP-Sense-1")]
    SenseDelay,
    /// Controller reads the actuation-delay states (the `K2` block).
    #[serde(rename = "IFP-Act-1")]
    ActDelay,
    /// Observer propagates its state estimate through the plant model.
    #[serde(rename = "IFP-State")]
    StatePrediction,
    /// Observer predicts the incoming measurement from the estimate.
    #[serde(rename = "IFP-Sense-2")]
    SensePrediction,
    /// Observer accounts for its own in-flight actuation.
    #[serde(rename = "IFP-Act-2")]
    ActAccounting,
}

impl PathwayName {
    pub fn label(&self) -> &'static str {
        match self {
            PathwayName::SenseDelay => "IFP-Sense-1",
            PathwayName::ActDelay => "IFP-Act-1",
            PathwayName::StatePrediction => "IFP-State",
            PathwayName::SensePrediction => "IFP-Sense-2",
            PathwayName::ActAccounting => "IFP-Act-2",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IFPPathway {
    pub name: PathwayName,
    /// Dimension of the signal the pathway carries.
    pub dimension: usize,
    /// Frobenius norm of the implementing block.
    pub magnitude: f64,
}

/// Report of all five pathways. The two delay-induced pathways disappear
/// (dimension zero) when the corresponding delay is absent; the three
/// observer-intrinsic pathways are present regardless of delays.
#[derive(Debug, Clone, Serialize)]
pub struct IFPReport {
    pub pathways: Vec<IFPPathway>,
}

/// Maps gain and plant blocks to the pathway taxonomy.
pub fn ifp_report(gains: &OFGains, plant: &OFPlant) -> IFPReport {
    let dims = plant.dims;
    IFPReport {
        pathways: vec![
            IFPPathway {
                name: PathwayName::SenseDelay,
                dimension: dims.p * dims.d_s,
                magnitude: fro_norm(&gains.l3),
            },
            IFPPathway {
                name: PathwayName::ActDelay,
                dimension: dims.m * dims.d_a,
                magnitude: fro_norm(&gains.k2),
            },
            IFPPathway {
                name: PathwayName::StatePrediction,
                dimension: dims.n,
                magnitude: fro_norm(&plant.a_r),
            },
            IFPPathway {
                name: PathwayName::SensePrediction,
                dimension: dims.n,
                magnitude: fro_norm(&plant.c_r),
            },
            IFPPathway {
                name: PathwayName::ActAccounting,
                dimension: dims.m,
                magnitude: fro_norm(&plant.b_2r),
            },
        ],
    }
}
