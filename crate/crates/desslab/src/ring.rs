//! Ring plant construction: the circulant state matrix, its real Fourier
//! eigensystem, delay augmentation, and the fast/slow sensing matrices.
//!
//! The plant is an `n`-node ring where every node couples to itself and its
//! two neighbors with weight `a/3`, so the spectral radius equals `a`.
//! Sensing delays are modeled by appending `d` shifted copies of the ring
//! state; the slow sensor reads the most-delayed copy, the fast sensor reads
//! a handful of eigendirections instantly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Physical plant parameters: node count and instability scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingSpec {
    pub n: usize,
    pub a: f64,
}

impl RingSpec {
    /// Requires `n >= 3` (the wrap-around coupling needs three distinct
    /// nodes) and `a > 0`.
    pub fn new(n: usize, a: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!(
                "ring needs at least 3 nodes, got {n}"
            )));
        }
        if a <= 0.0 || a.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "instability scale must be positive, got {a}"
            )));
        }
        Ok(Self { n, a })
    }
}

/// Which sensing architecture is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorMode {
    FastOnly,
    SlowOnly,
    Diverse,
}

impl std::fmt::Display for SensorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SensorMode::FastOnly => "fast-only",
            SensorMode::SlowOnly => "slow-only",
            SensorMode::Diverse => "diverse",
        })
    }
}

/// Sensing architecture: mode plus the fast-eigenvector count `q` and the
/// sensing delay `d` in timesteps.
///
/// `q` is meaningful for `FastOnly`/`Diverse` only (0 otherwise). Fast-only
/// configurations still carry `d`, so the augmented state dimension matches
/// the other modes at fixed delay; the extra states are unobserved and
/// unpenalized and leave the synthesis unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorConfig {
    pub mode: SensorMode,
    pub q: usize,
    pub d: usize,
}

impl SensorConfig {
    pub fn fast_only(q: usize, d: usize) -> Self {
        Self { mode: SensorMode::FastOnly, q, d }
    }

    pub fn slow_only(d: usize) -> Self {
        Self { mode: SensorMode::SlowOnly, q: 0, d }
    }

    pub fn diverse(q: usize, d: usize) -> Self {
        Self { mode: SensorMode::Diverse, q, d }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if matches!(self.mode, SensorMode::FastOnly | SensorMode::Diverse)
            && (self.q < 1 || self.q > n)
        {
            return Err(Error::InvalidParameter(format!(
                "fast eigenvector count must satisfy 1 <= q <= {n}, got {}",
                self.q
            )));
        }
        Ok(())
    }

    /// Number of fast rows actually present.
    pub fn q_effective(&self) -> usize {
        match self.mode {
            SensorMode::SlowOnly => 0,
            _ => self.q,
        }
    }

    /// Output dimension of the stacked sensing matrix.
    pub fn outputs(&self, n: usize) -> usize {
        match self.mode {
            SensorMode::FastOnly => self.q,
            SensorMode::SlowOnly => n,
            SensorMode::Diverse => self.q + n,
        }
    }
}

/// One eigenpair of the ring matrix in the real Fourier basis.
///
/// `frequency` is the circulant frequency index `k` (0..=n/2); degenerate
/// frequencies contribute a cosine vector (`sine == false`) and a sine
/// vector (`sine == true`) sharing the same eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: DVector<f64>,
    pub frequency: usize,
    pub sine: bool,
}

/// All `n` eigenpairs ordered by |eigenvalue| descending, then frequency
/// ascending, cosine before sine within a degenerate pair. Eigenvectors are
/// orthonormal with the first nonzero component positive.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub pairs: Vec<EigenPair>,
}

impl EigenSystem {
    /// Eigenvalues in canonical order.
    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    /// Number of eigenvalues with magnitude at or above 1, counting
    /// multiplicity. These are the impulse-propagation directions a
    /// stabilizing controller must cover.
    pub fn unstable_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.value.abs() >= 1.0).count()
    }
}

/// Dimension bookkeeping for a delay-augmented plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlantDims {
    /// Ring node count.
    pub n: usize,
    /// Sensing delay in timesteps.
    pub d: usize,
    /// Fast rows present in C.
    pub q_effective: usize,
    /// Augmented state dimension, n (d + 1).
    pub state: usize,
    /// Output dimension of C.
    pub outputs: usize,
}

/// Delay-augmented state space.
///
/// State layout is `[x_r, x_s1, .., x_sd]` where `x_sk` is the ring state
/// delayed `k` steps. `a` applies the ring dynamics and shifts the delay
/// chain, `b1` routes disturbances onto the ring block, `b2` is the
/// identity (every state, physical or internal, is directly actuated), and
/// `c` stacks fast rows above slow rows with row convention `y = C x`.
#[derive(Debug, Clone)]
pub struct AugmentedPlant {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub dims: PlantDims,
    pub mode: SensorMode,
}

/// The circulant ring matrix: `(a/3) * (I + P + P^T)` with `P` the cyclic
/// shift. Symmetric, row sums `a`, spectral radius `a`.
pub fn build_ring_matrix(spec: &RingSpec) -> DMatrix<f64> {
    let n = spec.n;
    let w = spec.a / 3.0;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j || j == (i + 1) % n || j == (i + n - 1) % n {
            w
        } else {
            0.0
        }
    })
}

/// Analytic eigensystem of the ring matrix.
///
/// Eigenvalues are `(a/3)(1 + 2 cos(2 pi k / n))`; eigenvectors are the
/// real Fourier basis (uniform vector, cosine/sine pairs, and for even `n`
/// the alternating vector).
pub fn ring_eigensystem(spec: &RingSpec) -> EigenSystem {
    let n = spec.n;
    let scale = spec.a / 3.0;
    let eigenvalue = |k: usize| scale * (1.0 + 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos());

    let mut pairs: Vec<EigenPair> = Vec::with_capacity(n);
    let uniform = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    pairs.push(EigenPair { value: eigenvalue(0), vector: uniform, frequency: 0, sine: false });

    for k in 1..=(n / 2) {
        if 2 * k == n {
            let alt = DVector::from_fn(n, |j, _| {
                if j % 2 == 0 { 1.0 } else { -1.0 }
            }) / (n as f64).sqrt();
            pairs.push(EigenPair { value: eigenvalue(k), vector: alt, frequency: k, sine: false });
        } else {
            let amp = (2.0 / n as f64).sqrt();
            let angle = |j: usize| 2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
            let cos_vec = DVector::from_fn(n, |j, _| amp * angle(j).cos());
            let sin_vec = DVector::from_fn(n, |j, _| amp * angle(j).sin());
            pairs.push(EigenPair { value: eigenvalue(k), vector: normalize_sign(cos_vec), frequency: k, sine: false });
            pairs.push(EigenPair { value: eigenvalue(k), vector: normalize_sign(sin_vec), frequency: k, sine: true });
        }
    }

    pairs.sort_by(|x, y| {
        y.value
            .abs()
            .partial_cmp(&x.value.abs())
            .unwrap()
            .then(x.frequency.cmp(&y.frequency))
            .then(x.sine.cmp(&y.sine))
    });
    EigenSystem { pairs }
}

/// Flips the vector so its first component above a roundoff floor is
/// positive, making downstream gain matrices reproducible.
fn normalize_sign(mut v: DVector<f64>) -> DVector<f64> {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v = -v;
        }
    }
    v
}

/// Fast sensing matrix `[E 0]`: the first `q` canonical eigenvectors as
/// rows, zero-padded over the `n d` delay columns.
pub fn build_fast_sensing(spec: &RingSpec, q: usize, d: usize) -> Result<DMatrix<f64>> {
    if q < 1 || q > spec.n {
        return Err(Error::InvalidParameter(format!(
            "fast eigenvector count must satisfy 1 <= q <= {}, got {q}",
            spec.n
        )));
    }
    let n = spec.n;
    let cols = n * (d + 1);
    let eig = ring_eigensystem(spec);
    let mut c = DMatrix::zeros(q, cols);
    for (row, pair) in eig.pairs.iter().take(q).enumerate() {
        c.view_mut((row, 0), (1, n)).copy_from(&pair.vector.transpose());
    }
    Ok(c)
}

/// Slow sensing matrix `[0 I]`: selects the most-delayed copy of each ring
/// state. With `d = 0` this is undelayed full sensing.
pub fn build_slow_sensing(spec: &RingSpec, d: usize) -> DMatrix<f64> {
    let n = spec.n;
    let cols = n * (d + 1);
    let mut c = DMatrix::zeros(n, cols);
    c.view_mut((0, n * d), (n, n)).copy_from(&DMatrix::identity(n, n));
    c
}

/// Assembles the delay-augmented plant for the requested sensing
/// architecture.
pub fn augment(spec: &RingSpec, sensors: &SensorConfig) -> Result<AugmentedPlant> {
    sensors.validate(spec.n)?;
    let n = spec.n;
    let d = sensors.d;
    let state = n * (d + 1);

    let mut a = DMatrix::zeros(state, state);
    a.view_mut((0, 0), (n, n)).copy_from(&build_ring_matrix(spec));
    if d > 0 {
        // delay chain: x_s1 <- x_r, x_sk <- x_s(k-1)
        a.view_mut((n, 0), (n * d, n * d))
            .copy_from(&DMatrix::identity(n * d, n * d));
    }

    let mut b1 = DMatrix::zeros(state, n);
    b1.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    let b2 = DMatrix::identity(state, state);

    let p = sensors.outputs(n);
    let mut c = DMatrix::zeros(p, state);
    let mut row = 0;
    if matches!(sensors.mode, SensorMode::FastOnly | SensorMode::Diverse) {
        let fast = build_fast_sensing(spec, sensors.q, d)?;
        c.view_mut((0, 0), (sensors.q, state)).copy_from(&fast);
        row = sensors.q;
    }
    if matches!(sensors.mode, SensorMode::SlowOnly | SensorMode::Diverse) {
        let slow = build_slow_sensing(spec, d);
        c.view_mut((row, 0), (n, state)).copy_from(&slow);
    }

    Ok(AugmentedPlant {
        a,
        b1,
        b2,
        c,
        dims: PlantDims { n, d, q_effective: sensors.q_effective(), state, outputs: p },
        mode: sensors.mode,
    })
}
