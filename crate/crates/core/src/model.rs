//! Markov jump linear system model, validation and trajectory sampling.
//!
//! The model is
//!
//! ```text
//! x_k = A(θ_k) x_{k-1} + B(θ_k) w_k
//! y_k = C(θ_k) x_k     + D(θ_k) v_k
//! ```
//!
//! with `w_k ~ N(0, W)`, `v_k ~ N(0, V)`, `x_0 ~ N(x̄₀, X₀)` and a finite
//! Markov chain `θ_k` with transition matrix `Π`, `Π[i][j] = P(θ_k = j | θ_{k-1} = i)`.
//! Modes are 0-based inside the crate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, PSD_TOL};
use crate::{Error, Matrix, Result, Vector};

/// Tolerance on probability vectors summing to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// System matrices of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMatrices {
    /// State transition, `n_x × n_x`.
    pub a: Matrix,
    /// Process-noise input, `n_x × n_w`.
    pub b: Matrix,
    /// Observation, `n_y × n_x`.
    pub c: Matrix,
    /// Measurement-noise input, `n_y × n_v`.
    pub d: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MjlsModel {
    pub n_x: usize,
    pub n_y: usize,
    pub n_w: usize,
    pub n_v: usize,
    pub modes: Vec<ModeMatrices>,
    /// Process-noise covariance, `n_w × n_w`.
    pub w: Matrix,
    /// Measurement-noise covariance, `n_v × n_v`.
    pub v: Matrix,
    /// Transition matrix, rows indexed by the previous mode.
    pub pi: Matrix,
    /// Distribution of the mode before the first transition.
    pub p0_mode: Vector,
    pub x0_mean: Vector,
    pub x0_cov: Matrix,
}

/// One violated model invariant. Indices are 0-based; messages print them
/// 1-based to match the file formats.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoModes,
    PiShape { rows: usize, cols: usize, n_theta: usize },
    PiEntry { row: usize, col: usize, value: f64 },
    PiRowSum { row: usize, sum: f64 },
    P0Length { len: usize, n_theta: usize },
    P0Entry { index: usize, value: f64 },
    P0Sum { sum: f64 },
    NotPsd { name: &'static str, min_eigenvalue: f64 },
    NotSymmetric { name: &'static str, asymmetry: f64 },
    Shape { name: String, expected: (usize, usize), found: (usize, usize) },
    NonFinite { name: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoModes => write!(f, "model has no modes"),
            Violation::PiShape { rows, cols, n_theta } => {
                write!(f, "Pi is {rows}x{cols}, expected {n_theta}x{n_theta}")
            }
            Violation::PiEntry { row, col, value } => {
                write!(f, "Pi[{}][{}] = {value} outside [0, 1]", row + 1, col + 1)
            }
            Violation::PiRowSum { row, sum } => {
                write!(f, "Pi row {}: row sum ≠ 1 (sum = {sum})", row + 1)
            }
            Violation::P0Length { len, n_theta } => {
                write!(f, "p0_mode has length {len}, expected {n_theta}")
            }
            Violation::P0Entry { index, value } => {
                write!(f, "p0_mode[{}] = {value} is negative or not finite", index + 1)
            }
            Violation::P0Sum { sum } => write!(f, "p0_mode: sum ≠ 1 (sum = {sum})"),
            Violation::NotPsd { name, min_eigenvalue } => {
                write!(f, "{name} not PSD (min eigenvalue {min_eigenvalue:e})")
            }
            Violation::NotSymmetric { name, asymmetry } => {
                write!(f, "{name} not symmetric (max asymmetry {asymmetry:e})")
            }
            Violation::Shape { name, expected, found } => write!(
                f,
                "{name} is {}x{}, expected {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Violation::NonFinite { name } => write!(f, "{name} has non-finite entries"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let msg = self
            .violations
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidModel(msg))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn check_shape(out: &mut Vec<Violation>, name: String, m: &Matrix, rows: usize, cols: usize) {
    if m.shape() != (rows, cols) {
        out.push(Violation::Shape { name, expected: (rows, cols), found: m.shape() });
    } else if !linalg::all_finite(m) {
        out.push(Violation::NonFinite { name });
    }
}

fn check_covariance(out: &mut Vec<Violation>, name: &'static str, m: &Matrix, dim: usize) {
    if m.shape() != (dim, dim) {
        out.push(Violation::Shape { name: name.into(), expected: (dim, dim), found: m.shape() });
        return;
    }
    if !linalg::all_finite(m) {
        out.push(Violation::NonFinite { name: name.into() });
        return;
    }
    let asym = linalg::asymmetry(m);
    if asym > PSD_TOL {
        out.push(Violation::NotSymmetric { name, asymmetry: asym });
    }
    let min_eig = linalg::min_eigenvalue(m);
    if min_eig < -PSD_TOL {
        out.push(Violation::NotPsd { name, min_eigenvalue: min_eig });
    }
}

/// Checks that a transition matrix is row-stochastic and `n_theta × n_theta`.
pub fn check_transition_matrix(pi: &Matrix, n_theta: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    if pi.shape() != (n_theta, n_theta) {
        out.push(Violation::PiShape { rows: pi.nrows(), cols: pi.ncols(), n_theta });
        return out;
    }
    for i in 0..n_theta {
        let mut sum = 0.0;
        for j in 0..n_theta {
            let p = pi[(i, j)];
            if !(0.0..=1.0).contains(&p) {
                out.push(Violation::PiEntry { row: i, col: j, value: p });
            }
            sum += p;
        }
        if !((sum - 1.0).abs() <= PROB_SUM_TOL) {
            out.push(Violation::PiRowSum { row: i, sum });
        }
    }
    out
}

/// Checks every model invariant and reports all violations found.
pub fn validate_model(model: &MjlsModel) -> ValidationReport {
    let mut out = Vec::new();
    let n_theta = model.n_theta();
    if n_theta == 0 {
        out.push(Violation::NoModes);
    }
    for (j, m) in model.modes.iter().enumerate() {
        check_shape(&mut out, format!("A[{j}]"), &m.a, model.n_x, model.n_x);
        check_shape(&mut out, format!("B[{j}]"), &m.b, model.n_x, model.n_w);
        check_shape(&mut out, format!("C[{j}]"), &m.c, model.n_y, model.n_x);
        check_shape(&mut out, format!("D[{j}]"), &m.d, model.n_y, model.n_v);
    }
    check_covariance(&mut out, "W", &model.w, model.n_w);
    check_covariance(&mut out, "V", &model.v, model.n_v);
    check_covariance(&mut out, "X0", &model.x0_cov, model.n_x);
    if model.x0_mean.len() != model.n_x {
        out.push(Violation::Shape {
            name: "x0_mean".into(),
            expected: (model.n_x, 1),
            found: (model.x0_mean.len(), 1),
        });
    } else if !model.x0_mean.iter().all(|v| v.is_finite()) {
        out.push(Violation::NonFinite { name: "x0_mean".into() });
    }
    out.extend(check_transition_matrix(&model.pi, n_theta));

    if model.p0_mode.len() != n_theta {
        out.push(Violation::P0Length { len: model.p0_mode.len(), n_theta });
    } else {
        for (index, &value) in model.p0_mode.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                out.push(Violation::P0Entry { index, value });
            }
        }
        let sum = model.p0_mode.sum();
        if !((sum - 1.0).abs() <= PROB_SUM_TOL) {
            out.push(Violation::P0Sum { sum });
        }
    }
    ValidationReport { violations: out }
}

impl MjlsModel {
    pub fn n_theta(&self) -> usize {
        self.modes.len()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_model(self)
    }

    /// A view of this model with its own transition matrix.
    pub fn view(&self) -> ModelView<'_> {
        ModelView { model: self, pi: &self.pi }
    }
}

/// Piecewise-constant transition matrix indexed by time step (1-based).
///
/// Segment `i` covers `start_i <= k < start_{i+1}`; the last one extends forever.
#[derive(Debug, Clone, PartialEq)]
pub struct PiSchedule {
    segments: Vec<(usize, Matrix)>,
}

impl PiSchedule {
    pub fn constant(pi: Matrix) -> Self {
        PiSchedule { segments: alloc::vec![(1, pi)] }
    }

    /// Segments must be sorted by strictly increasing start with the first at step 1.
    pub fn new(segments: Vec<(usize, Matrix)>) -> Result<Self> {
        match segments.first() {
            None => return Err(Error::InvalidSchedule("schedule has no segments".into())),
            Some((start, _)) if *start != 1 => {
                return Err(Error::InvalidSchedule(format!(
                    "first segment starts at step {start}, expected 1"
                )))
            }
            _ => {}
        }
        for pair in segments.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidSchedule(format!(
                    "segment starting at {} overlaps or precedes segment starting at {}",
                    pair[1].0, pair[0].0
                )));
            }
        }
        Ok(PiSchedule { segments })
    }

    pub fn segments(&self) -> &[(usize, Matrix)] {
        &self.segments
    }

    /// Transition matrix in effect at step `k`. Steps before 1 map to the first segment.
    pub fn at(&self, k: usize) -> &Matrix {
        let idx = self.segments.partition_point(|(start, _)| *start <= k);
        &self.segments[idx.saturating_sub(1)].1
    }
}

/// A model whose transition matrix follows a schedule; every other matrix is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSchedule {
    base: MjlsModel,
    pi: PiSchedule,
}

impl ModelSchedule {
    /// Validates the base model and every scheduled transition matrix.
    pub fn new(base: MjlsModel, pi: PiSchedule) -> Result<Self> {
        base.validate().into_result()?;
        for (start, m) in pi.segments() {
            let v = check_transition_matrix(m, base.n_theta());
            if !v.is_empty() {
                let msg = v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join("; ");
                return Err(Error::InvalidSchedule(format!("segment at step {start}: {msg}")));
            }
        }
        Ok(ModelSchedule { base, pi })
    }

    /// Schedule that always uses the model's own transition matrix.
    pub fn constant(base: MjlsModel) -> Result<Self> {
        let pi = PiSchedule::constant(base.pi.clone());
        Self::new(base, pi)
    }

    pub fn base(&self) -> &MjlsModel {
        &self.base
    }

    pub fn pi_schedule(&self) -> &PiSchedule {
        &self.pi
    }

    /// Effective model at step `k` (1-based).
    pub fn view(&self, k: usize) -> ModelView<'_> {
        ModelView { model: &self.base, pi: self.pi.at(k) }
    }
}

/// Borrowed model with the transition matrix in effect at one step.
#[derive(Debug, Clone, Copy)]
pub struct ModelView<'a> {
    pub model: &'a MjlsModel,
    pub pi: &'a Matrix,
}

/// A sampled hybrid trajectory.
///
/// `states[0]` is `x_0`; `modes[k-1]`, `states[k]` and `observations[k-1]`
/// belong to step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub modes: Vec<usize>,
    pub states: Vec<Vector>,
    pub observations: Vec<Vector>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.observations.len()
    }

    pub fn is_consistent(&self, n_theta: usize) -> bool {
        let n = self.observations.len();
        self.modes.len() == n
            && self.states.len() == n + 1
            && self.modes.iter().all(|&m| m < n_theta)
    }
}

/// How `p0_mode` relates to the first sampled mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialModeConvention {
    /// `θ_0 ~ p0_mode` and `θ_1 ~ Π(θ_0, ·)`; matches a filter started from `μ_0 = p0_mode`.
    #[default]
    BeforeFirstTransition,
    /// `θ_1 ~ p0_mode` directly.
    AtFirstStep,
}

/// RNG for Monte Carlo run `stream` under `seed`. Streams are independent, so
/// runs can be generated in any order.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_categorical<R: Rng + ?Sized>(rng: &mut R, probs: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

fn noise_factor(m: &Matrix, name: &str) -> Result<Matrix> {
    linalg::psd_sqrt(m, PSD_TOL)
        .ok_or_else(|| Error::InvalidModel(format!("{name}: square root of non-PSD covariance")))
}

/// Samples a trajectory of `horizon` steps, drawing modes from the schedule's
/// transition matrices.
pub fn sample_trajectory<R: Rng + ?Sized>(
    schedule: &ModelSchedule,
    horizon: usize,
    convention: InitialModeConvention,
    rng: &mut R,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::Empty("horizon must be at least 1"));
    }
    let model = schedule.base();
    let w_f = noise_factor(&model.w, "W")?;
    let v_f = noise_factor(&model.v, "V")?;
    let x0_f = noise_factor(&model.x0_cov, "X0")?;

    let x0 = &model.x0_mean + &x0_f * standard_normal(rng, model.n_x);
    let mut prev_mode = match convention {
        InitialModeConvention::BeforeFirstTransition => {
            Some(draw_categorical(rng, model.p0_mode.iter().copied()))
        }
        InitialModeConvention::AtFirstStep => None,
    };

    let mut modes = Vec::with_capacity(horizon);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut observations = Vec::with_capacity(horizon);
    states.push(x0);
    for k in 1..=horizon {
        let mode = match prev_mode {
            None => draw_categorical(rng, model.p0_mode.iter().copied()),
            Some(i) => {
                let pi = schedule.view(k).pi;
                draw_categorical(rng, pi.row(i).iter().copied())
            }
        };
        let m = &model.modes[mode];
        let w = &w_f * standard_normal(rng, model.n_w);
        let v = &v_f * standard_normal(rng, model.n_v);
        let x = &m.a * &states[k - 1] + &m.b * w;
        let y = &m.c * &x + &m.d * v;
        modes.push(mode);
        states.push(x);
        observations.push(y);
        prev_mode = Some(mode);
    }
    Ok(Trajectory { modes, states, observations })
}
