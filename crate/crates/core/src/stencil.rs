//! 1D linear advection `u_t + a u_x = 0` with a multi-step Lax-Wendroff
//! stencil, ghost-region subdomains, and a linear checksum that predicts the
//! sum of a task's output from its input alone.
//!
//! The domain is `[0, 1)` with periodic boundaries and `a = 1`; point `i`
//! sits at `x = i * dx`.

use alloc::vec::Vec;

use crate::error::TaskError;
use crate::fault::{flip_one_mantissa_bit, FaultContext, FaultSpec};

pub const DEFAULT_COURANT: f64 = 0.5;
pub const DEFAULT_CHECKSUM_TOLERANCE: f64 = 1e-9;
pub const DOMAIN_LENGTH: f64 = 1.0;
pub const ADVECTION_SPEED: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StencilConfigError {
    #[error("{0} must be positive")]
    Zero(&'static str),
    #[error("courant number {0} violates |C| <= 1")]
    Unstable(f64),
    #[error("each subdomain needs at least {steps} points to feed its neighbours' ghosts, got {points}")]
    GhostTooWide { points: usize, steps: usize },
    #[error("checksum tolerance {0} must be a finite non-negative number")]
    BadTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilConfig {
    pub subdomains: usize,
    pub points: usize,
    pub iterations: usize,
    /// Time steps per iteration; also the ghost width.
    pub steps: usize,
    pub courant: f64,
    pub checksum_tolerance: f64,
}

impl StencilConfig {
    pub fn new(subdomains: usize, points: usize, iterations: usize, steps: usize) -> Self {
        StencilConfig {
            subdomains,
            points,
            iterations,
            steps,
            courant: DEFAULT_COURANT,
            checksum_tolerance: DEFAULT_CHECKSUM_TOLERANCE,
        }
    }

    pub fn with_courant(mut self, c: f64) -> Self {
        self.courant = c;
        self
    }

    /// 384 subdomains of 8,000 points, 4096 iterations of 256 steps.
    pub fn case_a() -> Self {
        StencilConfig::new(384, 8000, 4096, 256)
    }

    /// 192 subdomains of 16,000 points, 4096 iterations of 256 steps.
    pub fn case_b() -> Self {
        StencilConfig::new(192, 16_000, 4096, 256)
    }

    /// Workstation-sized run: 16 x 256 points, 64 iterations of 8 steps.
    pub fn desk() -> Self {
        StencilConfig::new(16, 256, 64, 8)
    }

    pub fn validate(&self) -> Result<(), StencilConfigError> {
        for (name, v) in [
            ("subdomains", self.subdomains),
            ("points", self.points),
            ("iterations", self.iterations),
            ("steps", self.steps),
        ] {
            if v == 0 {
                return Err(StencilConfigError::Zero(name));
            }
        }
        if !(libm::fabs(self.courant) <= 1.0) {
            return Err(StencilConfigError::Unstable(self.courant));
        }
        if self.points < self.steps {
            return Err(StencilConfigError::GhostTooWide {
                points: self.points,
                steps: self.steps,
            });
        }
        if !(self.checksum_tolerance >= 0.0) || !self.checksum_tolerance.is_finite() {
            return Err(StencilConfigError::BadTolerance(self.checksum_tolerance));
        }
        Ok(())
    }

    pub fn total_points(&self) -> usize {
        self.subdomains * self.points
    }

    pub fn dx(&self) -> f64 {
        DOMAIN_LENGTH / self.total_points() as f64
    }

    pub fn dt(&self) -> f64 {
        self.courant * self.dx() / ADVECTION_SPEED
    }

    /// Simulated time after `iterations` iterations.
    pub fn time_after(&self, iterations: usize) -> f64 {
        (iterations * self.steps) as f64 * self.dt()
    }
}

/// One-step weights on `(u[j-1], u[j], u[j+1])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub left: f64,
    pub centre: f64,
    pub right: f64,
}

impl Coefficients {
    pub fn lax_wendroff(c: f64) -> Self {
        let c2 = c * c;
        Coefficients {
            left: 0.5 * c + 0.5 * c2,
            centre: 1.0 - c2,
            right: -0.5 * c + 0.5 * c2,
        }
    }

    #[inline]
    pub fn apply(&self, l: f64, c: f64, r: f64) -> f64 {
        self.left * l + self.centre * c + self.right * r
    }
}

/// Advances `extended` by `steps` Lax-Wendroff updates, shrinking the window
/// by one cell per side per step, and returns the central `len - 2*steps` cells.
///
/// # Panics
/// If `extended` is not longer than `2 * steps` or `|courant| > 1`.
pub fn lax_wendroff_steps(extended: &[f64], steps: usize, courant: f64) -> Vec<f64> {
    assert!(
        extended.len() > 2 * steps,
        "extended array of {} cells cannot take {steps} steps",
        extended.len()
    );
    assert!(libm::fabs(courant) <= 1.0, "courant number {courant} is unstable");
    let k = Coefficients::lax_wendroff(courant);
    let mut cur = extended.to_vec();
    let mut next = Vec::with_capacity(cur.len());
    for _ in 0..steps {
        next.clear();
        next.extend(cur.windows(3).map(|w| k.apply(w[0], w[1], w[2])));
        core::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Left-to-right sum.
pub fn sum(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v)
}

pub fn sum_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + libm::fabs(*v))
}

/// Weights `w` with `sum(lax_wendroff_steps(e, s, C)) == w . e` in exact
/// arithmetic, obtained by running the adjoint stencil `s` times backwards
/// from the all-ones indicator of the output window.
#[derive(Debug, Clone, PartialEq)]
pub struct ChecksumWeights {
    weights: Vec<f64>,
    output_len: usize,
    steps: usize,
}

impl ChecksumWeights {
    pub fn new(output_len: usize, steps: usize, courant: f64) -> Self {
        let k = Coefficients::lax_wendroff(courant);
        let mut w = alloc::vec![1.0; output_len];
        for _ in 0..steps {
            let mut prev = alloc::vec![0.0; w.len() + 2];
            for (j, wj) in w.iter().enumerate() {
                prev[j] += k.left * wj;
                prev[j + 1] += k.centre * wj;
                prev[j + 2] += k.right * wj;
            }
            w = prev;
        }
        ChecksumWeights {
            weights: w,
            output_len,
            steps,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Predicted output sum for `extended`.
    pub fn dot(&self, extended: &[f64]) -> f64 {
        assert_eq!(extended.len(), self.weights.len(), "weight/input length mismatch");
        self.weights
            .iter()
            .zip(extended)
            .fold(0.0, |acc, (w, e)| acc + w * e)
    }
}

pub fn checksum_weights(output_len: usize, steps: usize, courant: f64) -> ChecksumWeights {
    ChecksumWeights::new(output_len, steps, courant)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    pub index: usize,
    pub values: Vec<f64>,
    /// Left-to-right sum of `values`.
    pub checksum: f64,
}

impl Subdomain {
    pub fn new(index: usize, values: Vec<f64>) -> Self {
        let checksum = sum(&values);
        Subdomain {
            index,
            values,
            checksum,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `left[len-g..] ++ mine ++ right[..g]`.
pub fn extend(left: &[f64], mine: &[f64], right: &[f64], ghost: usize) -> Vec<f64> {
    assert!(
        left.len() >= ghost && right.len() >= ghost,
        "neighbours must supply {ghost} ghost cells"
    );
    let mut out = Vec::with_capacity(mine.len() + 2 * ghost);
    out.extend_from_slice(&left[left.len() - ghost..]);
    out.extend_from_slice(mine);
    out.extend_from_slice(&right[..ghost]);
    out
}

/// A computed subdomain with the checksum its input predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainUpdate {
    pub subdomain: Subdomain,
    pub expected_checksum: f64,
    /// `sum_abs(extended)`; the tolerance is relative to this.
    pub scale: f64,
}

impl SubdomainUpdate {
    pub fn residual(&self) -> f64 {
        libm::fabs(self.subdomain.checksum - self.expected_checksum)
    }

    pub fn is_valid(&self, tolerance: f64) -> bool {
        self.residual() <= tolerance * self.scale
    }
}

/// One subdomain task: checksum prediction, stencil update, fault injection.
///
/// Throw-mode faults fire before any work is done; corrupt-mode faults flip
/// one mantissa bit of the finished output, after the checksum was predicted.
pub fn advance(
    index: usize,
    extended: &[f64],
    steps: usize,
    courant: f64,
    weights: &ChecksumWeights,
    faults: &FaultSpec,
    ctx: FaultContext,
) -> Result<SubdomainUpdate, TaskError> {
    faults.check_throw(ctx)?;
    let expected_checksum = weights.dot(extended);
    let scale = sum_abs(extended);
    let out = lax_wendroff_steps(extended, steps, courant);
    let out = faults.corrupt(ctx, out, flip_one_mantissa_bit);
    Ok(SubdomainUpdate {
        subdomain: Subdomain::new(index, out),
        expected_checksum,
        scale,
    })
}

/// Initial condition on the periodic unit domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialProfile {
    /// `offset + amplitude * sin(2 pi periods x)`.
    Sine {
        offset: f64,
        amplitude: f64,
        periods: f64,
    },
    /// `offset + exp(-((x - centre) / width)^2)`.
    Gaussian { offset: f64, centre: f64, width: f64 },
}

impl Default for InitialProfile {
    // Offset keeps every value away from zero so a relative bit flip is
    // always large against the checksum tolerance.
    fn default() -> Self {
        InitialProfile::Sine {
            offset: 1.0,
            amplitude: 0.5,
            periods: 1.0,
        }
    }
}

impl InitialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Sine {
                offset,
                amplitude,
                periods,
            } => offset + amplitude * libm::sin(2.0 * core::f64::consts::PI * periods * x),
            InitialProfile::Gaussian {
                offset,
                centre,
                width,
            } => {
                let z = (x - centre) / width;
                offset + libm::exp(-z * z)
            }
        }
    }
}

fn wrap(x: f64, length: f64) -> f64 {
    x - length * libm::floor(x / length)
}

/// `profile((x - a t) mod length)`.
pub fn analytic_solution(x: f64, t: f64, a: f64, profile: &InitialProfile, length: f64) -> f64 {
    profile.eval(wrap(x - a * t, length))
}

pub fn initial_grid(config: &StencilConfig, profile: &InitialProfile) -> Vec<Subdomain> {
    let dx = config.dx();
    (0..config.subdomains)
        .map(|s| {
            let values = (0..config.points)
                .map(|p| profile.eval((s * config.points + p) as f64 * dx))
                .collect();
            Subdomain::new(s, values)
        })
        .collect()
}

/// Discrete L2 error `sqrt(dx * sum (u_i - exact(x_i, t))^2)` on the unit domain.
pub fn l2_error(values: &[f64], t: f64, profile: &InitialProfile) -> f64 {
    let dx = DOMAIN_LENGTH / values.len() as f64;
    let sq = values.iter().enumerate().fold(0.0, |acc, (i, u)| {
        let e = u - analytic_solution(i as f64 * dx, t, ADVECTION_SPEED, profile, DOMAIN_LENGTH);
        acc + e * e
    });
    libm::sqrt(dx * sq)
}
