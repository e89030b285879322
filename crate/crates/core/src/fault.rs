//! Seedable, stateless fault model.
//!
//! Every decision is a counter-based hash of `(seed, task_id, attempt,
//! locality, stream)`, so the same context yields the same decision on any
//! thread and in any schedule. A replayed task draws fresh randomness because
//! its attempt number differs.

use alloc::vec::Vec;

use crate::error::TaskError;
use crate::LocalityId;

/// How an injected fault shows up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaultMode {
    /// The task raises [`TaskError::SimulatedSdc`].
    #[default]
    Throw,
    /// The task returns a silently corrupted value.
    Corrupt,
}

impl core::fmt::Display for FaultMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            FaultMode::Throw => "throw",
            FaultMode::Corrupt => "corrupt",
        })
    }
}

impl core::str::FromStr for FaultMode {
    type Err = FaultSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "throw" => Ok(FaultMode::Throw),
            "corrupt" => Ok(FaultMode::Corrupt),
            _ => Err(FaultSpecError::UnknownMode),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FaultSpecError {
    #[error("error rate {0} outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("faulty multiplier {0} must be positive")]
    BadMultiplier(f64),
    #[error("unknown fault mode (expected `throw` or `corrupt`)")]
    UnknownMode,
}

/// Multiplier applied to the error rate of a faulty locality.
pub const DEFAULT_FAULTY_MULTIPLIER: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FaultSpec {
    base_rate: f64,
    faulty: Vec<LocalityId>,
    multiplier: f64,
    mode: FaultMode,
    seed: u64,
}

/// Identifies one sampling event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FaultContext {
    pub locality: LocalityId,
    pub task_id: u64,
    /// 1-based attempt (or replica) number.
    pub attempt: u32,
}

impl FaultContext {
    pub fn new(locality: LocalityId, task_id: u64, attempt: u32) -> Self {
        FaultContext {
            locality,
            task_id,
            attempt,
        }
    }
}

const STREAM_DECISION: u64 = 0;
const STREAM_SITE: u64 = 1;

impl FaultSpec {
    pub fn new(base_rate: f64) -> Result<Self, FaultSpecError> {
        if !(0.0..=1.0).contains(&base_rate) {
            return Err(FaultSpecError::RateOutOfRange(base_rate));
        }
        Ok(FaultSpec {
            base_rate,
            faulty: Vec::new(),
            multiplier: DEFAULT_FAULTY_MULTIPLIER,
            mode: FaultMode::Throw,
            seed: 0,
        })
    }

    /// A spec that never injects anything.
    pub fn disabled() -> Self {
        FaultSpec::new(0.0).expect("zero is a valid rate")
    }

    pub fn with_faulty_localities(mut self, ids: impl IntoIterator<Item = LocalityId>) -> Self {
        self.faulty = ids.into_iter().collect();
        self.faulty.sort_unstable();
        self.faulty.dedup();
        self
    }

    pub fn with_multiplier(mut self, multiplier: f64) -> Result<Self, FaultSpecError> {
        if !(multiplier > 0.0) || !multiplier.is_finite() {
            return Err(FaultSpecError::BadMultiplier(multiplier));
        }
        self.multiplier = multiplier;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: FaultMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn base_rate(&self) -> f64 {
        self.base_rate
    }

    pub fn faulty_localities(&self) -> &[LocalityId] {
        &self.faulty
    }

    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    pub fn mode(&self) -> FaultMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_faulty(&self, locality: LocalityId) -> bool {
        self.faulty.binary_search(&locality).is_ok()
    }

    /// Failure probability for tasks running on `locality`, clamped to 1.
    pub fn effective_rate(&self, locality: LocalityId) -> f64 {
        if self.is_faulty(locality) {
            let r = self.base_rate * self.multiplier;
            if r > 1.0 {
                1.0
            } else {
                r
            }
        } else {
            self.base_rate
        }
    }

    fn draw(&self, ctx: FaultContext, stream: u64) -> u64 {
        let mut h = mix(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        h = mix(h ^ ctx.task_id);
        h = mix(h ^ ((u64::from(ctx.attempt) << 32) | u64::from(ctx.locality)));
        mix(h ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93))
    }

    /// Uniform draw in `[0, 1)` for one context and stream position.
    pub fn uniform(&self, ctx: FaultContext) -> f64 {
        to_unit(self.draw(ctx, STREAM_DECISION))
    }

    pub fn sample_failure(&self, ctx: FaultContext) -> bool {
        let rate = self.effective_rate(ctx.locality);
        if rate <= 0.0 {
            return false;
        }
        self.uniform(ctx) < rate
    }

    /// Corruption site for a context; drawn from a stream disjoint from the decision.
    pub fn site(&self, ctx: FaultContext) -> CorruptionSite {
        CorruptionSite(self.draw(ctx, STREAM_SITE))
    }

    fn sdc(ctx: FaultContext) -> TaskError {
        TaskError::SimulatedSdc {
            locality: ctx.locality,
            task_id: ctx.task_id,
            attempt: ctx.attempt,
        }
    }

    /// Passes `value` through the fault model.
    ///
    /// Unchanged when no failure is sampled; otherwise raises a simulated SDC
    /// (throw mode) or returns `corruptor(value, site)` (corrupt mode).
    pub fn inject<T>(
        &self,
        ctx: FaultContext,
        value: T,
        corruptor: impl FnOnce(T, CorruptionSite) -> T,
    ) -> Result<T, TaskError> {
        if !self.sample_failure(ctx) {
            return Ok(value);
        }
        match self.mode {
            FaultMode::Throw => Err(Self::sdc(ctx)),
            FaultMode::Corrupt => Ok(corruptor(value, self.site(ctx))),
        }
    }

    /// Throw-mode half of [`inject`](Self::inject), for use before a task does its work.
    pub fn check_throw(&self, ctx: FaultContext) -> Result<(), TaskError> {
        if self.mode == FaultMode::Throw && self.sample_failure(ctx) {
            Err(Self::sdc(ctx))
        } else {
            Ok(())
        }
    }

    /// Corrupt-mode half of [`inject`](Self::inject), applied to a finished result.
    pub fn corrupt<T>(
        &self,
        ctx: FaultContext,
        value: T,
        corruptor: impl FnOnce(T, CorruptionSite) -> T,
    ) -> T {
        if self.mode == FaultMode::Corrupt && self.sample_failure(ctx) {
            corruptor(value, self.site(ctx))
        } else {
            value
        }
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Lowest mantissa bit a corruption may flip. Flipping bit `k` of a normal
/// f64 changes it by more than `2^(k-53)` of its magnitude, so bits
/// `33..=51` always perturb by more than `2^-20` relative.
pub const LOWEST_FLIP_BIT: u32 = 33;
pub const HIGHEST_FLIP_BIT: u32 = 51;

/// Deterministic entropy describing where a corruption lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorruptionSite(pub u64);

impl CorruptionSite {
    /// Element index in `0..len`.
    pub fn index(self, len: usize) -> usize {
        assert!(len > 0, "cannot pick a site in an empty array");
        ((self.0 >> 8) % len as u64) as usize
    }

    /// Mantissa bit in `LOWEST_FLIP_BIT..=HIGHEST_FLIP_BIT`.
    pub fn mantissa_bit(self) -> u32 {
        let span = u64::from(HIGHEST_FLIP_BIT - LOWEST_FLIP_BIT + 1);
        LOWEST_FLIP_BIT + (self.0 % span) as u32
    }

    /// Flips one mantissa bit of one element in place. Returns `(index, bit)`.
    pub fn flip_in(self, values: &mut [f64]) -> (usize, u32) {
        let i = self.index(values.len());
        let bit = self.mantissa_bit();
        values[i] = f64::from_bits(values[i].to_bits() ^ (1u64 << bit));
        (i, bit)
    }
}

/// Corruptor for numeric arrays: one mantissa bit flip of one element.
pub fn flip_one_mantissa_bit(mut values: Vec<f64>, site: CorruptionSite) -> Vec<f64> {
    if !values.is_empty() {
        site.flip_in(&mut values);
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn effective_rate_examples() {
        let spec = FaultSpec::new(0.05).unwrap().with_faulty_localities([2]);
        assert_eq!(spec.effective_rate(0), 0.05);
        assert!((spec.effective_rate(2) - 0.50).abs() < 1e-15);
        let spec = FaultSpec::new(0.2).unwrap().with_faulty_localities([1]);
        assert_eq!(spec.effective_rate(1), 1.0);
        assert_eq!(spec.multiplier(), 10.0);
    }

    #[test]
    fn rate_validation() {
        assert!(FaultSpec::new(1.5).is_err());
        assert!(FaultSpec::new(-0.1).is_err());
        assert!(FaultSpec::new(f64::NAN).is_err());
        assert!(FaultSpec::new(0.0).unwrap().with_multiplier(0.0).is_err());
    }

    #[test]
    fn extreme_rates() {
        let never = FaultSpec::new(0.0).unwrap().with_seed(9);
        let always = FaultSpec::new(1.0).unwrap().with_seed(9);
        for t in 0..2000 {
            let ctx = FaultContext::new((t % 5) as u32, t, 1 + (t % 3) as u32);
            assert!(!never.sample_failure(ctx));
            assert!(always.sample_failure(ctx));
        }
    }

    #[test]
    fn empirical_rate_matches_base() {
        let spec = FaultSpec::new(0.05).unwrap().with_seed(0xfeed);
        let hits = (0..100_000u64)
            .filter(|&t| spec.sample_failure(FaultContext::new(0, t, 1)))
            .count();
        let rate = hits as f64 / 100_000.0;
        assert!((rate - 0.05).abs() <= 0.005, "rate {rate}");
    }

    #[test]
    fn attempts_draw_fresh_randomness() {
        let spec = FaultSpec::new(0.5).unwrap().with_seed(1);
        let first: Vec<bool> = (0..256)
            .map(|t| spec.sample_failure(FaultContext::new(0, t, 1)))
            .collect();
        let second: Vec<bool> = (0..256)
            .map(|t| spec.sample_failure(FaultContext::new(0, t, 2)))
            .collect();
        assert_ne!(first, second);
    }

    #[test]
    fn inject_identity_and_throw() {
        let off = FaultSpec::new(0.0).unwrap();
        let ctx = FaultContext::new(0, 1, 1);
        assert_eq!(off.inject(ctx, 5, |_, _| 6).unwrap(), 5);

        let on = FaultSpec::new(1.0).unwrap();
        let err = on.inject(ctx, 5, |_, _| 6).unwrap_err();
        assert!(err.is_injected());
        assert!(on.check_throw(ctx).is_err());
        assert_eq!(on.corrupt(ctx, 5, |_, _| 6), 5);
    }

    #[test]
    fn corrupt_mode_flips_exactly_one_element() {
        let spec = FaultSpec::new(1.0).unwrap().with_mode(FaultMode::Corrupt);
        for t in 0..200 {
            let input: Vec<f64> = (0..37).map(|i| 1.0 + i as f64 * 0.01).collect();
            let out = spec
                .inject(FaultContext::new(1, t, 1), input.clone(), flip_one_mantissa_bit)
                .unwrap();
            let diffs = input
                .iter()
                .zip(&out)
                .filter(|(a, b)| a.to_bits() != b.to_bits())
                .count();
            assert_eq!(diffs, 1);
        }
    }

    #[test]
    fn flip_magnitude_is_above_threshold() {
        for raw in 0..500u64 {
            let site = CorruptionSite(raw.wrapping_mul(0x2545_f491_4f6c_dd1d));
            let mut v = vec![0.7, 1.3];
            let before = v.clone();
            let (i, _) = site.flip_in(&mut v);
            let rel = libm::fabs(v[i] - before[i]) / libm::fabs(before[i]);
            assert!(rel > libm::pow(2.0, -20.0), "rel {rel}");
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("corrupt".parse::<FaultMode>().unwrap(), FaultMode::Corrupt);
        assert!("flip".parse::<FaultMode>().is_err());
    }
}
