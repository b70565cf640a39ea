use crate::{Error, Result};

/// Largest supported level; `2^MAX_LEVEL` fine steps per path.
pub const MAX_LEVEL: u32 = 40;

pub(crate) fn level_of(n_steps: u64) -> Result<u32> {
    if n_steps == 0 || !n_steps.is_power_of_two() {
        return Err(Error::param(format!("step count must be a power of two, got {n_steps}")));
    }
    let level = n_steps.trailing_zeros();
    check_level(level)?;
    Ok(level)
}

pub(crate) fn check_level(level: u32) -> Result<()> {
    if level > MAX_LEVEL {
        return Err(Error::param(format!("level {level} exceeds the supported maximum {MAX_LEVEL}")));
    }
    Ok(())
}

/// Left-endpoint Riemann sums of one fine path, accumulated simultaneously
/// on every dyadic subgrid `0..=top`.
///
/// Grid point `i` of the finest grid belongs to level `l` iff `i` is a
/// multiple of `2^(top - l)`.
#[derive(Debug, Clone)]
pub(crate) struct DyadicSums {
    top: u32,
    raw: Vec<f64>,
}

impl DyadicSums {
    pub(crate) fn new(top: u32) -> Self {
        Self { top, raw: vec![0.0; top as usize + 1] }
    }

    #[inline]
    pub(crate) fn push(&mut self, index: u64, value: f64) {
        let lowest = self.top - index.trailing_zeros().min(self.top);
        for slot in &mut self.raw[lowest as usize..] {
            *slot += value;
        }
    }

    /// Weighted sums, index `l` holding `sum * horizon / 2^l`.
    pub(crate) fn finish(self, horizon: f64) -> Vec<f64> {
        self.raw
            .into_iter()
            .enumerate()
            .map(|(l, s)| s * (horizon / (1u64 << l) as f64))
            .collect()
    }
}
