//! Seeded random sampling with rejection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Distance from a declared singular set below which a sample is rejected.
pub const SINGULAR_MARGIN: f64 = 1e-3;

/// Consecutive rejections tolerated before sampling gives up.
pub const MAX_REJECTIONS: usize = 100;

/// Axis-aligned box `[lo, hi]^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleBox {
    pub lo: f64,
    pub hi: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox { lo: -2.0, hi: 2.0 }
    }
}

impl SampleBox {
    pub fn casimir() -> Self {
        SampleBox { lo: -1.0, hi: 1.0 }
    }
}

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self, b: SampleBox) -> f64 {
        self.rng.gen_range(b.lo..b.hi)
    }

    pub fn vector(&mut self, dim: usize, b: SampleBox) -> Vec<f64> {
        (0..dim).map(|_| self.uniform(b)).collect()
    }

    /// Draw from `draw` until `accept` holds, giving up after
    /// [`MAX_REJECTIONS`] consecutive failures.
    pub fn draw_accepted<T>(
        &mut self,
        mut draw: impl FnMut(&mut Self) -> T,
        mut accept: impl FnMut(&T) -> bool,
    ) -> Result<T> {
        for _ in 0..MAX_REJECTIONS {
            let x = draw(self);
            if accept(&x) {
                return Ok(x);
            }
        }
        Err(Error::Sampling(format!(
            "{MAX_REJECTIONS} consecutive samples rejected"
        )))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgreementReport {
    pub samples: usize,
    /// max over samples of `|a − b| / (1 + max(|a|, |b|))`
    pub max_relative: f64,
}

/// Compare two pointwise evaluators on seeded samples from `b^dim`.
///
/// Points rejected by `accept`, or where either side fails to evaluate, are
/// redrawn. Exhausting the rejection budget is a domain error.
pub fn agree_on_samples<F1, F2>(
    dim: usize,
    b: &SampleBox,
    n_samples: usize,
    seed: u64,
    accept: impl Fn(&[f64]) -> bool,
    f1: F1,
    f2: F2,
) -> Result<AgreementReport>
where
    F1: Fn(&[f64]) -> Result<f64>,
    F2: Fn(&[f64]) -> Result<f64>,
{
    let mut sampler = Sampler::new(seed);
    let mut max_relative: f64 = 0.0;
    for _ in 0..n_samples {
        let (a, c) = sampler
            .draw_accepted(
                |s| {
                    let x = s.vector(dim, *b);
                    if !accept(&x) {
                        return None;
                    }
                    match (f1(&x), f2(&x)) {
                        (Ok(a), Ok(c)) if a.is_finite() && c.is_finite() => Some((a, c)),
                        _ => None,
                    }
                },
                Option::is_some,
            )
            .map_err(|e| Error::Domain {
                subtree: "sample identity".into(),
                reason: e.to_string(),
            })?
            .expect("accepted sample");
        let rel = (a - c).abs() / (1.0 + a.abs().max(c.abs()));
        max_relative = max_relative.max(rel);
    }
    Ok(AgreementReport {
        samples: n_samples,
        max_relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let a = Sampler::new(5).vector(4, SampleBox::default());
        let b = Sampler::new(5).vector(4, SampleBox::default());
        assert_eq!(a, b);
        assert!(a.iter().all(|x| (-2.0..2.0).contains(x)));
    }

    #[test]
    fn rejection_budget_is_finite() {
        let mut s = Sampler::new(1);
        let r = s.draw_accepted(|s| s.uniform(SampleBox::default()), |_| false);
        assert!(matches!(r, Err(Error::Sampling(_))));
    }

    #[test]
    fn always_failing_identity_is_domain_error() {
        let r = agree_on_samples(
            1,
            &SampleBox::default(),
            3,
            0,
            |_| true,
            |_| Err(Error::Validation("never".into())),
            |x| Ok(x[0]),
        );
        assert!(matches!(r, Err(Error::Domain { .. })));
    }
}
