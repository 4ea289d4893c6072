//! Return distributions represented as uniform-weight Dirac mixtures.
//!
//! A [`QuantileDistribution`] stores `N` non-decreasing return values
//! `θ_1 <= ... <= θ_N`, each carrying weight `1/N`. Read as an inverse CDF it
//! is piecewise constant: fractions in `((i-1)/N, i/N]` map to `θ_i`, and the
//! fraction `0` maps to `θ_1`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::risk::RiskInterval;
use crate::scalar::Scalar;

/// Default number of quantiles per distribution.
pub const DEFAULT_QUANTILES: usize = 8;

/// Default Huber threshold for [`QuantileDistribution::quantile_huber_loss`].
pub const DEFAULT_KAPPA: f64 = 1.0;

/// A quantile fraction `τ ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Fraction<T>(T);

impl<T: Scalar> Fraction<T> {
    pub fn new(tau: T) -> Result<Self> {
        if tau >= T::zero() && tau <= T::one() {
            Ok(Self(tau))
        } else {
            Err(Error::FractionOutOfRange(tau.to_f64().unwrap_or(f64::NAN)))
        }
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileDistribution<T> {
    values: Vec<T>,
}

impl<T: Scalar> QuantileDistribution<T> {
    /// Builds a distribution from values that are already sorted.
    pub fn new(values: Vec<T>) -> Result<Self> {
        validate_finite(&values)?;
        if let Some(index) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Unsorted { index: index + 1 });
        }
        Ok(Self { values })
    }

    /// Builds a distribution from arbitrary finite values, sorting them.
    pub fn from_unsorted(mut values: Vec<T>) -> Result<Self> {
        validate_finite(&values)?;
        sort_values(&mut values);
        Ok(Self { values })
    }

    /// The point mass at `value`, represented with `n` quantiles.
    pub fn constant(value: T, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDistribution);
        }
        Self::new(vec![value; n])
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with `len`.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Midpoint fractions `τ̂_i = (2i - 1) / (2N)`.
    pub fn midpoint_fractions(&self) -> Vec<T> {
        midpoint_fractions(self.len())
    }

    pub fn expectation(&self) -> T {
        let sum = self.values.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / T::from_count(self.len())
    }

    /// Piecewise-constant inverse CDF, `inf { y : τ <= F(y) }`.
    pub fn quantile_at(&self, tau: Fraction<T>) -> T {
        self.values[bin_index(tau.get(), self.len())]
    }

    /// Exact mean of the inverse CDF over `[α, β]`.
    pub fn interval_expectation(&self, interval: &RiskInterval<T>) -> T {
        let n = self.len();
        let nf = T::from_count(n);
        let (alpha, beta) = (interval.alpha(), interval.beta());

        // Only bins intersecting [α, β] contribute; widen by one bin on each
        // side so rounding in `α·N` cannot drop a partially covered bin.
        let first = (alpha * nf)
            .floor()
            .to_usize()
            .unwrap_or(0)
            .saturating_sub(1)
            .min(n - 1);
        let last = ((beta * nf).ceil().to_usize().unwrap_or(n) + 1).clamp(first + 1, n);

        let mut acc = T::zero();
        for (i, &v) in self.values.iter().enumerate().take(last).skip(first) {
            let lo = T::from_count(i) / nf;
            let hi = T::from_count(i + 1) / nf;
            let overlap = hi.min(beta) - lo.max(alpha);
            if overlap > T::zero() {
                acc = acc + v * overlap;
            }
        }
        acc / interval.width()
    }

    /// Monte Carlo estimate of [`Self::interval_expectation`] from `samples`
    /// fractions drawn uniformly on `[α, β]`.
    pub fn mc_interval_expectation<R: Rng + ?Sized>(
        &self,
        interval: &RiskInterval<T>,
        samples: usize,
        rng: &mut R,
    ) -> Result<T> {
        if samples == 0 {
            return Err(Error::ZeroSamples);
        }
        let n = self.len();
        let mut acc = T::zero();
        for _ in 0..samples {
            let u = T::lit(rng.gen::<f64>());
            let tau = interval.alpha() + interval.width() * u;
            acc = acc + self.values[bin_index(tau, n)];
        }
        Ok(acc / T::from_count(samples))
    }

    /// Wasserstein-`p` distance between two mixtures with the same `N`.
    pub fn wasserstein(&self, other: &Self, p: u32) -> Result<T> {
        if self.len() != other.len() {
            return Err(Error::QuantileCountMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        if p == 0 {
            return Err(Error::InvalidOrder(p));
        }
        let n = T::from_count(self.len());
        let dist = match p {
            1 => {
                let s = self
                    .values
                    .iter()
                    .zip(&other.values)
                    .fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs());
                s / n
            }
            _ => {
                let pf = T::from_u32(p).expect("order fits scalar");
                let s = self
                    .values
                    .iter()
                    .zip(&other.values)
                    .fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs().powi(p as i32));
                (s / n).powf(pf.recip())
            }
        };
        Ok(dist)
    }

    /// Quantile-Huber loss of this (predicted) distribution against target
    /// samples, and its gradient with respect to each quantile value.
    ///
    /// `loss = 1/(N·M) Σ_i Σ_j |τ̂_i - 1{u_ij < 0}| · L_κ(u_ij) / κ` with
    /// `u_ij = t_j - θ_i`.
    pub fn quantile_huber_loss(&self, targets: &[T], kappa: T) -> Result<(T, Vec<T>)> {
        if !(kappa > T::zero()) {
            return Err(Error::InvalidKappa(kappa.to_f64().unwrap_or(f64::NAN)));
        }
        if targets.is_empty() {
            return Err(Error::EmptyTargets);
        }
        let n = self.len();
        let scale = (T::from_count(n) * T::from_count(targets.len())).recip();
        let taus = midpoint_fractions::<T>(n);

        let mut loss = T::zero();
        let mut grad = vec![T::zero(); n];
        for ((&pred, &tau), g) in self.values.iter().zip(&taus).zip(grad.iter_mut()) {
            let mut dsum = T::zero();
            for &t in targets {
                let u = t - pred;
                let weight = if u < T::zero() { T::one() - tau } else { tau };
                loss = loss + weight * huber(u, kappa) / kappa;
                dsum = dsum + weight * huber_derivative(u, kappa) / kappa;
            }
            // du/dθ = -1
            *g = -dsum * scale;
        }
        Ok((loss * scale, grad))
    }

    /// One gradient-descent step on the quantile values followed by a sort,
    /// which projects crossed quantiles back onto the monotone set.
    pub(crate) fn descend(&mut self, grad: &[T], step: T) {
        debug_assert_eq!(grad.len(), self.values.len());
        for (v, &g) in self.values.iter_mut().zip(grad) {
            *v = *v - step * g;
        }
        sort_values(&mut self.values);
    }
}

/// Midpoint fractions `τ̂_i = (2i - 1) / (2N)` for `i = 1..=n`.
pub fn midpoint_fractions<T: Scalar>(n: usize) -> Vec<T> {
    let denom = T::from_count(2 * n);
    (0..n).map(|i| T::from_count(2 * i + 1) / denom).collect()
}

/// Huber function `L_κ(u)`.
#[inline]
pub fn huber<T: Scalar>(u: T, kappa: T) -> T {
    let a = u.abs();
    if a <= kappa {
        T::half() * u * u
    } else {
        kappa * (a - T::half() * kappa)
    }
}

#[inline]
fn huber_derivative<T: Scalar>(u: T, kappa: T) -> T {
    if u.abs() <= kappa {
        u
    } else {
        kappa * u.signum()
    }
}

/// Index of the bin `((i-1)/N, i/N]` containing `tau`; `tau = 0` maps to 0.
fn bin_index<T: Scalar>(tau: T, n: usize) -> usize {
    let nf = T::from_count(n);
    let mut k = (tau * nf).ceil().to_usize().unwrap_or(0);
    // Guard against `tau * N` rounding up past an exact bin edge.
    if k >= 1 && T::from_count(k - 1) / nf >= tau {
        k -= 1;
    }
    k.clamp(1, n) - 1
}

fn validate_finite<T: Scalar>(values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteValue { index }),
        None => Ok(()),
    }
}

fn sort_values<T: Scalar>(values: &mut [T]) {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite quantile values"));
}
