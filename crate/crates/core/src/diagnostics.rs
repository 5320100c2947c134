//! Quantities used to compare samplers: streaming moments, marginal density
//! differences, the suboptimality factor of a proposal covariance, ergodic
//! averages and windowed acceptance rates.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::gaussian::SpdMatrix;

/// Streaming mean and centered co-moment matrix (Welford), mergeable across
/// chains.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamingMoments {
    count: u64,
    mean: DVector<f64>,
    comoment: DMatrix<f64>,
}

impl StreamingMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: DVector::zeros(dim),
            comoment: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.count += 1;
        let n = self.count as f64;
        let x = DVector::from_column_slice(x);
        let delta = &x - &self.mean;
        self.mean.axpy(1.0 / n, &delta, 1.0);
        let delta_after = x - &self.mean;
        self.comoment.ger(1.0, &delta, &delta_after, 1.0);
    }

    /// Sample covariance with denominator `count − 1`; `None` below two
    /// samples.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        if self.count < 2 {
            return None;
        }
        let c = &self.comoment / (self.count - 1) as f64;
        Some((&c + c.transpose()) * 0.5)
    }

    /// `cov + ε I` as an SPD matrix. Fails when fewer than two samples have
    /// been seen or the regularized covariance is still degenerate.
    pub fn regularized_covariance(&self, epsilon: f64) -> Result<SpdMatrix> {
        let c = self.covariance().ok_or(Error::Empty("fewer than two samples"))?;
        let d = self.dim();
        SpdMatrix::new(c + DMatrix::from_diagonal_element(d, d, epsilon))
    }

    /// Combines two accumulators as if every sample had been pushed into one.
    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return other.clone();
        }
        if other.count == 0 {
            return self.clone();
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta = &other.mean - &self.mean;
        let mean = &self.mean + &delta * (nb / n);
        let comoment = &self.comoment + &other.comoment + &delta * delta.transpose() * (na * nb / n);
        Self {
            count: self.count + other.count,
            mean,
            comoment,
        }
    }
}

/// Histogram on uniform bins over `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram1D {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    outside: u64,
}

impl Histogram1D {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            return Err(Error::invalid("histogram", "needs hi > lo and at least one bin"));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; bins],
            outside: 0,
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let w = self.width();
        (self.lo + bin as f64 * w, self.lo + (bin + 1) as f64 * w)
    }

    pub fn center(&self, bin: usize) -> f64 {
        let (a, b) = self.edges(bin);
        0.5 * (a + b)
    }

    /// Bin index of `x`; the upper edge belongs to the last bin.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let i = ((x - self.lo) / self.width()) as usize;
        Some(i.min(self.bins() - 1))
    }

    pub fn push(&mut self, x: f64) {
        match self.bin_of(x) {
            Some(i) => self.counts[i] += 1,
            None => self.outside += 1,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn outside(&self) -> u64 {
        self.outside
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.outside
    }

    /// Counts divided by `total · width`, i.e. a density estimate.
    pub fn density(&self) -> Vec<f64> {
        let norm = self.total() as f64 * self.width();
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }
}

/// One row of a density-difference table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinDifference {
    pub center: f64,
    pub empirical: f64,
    pub truth: f64,
    pub difference: f64,
    /// Batch-means standard error of the empirical density in this bin.
    pub std_error: f64,
}

/// Accumulates a marginal histogram in consecutive batches so that
/// autocorrelated chains still get honest per-bin standard errors.
#[derive(Clone, Debug)]
pub struct BatchedHistogram {
    overall: Histogram1D,
    batch_len: u64,
    batches: Vec<Vec<u64>>,
    in_batch: u64,
}

impl BatchedHistogram {
    pub fn new(lo: f64, hi: f64, bins: usize, batch_len: u64) -> Result<Self> {
        if batch_len == 0 {
            return Err(Error::invalid("batch_len", "must be positive"));
        }
        Ok(Self {
            overall: Histogram1D::new(lo, hi, bins)?,
            batch_len,
            batches: Vec::new(),
            in_batch: 0,
        })
    }

    pub fn histogram(&self) -> &Histogram1D {
        &self.overall
    }

    pub fn push(&mut self, x: f64) {
        self.overall.push(x);
        if self.in_batch == 0 {
            self.batches.push(vec![0; self.overall.bins()]);
        }
        if let Some(i) = self.overall.bin_of(x) {
            self.batches.last_mut().expect("batch opened above")[i] += 1;
        }
        self.in_batch = (self.in_batch + 1) % self.batch_len;
    }

    /// Empirical minus true density per bin. `true_mass(a, b)` is the
    /// probability the true marginal assigns to `[a, b]`.
    pub fn finish(&self, true_mass: impl Fn(f64, f64) -> f64) -> Result<Vec<BinDifference>> {
        let total = self.overall.total();
        if total == 0 {
            return Err(Error::Empty("sample stream"));
        }
        let width = self.overall.width();
        let empirical = self.overall.density();
        // Only complete batches enter the standard error.
        let complete: Vec<&Vec<u64>> = if self.in_batch == 0 {
            self.batches.iter().collect()
        } else {
            self.batches[..self.batches.len() - 1].iter().collect()
        };
        let nb = complete.len();
        Ok((0..self.overall.bins())
            .map(|i| {
                let (a, b) = self.overall.edges(i);
                let truth = true_mass(a, b) / width;
                let std_error = if nb >= 2 {
                    let dens: Vec<f64> = complete
                        .iter()
                        .map(|c| c[i] as f64 / (self.batch_len as f64 * width))
                        .collect();
                    let m = dens.iter().sum::<f64>() / nb as f64;
                    let var = dens.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nb - 1) as f64;
                    (var / nb as f64).sqrt()
                } else {
                    f64::NAN
                };
                BinDifference {
                    center: self.overall.center(i),
                    empirical: empirical[i],
                    truth,
                    difference: empirical[i] - truth,
                    std_error,
                }
            })
            .collect())
    }
}

/// Density differences of a stream of scalar samples over `bins` uniform
/// bins on `[lo, hi]`, with standard errors from `batches` batch means.
pub fn density_difference(
    samples: &[f64],
    lo: f64,
    hi: f64,
    bins: usize,
    batches: usize,
    true_mass: impl Fn(f64, f64) -> f64,
) -> Result<Vec<BinDifference>> {
    if samples.is_empty() {
        return Err(Error::Empty("sample stream"));
    }
    let batch_len = (samples.len() / batches.max(1)).max(1) as u64;
    let mut h = BatchedHistogram::new(lo, hi, bins, batch_len)?;
    for &x in samples {
        h.push(x);
    }
    h.finish(true_mass)
}

fn symmetric_power(m: &DMatrix<f64>, p: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NotPositiveDefinite("suboptimality operand"));
    }
    let powered = eig.eigenvalues.map(|v| v.powf(p));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&powered) * eig.eigenvectors.transpose())
}

/// Suboptimality factor `b = d Σλᵢ⁻² / (Σλᵢ⁻¹)²` where `λᵢ` are the
/// eigenvalues of `proposal^{1/2} target^{-1/2}`. Equals 1 exactly when the
/// proposal is proportional to the target covariance.
pub fn suboptimality_factor(proposal_cov: &SpdMatrix, target_cov: &SpdMatrix) -> Result<f64> {
    Error::check_dim("target covariance", proposal_cov.dim(), target_cov.dim())?;
    // proposal^{1/2} target^{-1/2} is similar to the symmetric
    // target^{-1/4} proposal^{1/2} target^{-1/4}.
    let p_half = symmetric_power(proposal_cov.matrix(), 0.5)?;
    let t_quarter = symmetric_power(target_cov.matrix(), -0.25)?;
    let sym = &t_quarter * p_half * &t_quarter;
    let sym = (&sym + sym.transpose()) * 0.5;
    let lambdas = SymmetricEigen::new(sym).eigenvalues;
    let d = lambdas.len() as f64;
    let inv_sq: f64 = lambdas.iter().map(|l| l.powi(-2)).sum();
    let inv: f64 = lambdas.iter().map(|l| 1.0 / l).sum();
    Ok(d * inv_sq / (inv * inv))
}

/// `(1/n) Σ g(θᵢ)`.
pub fn ergodic_average<'a, I, G>(samples: I, mut g: G) -> Result<DVector<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
    G: FnMut(&[f64]) -> DVector<f64>,
{
    let mut acc: Option<DVector<f64>> = None;
    let mut n = 0u64;
    for x in samples {
        let v = g(x);
        n += 1;
        match acc.as_mut() {
            // Running mean keeps the sum from growing with n.
            Some(a) => a.axpy(1.0 / n as f64, &(v - &*a), 1.0),
            None => acc = Some(v),
        }
    }
    acc.ok_or(Error::Empty("sample stream"))
}

/// Sliding-window mean of accept indicators.
#[derive(Clone, Debug)]
pub struct AcceptanceWindow {
    window: usize,
    recent: VecDeque<bool>,
    accepted: usize,
}

impl AcceptanceWindow {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            recent: VecDeque::with_capacity(window.max(1)),
            accepted: 0,
        }
    }

    pub fn push(&mut self, accepted: bool) -> f64 {
        if self.recent.len() == self.window && self.recent.pop_front() == Some(true) {
            self.accepted -= 1;
        }
        self.recent.push_back(accepted);
        if accepted {
            self.accepted += 1;
        }
        self.rate()
    }

    /// Acceptance rate over the most recent (at most `window`) decisions.
    pub fn rate(&self) -> f64 {
        if self.recent.is_empty() {
            0.0
        } else {
            self.accepted as f64 / self.recent.len() as f64
        }
    }

    pub fn is_full(&self) -> bool {
        self.recent.len() == self.window
    }
}

/// Windowed acceptance rate after every decision.
pub fn acceptance_trace(decisions: impl IntoIterator<Item = bool>, window: usize) -> Vec<f64> {
    let mut w = AcceptanceWindow::new(window);
    decisions.into_iter().map(|a| w.push(a)).collect()
}

/// Batch-means effective sample size of a scalar series.
pub fn batch_means_ess(series: &[f64], batches: usize) -> Result<f64> {
    let n = series.len();
    if batches < 2 || n < 2 * batches {
        return Err(Error::invalid("batches", "need at least two batches of two samples"));
    }
    let len = n / batches;
    let used = &series[..len * batches];
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    let var = used.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (used.len() - 1) as f64;
    let bm: Vec<f64> = used.chunks(len).map(|c| c.iter().sum::<f64>() / len as f64).collect();
    let bvar = bm.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    if bvar == 0.0 {
        return Ok(used.len() as f64);
    }
    Ok((used.len() as f64 * var / (len as f64 * bvar)).min(used.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::StripDensity;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn batch_cov(xs: &[Vec<f64>]) -> DMatrix<f64> {
        let n = xs.len();
        let d = xs[0].len();
        let mean: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        DMatrix::from_fn(d, d, |i, j| {
            xs.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1) as f64
        })
    }

    #[test]
    fn streaming_moments_match_batch_at_checkpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut acc = StreamingMoments::new(3);
        let mut xs = Vec::new();
        for k in 1..=2000 {
            let x: Vec<f64> = (0..3).map(|j| 5.0 * j as f64 + rng.random::<f64>() * 3.0).collect();
            acc.push(&x);
            xs.push(x);
            if k % 250 == 0 {
                let err = (acc.covariance().unwrap() - batch_cov(&xs)).norm();
                assert!(err < 1e-9, "checkpoint {k}: {err}");
            }
        }
    }

    #[test]
    fn moments_need_two_samples() {
        let mut acc = StreamingMoments::new(2);
        assert!(acc.covariance().is_none());
        acc.push(&[1.0, 2.0]);
        assert!(acc.regularized_covariance(1e-4).is_err());
        acc.push(&[1.0, 2.0]);
        let c = acc.regularized_covariance(1e-4).unwrap();
        assert!((c.matrix() - DMatrix::identity(2, 2) * 1e-4).norm() < 1e-18);
    }

    proptest! {
        #[test]
        fn merge_is_associative_and_matches_sequential(
            xs in proptest::collection::vec(proptest::collection::vec(-10.0..10.0f64, 2), 3..60),
            cut1 in 0usize..20,
            cut2 in 0usize..20,
        ) {
            let c1 = cut1.min(xs.len());
            let c2 = (c1 + cut2).min(xs.len());
            let acc = |s: &[Vec<f64>]| {
                let mut m = StreamingMoments::new(2);
                for x in s { m.push(x); }
                m
            };
            let (a, b, c) = (acc(&xs[..c1]), acc(&xs[c1..c2]), acc(&xs[c2..]));
            let left = a.merge(&b).merge(&c);
            let right = a.merge(&b.merge(&c));
            let all = acc(&xs);
            prop_assert_eq!(left.count(), all.count());
            prop_assert!((left.mean() - right.mean()).norm() < 1e-9);
            prop_assert!((left.mean() - all.mean()).norm() < 1e-9);
            let lc = left.covariance().unwrap();
            prop_assert!((&lc - right.covariance().unwrap()).norm() < 1e-9);
            prop_assert!((&lc - all.covariance().unwrap()).norm() < 1e-9);
        }

        #[test]
        fn suboptimality_is_at_least_one(
            a in proptest::collection::vec(-2.0..2.0f64, 9),
            b in proptest::collection::vec(-2.0..2.0f64, 9),
        ) {
            let a = DMatrix::from_vec(3, 3, a);
            let b = DMatrix::from_vec(3, 3, b);
            let p = SpdMatrix::new(&a * a.transpose() + DMatrix::identity(3, 3) * 0.1).unwrap();
            let t = SpdMatrix::new(&b * b.transpose() + DMatrix::identity(3, 3) * 0.1).unwrap();
            prop_assert!(suboptimality_factor(&p, &t).unwrap() >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn suboptimality_examples() {
        let t = SpdMatrix::new(dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap();
        assert!((suboptimality_factor(&t, &t).unwrap() - 1.0).abs() < 1e-12);
        let scaled = t.scale(7.5).unwrap();
        assert!((suboptimality_factor(&scaled, &t).unwrap() - 1.0).abs() < 1e-12);
        // Eigenvalues of proposal^{1/2} target^{-1/2} equal to (1, 2).
        let p = SpdMatrix::from_diagonal(&[1.0, 4.0]).unwrap();
        let t = SpdMatrix::identity(2);
        let b = suboptimality_factor(&p, &t).unwrap();
        assert!((b - 10.0 / 9.0).abs() < 1e-12, "{b}");
        assert!(suboptimality_factor(&p, &SpdMatrix::identity(3)).is_err());
    }

    #[test]
    fn ergodic_average_examples() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let c = ergodic_average(xs.iter().map(|x| x.as_slice()), |_| DVector::from_element(1, 4.25)).unwrap();
        assert_eq!(c[0], 4.25);
        assert!(ergodic_average(std::iter::empty(), DVector::from_column_slice).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<Vec<f64>> = (0..100_000).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
        let m = ergodic_average(xs.iter().map(|x| x.as_slice()), DVector::from_column_slice).unwrap();
        assert!(m[0].abs() < 0.05);
    }

    #[test]
    fn ergodic_average_of_strip_indicator_is_inner_mass() {
        // Direct sampler for the strip density.
        let strip = StripDensity;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let xs: Vec<Vec<f64>> = (0..n).map(|_| strip.sample_direct(&mut rng).to_vec()).collect();
        let m = ergodic_average(xs.iter().map(|x| x.as_slice()), |x| {
            DVector::from_element(1, if strip.in_inner(x) { 1.0 } else { 0.0 })
        })
        .unwrap();
        let p = 6.0 / (6.0 + 7560.0);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((m[0] - p).abs() < 5.0 * se);
    }

    #[test]
    fn acceptance_trace_examples() {
        assert!(acceptance_trace(vec![true; 50], 10).iter().all(|&r| r == 1.0));
        let alt = acceptance_trace((0..100).map(|i| i % 2 == 0), 10);
        assert_eq!(*alt.last().unwrap(), 0.5);
        let mut w = AcceptanceWindow::new(4);
        for a in [true, true, false, false, false, false] {
            w.push(a);
        }
        assert_eq!(w.rate(), 0.0);
    }

    #[test]
    fn density_difference_of_direct_sampler() {
        let strip = StripDensity;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..1_000_000).map(|_| strip.sample_direct(&mut rng)[0]).collect();
        let diffs = density_difference(&xs, -18.0, 18.0, 72, 100, |a, b| strip.marginal_mass(a, b)).unwrap();
        assert_eq!(diffs.len(), 72);
        let within = diffs
            .iter()
            .filter(|d| d.difference.abs() < 5.0 * d.std_error)
            .count();
        assert!(within as f64 >= 0.99 * 72.0, "{within}/72");
        let max_z = diffs
            .iter()
            .map(|d| (d.difference / d.std_error).abs())
            .fold(0.0, f64::max);
        assert!(max_z < 5.0, "max |z| = {max_z}");
        assert!(density_difference(&[], -18.0, 18.0, 72, 10, |a, b| strip.marginal_mass(a, b)).is_err());
    }

    #[test]
    fn histogram_counts_sum_to_samples() {
        let mut h = Histogram1D::new(-1.0, 1.0, 4).unwrap();
        for x in [-1.0, -0.6, 0.0, 0.4, 1.0, 2.0] {
            h.push(x);
        }
        assert_eq!(h.counts(), &[2, 0, 2, 1]);
        assert_eq!(h.outside(), 1);
        assert_eq!(h.total(), 6);
    }

    #[test]
    fn ess_of_iid_series_is_close_to_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ess = batch_means_ess(&xs, 50).unwrap();
        assert!(ess > 50_000.0, "{ess}");
        // AR(1) with coefficient 0.9 has IACT 19.
        let mut ar = Vec::with_capacity(100_000);
        let mut x = 0.0;
        for _ in 0..100_000 {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = 0.9 * x + e;
            ar.push(x);
        }
        let ess = batch_means_ess(&ar, 50).unwrap();
        assert!(ess > 2500.0 && ess < 10_000.0, "{ess}");
    }
}
