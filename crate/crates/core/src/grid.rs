//! Periodic grid, FFT-based spectral differentiation and discrete L² norms.
//!
//! Grid points are `x_j = a + j·dx` for `j = 0..M`, with `b` identified with
//! `a`. The forward transform is unscaled and the inverse carries the `1/M`
//! factor. For odd derivative orders the Nyquist multiplier is zero so that
//! derivatives of real data stay real; for even orders it is real and kept.

use std::borrow::Cow;
use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use num_traits::{One, Zero};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

/// Highest derivative order with a precomputed multiplier table.
const CACHED_ORDERS: usize = 4;

#[derive(Clone)]
pub struct PeriodicGrid<T: Real> {
    a: T,
    b: T,
    points: usize,
    dx: T,
    kappa: Vec<T>,
    multipliers: Vec<Vec<Cplx<T>>>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for PeriodicGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("points", &self.points)
            .field("dx", &self.dx)
            .finish()
    }
}

impl<T: Real> PeriodicGrid<T> {
    /// Builds the grid over `[a, b)` with `points` (even, ≥ 2) samples.
    pub fn new(a: T, b: T, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {points}"
            )));
        }
        if !points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "point count must be even, got {points}"
            )));
        }
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidGrid(format!(
                "interval must satisfy a < b, got [{a}, {b}]"
            )));
        }
        let len = b - a;
        let m = T::from_usize_lossy(points);
        let dx = len / m;
        let two_pi_over_len = T::TAU() / len;
        let half = points / 2;
        let kappa: Vec<T> = (0..points)
            .map(|j| {
                let signed = if j < half {
                    T::from_usize_lossy(j)
                } else {
                    -T::from_usize_lossy(points - j)
                };
                two_pi_over_len * signed
            })
            .collect();

        let multipliers = (1..=CACHED_ORDERS)
            .map(|k| build_multiplier(&kappa, k))
            .collect();

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);

        Ok(Self {
            a,
            b,
            points,
            dx,
            kappa,
            multipliers,
            forward,
            inverse,
        })
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    /// Number of grid points `M`.
    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    /// Angular wavenumbers in FFT order; index `M/2` is the Nyquist mode.
    pub fn kappa(&self) -> &[T] {
        &self.kappa
    }

    /// Largest |κ| on the grid (the Nyquist wavenumber).
    pub fn kappa_max(&self) -> T {
        self.kappa[self.points / 2].abs()
    }

    pub fn x(&self, j: usize) -> T {
        self.a + self.dx * T::from_usize_lossy(j)
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.points).map(|j| self.x(j)).collect()
    }

    /// Fourier multiplier `(iκ)^k`, with the Nyquist entry zeroed for odd `k`.
    pub fn multiplier(&self, k: usize) -> Cow<'_, [Cplx<T>]> {
        if (1..=CACHED_ORDERS).contains(&k) {
            Cow::Borrowed(&self.multipliers[k - 1])
        } else {
            Cow::Owned(build_multiplier(&self.kappa, k))
        }
    }

    /// In-place unscaled forward DFT.
    pub fn forward(&self, data: &mut [Cplx<T>]) {
        debug_assert_eq!(data.len(), self.points);
        self.forward.process(data);
    }

    /// In-place inverse DFT including the `1/M` factor.
    pub fn inverse(&self, data: &mut [Cplx<T>]) {
        debug_assert_eq!(data.len(), self.points);
        self.inverse.process(data);
        let scale = T::one() / T::from_usize_lossy(self.points);
        for z in data.iter_mut() {
            *z = z.scale(scale);
        }
    }

    pub fn check(&self, psi: &WaveFunction<T>) -> Result<()> {
        if psi.len() != self.points {
            return Err(Error::LengthMismatch {
                expected: self.points,
                found: psi.len(),
            });
        }
        Ok(())
    }

    /// `∂ₓᵏ ψ` by Fourier multiplication.
    pub fn spectral_derivative(&self, psi: &WaveFunction<T>, k: usize) -> Result<WaveFunction<T>> {
        if k < 1 {
            return Err(Error::InvalidArgument(
                "derivative order must be at least 1".into(),
            ));
        }
        self.check(psi)?;
        let mut data = psi.values().to_vec();
        self.forward(&mut data);
        let mult = self.multiplier(k);
        for (z, m) in data.iter_mut().zip(mult.iter()) {
            *z = *z * *m;
        }
        self.inverse(&mut data);
        Ok(WaveFunction::from_vec(data))
    }

    /// Spectral derivative of real samples, returning the real part.
    pub fn spectral_derivative_real(&self, f: &[T], k: usize) -> Result<Vec<T>> {
        let psi = WaveFunction::from_real(f);
        Ok(self
            .spectral_derivative(&psi, k)?
            .values()
            .iter()
            .map(|z| z.re)
            .collect())
    }

    /// Discrete L² norm `sqrt(dx)·‖ψ‖₂`.
    pub fn l2_norm(&self, psi: &WaveFunction<T>) -> T {
        (self.dx * psi.norm_sqr()).sqrt()
    }

    /// Discrete L² inner product `dx·Σ conj(φ)χ`.
    pub fn inner(&self, phi: &WaveFunction<T>, chi: &WaveFunction<T>) -> Cplx<T> {
        let s = phi
            .values()
            .iter()
            .zip(chi.values())
            .fold(Cplx::zero(), |acc, (p, c)| acc + p.conj() * c);
        s.scale(self.dx)
    }

    /// `sqrt(dx)·‖φ − χ‖₂`.
    pub fn l2_distance(&self, phi: &WaveFunction<T>, chi: &WaveFunction<T>) -> T {
        let s = phi
            .values()
            .iter()
            .zip(chi.values())
            .fold(T::zero(), |acc, (p, c)| acc + (*p - *c).norm_sqr());
        (self.dx * s).sqrt()
    }

    /// Samples a function on the grid.
    pub fn sample<F: Fn(T) -> T>(&self, f: F) -> Vec<T> {
        (0..self.points).map(|j| f(self.x(j))).collect()
    }
}

fn build_multiplier<T: Real>(kappa: &[T], k: usize) -> Vec<Cplx<T>> {
    let nyquist = kappa.len() / 2;
    kappa
        .iter()
        .enumerate()
        .map(|(j, &kap)| {
            if k % 2 == 1 && j == nyquist {
                return Cplx::zero();
            }
            // (iκ)^k = κ^k · i^k
            let mag = kap.powi(k as i32);
            match k % 4 {
                0 => Cplx::new(mag, T::zero()),
                1 => Cplx::new(T::zero(), mag),
                2 => Cplx::new(-mag, T::zero()),
                _ => Cplx::new(T::zero(), -mag),
            }
        })
        .collect()
}

/// Complex samples of ψ on a [`PeriodicGrid`].
#[derive(Clone, Debug, PartialEq, Default)]
pub struct WaveFunction<T: Real>(Vec<Cplx<T>>);

impl<T: Real> WaveFunction<T> {
    pub fn zeros(len: usize) -> Self {
        Self(vec![Cplx::zero(); len])
    }

    pub fn from_vec(values: Vec<Cplx<T>>) -> Self {
        Self(values)
    }

    pub fn from_real(values: &[T]) -> Self {
        Self(values.iter().map(|&v| Cplx::new(v, T::zero())).collect())
    }

    pub fn values(&self) -> &[Cplx<T>] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<Cplx<T>> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Plain Euclidean `Σ|ψ_j|²` (no grid weight).
    pub fn norm_sqr(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `self += alpha·other`.
    pub fn axpy(&mut self, alpha: Cplx<T>, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (s, o) in self.0.iter_mut().zip(&other.0) {
            *s = *s + alpha * *o;
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.axpy(Cplx::one(), other);
    }

    pub fn sub_assign(&mut self, other: &Self) {
        self.axpy(-Cplx::one(), other);
    }

    pub fn scale(&mut self, alpha: Cplx<T>) {
        for s in self.0.iter_mut() {
            *s = *s * alpha;
        }
    }

    pub fn scaled(&self, alpha: Cplx<T>) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// Pointwise product with real samples.
    pub fn mul_real(&self, f: &[T]) -> Self {
        Self(self.0.iter().zip(f).map(|(z, &w)| z.scale(w)).collect())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Cplx<T>> {
        self.0.iter()
    }
}

impl<T: Real> Index<usize> for WaveFunction<T> {
    type Output = Cplx<T>;

    fn index(&self, i: usize) -> &Cplx<T> {
        &self.0[i]
    }
}

impl<T: Real> IndexMut<usize> for WaveFunction<T> {
    fn index_mut(&mut self, i: usize) -> &mut Cplx<T> {
        &mut self.0[i]
    }
}

impl<T: Real> FromIterator<Cplx<T>> for WaveFunction<T> {
    fn from_iter<I: IntoIterator<Item = Cplx<T>>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}
