//! Actions of the exponentials `S_j(t) = exp(tⁿʲ R_j)` on wavefunctions.
//!
//! `S0` is diagonal in Fourier space, `S1` is a pointwise phase, and `S2`,
//! `S3` use a Lanczos iteration on the real symmetric part of the generator.

use std::ops::{Add, AddAssign};

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::grid::WaveFunction;
use crate::operators::{Generator, SemiclassicalProblem};
use crate::scalar::{Cplx, Real};

/// Below this value of `|τ|·‖R‖` the exponential is returned as the identity.
const NEGLIGIBLE_EXPONENT: f64 = 1e-16;

/// Relative size of a Lanczos subdiagonal treated as an invariant subspace.
const BREAKDOWN_RATIO: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KrylovStrategy {
    /// Stop as soon as the a posteriori estimate drops below `tol`.
    #[default]
    APosteriori,
    /// Always build `m_max` vectors (or stop at breakdown).
    FixedDim,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LanczosConfig {
    pub m_max: usize,
    /// Target error of the action relative to the input norm.
    pub tol: f64,
    pub strategy: KrylovStrategy,
    /// Full re-orthogonalization against all previous Krylov vectors.
    pub reorthogonalize: bool,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            m_max: 30,
            tol: 1e-9,
            strategy: KrylovStrategy::APosteriori,
            reorthogonalize: false,
        }
    }
}

impl LanczosConfig {
    /// Action tolerance a hundred times below a local step tolerance.
    pub fn for_step_tolerance(step_tol: f64) -> Self {
        Self {
            tol: step_tol / 100.0,
            ..Self::default()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.m_max < 1 || dim < 1 {
            return Err(Error::InvalidArgument(format!(
                "Krylov dimension cap must be positive, got {} (dimension {dim})",
                self.m_max
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "Lanczos tolerance must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Number of exponential applications by kind, plus Lanczos matvecs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExpCounter {
    pub s0: u64,
    pub s1: u64,
    pub s2: u64,
    pub s3: u64,
    pub lanczos_mv: u64,
}

impl ExpCounter {
    /// Total number of exponentials (matvecs excluded).
    pub fn exponentials(&self) -> u64 {
        self.s0 + self.s1 + self.s2 + self.s3
    }

    fn bump(&mut self, g: Generator) {
        match g {
            Generator::Kinetic => self.s0 += 1,
            Generator::Potential => self.s1 += 1,
            Generator::Cubic => self.s2 += 1,
            Generator::Quintic => self.s3 += 1,
        }
    }
}

impl Add for ExpCounter {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            s0: self.s0 + o.s0,
            s1: self.s1 + o.s1,
            s2: self.s2 + o.s2,
            s3: self.s3 + o.s3,
            lanczos_mv: self.lanczos_mv + o.lanczos_mv,
        }
    }
}

impl AddAssign for ExpCounter {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// `exp(iτT)e₁` for the real symmetric tridiagonal `T` (diagonal `alpha`,
/// subdiagonal `beta`), evaluated in `f64`.
fn tridiagonal_exp_e1(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<(f64, f64)> {
    let n = alpha.len();
    if n == 1 {
        let (s, c) = (tau * alpha[0]).sin_cos();
        return vec![(c, s)];
    }
    let mut t = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = alpha[i];
        if i + 1 < n {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let q = &eig.eigenvectors;
    (0..n)
        .map(|r| {
            (0..n).fold((0.0, 0.0), |(re, im), k| {
                let (s, c) = (tau * eig.eigenvalues[k]).sin_cos();
                let w = q[(r, k)] * q[(0, k)];
                (re + w * c, im + w * s)
            })
        })
        .collect()
}

fn dot<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    a.iter()
        .zip(b)
        .fold(Cplx::zero(), |acc, (x, y)| acc + x.conj() * y)
}

fn euclid<T: Real>(a: &[Cplx<T>]) -> T {
    a.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// Krylov approximation of `exp(τG)ψ` for a skew-Hermitian action `G = iA`
/// (`A` real symmetric), supplied as `apply_g(x, out)` writing `G x`.
///
/// Returns `ψ` unchanged for `τ = 0` and the exact result on happy
/// breakdown. Fails with [`Error::NonConvergence`] if the a posteriori
/// estimate `|τ|·β_m·|[exp(iτT_m)e₁]_m|` is still above `cfg.tol` after
/// `cfg.m_max` iterations.
pub fn lanczos_expv<T, G>(
    mut apply_g: G,
    tau: T,
    psi: &WaveFunction<T>,
    cfg: &LanczosConfig,
    counter: &mut ExpCounter,
) -> Result<WaveFunction<T>>
where
    T: Real,
    G: FnMut(&[Cplx<T>], &mut [Cplx<T>]),
{
    let n = psi.len();
    cfg.validate(n.max(1))?;
    let beta0 = euclid(psi.values());
    if !beta0.is_finite() {
        return Err(Error::NotFinite("Lanczos input"));
    }
    if tau.is_zero() || beta0.is_zero() {
        return Ok(psi.clone());
    }
    let tau64 = tau.as_f64();
    let cap = cfg.m_max.min(n);
    let minus_i = Cplx::new(T::zero(), -T::one());

    let mut basis: Vec<Vec<Cplx<T>>> = Vec::with_capacity(cap);
    basis.push(psi.values().iter().map(|z| z.unscale(beta0)).collect());
    let mut alpha: Vec<f64> = Vec::with_capacity(cap);
    let mut beta: Vec<f64> = Vec::with_capacity(cap);
    let mut scale = 0.0_f64;
    let mut z = vec![Cplx::zero(); n];

    loop {
        let j = basis.len() - 1;
        apply_g(&basis[j], &mut z);
        counter.lanczos_mv += 1;
        // A q = −i G q
        for v in z.iter_mut() {
            *v = *v * minus_i;
        }
        let a = dot(&basis[j], &z).re;
        for (v, q) in z.iter_mut().zip(&basis[j]) {
            *v = *v - q.scale(a);
        }
        if j > 0 {
            let b_prev = T::lit(beta[j - 1]);
            for (v, q) in z.iter_mut().zip(&basis[j - 1]) {
                *v = *v - q.scale(b_prev);
            }
        }
        if cfg.reorthogonalize {
            for q in &basis {
                let c = dot(q, &z);
                for (v, qq) in z.iter_mut().zip(q) {
                    *v = *v - *qq * c;
                }
            }
        }
        let b = euclid(&z).as_f64();
        let a = a.as_f64();
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NotFinite("Lanczos iteration"));
        }
        alpha.push(a);
        scale = scale.max(a.abs()).max(beta.last().copied().unwrap_or(0.0));
        let dim = alpha.len();
        let y = tridiagonal_exp_e1(&alpha, &beta, tau64);

        let breakdown = b <= BREAKDOWN_RATIO * scale || b == 0.0;
        let done = breakdown
            || dim == n
            || match cfg.strategy {
                KrylovStrategy::APosteriori => {
                    let (re, im) = y[dim - 1];
                    tau64.abs() * b * re.hypot(im) <= cfg.tol
                }
                KrylovStrategy::FixedDim => dim == cap,
            };
        if done {
            let mut out = vec![Cplx::zero(); n];
            for (q, &(re, im)) in basis.iter().zip(&y) {
                let c = Cplx::new(T::lit(re), T::lit(im)).scale(beta0);
                for (o, v) in out.iter_mut().zip(q) {
                    *o = *o + *v * c;
                }
            }
            return Ok(WaveFunction::from_vec(out));
        }
        if dim == cap {
            let (re, im) = y[dim - 1];
            return Err(Error::NonConvergence {
                iterations: dim,
                estimate: tau64.abs() * b * re.hypot(im),
                tol: cfg.tol,
            });
        }
        beta.push(b);
        let inv = T::lit(b);
        basis.push(z.iter().map(|v| v.unscale(inv)).collect());
    }
}

impl<T: Real> SemiclassicalProblem<T> {
    /// `exp(τ R_g) ψ` for an arbitrary real exponent weight `τ`.
    pub fn exp_generator(
        &self,
        g: Generator,
        tau: T,
        psi: &WaveFunction<T>,
        cfg: &LanczosConfig,
        counter: &mut ExpCounter,
    ) -> Result<WaveFunction<T>> {
        self.grid().check(psi)?;
        counter.bump(g);
        match g {
            Generator::Kinetic => {
                // mode m gets exp(−½ i τ ε κ²)
                let grid = self.grid();
                let w = -T::lit(0.5) * tau * self.epsilon();
                let mut data = psi.values().to_vec();
                grid.forward(&mut data);
                for (z, &k) in data.iter_mut().zip(grid.kappa()) {
                    *z = *z * Cplx::from_polar(T::one(), w * k * k);
                }
                grid.inverse(&mut data);
                Ok(WaveFunction::from_vec(data))
            }
            Generator::Potential => {
                let w = -T::lit(0.5) * tau / self.epsilon();
                Ok(psi
                    .iter()
                    .zip(self.potential().values())
                    .map(|(z, &v)| *z * Cplx::from_polar(T::one(), w * v))
                    .collect())
            }
            Generator::Cubic | Generator::Quintic => {
                if (tau.abs() * self.norm_bound(g)).as_f64() < NEGLIGIBLE_EXPONENT {
                    return Ok(psi.clone());
                }
                let op = self.symmetric_part(g);
                let grid = self.grid();
                lanczos_expv(
                    |x: &[Cplx<T>], out: &mut [Cplx<T>]| {
                        op.apply_into(grid, x, out);
                        for v in out.iter_mut() {
                            *v = Cplx::new(-v.im, v.re);
                        }
                    },
                    tau,
                    psi,
                    cfg,
                    counter,
                )
            }
        }
    }

    /// `S0(t)ψ = exp(t R0)ψ`.
    pub fn exp_s0(&self, t: T, psi: &WaveFunction<T>, counter: &mut ExpCounter) -> Result<WaveFunction<T>> {
        self.exp_generator(Generator::Kinetic, t, psi, &LanczosConfig::default(), counter)
    }

    /// `S1(t)ψ = exp(t R1)ψ`.
    pub fn exp_s1(&self, t: T, psi: &WaveFunction<T>, counter: &mut ExpCounter) -> Result<WaveFunction<T>> {
        self.exp_generator(Generator::Potential, t, psi, &LanczosConfig::default(), counter)
    }

    /// `S2(t)ψ = exp(t³ R2)ψ`.
    pub fn exp_s2(
        &self,
        t: T,
        psi: &WaveFunction<T>,
        cfg: &LanczosConfig,
        counter: &mut ExpCounter,
    ) -> Result<WaveFunction<T>> {
        self.exp_generator(Generator::Cubic, t.powi(3), psi, cfg, counter)
    }

    /// `S3(t)ψ = exp(t⁵ R3)ψ`.
    pub fn exp_s3(
        &self,
        t: T,
        psi: &WaveFunction<T>,
        cfg: &LanczosConfig,
        counter: &mut ExpCounter,
    ) -> Result<WaveFunction<T>> {
        self.exp_generator(Generator::Quintic, t.powi(5), psi, cfg, counter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::operators::PotentialTable;
    use crate::problems::ProblemPreset;
    use crate::reference::DenseExponential;
    use crate::testutil::*;

    fn lattice(m: usize) -> (SemiclassicalProblem<f64>, WaveFunction<f64>) {
        ProblemPreset::lattice().build(1e-2, m).unwrap()
    }

    #[test]
    fn s0_examples() {
        let (p, _) = lattice(64);
        let psi = random_wave(64, 1);
        let mut c = ExpCounter::default();
        assert!(max_abs_diff(&p.exp_s0(0.0, &psi, &mut c).unwrap(), &psi) < 1e-15);

        let kappa = p.grid().kappa()[5];
        let mode: WaveFunction<f64> = p
            .grid()
            .points()
            .iter()
            .map(|&x| C::from_polar(1.0, kappa * x))
            .collect();
        let t = 0.013;
        let out = p.exp_s0(t, &mode, &mut c).unwrap();
        let phase = C::from_polar(1.0, -0.5 * t * 1e-2 * kappa * kappa);
        assert!(max_abs_diff(&out, &mode.scaled(phase)) < 1e-13);
        assert_eq!(c.s0, 2);
    }

    #[test]
    fn s1_examples() {
        let (p, _) = lattice(64);
        let psi = random_wave(64, 2);
        let mut c = ExpCounter::default();
        assert_eq!(p.exp_s1(0.0, &psi, &mut c).unwrap(), psi);
        let out = p.exp_s1(0.1, &psi, &mut c).unwrap();
        for (a, b) in out.iter().zip(psi.iter()) {
            assert!((a.norm() - b.norm()).abs() <= 1e-15);
        }
        let grid = PeriodicGrid::<f64>::new(0.0, 1.0, 16).unwrap();
        let free = SemiclassicalProblem::new(grid, PotentialTable::zero(16), 0.1).unwrap();
        let psi = random_wave(16, 3);
        assert_eq!(free.exp_s1(0.7, &psi, &mut c).unwrap(), psi);
        assert_eq!(c.s1, 3);
    }

    #[test]
    fn lanczos_tau_zero_is_identity() {
        let (p, _) = lattice(32);
        let psi = random_wave(32, 4);
        let mut c = ExpCounter::default();
        let op = p.symmetric_part(Generator::Cubic);
        let out = lanczos_expv(
            |x: &[C], o: &mut [C]| op.apply_into(p.grid(), x, o),
            0.0,
            &psi,
            &LanczosConfig::default(),
            &mut c,
        )
        .unwrap();
        assert_eq!(out, psi);
        assert_eq!(c.lanczos_mv, 0);
    }

    fn full_space_check(preset: ProblemPreset, g: Generator, tau: f64) {
        let (p, _) = preset.build(1e-2, 32).unwrap();
        let psi = random_wave(32, 17);
        let dense = DenseExponential::from_operator(p.grid(), p.symmetric_part(g)).unwrap();
        let expect = dense.apply(tau, &psi).unwrap();
        let cfg = LanczosConfig {
            m_max: 32,
            tol: 1e-14,
            strategy: KrylovStrategy::FixedDim,
            reorthogonalize: true,
        };
        let mut c = ExpCounter::default();
        let got = p.exp_generator(g, tau, &psi, &cfg, &mut c).unwrap();
        let err = p.grid().l2_distance(&got, &expect) / p.grid().l2_norm(&psi);
        assert!(err <= 1e-10, "{g:?}: {err:e}");
    }

    #[test]
    fn full_krylov_space_matches_dense_exponential() {
        full_space_check(ProblemPreset::lattice(), Generator::Cubic, 1e-6);
        full_space_check(ProblemPreset::lattice(), Generator::Quintic, 1e-10);
        full_space_check(ProblemPreset::morse(), Generator::Cubic, 1e-3);
        full_space_check(ProblemPreset::morse(), Generator::Quintic, 1e-3);
    }

    #[test]
    fn small_exponent_needs_few_iterations() {
        let (p, psi0) = lattice(64);
        let h: f64 = 1e-2;
        let tau = h.powi(3);
        let dense =
            DenseExponential::from_operator(p.grid(), p.symmetric_part(Generator::Cubic)).unwrap();
        let expect = dense.apply(tau, &psi0).unwrap();
        let cfg = LanczosConfig {
            tol: 1e-12,
            ..LanczosConfig::default()
        };
        let mut c = ExpCounter::default();
        let got = p.exp_s2(h, &psi0, &cfg, &mut c).unwrap();
        assert!(c.lanczos_mv <= 6, "used {} matvecs", c.lanczos_mv);
        assert!(p.grid().l2_distance(&got, &expect) <= 1e-10);
    }

    #[test]
    fn norm_drift_bounded_by_tolerance() {
        let (p, psi0) = lattice(64);
        let dense =
            DenseExponential::from_operator(p.grid(), p.symmetric_part(Generator::Cubic)).unwrap();
        for (t, tol) in [(5e-2, 1e-6), (3e-2, 1e-9)] {
            let cfg = LanczosConfig {
                tol,
                ..LanczosConfig::default()
            };
            let mut c = ExpCounter::default();
            let got = p.exp_s2(t, &psi0, &cfg, &mut c).unwrap();
            let n0 = p.grid().l2_norm(&psi0);
            assert!((p.grid().l2_norm(&got) - n0).abs() <= 10.0 * tol * n0);
            let expect = dense.apply(t * t * t, &psi0).unwrap();
            assert!(p.grid().l2_distance(&got, &expect) <= 10.0 * tol * n0);
        }
    }

    #[test]
    fn zero_potential_exponentials_are_identity() {
        let grid = PeriodicGrid::<f64>::new(0.0, 1.0, 16).unwrap();
        let p = SemiclassicalProblem::new(grid, PotentialTable::zero(16), 0.1).unwrap();
        let psi = random_wave(16, 8);
        let mut c = ExpCounter::default();
        let cfg = LanczosConfig::default();
        assert_eq!(p.exp_s2(0.5, &psi, &cfg, &mut c).unwrap(), psi);
        assert_eq!(p.exp_s3(0.5, &psi, &cfg, &mut c).unwrap(), psi);
        assert_eq!((c.s2, c.s3), (1, 1));
    }

    #[test]
    fn happy_breakdown_on_eigenvector() {
        // a Fourier mode is an eigenvector of the kinetic operator
        let grid = PeriodicGrid::<f64>::new(0.0, 1.0, 16).unwrap();
        let p = SemiclassicalProblem::new(grid.clone(), PotentialTable::zero(16), 0.1).unwrap();
        let k = grid.kappa()[3];
        let mode: WaveFunction<f64> = grid.points().iter().map(|&x| C::from_polar(1.0, k * x)).collect();
        let op = p.symmetric_part(Generator::Kinetic);
        let mut c = ExpCounter::default();
        let out = lanczos_expv(
            |x: &[C], o: &mut [C]| {
                op.apply_into(&grid, x, o);
                o.iter_mut().for_each(|v| *v *= C::i());
            },
            2.0,
            &mode,
            &LanczosConfig { tol: 1e-15, ..LanczosConfig::default() },
            &mut c,
        )
        .unwrap();
        assert_eq!(c.lanczos_mv, 1);
        let expect = mode.scaled(C::from_polar(1.0, -2.0 * 0.05 * k * k));
        assert!(max_abs_diff(&out, &expect) < 1e-12);
    }

    #[test]
    fn non_convergence_reported() {
        let (p, psi0) = lattice(64);
        let cfg = LanczosConfig {
            m_max: 2,
            tol: 1e-14,
            ..LanczosConfig::default()
        };
        let mut c = ExpCounter::default();
        let err = p.exp_s2(0.3, &psi0, &cfg, &mut c).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 2, .. }));
        assert!(LanczosConfig { m_max: 0, ..cfg }.validate(8).is_err());
        assert!(LanczosConfig { tol: 0.0, ..cfg }.validate(8).is_err());
    }

    #[test]
    fn counter_increments_once_per_call() {
        let (p, psi0) = lattice(64);
        let cfg = LanczosConfig::default();
        let mut c = ExpCounter::default();
        p.exp_s0(1e-3, &psi0, &mut c).unwrap();
        p.exp_s1(1e-3, &psi0, &mut c).unwrap();
        p.exp_s2(1e-3, &psi0, &cfg, &mut c).unwrap();
        p.exp_s3(1e-3, &psi0, &cfg, &mut c).unwrap();
        assert_eq!((c.s0, c.s1, c.s2, c.s3), (1, 1, 1, 1));
        assert_eq!(c.exponentials(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn s0_semigroup_and_unitarity(t1 in -1.0f64..1.0, t2 in -1.0f64..1.0, seed in any::<u64>()) {
                let (p, _) = lattice(64);
                let psi = random_wave(64, seed);
                let mut c = ExpCounter::default();
                let a = p.exp_s0(t1, &p.exp_s0(t2, &psi, &mut c).unwrap(), &mut c).unwrap();
                let b = p.exp_s0(t1 + t2, &psi, &mut c).unwrap();
                prop_assert!(p.grid().l2_distance(&a, &b) <= 1e-13 * p.grid().l2_norm(&psi).max(1.0));
                let n = p.grid().l2_norm(&psi);
                prop_assert!((p.grid().l2_norm(&b) - n).abs() <= 1e-13 * n.max(1.0));
                let d = p.exp_s1(t1, &psi, &mut c).unwrap();
                prop_assert!((p.grid().l2_norm(&d) - n).abs() <= 1e-13 * n.max(1.0));
            }
        }
    }
}
