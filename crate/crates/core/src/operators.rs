//! Matrix-free semiclassical Hamiltonian and the Zassenhaus generators.
//!
//! Every generator is `i` times a real symmetric discrete operator `A`:
//!
//! ```text
//! R0 = ½ i ε ∂²
//! R1 = −½ i ε⁻¹ V
//! R2 = i [ (1/12) ε⁻¹ (V')² − (1/48) ε V'''' ] + (1/12) i ε ⟨V''⟩₂
//! R3 = −(7/120) i ε⁻¹ V''(V')² + (1/30) i ε ⟨(V'')² − 2V'''V'⟩₂ − (1/120) i ε³ ⟨V''''⟩₄
//! ```
//!
//! with `⟨f⟩ₖ = ½(f∘∂ᵏ + ∂ᵏ∘f)` and `H = 2(R0 + R1)`. None of them depends
//! on the step size.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, WaveFunction};
use crate::scalar::{Cplx, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PotentialSource {
    Analytic,
    Spectral,
}

/// Samples of `V` and its first four derivatives, plus the derivative
/// products the generators need.
#[derive(Clone, Debug)]
pub struct PotentialTable<T: Real> {
    v: Vec<T>,
    dv: [Vec<T>; 4],
    source: PotentialSource,
    /// (V')²
    slope_sq: Vec<T>,
    /// V''(V')²
    curv_slope_sq: Vec<T>,
    /// (V'')² − 2V'''V'
    quintic_sym: Vec<T>,
}

impl<T: Real> PotentialTable<T> {
    /// From closed-form samples of `V, V', V'', V''', V''''`.
    pub fn analytic(v: Vec<T>, dv: [Vec<T>; 4]) -> Result<Self> {
        Self::build(v, dv, PotentialSource::Analytic)
    }

    /// From samples of `V` only; derivatives by spectral differentiation.
    pub fn from_samples(grid: &PeriodicGrid<T>, v: Vec<T>) -> Result<Self> {
        if v.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: v.len(),
            });
        }
        let dv = [
            grid.spectral_derivative_real(&v, 1)?,
            grid.spectral_derivative_real(&v, 2)?,
            grid.spectral_derivative_real(&v, 3)?,
            grid.spectral_derivative_real(&v, 4)?,
        ];
        Self::build(v, dv, PotentialSource::Spectral)
    }

    pub fn zero(len: usize) -> Self {
        let z = vec![T::zero(); len];
        Self::build(z.clone(), [z.clone(), z.clone(), z.clone(), z], PotentialSource::Analytic)
            .expect("zero table is valid")
    }

    fn build(v: Vec<T>, dv: [Vec<T>; 4], source: PotentialSource) -> Result<Self> {
        let n = v.len();
        for d in &dv {
            if d.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: d.len(),
                });
            }
        }
        if v.iter().chain(dv.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::NotFinite("potential table"));
        }
        let two = T::lit(2.0);
        let slope_sq: Vec<T> = dv[0].iter().map(|&d| d * d).collect();
        let curv_slope_sq = dv[1].iter().zip(&slope_sq).map(|(&c, &s)| c * s).collect();
        let quintic_sym = (0..n)
            .map(|j| dv[1][j] * dv[1][j] - two * dv[2][j] * dv[0][j])
            .collect();
        Ok(Self {
            v,
            dv,
            source,
            slope_sq,
            curv_slope_sq,
            quintic_sym,
        })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.v
    }

    /// `order`-th derivative samples, `order` in `1..=4`.
    pub fn derivative(&self, order: usize) -> &[T] {
        assert!((1..=4).contains(&order), "derivative order {order} not stored");
        &self.dv[order - 1]
    }

    pub fn source(&self) -> PotentialSource {
        self.source
    }

    pub fn is_zero(&self) -> bool {
        self.v
            .iter()
            .chain(self.dv.iter().flatten())
            .all(|x| x.is_zero())
    }
}

/// `½(f·∂ᵏψ + ∂ᵏ(f·ψ))`; `k = 0` gives `f·ψ`.
pub fn apply_symmetrized<T: Real>(
    grid: &PeriodicGrid<T>,
    f: &[T],
    k: usize,
    psi: &WaveFunction<T>,
) -> Result<WaveFunction<T>> {
    grid.check(psi)?;
    if f.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: f.len(),
        });
    }
    if k == 0 {
        return Ok(psi.mul_real(f));
    }
    let mut out = grid.spectral_derivative(psi, k)?.mul_real(f);
    out.add_assign(&grid.spectral_derivative(&psi.mul_real(f), k)?);
    out.scale(Cplx::new(T::lit(0.5), T::zero()));
    Ok(out)
}

#[derive(Clone, Debug)]
struct SymmetrizedTerm<T: Real> {
    coef: T,
    f: Vec<T>,
    order: usize,
}

/// Real symmetric operator `c·∂² + diag(d) + Σ coef·⟨f⟩ₖ`.
#[derive(Clone, Debug)]
pub struct SymmetricOperator<T: Real> {
    kinetic: T,
    diag: Option<Vec<T>>,
    terms: Vec<SymmetrizedTerm<T>>,
}

impl<T: Real> SymmetricOperator<T> {
    fn zero() -> Self {
        Self {
            kinetic: T::zero(),
            diag: None,
            terms: Vec::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.kinetic.is_zero()
            && self.diag.as_ref().is_none_or(|d| d.iter().all(|x| x.is_zero()))
            && self
                .terms
                .iter()
                .all(|t| t.coef.is_zero() || t.f.iter().all(|x| x.is_zero()))
    }

    /// `A ψ`, written into `out`.
    pub fn apply_into(&self, grid: &PeriodicGrid<T>, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let m = grid.len();
        debug_assert_eq!(psi.len(), m);
        debug_assert_eq!(out.len(), m);
        match &self.diag {
            Some(d) => {
                for ((o, p), &w) in out.iter_mut().zip(psi).zip(d) {
                    *o = p.scale(w);
                }
            }
            None => out.iter_mut().for_each(|o| *o = Cplx::zero()),
        }
        if self.kinetic.is_zero() && self.terms.is_empty() {
            return;
        }
        let half = T::lit(0.5);
        let mut psi_hat = psi.to_vec();
        grid.forward(&mut psi_hat);
        // spectral accumulator for ∂ᵏ(f·ψ) and c·∂²ψ
        let mut acc_hat = vec![Cplx::zero(); m];
        if !self.kinetic.is_zero() {
            let mult = grid.multiplier(2);
            for ((a, p), q) in acc_hat.iter_mut().zip(&psi_hat).zip(mult.iter()) {
                *a = *p * q.scale(self.kinetic);
            }
        }
        let mut buf = vec![Cplx::zero(); m];
        for term in &self.terms {
            let w = half * term.coef;
            let mult = grid.multiplier(term.order);
            // f·∂ᵏψ
            for ((b, p), q) in buf.iter_mut().zip(&psi_hat).zip(mult.iter()) {
                *b = *p * *q;
            }
            grid.inverse(&mut buf);
            for ((o, b), &f) in out.iter_mut().zip(&buf).zip(&term.f) {
                *o = *o + b.scale(w * f);
            }
            // ∂ᵏ(f·ψ)
            for ((b, p), &f) in buf.iter_mut().zip(psi).zip(&term.f) {
                *b = p.scale(f);
            }
            grid.forward(&mut buf);
            for ((a, b), q) in acc_hat.iter_mut().zip(&buf).zip(mult.iter()) {
                *a = *a + *b * q.scale(w);
            }
        }
        grid.inverse(&mut acc_hat);
        for (o, a) in out.iter_mut().zip(&acc_hat) {
            *o = *o + *a;
        }
    }

    /// Upper bound on the spectral norm from the multiplier sizes.
    pub fn norm_bound(&self, grid: &PeriodicGrid<T>) -> T {
        let kmax = grid.kappa_max();
        let max_abs = |v: &[T]| v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let mut bound = self.kinetic.abs() * kmax * kmax;
        if let Some(d) = &self.diag {
            bound = bound + max_abs(d);
        }
        for t in &self.terms {
            bound = bound + t.coef.abs() * max_abs(&t.f) * kmax.powi(t.order as i32);
        }
        bound
    }
}

/// The four step-independent generators `R0..R3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Generator {
    /// `R0 = ½ i ε ∂²`, exponent power 1.
    Kinetic,
    /// `R1 = −½ i ε⁻¹ V`, exponent power 1.
    Potential,
    /// `R2`, exponent power 3.
    Cubic,
    /// `R3`, exponent power 5.
    Quintic,
}

impl Generator {
    pub const ALL: [Generator; 4] = [
        Generator::Kinetic,
        Generator::Potential,
        Generator::Cubic,
        Generator::Quintic,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(j: usize) -> Option<Self> {
        Self::ALL.get(j).copied()
    }

    /// Power `n` of the step in the exponent `tⁿ R`.
    pub fn power(self) -> i32 {
        match self {
            Generator::Kinetic | Generator::Potential => 1,
            Generator::Cubic => 3,
            Generator::Quintic => 5,
        }
    }
}

/// Grid, potential and ε together with the assembled generators.
#[derive(Clone, Debug)]
pub struct SemiclassicalProblem<T: Real> {
    grid: PeriodicGrid<T>,
    potential: PotentialTable<T>,
    epsilon: T,
    generators: [SymmetricOperator<T>; 4],
    norm_bounds: [T; 4],
}

impl<T: Real> SemiclassicalProblem<T> {
    pub fn new(grid: PeriodicGrid<T>, potential: PotentialTable<T>, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if potential.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: potential.len(),
            });
        }
        let generators = assemble_generators(&potential, epsilon);
        let norm_bounds = [0, 1, 2, 3].map(|j| generators[j].norm_bound(&grid));
        Ok(Self {
            grid,
            potential,
            epsilon,
            generators,
            norm_bounds,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    pub fn potential(&self) -> &PotentialTable<T> {
        &self.potential
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// Real symmetric `A` with `R = iA`.
    pub fn symmetric_part(&self, g: Generator) -> &SymmetricOperator<T> {
        &self.generators[g.index()]
    }

    /// Cached spectral-norm bound of `R_g`.
    pub fn norm_bound(&self, g: Generator) -> T {
        self.norm_bounds[g.index()]
    }

    /// `R_g ψ`.
    pub fn apply(&self, g: Generator, psi: &WaveFunction<T>) -> Result<WaveFunction<T>> {
        self.grid.check(psi)?;
        let mut out = WaveFunction::zeros(psi.len());
        self.generators[g.index()].apply_into(&self.grid, psi.values(), out.values_mut());
        out.scale(Cplx::i());
        Ok(out)
    }

    /// `Σ c_j R_j ψ`.
    pub fn apply_combination(&self, coeffs: &[T; 4], psi: &WaveFunction<T>) -> Result<WaveFunction<T>> {
        self.grid.check(psi)?;
        let mut out = WaveFunction::zeros(psi.len());
        let mut buf = WaveFunction::zeros(psi.len());
        for (j, &c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            self.generators[j].apply_into(&self.grid, psi.values(), buf.values_mut());
            out.axpy(Cplx::new(T::zero(), c), &buf);
        }
        Ok(out)
    }

    /// `Hψ = i ε ∂²ψ − i ε⁻¹ V ψ`.
    pub fn apply_hamiltonian(&self, psi: &WaveFunction<T>) -> Result<WaveFunction<T>> {
        let two = T::lit(2.0);
        self.apply_combination(&[two, two, T::zero(), T::zero()], psi)
    }
}

fn assemble_generators<T: Real>(pot: &PotentialTable<T>, eps: T) -> [SymmetricOperator<T>; 4] {
    let inv = T::one() / eps;
    let c = |x: f64| T::lit(x);
    let scaled = |v: &[T], s: T| -> Vec<T> { v.iter().map(|&x| x * s).collect() };

    let kinetic = SymmetricOperator {
        kinetic: c(0.5) * eps,
        ..SymmetricOperator::zero()
    };

    let potential = SymmetricOperator {
        diag: Some(scaled(pot.values(), -c(0.5) * inv)),
        ..SymmetricOperator::zero()
    };

    let d4 = pot.derivative(4);
    let cubic = SymmetricOperator {
        kinetic: T::zero(),
        diag: Some(
            pot.slope_sq
                .iter()
                .zip(d4)
                .map(|(&s, &q)| c(1.0 / 12.0) * inv * s - c(1.0 / 48.0) * eps * q)
                .collect(),
        ),
        terms: vec![SymmetrizedTerm {
            coef: c(1.0 / 12.0) * eps,
            f: pot.derivative(2).to_vec(),
            order: 2,
        }],
    };

    let quintic = SymmetricOperator {
        kinetic: T::zero(),
        diag: Some(scaled(&pot.curv_slope_sq, -c(7.0 / 120.0) * inv)),
        terms: vec![
            SymmetrizedTerm {
                coef: c(1.0 / 30.0) * eps,
                f: pot.quintic_sym.clone(),
                order: 2,
            },
            SymmetrizedTerm {
                coef: -c(1.0 / 120.0) * eps * eps * eps,
                f: d4.to_vec(),
                order: 4,
            },
        ],
    };

    [kinetic, potential, cubic, quintic]
}
