//! Dense reference propagation for small grids.
//!
//! The discrete Hamiltonian is `H = iA` with `A = ε𝒦₂ − ε⁻¹ diag(V)` real
//! symmetric, so `exp(tH) = Q exp(itΛ) Qᵀ` from one eigendecomposition
//! `A = QΛQᵀ`, reused for every `t`. `𝒦₂` is assembled from a direct cosine
//! sum of the multiplier `−κ²`, independently of the FFT path.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, WaveFunction};
use crate::operators::{SemiclassicalProblem, SymmetricOperator};
use crate::scalar::{Cplx, Real};

/// Largest grid accepted by the dense oracle (O(M³) cost).
pub const ORACLE_MAX_POINTS: usize = 2048;

/// Eigendecomposition of a real symmetric matrix, giving `exp(i t A)`.
#[derive(Clone, Debug)]
pub struct DenseExponential {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl DenseExponential {
    pub fn from_symmetric(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(Error::Eigen(format!("matrix is {n}×{}", matrix.ncols())));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotFinite("dense oracle matrix"));
        }
        let eig = SymmetricEigen::try_new(matrix, f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
        Ok(Self {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    /// Dense matrix of a [`SymmetricOperator`] by applying it to unit vectors.
    pub fn from_operator<T: Real>(grid: &PeriodicGrid<T>, op: &SymmetricOperator<T>) -> Result<Self> {
        let m = grid.len();
        if m > ORACLE_MAX_POINTS {
            return Err(Error::OracleTooLarge {
                points: m,
                cap: ORACLE_MAX_POINTS,
            });
        }
        let mut matrix = DMatrix::<f64>::zeros(m, m);
        let mut unit = vec![Cplx::new(T::zero(), T::zero()); m];
        let mut col = unit.clone();
        for j in 0..m {
            unit[j] = Cplx::new(T::one(), T::zero());
            op.apply_into(grid, &unit, &mut col);
            for (i, z) in col.iter().enumerate() {
                matrix[(i, j)] = z.re.as_f64();
            }
            unit[j] = Cplx::new(T::zero(), T::zero());
        }
        // symmetrize away rounding
        let sym = (&matrix + matrix.transpose()) * 0.5;
        Self::from_symmetric(sym)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `exp(i t A) ψ`.
    pub fn apply<T: Real>(&self, t: f64, psi: &WaveFunction<T>) -> Result<WaveFunction<T>> {
        let n = self.dim();
        if psi.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: psi.len(),
            });
        }
        let re = DVector::from_iterator(n, psi.iter().map(|z| z.re.as_f64()));
        let im = DVector::from_iterator(n, psi.iter().map(|z| z.im.as_f64()));
        let q = &self.eigenvectors;
        let cr = q.tr_mul(&re);
        let ci = q.tr_mul(&im);
        // (cr + i ci)·e^{itλ}
        let mut pr = DVector::zeros(n);
        let mut pi = DVector::zeros(n);
        for k in 0..n {
            let (s, c) = (t * self.eigenvalues[k]).sin_cos();
            pr[k] = cr[k] * c - ci[k] * s;
            pi[k] = cr[k] * s + ci[k] * c;
        }
        let out_r = q * pr;
        let out_i = q * pi;
        Ok(out_r
            .iter()
            .zip(out_i.iter())
            .map(|(&a, &b)| Cplx::new(T::lit(a), T::lit(b)))
            .collect())
    }
}

/// Exact (to rounding) discrete propagator of a [`SemiclassicalProblem`].
#[derive(Clone, Debug)]
pub struct ReferenceOracle {
    exp: DenseExponential,
}

impl ReferenceOracle {
    pub fn new<T: Real>(problem: &SemiclassicalProblem<T>) -> Result<Self> {
        let grid = problem.grid();
        let m = grid.len();
        if m > ORACLE_MAX_POINTS {
            return Err(Error::OracleTooLarge {
                points: m,
                cap: ORACLE_MAX_POINTS,
            });
        }
        let eps = problem.epsilon().as_f64();
        let kappa: Vec<f64> = grid.kappa().iter().map(|k| k.as_f64()).collect();
        // circulant column of 𝒦₂: c_d = (1/M) Σ_q −κ_q² cos(2π q d / M)
        let column: Vec<f64> = (0..m)
            .map(|d| {
                let s: f64 = kappa
                    .iter()
                    .enumerate()
                    .map(|(q, k)| {
                        let phase = std::f64::consts::TAU * ((q * d) % m) as f64 / m as f64;
                        -k * k * phase.cos()
                    })
                    .sum();
                s / m as f64
            })
            .collect();
        let v = problem.potential().values();
        let mut a = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            for l in 0..m {
                a[(j, l)] = eps * column[(j + m - l) % m];
            }
            a[(j, j)] -= v[j].as_f64() / eps;
        }
        Ok(Self {
            exp: DenseExponential::from_symmetric(a)?,
        })
    }

    /// `exp(t H) ψ₀`.
    pub fn propagate<T: Real>(&self, psi0: &WaveFunction<T>, t: f64) -> Result<WaveFunction<T>> {
        self.exp.apply(t, psi0)
    }
}

/// One-shot dense solve; prefer [`ReferenceOracle`] when reusing the
/// decomposition.
pub fn reference_solve<T: Real>(
    psi0: &WaveFunction<T>,
    t_final: f64,
    problem: &SemiclassicalProblem<T>,
) -> Result<WaveFunction<T>> {
    ReferenceOracle::new(problem)?.propagate(psi0, t_final)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Generator, PotentialTable};
    use crate::problems::ProblemPreset;
    use crate::testutil::*;

    #[test]
    fn free_propagation_matches_fourier() {
        let eps = 0.05;
        let grid = PeriodicGrid::<f64>::new(0.0, 2.0, 64).unwrap();
        let p = SemiclassicalProblem::new(grid.clone(), PotentialTable::zero(64), eps).unwrap();
        let psi = random_wave(64, 5);
        let t = 0.37;
        let out = reference_solve(&psi, t, &p).unwrap();
        let mut hat = psi.values().to_vec();
        grid.forward(&mut hat);
        for (z, k) in hat.iter_mut().zip(grid.kappa()) {
            *z *= C::from_polar(1.0, -eps * k * k * t);
        }
        grid.inverse(&mut hat);
        let exact = WaveFunction::from_vec(hat);
        assert!(grid.l2_distance(&out, &exact) < 1e-10 * grid.l2_norm(&psi));
    }

    #[test]
    fn identity_at_zero_norm_and_composition() {
        let (p, psi0) = ProblemPreset::lattice().build(1e-2, 128).unwrap();
        let oracle = ReferenceOracle::new(&p).unwrap();
        let same = oracle.propagate(&psi0, 0.0).unwrap();
        assert!(max_abs_diff(&same, &psi0) < 1e-12);
        let n0 = p.grid().l2_norm(&psi0);
        let a = oracle.propagate(&psi0, 0.3).unwrap();
        assert!((p.grid().l2_norm(&a) - n0).abs() < 1e-12);
        let b = oracle.propagate(&a, 0.2).unwrap();
        let c = oracle.propagate(&psi0, 0.5).unwrap();
        assert!(p.grid().l2_distance(&b, &c) < 1e-10);
    }

    #[test]
    fn cap_enforced() {
        let grid = PeriodicGrid::<f64>::new(0.0, 1.0, 2050).unwrap();
        let p = SemiclassicalProblem::new(grid, PotentialTable::zero(2050), 1.0).unwrap();
        assert!(matches!(
            ReferenceOracle::new(&p),
            Err(Error::OracleTooLarge { points: 2050, .. })
        ));
    }

    #[test]
    fn operator_matrix_agrees_with_hamiltonian_assembly() {
        // exp(itA) from the operator route equals the oracle for A = H/i
        let (p, psi0) = ProblemPreset::morse().build(1e-1, 64).unwrap();
        let oracle = ReferenceOracle::new(&p).unwrap();
        let k = DenseExponential::from_operator(p.grid(), p.symmetric_part(Generator::Kinetic)).unwrap();
        let v = DenseExponential::from_operator(p.grid(), p.symmetric_part(Generator::Potential)).unwrap();
        // with V: exp(tH) ≠ exp(2tA0)exp(2tA1) in general, but for tiny t both
        // agree to O(t²)
        let t = 1e-6;
        let split = v.apply(2.0 * t, &k.apply(2.0 * t, &psi0).unwrap()).unwrap();
        let exact = oracle.propagate(&psi0, t).unwrap();
        assert!(p.grid().l2_distance(&split, &exact) < 1e-6);
    }
}
