//! One step of a palindromic Zassenhaus product, its time derivative and
//! the classical and symmetrized defects.
//!
//! A scheme is a list of stages `E_k(h) = exp(c_k W_k)` with
//! `W = 2hR0, 2hR1, 2h³R2, h⁵R3`, applied right to left:
//!
//! ```text
//! zass6:  S0 S1 S2 S3 S2 S1 S0     (each Sj(h) = exp(hⁿʲ Rj))
//! zass4:  S0 S1 exp(2h³R2) S1 S0
//! ```
//!
//! The step keeps the states `v_i` after stages `1, 3, 5, …` and the
//! vectors `w_i = (G_s + G_{s+1}) v_i`, where `G_k = ∂_h` of the exponent of
//! stage `k`. The derivative is then a Horner sweep
//! `acc ← E_{s+2}E_{s+1} acc + w_{i+1}` costing one exponential per stage
//! after the first.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::expo::{ExpCounter, LanczosConfig};
use crate::grid::WaveFunction;
use crate::operators::{Generator, SemiclassicalProblem};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stage {
    pub generator: Generator,
    /// Power `n` of `h` in the exponent.
    pub power: i32,
    /// Factor in front of `W_j`.
    pub coefficient: f64,
}

impl Stage {
    pub const fn new(generator: Generator, power: i32, coefficient: f64) -> Self {
        Self {
            generator,
            power,
            coefficient,
        }
    }

    /// Factor `a` in `exp(a hⁿ R_j)`.
    pub fn weight(&self) -> f64 {
        match self.generator {
            Generator::Quintic => self.coefficient,
            _ => 2.0 * self.coefficient,
        }
    }

    fn exponent<T: Real>(&self, h: T) -> T {
        T::lit(self.weight()) * h.powi(self.power)
    }

    /// `∂_h` of the exponent, as a multiple of `R_j`: `a n hⁿ⁻¹`.
    fn rate<T: Real>(&self, h: T) -> T {
        T::lit(self.weight() * f64::from(self.power)) * h.powi(self.power - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeName {
    Zass6,
    Zass4,
}

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeName::Zass6 => "zass6",
            SchemeName::Zass4 => "zass4",
        })
    }
}

impl FromStr for SchemeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zass6" => Ok(SchemeName::Zass6),
            "zass4" => Ok(SchemeName::Zass4),
            other => Err(Error::InvalidArgument(format!(
                "unknown scheme '{other}' (expected zass6 or zass4)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSpec {
    stages: Vec<Stage>,
    order: u32,
}

impl SchemeSpec {
    /// Checks that the stage list is a palindrome of odd length.
    pub fn new(stages: Vec<Stage>, order: u32) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidArgument("scheme has no stages".into()));
        }
        if order == 0 {
            return Err(Error::InvalidArgument("scheme order must be positive".into()));
        }
        for s in &stages {
            if s.power < 1 || !(s.coefficient.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad stage {s:?}")));
            }
        }
        let k = stages.len();
        if k.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "scheme needs an odd number of stages, got {k}"
            )));
        }
        for i in 0..k / 2 {
            if stages[i] != stages[k - 1 - i] {
                return Err(Error::InvalidArgument(format!(
                    "stages {i} and {} differ, scheme is not palindromic",
                    k - 1 - i
                )));
            }
        }
        Ok(Self { stages, order })
    }

    pub fn zass6() -> Self {
        use Generator::*;
        Self::new(
            vec![
                Stage::new(Kinetic, 1, 0.5),
                Stage::new(Potential, 1, 0.5),
                Stage::new(Cubic, 3, 0.5),
                Stage::new(Quintic, 5, 1.0),
                Stage::new(Cubic, 3, 0.5),
                Stage::new(Potential, 1, 0.5),
                Stage::new(Kinetic, 1, 0.5),
            ],
            4,
        )
        .expect("zass6 is palindromic")
    }

    pub fn zass4() -> Self {
        use Generator::*;
        Self::new(
            vec![
                Stage::new(Kinetic, 1, 0.5),
                Stage::new(Potential, 1, 0.5),
                Stage::new(Cubic, 3, 1.0),
                Stage::new(Potential, 1, 0.5),
                Stage::new(Kinetic, 1, 0.5),
            ],
            4,
        )
        .expect("zass4 is palindromic")
    }

    pub fn by_name(name: SchemeName) -> Self {
        match name {
            SchemeName::Zass6 => Self::zass6(),
            SchemeName::Zass4 => Self::zass4(),
        }
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Order `p` used for error estimation and step control.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Exponentials in one step.
    pub fn step_cost(&self) -> usize {
        self.stages.len()
    }

    /// Exponentials for the derivative (and the classical defect).
    pub fn derivative_cost(&self) -> usize {
        self.stages.len() - 1
    }

    /// Stage positions (0-based) at which a state is stored.
    fn stations(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.stages.len()).step_by(2)
    }
}

/// Intermediates of the last completed step.
#[derive(Clone, Debug)]
pub struct StepWorkspace<T: Real> {
    /// States after stages `1, 3, 5, …`; the last one is the step output.
    pub v: Vec<WaveFunction<T>>,
    /// `w_i = (G_s + G_{s+1}) v_i`; the last is `G_K ψ₁`.
    pub w: Vec<WaveFunction<T>>,
    pub h: T,
    pub counter: ExpCounter,
    stages: usize,
}

impl<T: Real> StepWorkspace<T> {
    /// Step output `ψ₁`.
    pub fn output(&self) -> &WaveFunction<T> {
        self.v.last().expect("workspace holds at least one state")
    }

    /// Fails unless the workspace was produced by a step of size `h` with
    /// `scheme`.
    pub fn ensure(&self, h: T, scheme: &SchemeSpec) -> Result<()> {
        if self.h != h {
            return Err(Error::StaleWorkspace {
                stored: self.h.as_f64(),
                requested: h.as_f64(),
            });
        }
        if self.stages != scheme.len() {
            return Err(Error::InvalidArgument(format!(
                "workspace built for {} stages, scheme has {}",
                self.stages,
                scheme.len()
            )));
        }
        Ok(())
    }
}

fn apply_stage<T: Real>(
    stage: &Stage,
    h: T,
    psi: &WaveFunction<T>,
    problem: &SemiclassicalProblem<T>,
    cfg: &LanczosConfig,
    counter: &mut ExpCounter,
) -> Result<WaveFunction<T>> {
    problem.exp_generator(stage.generator, stage.exponent(h), psi, cfg, counter)
}

/// `(Σ G) ψ` over the given stages.
fn apply_rates<T: Real>(
    stages: &[Stage],
    h: T,
    psi: &WaveFunction<T>,
    problem: &SemiclassicalProblem<T>,
) -> Result<WaveFunction<T>> {
    let mut coeffs = [T::zero(); 4];
    for s in stages {
        coeffs[s.generator.index()] = coeffs[s.generator.index()] + s.rate(h);
    }
    problem.apply_combination(&coeffs, psi)
}

/// `S(h)ψ₀` for the scheme, with the intermediates needed for the defects.
///
/// Any finite `h` is accepted; `h = 0` returns `ψ₀`.
pub fn step<T: Real>(
    psi0: &WaveFunction<T>,
    h: T,
    scheme: &SchemeSpec,
    problem: &SemiclassicalProblem<T>,
    cfg: &LanczosConfig,
) -> Result<(WaveFunction<T>, StepWorkspace<T>)> {
    problem.grid().check(psi0)?;
    if !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step size must be finite, got {h}")));
    }
    let stages = scheme.stages();
    let k = stages.len();
    let mut counter = ExpCounter::default();
    let mut v = Vec::with_capacity(k / 2 + 1);
    let mut w = Vec::with_capacity(k / 2 + 1);
    let mut state = psi0.clone();
    for s in scheme.stations() {
        if s > 0 {
            state = apply_stage(&stages[s - 1], h, &state, problem, cfg, &mut counter)?;
        }
        state = apply_stage(&stages[s], h, &state, problem, cfg, &mut counter)?;
        w.push(apply_rates(&stages[s..(s + 2).min(k)], h, &state, problem)?);
        v.push(state.clone());
    }
    if !state.is_finite() {
        return Err(Error::NotFinite("step output"));
    }
    Ok((
        state,
        StepWorkspace {
            v,
            w,
            h,
            counter,
            stages: k,
        },
    ))
}

/// Horner sweep `acc ← E_{s+2}E_{s+1} acc + w_i`, with `first` subtracted
/// from the first term and `last` from the last.
fn sweep<T: Real>(
    ws: &mut StepWorkspace<T>,
    first: Option<&WaveFunction<T>>,
    last: Option<&WaveFunction<T>>,
    scheme: &SchemeSpec,
    problem: &SemiclassicalProblem<T>,
    cfg: &LanczosConfig,
) -> Result<WaveFunction<T>> {
    let stages = scheme.stages();
    let n = ws.w.len();
    let term = |i: usize| {
        let mut t = ws.w[i].clone();
        if let (0, Some(f)) = (i, first) {
            t.sub_assign(f);
        }
        if i == n - 1 {
            if let Some(l) = last {
                t.sub_assign(l);
            }
        }
        t
    };
    let mut acc = term(0);
    for i in 1..n {
        let s = 2 * i;
        let t = term(i);
        acc = apply_stage(&stages[s - 1], ws.h, &acc, problem, cfg, &mut ws.counter)?;
        acc = apply_stage(&stages[s], ws.h, &acc, problem, cfg, &mut ws.counter)?;
        acc.add_assign(&t);
    }
    Ok(acc)
}

/// `∂ₜS(t)ψ₀` at `t = h`.
pub fn step_derivative<T: Real>(
    ws: &mut StepWorkspace<T>,
    h: T,
    scheme: &SchemeSpec,
    problem: &SemiclassicalProblem<T>,
    cfg: &LanczosConfig,
) -> Result<WaveFunction<T>> {
    ws.ensure(h, scheme)?;
    sweep(ws, None, None, scheme, problem, cfg)
}

/// `D_c(h)ψ₀ = ∂ₜS(h)ψ₀ − H S(h)ψ₀`.
pub fn classical_defect<T: Real>(
    ws: &mut StepWorkspace<T>,
    h: T,
    scheme: &SchemeSpec,
    problem: &SemiclassicalProblem<T>,
    cfg: &LanczosConfig,
) -> Result<WaveFunction<T>> {
    ws.ensure(h, scheme)?;
    let h_psi1 = problem.apply_hamiltonian(ws.output())?;
    sweep(ws, None, Some(&h_psi1), scheme, problem, cfg)
}

/// `D_s(h)ψ₀ = ∂ₜS(h)ψ₀ − ½(H S(h)ψ₀ + S(h) Hψ₀)`; one exponential more
/// than the classical defect.
pub fn symmetrized_defect<T: Real>(
    ws: &mut StepWorkspace<T>,
    psi0: &WaveFunction<T>,
    h: T,
    scheme: &SchemeSpec,
    problem: &SemiclassicalProblem<T>,
    cfg: &LanczosConfig,
) -> Result<WaveFunction<T>> {
    ws.ensure(h, scheme)?;
    problem.grid().check(psi0)?;
    let (one, zero) = (T::one(), T::zero());
    let half_h = [one, one, zero, zero];
    let tail = problem.apply_combination(&half_h, ws.output())?;
    // ½ S(h)Hψ₀ = E_K⋯E₂ (E₁ ½Hψ₀) enters at the first station
    let head = problem.apply_combination(&half_h, psi0)?;
    let head = apply_stage(&scheme.stages()[0], h, &head, problem, cfg, &mut ws.counter)?;
    sweep(ws, Some(&head), Some(&tail), scheme, problem, cfg)
}
