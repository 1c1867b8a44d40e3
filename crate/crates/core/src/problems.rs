//! Built-in experiment problems: Gaussian wave packets, the lattice and Morse
//! potentials with closed-form derivatives, and the bump function they use.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, WaveFunction};
use crate::operators::{PotentialTable, SemiclassicalProblem};
use crate::scalar::{Cplx, Real};

/// Amplitude ratio (boundary / peak) above which a packet is reported as
/// not contained in the domain.
pub const PACKET_TAIL_WARNING: f64 = 1e-12;

/// `ρ, ρ', ρ'', ρ''', ρ''''` of `ρ(x) = exp(−1/(1−x²))` on `|x| < 1`, zero
/// elsewhere.
pub fn bump_derivatives<T: Real>(x: T) -> [T; 5] {
    let one = T::one();
    if x.abs() >= one {
        return [T::zero(); 5];
    }
    // u = 1/(x²−1) = ½(1/(x−1) − 1/(x+1)), so
    // u⁽ⁿ⁾ = ½(−1)ⁿ n! [(x−1)^{−(n+1)} − (x+1)^{−(n+1)}]
    let u = one / (x * x - one);
    let rho = u.exp();
    if rho.is_zero() {
        return [T::zero(); 5];
    }
    let (xm, xp) = (one / (x - one), one / (x + one));
    let half = T::lit(0.5);
    let du = |n: i32, fact: f64| {
        let sign = if n % 2 == 0 { one } else { -one };
        half * sign * T::lit(fact) * (xm.powi(n + 1) - xp.powi(n + 1))
    };
    let (u1, u2, u3, u4) = (du(1, 1.0), du(2, 2.0), du(3, 6.0), du(4, 24.0));
    let c = |v: f64| T::lit(v);
    [
        rho,
        u1 * rho,
        (u2 + u1 * u1) * rho,
        (u3 + c(3.0) * u1 * u2 + u1.powi(3)) * rho,
        (u4 + c(4.0) * u1 * u3 + c(3.0) * u2 * u2 + c(6.0) * u1 * u1 * u2 + u1.powi(4)) * rho,
    ]
}

pub fn bump<T: Real>(x: T) -> T {
    bump_derivatives(x)[0]
}

pub fn bump_d1<T: Real>(x: T) -> T {
    bump_derivatives(x)[1]
}

pub fn bump_d2<T: Real>(x: T) -> T {
    bump_derivatives(x)[2]
}

pub fn bump_d3<T: Real>(x: T) -> T {
    bump_derivatives(x)[3]
}

pub fn bump_d4<T: Real>(x: T) -> T {
    bump_derivatives(x)[4]
}

/// Leibniz rule for the first four derivatives of a product.
fn product_derivatives<T: Real>(f: &[T; 5], g: &[T; 5]) -> [T; 5] {
    const BINOM: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    let mut out = [T::zero(); 5];
    for (n, o) in out.iter_mut().enumerate() {
        for k in 0..=n {
            *o = *o + T::lit(BINOM[n][k]) * f[k] * g[n - k];
        }
    }
    out
}

/// `sin(ωx)` and its first four derivatives.
fn sine_derivatives<T: Real>(omega: T, x: T) -> [T; 5] {
    let (s, c) = (omega * x).sin_cos();
    let mut out = [T::zero(); 5];
    let mut w = T::one();
    for (k, o) in out.iter_mut().enumerate() {
        let base = match k % 4 {
            0 => s,
            1 => c,
            2 => -s,
            _ => -c,
        };
        *o = w * base;
        w = w * omega;
    }
    out
}

/// `ρ(a·x + b)` and its first four derivatives in `x`.
fn scaled_bump<T: Real>(a: T, b: T, x: T) -> [T; 5] {
    let mut d = bump_derivatives(a * x + b);
    let mut w = T::one();
    for v in d.iter_mut() {
        *v = *v * w;
        w = w * a;
    }
    d
}

/// `V_L(x) = ρ(4x−1)·sin(20πx) + (1/10)·ρ(x/5)·sin(4πx)` with derivatives.
pub fn lattice_potential_at<T: Real>(x: T) -> [T; 5] {
    let pi = T::PI();
    let first = product_derivatives(
        &scaled_bump(T::lit(4.0), -T::one(), x),
        &sine_derivatives(T::lit(20.0) * pi, x),
    );
    let second = product_derivatives(
        &scaled_bump(T::lit(0.2), T::zero(), x),
        &sine_derivatives(T::lit(4.0) * pi, x),
    );
    let tenth = T::lit(0.1);
    let mut out = first;
    for (o, s) in out.iter_mut().zip(second) {
        *o = *o + tenth * s;
    }
    out
}

/// `V_M(x) = (1 − e^{−(x−5)/2})²` with derivatives.
pub fn morse_potential_at<T: Real>(x: T) -> [T; 5] {
    let one = T::one();
    let e = (-(x - T::lit(5.0)) * T::lit(0.5)).exp();
    let mut out = [(one - e) * (one - e); 5];
    let two = T::lit(2.0);
    for (k, o) in out.iter_mut().enumerate().skip(1) {
        // V = 1 − 2E + E², E⁽ᵏ⁾ = (−½)ᵏE, (E²)⁽ᵏ⁾ = (−1)ᵏE²
        let sign = if k % 2 == 0 { one } else { -one };
        *o = -two * sign * T::lit(0.5).powi(k as i32) * e + sign * e * e;
    }
    out
}

fn tabulate<T: Real>(grid: &PeriodicGrid<T>, f: impl Fn(T) -> [T; 5]) -> Result<PotentialTable<T>> {
    let samples: Vec<[T; 5]> = grid.points().into_iter().map(f).collect();
    let col = |k: usize| samples.iter().map(|s| s[k]).collect::<Vec<_>>();
    PotentialTable::analytic(col(0), [col(1), col(2), col(3), col(4)])
}

pub fn lattice_potential<T: Real>(grid: &PeriodicGrid<T>) -> Result<PotentialTable<T>> {
    tabulate(grid, lattice_potential_at)
}

pub fn morse_potential<T: Real>(grid: &PeriodicGrid<T>) -> Result<PotentialTable<T>> {
    tabulate(grid, morse_potential_at)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WavePacketParams<T: Real> {
    pub delta: T,
    pub x0: T,
    pub k0: T,
}

/// `φ(x; δ, x₀, k₀) = (δπ)^{−1/4} exp(i k₀ (x−x₀)/δ − (x−x₀)²/(2δ))`.
pub fn wave_packet<T: Real>(grid: &PeriodicGrid<T>, params: &WavePacketParams<T>) -> Result<WaveFunction<T>> {
    let WavePacketParams { delta, x0, k0 } = *params;
    if !(delta > T::zero() && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "wave packet spread must be positive, got {delta}"
        )));
    }
    let norm = (delta * T::PI()).powf(T::lit(-0.25));
    let two = T::lit(2.0);
    let psi: WaveFunction<T> = grid
        .points()
        .into_iter()
        .map(|x| {
            let d = x - x0;
            Cplx::from_polar(norm * (-(d * d) / (two * delta)).exp(), k0 * d / delta)
        })
        .collect();

    let tail = |x: T| (-((x - x0) * (x - x0)) / (two * delta)).exp();
    let ratio = tail(grid.a()).max(tail(grid.b()));
    if ratio > T::lit(PACKET_TAIL_WARNING) {
        log::warn!(
            "wave packet at x0 = {x0} (delta = {delta}) reaches the boundary: tail ratio {ratio:e}"
        );
    }
    Ok(psi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PresetName {
    Lattice,
    Morse,
    /// Lattice domain and packet with `V ≡ 0`.
    Free,
}

impl PresetName {
    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Lattice => "lattice",
            PresetName::Morse => "morse",
            PresetName::Free => "free",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lattice" => Ok(PresetName::Lattice),
            "morse" => Ok(PresetName::Morse),
            "free" => Ok(PresetName::Free),
            other => Err(Error::InvalidArgument(format!("unknown problem '{other}'"))),
        }
    }
}

/// Domain, horizon, initial packet and default grids of a built-in problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemPreset {
    pub name: PresetName,
    pub a: f64,
    pub b: f64,
    pub t_final: f64,
}

impl ProblemPreset {
    pub fn lattice() -> Self {
        Self {
            name: PresetName::Lattice,
            a: -2.0,
            b: 2.0,
            t_final: 1.0,
        }
    }

    pub fn morse() -> Self {
        Self {
            name: PresetName::Morse,
            a: 3.0,
            b: 10.0,
            t_final: 20.0,
        }
    }

    pub fn free() -> Self {
        Self {
            name: PresetName::Free,
            ..Self::lattice()
        }
    }

    pub fn by_name(name: PresetName) -> Self {
        match name {
            PresetName::Lattice => Self::lattice(),
            PresetName::Morse => Self::morse(),
            PresetName::Free => Self::free(),
        }
    }

    /// Initial packet for a given ε.
    pub fn packet<T: Real>(&self, epsilon: T) -> WavePacketParams<T> {
        match self.name {
            PresetName::Lattice | PresetName::Free => WavePacketParams {
                delta: epsilon / T::lit(4.0),
                x0: T::lit(-0.75),
                k0: T::lit(0.1),
            },
            PresetName::Morse => WavePacketParams {
                delta: epsilon,
                x0: T::lit(4.5),
                k0: T::zero(),
            },
        }
    }

    /// Grid sizes used for ε ∈ {1e−2, 1e−3, 1e−4}.
    pub fn default_grid_points(&self, epsilon: f64) -> Option<usize> {
        let table: [(f64, usize); 3] = match self.name {
            PresetName::Lattice | PresetName::Free => [(1e-2, 750), (1e-3, 1750), (1e-4, 15000)],
            PresetName::Morse => [(1e-2, 500), (1e-3, 1500), (1e-4, 10000)],
        };
        table
            .iter()
            .find(|(e, _)| ((epsilon - e) / e).abs() < 1e-9)
            .map(|&(_, m)| m)
    }

    pub fn grid<T: Real>(&self, points: usize) -> Result<PeriodicGrid<T>> {
        PeriodicGrid::new(T::lit(self.a), T::lit(self.b), points)
    }

    pub fn potential<T: Real>(&self, grid: &PeriodicGrid<T>) -> Result<PotentialTable<T>> {
        match self.name {
            PresetName::Lattice => lattice_potential(grid),
            PresetName::Morse => morse_potential(grid),
            PresetName::Free => Ok(PotentialTable::zero(grid.len())),
        }
    }

    /// Problem and initial state on an `points`-point grid.
    pub fn build<T: Real>(
        &self,
        epsilon: T,
        points: usize,
    ) -> Result<(SemiclassicalProblem<T>, WaveFunction<T>)> {
        let grid = self.grid(points)?;
        let pot = self.potential(&grid)?;
        let psi0 = wave_packet(&grid, &self.packet(epsilon))?;
        Ok((SemiclassicalProblem::new(grid, pot, epsilon)?, psi0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        // fourth-order stencil
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn bump_values() {
        assert!((bump(0.0_f64) - (-1.0_f64).exp()).abs() < 1e-16);
        for x in [1.0, -1.0, 1.5, -3.0, 100.0] {
            assert_eq!(bump_derivatives(x), [0.0; 5]);
        }
        assert!(bump(0.999_999_f64) >= 0.0);
        assert!(bump_derivatives(1.0 - 1e-15_f64).iter().all(|v| v.is_finite()));
        assert!(bump_derivatives(1.0_f32 - 1e-7).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let fns: [fn(f64) -> f64; 5] = [bump, bump_d1, bump_d2, bump_d3, bump_d4];
        for x in [-0.9, -0.5, 0.5, 0.9] {
            for k in 1..5 {
                let fd = central_difference(fns[k - 1], x, 1e-4);
                let exact = fns[k](x);
                assert!(
                    (fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3),
                    "order {k} at {x}: {fd} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn potential_derivatives_match_finite_differences() {
        for (f, xs) in [
            (lattice_potential_at::<f64> as fn(f64) -> [f64; 5], [-0.1, 0.2, 0.37, 1.4]),
            (morse_potential_at::<f64>, [3.2, 4.5, 6.0, 9.0]),
        ] {
            for x in xs {
                let d = f(x);
                for (k, &dk) in d.iter().enumerate().skip(1) {
                    let fd = central_difference(|y| f(y)[k - 1], x, 1e-5);
                    let scale = dk.abs().max(1.0);
                    assert!((fd - dk).abs() <= 1e-5 * scale, "k = {k}, x = {x}");
                }
            }
        }
    }

    #[test]
    fn potential_landmarks() {
        let m = morse_potential_at(5.0_f64);
        assert_eq!(m[0], 0.0);
        assert_eq!(m[1], 0.0);
        let l = lattice_potential_at(-0.75_f64);
        assert!(l[0].abs() < 1e-15);
        // slowly varying tail dominates near the boundary
        let edge = lattice_potential_at(2.0_f64)[0].abs();
        assert!(edge <= 0.1 * bump(0.4) + 1e-15);
    }

    #[test]
    fn lattice_derivatives_match_spectral_oracle() {
        let grid = PeriodicGrid::<f64>::new(-2.0, 2.0, 4096).unwrap();
        let table = lattice_potential(&grid).unwrap();
        let xs = grid.points();
        for k in 1..=4 {
            let spectral = grid.spectral_derivative_real(table.values(), k).unwrap();
            let peak = table.derivative(k).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let mut worst = 0.0_f64;
            for (j, &x) in xs.iter().enumerate() {
                // interior of the fast lattice term's support
                if !(0.05..=0.45).contains(&x) {
                    continue;
                }
                let exact: f64 = table.derivative(k)[j];
                worst = worst.max((spectral[j] - exact).abs() / peak);
            }
            assert!(worst < 1e-7, "order {k}: {worst:e}");
        }
    }

    #[test]
    fn wave_packet_properties() {
        let grid = PeriodicGrid::<f64>::new(-2.0, 2.0, 1024).unwrap();
        let p = WavePacketParams { delta: 0.01, x0: 0.0, k0: 0.0 };
        let psi = wave_packet(&grid, &p).unwrap();
        let center = psi[512];
        assert!((center.re - (0.01 * PI).powf(-0.25)).abs() < 1e-12);
        assert!((grid.l2_norm(&psi) - 1.0).abs() < 1e-8);

        let moving = wave_packet(&grid, &WavePacketParams { k0: 0.7, ..p }).unwrap();
        for (a, b) in psi.iter().zip(moving.iter()) {
            assert!((a.norm() - b.norm()).abs() < 1e-13);
        }
        assert!(wave_packet(&grid, &WavePacketParams { delta: 0.0, ..p }).is_err());
        assert!(wave_packet(&grid, &WavePacketParams { delta: -1.0, ..p }).is_err());
    }

    #[test]
    fn presets() {
        let l = ProblemPreset::lattice();
        assert_eq!((l.a, l.b, l.t_final), (-2.0, 2.0, 1.0));
        let pk = l.packet(1e-2_f64);
        assert_eq!((pk.delta, pk.x0, pk.k0), (2.5e-3, -0.75, 0.1));
        assert_eq!(l.default_grid_points(1e-2), Some(750));
        assert_eq!(l.default_grid_points(1e-4), Some(15000));
        let m = ProblemPreset::morse();
        assert_eq!((m.a, m.b, m.t_final), (3.0, 10.0, 20.0));
        let pk = m.packet(1e-2_f64);
        assert_eq!((pk.delta, pk.x0, pk.k0), (1e-2, 4.5, 0.0));
        assert_eq!(m.default_grid_points(1e-3), Some(1500));
        assert_eq!(m.default_grid_points(0.5), None);
        assert_eq!("Morse".parse::<PresetName>().unwrap(), PresetName::Morse);
        assert!("harmonic".parse::<PresetName>().is_err());

        let (problem, psi0) = l.build(1e-2_f64, 750).unwrap();
        assert_eq!(problem.grid().len(), 750);
        assert!((problem.grid().l2_norm(&psi0) - 1.0).abs() < 1e-8);
        let (free, _) = ProblemPreset::free().build(1e-2_f64, 64).unwrap();
        assert!(free.potential().is_zero());
    }
}
