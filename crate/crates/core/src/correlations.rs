//! Edge-spin correlations. `ρ₁₃ = Tr₂ ρ` is an X state
//!
//! ```text
//!          ⎛1+r+s+c₃    0        0      c₁−c₂ ⎞
//! ρ₁₃ = ¼  ⎜  0      1+r−s−c₃  c₁+c₂     0    ⎟
//!          ⎜  0       c₁+c₂  1−r+s−c₃    0    ⎟
//!          ⎝c₁−c₂      0        0     1−r−s+c₃⎠
//! ```
//!
//! and every measure below is a closed form in `(r, s, c₁, c₂, c₃)`. The
//! [`oracle`] submodule recomputes each one from a generic 4×4 matrix.
//! Entropies are in bits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{partial_trace, ComplexMatrix, C64};
use crate::model::{gibbs_state, thermal_functionals, ModelParams, Temperature, ThermalFunctionals};

/// Entries that must vanish in an X state are allowed this much.
pub const X_STRUCTURE_TOL: f64 = 1e-12;

/// Eigenvalues in `[−EIGEN_CLAMP, 0)` are treated as 0.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Allowed disagreement between the functional and matrix-entry coefficients.
pub const COEFFICIENT_TOL: f64 = 1e-9;

/// Allowed excess of the closed-form discord over the numeric minimum.
pub const DISCORD_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("expected a 4x4 matrix, got {0}x{0}")]
    NotTwoQubit(usize),
    #[error("entry ({0},{1}) = {2:e} breaks the X structure")]
    NotXState(usize, usize, f64),
    #[error("{what}: functional value {functional} vs matrix value {matrix}")]
    Inconsistent { what: &'static str, functional: f64, matrix: f64 },
    #[error("eigenvalue {0:e} is negative beyond clamping")]
    NegativeEigenvalue(f64),
    #[error("concurrence radicand {0:e} is negative")]
    NegativeRadicand(f64),
    #[error("closed-form discord {closed} exceeds numeric minimum {numeric}")]
    DiscordMismatch { closed: f64, numeric: f64 },
}

/// Bloch and correlation coefficients of an X state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XStateParams {
    pub r: f64,
    pub s: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// Positions that vanish in an X state.
const OFF_X: [(usize, usize); 8] = [(0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (2, 3), (3, 1), (3, 2)];

impl XStateParams {
    /// Reads the coefficients off a 4×4 matrix, rejecting anything outside the X pattern.
    pub fn from_matrix(rho: &ComplexMatrix) -> Result<Self, CorrelationError> {
        if rho.dim() != 4 {
            return Err(CorrelationError::NotTwoQubit(rho.dim()));
        }
        for (i, j) in OFF_X {
            let v = rho[(i, j)].norm();
            if v > X_STRUCTURE_TOL {
                return Err(CorrelationError::NotXState(i, j, v));
            }
        }
        for (i, j) in [(0, 3), (1, 2)] {
            let v = rho[(i, j)].im;
            if v.abs() > X_STRUCTURE_TOL {
                return Err(CorrelationError::NotXState(i, j, v));
            }
        }
        let d = |i: usize| rho[(i, i)].re;
        Ok(Self {
            r: d(0) + d(1) - d(2) - d(3),
            s: d(0) - d(1) + d(2) - d(3),
            c1: 2.0 * (rho[(0, 3)].re + rho[(1, 2)].re),
            c2: 2.0 * (rho[(1, 2)].re - rho[(0, 3)].re),
            c3: d(0) - d(1) - d(2) + d(3),
        })
    }

    /// Coefficients from the thermal functionals of the chain.
    pub fn from_functionals(tf: &ThermalFunctionals) -> Self {
        let [f1, _, f3, f4, _, f6] = tf.f_vals;
        let [j1, _, j3, j4, _, j6] = tf.j_vals;
        let (p2, p5) = (tf.p[2], tf.p[5]);
        Self {
            r: -tf.r_fn,
            s: -tf.r_fn,
            c1: f4 + j4 + f3 + j3 - p2 - p5,
            c2: -tf.a_fn,
            c3: 0.5 * (f1 + j1 + f6 + j6) - (f3 + j3 + p2 + p5),
        }
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        let Self { r, s, c1, c2, c3 } = *self;
        let mut m = ComplexMatrix::zeros(4);
        m[(0, 0)] = C64::new(0.25 * (1.0 + r + s + c3), 0.0);
        m[(1, 1)] = C64::new(0.25 * (1.0 + r - s - c3), 0.0);
        m[(2, 2)] = C64::new(0.25 * (1.0 - r + s - c3), 0.0);
        m[(3, 3)] = C64::new(0.25 * (1.0 - r - s + c3), 0.0);
        let anti = C64::new(0.25 * (c1 - c2), 0.0);
        let inner = C64::new(0.25 * (c1 + c2), 0.0);
        m[(0, 3)] = anti;
        m[(3, 0)] = anti;
        m[(1, 2)] = inner;
        m[(2, 1)] = inner;
        m
    }

    /// `Λ₁ … Λ₄`.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let Self { r, s, c1, c2, c3 } = *self;
        let inner = (c1 + c2).hypot(r - s);
        let outer = (c1 - c2).hypot(r + s);
        [
            0.25 * (1.0 - c3 - inner),
            0.25 * (1.0 - c3 + inner),
            0.25 * (1.0 + c3 - outer),
            0.25 * (1.0 + c3 + outer),
        ]
    }

    /// The partial transpose on qubit 1 is the same family with `c₂ → −c₂`.
    pub fn partial_transposed(&self) -> Self {
        Self { c2: -self.c2, ..*self }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [self.r - other.r, self.s - other.s, self.c1 - other.c1, self.c2 - other.c2, self.c3 - other.c3]
            .iter()
            .fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// `ρ₁₃` together with its coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub matrix: ComplexMatrix,
    pub x: XStateParams,
}

/// Traces out qubit 2 and cross-checks the matrix entries against the functional formulas.
pub fn reduced_state_13(params: ModelParams, temp: Temperature) -> Result<ReducedState, CorrelationError> {
    let matrix = partial_trace(&gibbs_state(params, temp), &[1, 3]).expect("three-qubit state");
    let read = XStateParams::from_matrix(&matrix)?;
    let x = XStateParams::from_functionals(&thermal_functionals(params, temp));
    for (what, functional, matrix_value) in [
        ("r", x.r, read.r),
        ("s", x.s, read.s),
        ("c1", x.c1, read.c1),
        ("c2", x.c2, read.c2),
        ("c3", x.c3, read.c3),
    ] {
        if (functional - matrix_value).abs() > COEFFICIENT_TOL {
            return Err(CorrelationError::Inconsistent { what, functional, matrix: matrix_value });
        }
    }
    Ok(ReducedState { matrix, x })
}

fn clamp_radicand(v: f64) -> Result<f64, CorrelationError> {
    if v < -1e-10 {
        Err(CorrelationError::NegativeRadicand(v))
    } else {
        Ok(v.max(0.0))
    }
}

/// `√Λ_{i,C}`, the square roots of the eigenvalues of `ρ ρ̃`.
pub fn spin_flip_roots(x: &XStateParams) -> Result<[f64; 4], CorrelationError> {
    let XStateParams { r, s, c1, c2, c3 } = *x;
    let outer = clamp_radicand((1.0 + c3).powi(2) - (r + s).powi(2))?.sqrt();
    let inner = clamp_radicand((1.0 - c3).powi(2) - (r - s).powi(2))?.sqrt();
    Ok([
        0.25 * (c1 - c2 - outer).abs(),
        0.25 * (c1 - c2 + outer).abs(),
        0.25 * (c1 + c2 - inner).abs(),
        0.25 * (c1 + c2 + inner).abs(),
    ])
}

/// `max{2 max_i √Λ_{i,C} − Σ_i √Λ_{i,C}, 0}`.
pub fn concurrence(x: &XStateParams) -> Result<f64, CorrelationError> {
    let roots = spin_flip_roots(x)?;
    let top = roots.iter().copied().fold(0.0, f64::max);
    let sum: f64 = roots.iter().sum();
    Ok((2.0 * top - sum).max(0.0))
}

/// Sum of the magnitudes of the negative partial-transpose eigenvalues.
pub fn negativity(x: &XStateParams) -> f64 {
    x.partial_transposed().eigenvalues().iter().map(|l| 0.5 * (l.abs() - l)).sum()
}

fn clamp_eigen(l: f64) -> Result<f64, CorrelationError> {
    if l < -EIGEN_CLAMP {
        Err(CorrelationError::NegativeEigenvalue(l))
    } else {
        Ok(l.max(0.0))
    }
}

fn xlog2x(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// `h(x)`: entropy of the spectrum `{(1+x)/2, (1−x)/2}`.
pub fn binary_entropy(x: f64) -> f64 {
    let x = x.abs().min(1.0);
    -xlog2x(0.5 * (1.0 + x)) - xlog2x(0.5 * (1.0 - x))
}

fn eigen_xlogx(x: &XStateParams) -> Result<f64, CorrelationError> {
    x.eigenvalues().iter().map(|&l| clamp_eigen(l).map(xlog2x)).sum()
}

/// `I = h(r) + h(s) + Σ Λ_i log Λ_i`.
pub fn mutual_information(x: &XStateParams) -> Result<f64, CorrelationError> {
    Ok(binary_entropy(x.r) + binary_entropy(x.s) + eigen_xlogx(x)?)
}

/// Closed-form `(D₁₃, J₁₃)` with the measurement on qubit 1 along `x̂`.
pub fn discord(x: &XStateParams) -> Result<(f64, f64), CorrelationError> {
    let conditional = binary_entropy(x.r.hypot(x.c1));
    let classical = binary_entropy(x.r) - conditional;
    let discord = binary_entropy(x.r) + eigen_xlogx(x)? + conditional;
    Ok((discord, classical))
}

/// [`discord`] cross-checked against the numerically minimized conditional entropy.
pub fn discord_checked(x: &XStateParams) -> Result<(f64, f64), CorrelationError> {
    let (closed, classical) = discord(x)?;
    let numeric = oracle::numeric_discord(&x.to_matrix(), oracle::MeasuredQubit::First);
    if closed - numeric.discord > DISCORD_TOL {
        return Err(CorrelationError::DiscordMismatch { closed, numeric: numeric.discord });
    }
    Ok((closed, classical))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub concurrence: f64,
    pub negativity: f64,
    pub mutual_information: f64,
    pub classical_correlations: f64,
    pub discord: f64,
}

/// Rounding noise below zero on a non-negative quantity.
fn snap_nonnegative(v: f64) -> f64 {
    if v < 0.0 && v > -EIGEN_CLAMP {
        0.0
    } else {
        v
    }
}

impl CorrelationReport {
    /// Entropic entries within `EIGEN_CLAMP` below zero are reported as zero.
    pub fn from_x_state(x: &XStateParams) -> Result<Self, CorrelationError> {
        let (discord, classical_correlations) = discord(x)?;
        Ok(Self {
            concurrence: concurrence(x)?,
            negativity: negativity(x),
            mutual_information: snap_nonnegative(mutual_information(x)?),
            classical_correlations: snap_nonnegative(classical_correlations),
            discord: snap_nonnegative(discord),
        })
    }
}

pub fn correlation_report(params: ModelParams, temp: Temperature) -> Result<CorrelationReport, CorrelationError> {
    CorrelationReport::from_x_state(&reduced_state_13(params, temp)?.x)
}

/// Generic two-qubit evaluations that ignore the X structure.
pub mod oracle {
    use serde::{Deserialize, Serialize};

    use crate::linalg::{eigvalsh2, hermitian_eig, kron, partial_trace, partial_transpose_first, pauli, Axis, ComplexMatrix, C64};
    use crate::optimize::{nelder_mead, NelderMeadOptions};

    /// Eigenvalues below this are zeroed before taking square roots.
    const SQRT_FLOOR: f64 = 1e-14;

    fn sqrt_psd(rho: &ComplexMatrix) -> ComplexMatrix {
        hermitian_eig(rho).expect("Hermitian input").map(|l| if l < SQRT_FLOOR { 0.0 } else { l.sqrt() })
    }

    /// Wootters concurrence from the singular values of `√ρ (σʸ⊗σʸ) √ρ*`.
    ///
    /// The singular values come from the Hermitian dilation `[[0, A], [A†, 0]]`,
    /// which keeps full precision where `eig(ρρ̃)` would lose half the digits.
    pub fn wootters_concurrence(rho: &ComplexMatrix) -> f64 {
        let yy = kron(&pauli(Axis::Y), &pauli(Axis::Y));
        let root = sqrt_psd(rho);
        let a = &(&root * &yy) * &root.conj();
        let a_dag = a.adjoint();
        let dilation = ComplexMatrix::from_fn(8, |i, j| match (i < 4, j < 4) {
            (true, false) => a[(i, j - 4)],
            (false, true) => a_dag[(i - 4, j)],
            _ => C64::new(0.0, 0.0),
        });
        let eig = hermitian_eig(&dilation).expect("Hermitian dilation");
        let sv: Vec<f64> = eig.eigenvalues.iter().rev().take(4).map(|s| s.max(0.0)).collect();
        (sv[0] - sv[1] - sv[2] - sv[3]).max(0.0)
    }

    pub fn negativity_partial_transpose(rho: &ComplexMatrix) -> f64 {
        let pt = partial_transpose_first(rho).expect("4x4 input");
        hermitian_eig(&pt).expect("Hermitian").eigenvalues.iter().map(|l| 0.5 * (l.abs() - l)).sum()
    }

    fn entropy_of(eigenvalues: &[f64]) -> f64 {
        eigenvalues.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
    }

    /// Von Neumann entropy in bits.
    pub fn von_neumann_entropy(rho: &ComplexMatrix) -> f64 {
        entropy_of(&hermitian_eig(rho).expect("Hermitian").eigenvalues)
    }

    /// `S(ρ₁) + S(ρ₃) − S(ρ₁₃)` by diagonalization.
    pub fn mutual_information_eigen(rho: &ComplexMatrix) -> f64 {
        let first = partial_trace(rho, &[1]).expect("two qubits");
        let second = partial_trace(rho, &[2]).expect("two qubits");
        von_neumann_entropy(&first) + von_neumann_entropy(&second) - von_neumann_entropy(rho)
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
    pub enum MeasuredQubit {
        First,
        Second,
    }

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    pub struct NumericDiscord {
        pub discord: f64,
        pub classical: f64,
        /// `Σ_α q_α S(ρ_{·|α})` at the minimizer.
        pub conditional_entropy: f64,
        pub theta: f64,
        pub phi: f64,
    }

    /// Average entropy of the unmeasured qubit after a projective measurement along `(θ, φ)`.
    pub fn conditional_entropy(rho: &ComplexMatrix, measured: MeasuredQubit, theta: f64, phi: f64) -> f64 {
        let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        [1.0, -1.0]
            .iter()
            .map(|&alpha| {
                let proj = (&ComplexMatrix::identity(2) + &crate::linalg::pauli_dot(n.map(|c| alpha * c))).scale_re(0.5);
                let (op, keep) = match measured {
                    MeasuredQubit::First => (kron(&proj, &ComplexMatrix::identity(2)), 2),
                    MeasuredQubit::Second => (kron(&ComplexMatrix::identity(2), &proj), 1),
                };
                let unnormalized = partial_trace(&(&op * rho), &[keep]).expect("two qubits").hermitian_part();
                let q = unnormalized.trace().re;
                if q <= 0.0 {
                    return 0.0;
                }
                let [l0, l1] = eigvalsh2(&unnormalized);
                q * entropy_of(&[l0 / q, l1 / q])
            })
            .sum()
    }

    /// Resolution of the seeding grid over `θ ∈ [0, π]`, `φ ∈ [0, π)`.
    pub const DISCORD_GRID: usize = 64;

    /// Discord by minimizing the conditional entropy on a grid, then refining with a simplex.
    pub fn numeric_discord(rho: &ComplexMatrix, measured: MeasuredQubit) -> NumericDiscord {
        let n = DISCORD_GRID;
        let pi = std::f64::consts::PI;
        let mut seeds: Vec<(f64, f64, f64)> = Vec::with_capacity(n * n);
        for i in 0..n {
            let theta = pi * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let phi = pi * j as f64 / n as f64;
                seeds.push((conditional_entropy(rho, measured, theta, phi), theta, phi));
            }
        }
        seeds.sort_by(|a, b| a.0.total_cmp(&b.0));

        let opts = NelderMeadOptions { initial_step: pi / n as f64, x_tol: 1e-10, f_tol: 1e-16, max_evals: 4_000 };
        let mut best = seeds[0];
        for &(_, theta, phi) in seeds.iter().take(3) {
            let m = nelder_mead(|x| conditional_entropy(rho, measured, x[0], x[1]), &[theta, phi], opts);
            if m.value < best.0 {
                best = (m.value, m.x[0], m.x[1]);
            }
        }

        let (unmeasured_keep, _) = match measured {
            MeasuredQubit::First => (2, 1),
            MeasuredQubit::Second => (1, 2),
        };
        let unmeasured = partial_trace(rho, &[unmeasured_keep]).expect("two qubits");
        let mutual = mutual_information_eigen(rho);
        let classical = von_neumann_entropy(&unmeasured) - best.0;
        NumericDiscord { discord: mutual - classical, classical, conditional_entropy: best.0, theta: best.1, phi: best.2 }
    }
}
