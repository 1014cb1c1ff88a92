//! The three-spin chain: Hamiltonian, closed-form spectrum, Gibbs state and
//! the thermal functionals `F_i`, `J_i` that every downstream formula uses.
//!
//! Eigenvalue labels follow the trigonometric solution of the two cubic
//! characteristic equations. With `θ = atan2(√(27[4(λ²−1)² + κ²g]), λ[16 − 9κ² − 2(λ²−1)]) ∈ [0, π]`
//! the labels come out as:
//!
//! * `E_1, E_3, E_7` are the roots of `(E+λ)(E−2−λ)(E+2−λ) = 4κ²(E−λ)` (family AC),
//! * `E_0, E_4, E_6` are the roots of the same equation with `λ → −λ` (family DF),
//! * `E_2 = −λ`, `E_5 = λ`,
//!
//! and the pairing `E_0 = −E_7`, `E_1 = −E_6`, `E_3 = −E_4` holds. The
//! assignment was pinned against the numeric eigensolver over both signs of
//! `κ` and `λ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{embed, hermitian_eig, pauli, Axis, ComplexMatrix, LinalgError, C64, ZERO};

/// `|λ|` below this is treated as exactly zero (degenerate spectrum branch).
pub const LAMBDA_ZERO_TOL: f64 = 1e-12;

/// Distance from a closed-form pole below which amplitudes are not trusted.
pub const POLE_TOL: f64 = 1e-8;

/// Relative gap below which two levels count as one degenerate ground level at `T = 0`.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0} must be finite, got {1}")]
    NonFinite(&'static str, f64),
    #[error("temperature must be >= 0, got {0}")]
    NegativeTemperature(f64),
    #[error("energy {energy} does not belong to eigenvector family {family:?}")]
    FamilyMismatch { family: EigenFamily, energy: f64 },
    #[error("closed form breaks down at energy {energy} (pole at {pole})")]
    ClosedFormBreakdown { energy: f64, pole: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Dimensionless couplings of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kappa: f64,
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(kappa: f64, lambda: f64) -> Result<Self, ModelError> {
        if !kappa.is_finite() {
            return Err(ModelError::NonFinite("kappa", kappa));
        }
        if !lambda.is_finite() {
            return Err(ModelError::NonFinite("lambda", lambda));
        }
        Ok(Self { kappa, lambda })
    }

    pub fn is_lambda_zero(&self) -> bool {
        self.lambda.abs() < LAMBDA_ZERO_TOL
    }
}

/// Dimensionless temperature; `0` means the `T → 0⁺` limit of the Gibbs family.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Temperature(f64);

impl Temperature {
    pub const ZERO: Temperature = Temperature(0.0);

    pub fn new(t: f64) -> Result<Self, ModelError> {
        if !t.is_finite() {
            return Err(ModelError::NonFinite("temperature", t));
        }
        if t < 0.0 {
            return Err(ModelError::NegativeTemperature(t));
        }
        Ok(Self(t))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

fn site_op(axis: Axis, site: usize) -> ComplexMatrix {
    embed(&pauli(axis), site).expect("valid site")
}

/// `H = κ(σ₁ˣσ₂ˣ + σ₂ˣσ₃ˣ) + σ₁ᶻ + λσ₂ᶻ + σ₃ᶻ`.
pub fn build_hamiltonian(params: ModelParams) -> ComplexMatrix {
    let xx12 = &site_op(Axis::X, 1) * &site_op(Axis::X, 2);
    let xx23 = &site_op(Axis::X, 2) * &site_op(Axis::X, 3);
    let coupling = (&xx12 + &xx23).scale_re(params.kappa);
    let field = &(&site_op(Axis::Z, 1) + &site_op(Axis::Z, 2).scale_re(params.lambda)) + &site_op(Axis::Z, 3);
    &coupling + &field
}

/// Bob's local Hamiltonian `H_B = κσ₂ˣσ₃ˣ + σ₃ᶻ`.
pub fn build_local_hb(params: ModelParams) -> ComplexMatrix {
    let xx23 = &site_op(Axis::X, 2) * &site_op(Axis::X, 3);
    &xx23.scale_re(params.kappa) + &site_op(Axis::Z, 3)
}

/// The eight energies with the intermediates of the trigonometric solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormSpectrum {
    /// `E_0 … E_7` in label order (not sorted).
    pub energies: [f64; 8],
    pub x0: f64,
    pub y0: f64,
    pub r0: f64,
    pub theta: f64,
    pub g_value: f64,
}

impl ClosedFormSpectrum {
    pub fn sorted(&self) -> [f64; 8] {
        let mut e = self.energies;
        e.sort_by(f64::total_cmp);
        e
    }
}

pub fn closed_form_spectrum(params: ModelParams) -> ClosedFormSpectrum {
    let ModelParams { kappa: k, lambda: l } = params;
    let k2 = k * k;
    let l2 = l * l;
    let r0 = 4.0 * (3.0 + 3.0 * k2 + l2).sqrt();
    let g_value = l2 * (k2 + 20.0) + 4.0 * (3.0 + 3.0 * k2 + k2 * k2);

    if params.is_lambda_zero() {
        let s = 2.0 * (1.0 + k2).sqrt();
        let theta = std::f64::consts::FRAC_PI_2;
        return ClosedFormSpectrum {
            energies: [-s, -s, 0.0, 0.0, 0.0, 0.0, s, s],
            x0: r0 * (theta / 3.0).cos(),
            y0: r0 * (theta / 3.0).sin(),
            r0,
            theta,
            g_value,
        };
    }

    let num = (27.0 * (4.0 * (l2 - 1.0).powi(2) + k2 * g_value)).sqrt();
    let den = l * (16.0 - 9.0 * k2 - 2.0 * (l2 - 1.0));
    let theta = num.atan2(den);
    let x0 = r0 * (theta / 3.0).cos();
    let y0 = r0 * (theta / 3.0).sin();
    let sqrt3 = 3f64.sqrt();

    let e0 = -(l + x0) / 3.0;
    let e1 = -e0 - 0.5 * (x0 + y0 / sqrt3);
    let e2 = -l;
    let e3 = -e0 - 0.5 * (x0 - y0 / sqrt3);
    ClosedFormSpectrum {
        energies: [e0, e1, e2, e3, -e3, -e2, -e1, -e0],
        x0,
        y0,
        r0,
        theta,
        g_value,
    }
}

/// Eigenvector families of the closed-form solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenFamily {
    /// Span of `|000⟩, |011⟩, |101⟩, |110⟩`; levels `E_1, E_3, E_7`.
    AC,
    /// Span of `|001⟩, |010⟩, |100⟩, |111⟩`; levels `E_0, E_4, E_6`.
    DF,
    /// `(−|011⟩ + |110⟩)/√2` at `E_2 = −λ`.
    E2,
    /// `(−|001⟩ + |100⟩)/√2` at `E_5 = λ`.
    E5,
}

impl EigenFamily {
    pub fn labels(self) -> &'static [usize] {
        match self {
            EigenFamily::AC => &[1, 3, 7],
            EigenFamily::DF => &[0, 4, 6],
            EigenFamily::E2 => &[2],
            EigenFamily::E5 => &[5],
        }
    }
}

/// Squared normalization factor `P_AC = 1/(h + i)` of the AC family.
fn p_ac(kappa: f64, lambda: f64, e: f64) -> f64 {
    let (a, b) = pole_offsets(kappa, lambda, e);
    p_ac_offsets(kappa, lambda, a, b)
}

fn p_ac_offsets(kappa: f64, lambda: f64, a: f64, b: f64) -> f64 {
    let h = 8.0 * (lambda * lambda - 1.0) * b * a;
    let i = 16.0 * kappa * kappa * ((a - 2.0 - lambda) * (a - 2.0) + 2.0);
    1.0 / (h + i)
}

/// `(E + 2 − λ, E − 2 − λ)` for a root `E` of the family cubic.
///
/// The smaller offset is re-solved from the cubic written in that offset, so
/// it keeps full relative precision when `E` sits next to a pole.
fn pole_offsets(kappa: f64, lambda: f64, e: f64) -> (f64, f64) {
    let k2 = 4.0 * kappa * kappa;
    let (a0, b0) = (e + 2.0 - lambda, e - 2.0 - lambda);
    let newton = |x0: f64, shift: f64, c: f64| {
        // x(x + shift)(x + c) − k2(x + shift/2) = 0
        let mut x = x0;
        for _ in 0..4 {
            let q = x * (x + shift) * (x + c) - k2 * (x + 0.5 * shift);
            let dq = (x + shift) * (x + c) + x * (x + c) + x * (x + shift) - k2;
            if dq == 0.0 {
                break;
            }
            let step = q / dq;
            if !step.is_finite() {
                break;
            }
            x -= step;
            if step.abs() <= f64::EPSILON * x.abs() {
                break;
            }
        }
        x
    };
    if a0.abs() <= b0.abs() {
        let a = newton(a0, -4.0, 2.0 * lambda - 2.0);
        (a, a - 4.0)
    } else {
        let b = newton(b0, 4.0, 2.0 * lambda + 2.0);
        (b + 4.0, b)
    }
}

fn check_poles(lambda: f64, e: f64) -> Result<(), ModelError> {
    for pole in [lambda + 2.0, lambda - 2.0] {
        if (e - pole).abs() < POLE_TOL {
            return Err(ModelError::ClosedFormBreakdown { energy: e, pole });
        }
    }
    Ok(())
}

/// Closed-form eigenvector for `energy` in the given family.
pub fn closed_form_eigenvector(
    params: ModelParams,
    family: EigenFamily,
    energy: f64,
) -> Result<[C64; 8], ModelError> {
    let spectrum = closed_form_spectrum(params);
    let tol = 1e-9 * energy.abs().max(1.0);
    if !family.labels().iter().any(|&k| (spectrum.energies[k] - energy).abs() <= tol) {
        return Err(ModelError::FamilyMismatch { family, energy });
    }
    let re = |x: f64| C64::new(x, 0.0);
    let mut v = [ZERO; 8];
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    match family {
        EigenFamily::E2 => {
            v[3] = re(-inv_sqrt2);
            v[6] = re(inv_sqrt2);
        }
        EigenFamily::E5 => {
            v[1] = re(-inv_sqrt2);
            v[4] = re(inv_sqrt2);
        }
        EigenFamily::AC | EigenFamily::DF => {
            // DF is AC with λ → −λ on the partner basis states.
            let l = if family == EigenFamily::AC { params.lambda } else { -params.lambda };
            check_poles(l, energy)?;
            let k = params.kappa;
            let first = 2.0 * k / (energy - 2.0 - l);
            let second = 2.0 * k / (energy + 2.0 - l);
            let p = p_ac(k, l, energy);
            let inv_norm = (p * (energy - l + 2.0).powi(2) * (energy - l - 2.0).powi(2)).sqrt();
            if !inv_norm.is_finite() || p <= 0.0 {
                return Err(ModelError::ClosedFormBreakdown { energy, pole: f64::NAN });
            }
            if family == EigenFamily::AC {
                v[0] = re(first * inv_norm);
                v[3] = re(inv_norm);
                v[5] = re(second * inv_norm);
                v[6] = re(inv_norm);
            } else {
                v[1] = re(inv_norm);
                v[2] = re(first * inv_norm);
                v[4] = re(inv_norm);
                v[7] = re(second * inv_norm);
            }
        }
    }
    Ok(v)
}

/// Which `σ₂ˣ` eigenvalue the separable `λ = 0` ground state carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Product ground state `|φ⟩₁|ψ⟩₂|φ⟩₃` of the `λ = 0` chain, energy `−2√(1+κ²)`.
pub fn separable_ground_state(kappa: f64, branch: Branch) -> [C64; 8] {
    let e = -2.0 * (1.0 + kappa * kappa).sqrt();
    // D and F at λ = 0, E = E_0.
    let d = 2.0 * kappa / (e + 2.0);
    let f = 2.0 * kappa / (e - 2.0);
    let sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    let (alpha, beta) = if kappa == 0.0 {
        (0.0, 1.0)
    } else {
        let alpha = (1.0 / (1.0 + d * d)).sqrt();
        let beta = (d * d / (1.0 + d * d)).sqrt() * (sign * d).signum();
        (alpha, beta)
    };
    let (gamma, delta) = if kappa == 0.0 {
        (0.0, 1.0)
    } else {
        let gamma = ((1.0 + d * d) / (d * d * (f * f + d * d + 2.0))).sqrt();
        let delta = ((1.0 + d * d) / (f * f + d * d + 2.0)).sqrt() * (sign * d).signum();
        (gamma, delta)
    };
    let q1 = [alpha, beta];
    let q2 = [std::f64::consts::FRAC_1_SQRT_2, sign * std::f64::consts::FRAC_1_SQRT_2];
    let q3 = [gamma, delta];
    let mut v = [ZERO; 8];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                v[4 * a + 2 * b + c] = C64::new(q1[a] * q2[b] * q3[c], 0.0);
            }
        }
    }
    v
}

/// Canonical weights `exp(−(E_j − E_min)/T) / Σ`, with `T = 0` giving the
/// uniform mixture over the degenerate ground level.
pub fn thermal_weights(energies: &[f64], temp: Temperature) -> (Vec<f64>, f64, f64) {
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = if temp.is_zero() {
        let tol = DEGENERACY_TOL * e_min.abs().max(1.0);
        energies.iter().map(|&e| if e - e_min <= tol { 1.0 } else { 0.0 }).collect()
    } else {
        energies.iter().map(|&e| (-(e - e_min) / temp.value()).exp()).collect()
    };
    let z: f64 = raw.iter().sum();
    (raw.iter().map(|w| w / z).collect(), z, e_min)
}

/// Gibbs state built from the numeric eigendecomposition of `H`.
pub fn gibbs_state(params: ModelParams, temp: Temperature) -> ComplexMatrix {
    let h = build_hamiltonian(params);
    let eig = hermitian_eig(&h).expect("Hamiltonian is Hermitian");
    let (p, _, _) = thermal_weights(&eig.eigenvalues, temp);
    eig.weighted(&p)
}

/// Where the `F`/`J` values were read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionalSource {
    ClosedForm,
    /// Read off the numeric Gibbs matrix because a closed-form pole was too close.
    MatrixEntries,
}

/// Scalar summary of the Gibbs state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalFunctionals {
    pub params: ModelParams,
    pub temperature: Temperature,
    /// Canonical probabilities of the labelled levels `E_0 … E_7`.
    pub p: [f64; 8],
    /// Partition function relative to the ground level: `Z · exp(E_min/T)`.
    pub partition_z: f64,
    pub ground_energy: f64,
    /// `F_1 … F_6`.
    pub f_vals: [f64; 6],
    /// `J_1 … J_6`.
    pub j_vals: [f64; 6],
    pub a_fn: f64,
    pub r_fn: f64,
    pub b_fn: f64,
    /// `𝒞₁ = F₆ − F₁`, defined at `λ = 0` only.
    pub c1: Option<f64>,
    /// `𝒞₂ = F₁ − 2F₃ + F₆ − 2p₂`, defined at `λ = 0` only.
    pub c2: Option<f64>,
    pub source: FunctionalSource,
}

/// The six polynomial weights `f_i(E)` (pass `−λ` to get `j_i`).
fn weight_functions(kappa: f64, lambda: f64, e: f64) -> [f64; 6] {
    let (a, b) = pole_offsets(kappa, lambda, e);
    let p = p_ac_offsets(kappa, lambda, a, b);
    let k = kappa;
    [
        p * 4.0 * k * k * a * a,
        p * 2.0 * k * a * a * b,
        p * a * a * b * b,
        p * 4.0 * k * k * a * b,
        p * 2.0 * k * b * b * a,
        p * 4.0 * k * k * b * b,
    ]
}

fn closed_form_fj(params: ModelParams, spectrum: &ClosedFormSpectrum, p: &[f64; 8]) -> Option<([f64; 6], [f64; 6])> {
    let l = params.lambda;
    let mut f = [0.0; 6];
    let mut j = [0.0; 6];
    for &k in EigenFamily::AC.labels() {
        let e = spectrum.energies[k];
        if check_poles(l, e).is_err() || p_ac(params.kappa, l, e) <= 0.0 {
            return None;
        }
        for (fi, w) in f.iter_mut().zip(weight_functions(params.kappa, l, e)) {
            *fi += 2.0 * w * p[k];
        }
    }
    for &k in EigenFamily::DF.labels() {
        let e = spectrum.energies[k];
        if check_poles(-l, e).is_err() || p_ac(params.kappa, -l, e) <= 0.0 {
            return None;
        }
        for (ji, w) in j.iter_mut().zip(weight_functions(params.kappa, -l, e)) {
            *ji += 2.0 * w * p[k];
        }
    }
    if f.iter().chain(&j).all(|x| x.is_finite()) {
        Some((f, j))
    } else {
        None
    }
}

/// Reads `F_i`, `J_i` off the structured Gibbs matrix.
fn matrix_fj(rho: &ComplexMatrix) -> ([f64; 6], [f64; 6]) {
    let e = |i: usize, j: usize| rho[(i, j)].re;
    let f = [
        2.0 * e(0, 0),
        2.0 * e(0, 3),
        e(3, 3) + e(3, 6),
        2.0 * e(0, 5),
        2.0 * e(3, 5),
        2.0 * e(5, 5),
    ];
    let j = [
        2.0 * e(2, 2),
        2.0 * e(1, 2),
        e(1, 1) + e(1, 4),
        2.0 * e(2, 7),
        2.0 * e(1, 7),
        2.0 * e(7, 7),
    ];
    (f, j)
}

pub fn thermal_functionals(params: ModelParams, temp: Temperature) -> ThermalFunctionals {
    let spectrum = closed_form_spectrum(params);
    let (weights, partition_z, ground_energy) = thermal_weights(&spectrum.energies, temp);
    let mut p = [0.0; 8];
    p.copy_from_slice(&weights);

    let (f, j, source) = match closed_form_fj(params, &spectrum, &p) {
        Some((f, j)) => (f, j, FunctionalSource::ClosedForm),
        None => {
            let (f, j) = matrix_fj(&gibbs_state(params, temp));
            (f, j, FunctionalSource::MatrixEntries)
        }
    };

    let a_fn = f[3] - f[2] - j[2] + j[3] + p[2] + p[5];
    let r_fn = -0.5 * (f[0] + j[0] - f[5] - j[5]);
    let b_fn = 0.5 * params.kappa * (f[1] + f[4] + j[1] + j[4]);
    let (c1, c2) = if params.is_lambda_zero() {
        (Some(f[5] - f[0]), Some(f[0] - 2.0 * f[2] + f[5] - 2.0 * p[2]))
    } else {
        (None, None)
    };

    ThermalFunctionals {
        params,
        temperature: temp,
        p,
        partition_z,
        ground_energy,
        f_vals: f,
        j_vals: j,
        a_fn,
        r_fn,
        b_fn,
        c1,
        c2,
        source,
    }
}

impl ThermalFunctionals {
    /// Reassembles the 8×8 Gibbs matrix from the functionals.
    pub fn density_matrix(&self) -> ComplexMatrix {
        let [f1, f2, f3, f4, f5, f6] = self.f_vals;
        let [j1, j2, j3, j4, j5, j6] = self.j_vals;
        let (p2, p5) = (self.p[2], self.p[5]);
        #[rustfmt::skip]
        let rows: [[f64; 8]; 8] = [
            [f1, 0.0, 0.0, f2, 0.0, f4, f2, 0.0],
            [0.0, j3 + p5, j2, 0.0, j3 - p5, 0.0, 0.0, j5],
            [0.0, j2, j1, 0.0, j2, 0.0, 0.0, j4],
            [f2, 0.0, 0.0, f3 + p2, 0.0, f5, f3 - p2, 0.0],
            [0.0, j3 - p5, j2, 0.0, j3 + p5, 0.0, 0.0, j5],
            [f4, 0.0, 0.0, f5, 0.0, f6, f5, 0.0],
            [f2, 0.0, 0.0, f3 - p2, 0.0, f5, f3 + p2, 0.0],
            [0.0, j5, j4, 0.0, j5, 0.0, 0.0, j6],
        ];
        ComplexMatrix::from_fn(8, |i, j| C64::new(0.5 * rows[i][j], 0.0))
    }
}

/// `(𝒞₁, 𝒞₂)` at `λ = 0` from the hyperbolic closed forms, overflow-safe.
///
/// `𝒞₁ = 4 sinh(2s/T) / (Z s)` and `𝒞₂ = 4 (cosh(2s/T) − 1) / (Z (1+κ²))`
/// with `s = √(1+κ²)`.
pub fn closed_form_c1_c2(kappa: f64, temp: Temperature) -> (f64, f64) {
    let s = (1.0 + kappa * kappa).sqrt();
    let params = ModelParams { kappa, lambda: 0.0 };
    let spectrum = closed_form_spectrum(params);
    let (_, z_shifted, _) = thermal_weights(&spectrum.energies, temp);
    // Multiply numerator and Z by exp(−2s/T); the ground level sits at −2s.
    let (decay2, decay4) = if temp.is_zero() {
        (0.0, 0.0)
    } else {
        ((-2.0 * s / temp.value()).exp(), (-4.0 * s / temp.value()).exp())
    };
    let sinh_scaled = 0.5 * (1.0 - decay4);
    let cosh_minus_one_scaled = 0.5 * (1.0 + decay4) - decay2;
    let c1 = 4.0 * sinh_scaled / (z_shifted * s);
    let c2 = 4.0 * cosh_minus_one_scaled / (z_shifted * s * s);
    (c1, c2)
}

/// Residuals of the identities the functionals satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalResiduals {
    /// `½(F₁+F₆+J₁+J₆) + F₃ + J₃ + p₂ + p₅ − 1`.
    pub normalization: f64,
    /// `2F₄ + κ(F₅ − F₂)`.
    pub f_pair: f64,
    /// `2J₄ + κ(J₅ − J₂)`.
    pub j_pair: f64,
    /// Present only at `λ = 0`.
    pub lambda_zero: Option<LambdaZeroResiduals>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaZeroResiduals {
    /// `F₄ − F₃ + p₂`.
    pub f4_f3_p2: f64,
    /// `2(F₂ + F₅) − κ(F₁ − F₆)`.
    pub f2_f5: f64,
    /// `2F₅ − κ(2p₂ + F₄ − F₆)`.
    pub f5: f64,
    /// `𝒜` itself, which vanishes at `λ = 0`.
    pub a_fn: f64,
    /// `𝒞₁` from functionals minus its hyperbolic closed form.
    pub c1_closed_form: f64,
    /// `𝒞₂` from functionals minus its hyperbolic closed form.
    pub c2_closed_form: f64,
}

impl FunctionalResiduals {
    /// Largest absolute residual among the applicable identities.
    pub fn max_abs(&self) -> f64 {
        let mut worst = self.normalization.abs().max(self.f_pair.abs()).max(self.j_pair.abs());
        if let Some(z) = &self.lambda_zero {
            for r in [z.f4_f3_p2, z.f2_f5, z.f5, z.a_fn, z.c1_closed_form, z.c2_closed_form] {
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}

pub fn verify_functional_identities(tf: &ThermalFunctionals) -> FunctionalResiduals {
    let [f1, f2, f3, f4, f5, f6] = tf.f_vals;
    let [j1, j2, j3, j4, j5, j6] = tf.j_vals;
    let (p2, p5) = (tf.p[2], tf.p[5]);
    let k = tf.params.kappa;
    let lambda_zero = match (tf.c1, tf.c2) {
        (Some(c1), Some(c2)) => {
            let (c1_cf, c2_cf) = closed_form_c1_c2(k, tf.temperature);
            Some(LambdaZeroResiduals {
                f4_f3_p2: f4 - f3 + p2,
                f2_f5: 2.0 * (f2 + f5) - k * (f1 - f6),
                f5: 2.0 * f5 - k * (2.0 * p2 + f4 - f6),
                a_fn: tf.a_fn,
                c1_closed_form: c1 - c1_cf,
                c2_closed_form: c2 - c2_cf,
            })
        }
        _ => None,
    };
    FunctionalResiduals {
        normalization: 0.5 * (f1 + f6 + j1 + j6) + f3 + j3 + p2 + p5 - 1.0,
        f_pair: 2.0 * f4 + k * (f5 - f2),
        j_pair: 2.0 * j4 + k * (j5 - j2),
        lambda_zero,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, ONE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(kappa: f64, lambda: f64) -> ModelParams {
        ModelParams::new(kappa, lambda).unwrap()
    }

    fn temp(t: f64) -> Temperature {
        Temperature::new(t).unwrap()
    }

    fn numeric_spectrum(p: ModelParams) -> Vec<f64> {
        hermitian_eig(&build_hamiltonian(p)).unwrap().eigenvalues
    }

    fn residual(h: &ComplexMatrix, v: &[C64], e: f64) -> f64 {
        h.mul_vec(v).iter().zip(v).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt()
    }

    fn norm(v: &[C64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ModelParams::new(f64::NAN, 0.0).is_err());
        assert!(ModelParams::new(0.0, f64::INFINITY).is_err());
        assert!(matches!(Temperature::new(-1.0), Err(ModelError::NegativeTemperature(_))));
    }

    #[test]
    fn hamiltonian_non_interacting() {
        let h = build_hamiltonian(params(0.0, 0.0));
        // σ₁ᶻ + σ₃ᶻ, diagonal in the computational basis.
        let expected = [2.0, 0.0, 2.0, 0.0, 0.0, -2.0, 0.0, -2.0];
        assert_eq!(h, ComplexMatrix::from_diag(&expected));
    }

    #[test]
    fn hamiltonian_matrix_elements() {
        let h = build_hamiltonian(params(1.0, 1.0));
        assert_eq!(h[(0, 0)], C64::new(3.0, 0.0));
        assert_eq!(h[(0, 6)], ONE);
        assert_eq!(h[(0, 3)], ONE);
        assert!(h.is_hermitian(0.0));
        assert!(h.entries().iter().all(|z| z.im == 0.0));
        assert_eq!(h.trace(), ZERO);
    }

    #[test]
    fn local_hamiltonian() {
        let z3 = embed(&pauli(Axis::Z), 3).unwrap();
        assert_eq!(build_local_hb(params(0.0, 4.0)), z3);

        let p = params(1.3, -0.7);
        let hb = build_local_hb(p);
        for axis in Axis::ALL {
            assert!(hb.commutator(&site_op(axis, 1)).max_abs() < 1e-15);
        }
        let rest = &(&site_op(Axis::X, 1) * &site_op(Axis::X, 2)).scale_re(p.kappa)
            + &(&site_op(Axis::Z, 1) + &site_op(Axis::Z, 2).scale_re(p.lambda));
        let diff = &(&build_hamiltonian(p) - &hb) - &rest;
        assert!(diff.max_abs() < 1e-15);
        assert_eq!(build_local_hb(params(1.3, 5.0)), hb);
    }

    #[test]
    fn spectrum_non_interacting_and_degenerate() {
        let e = numeric_spectrum(params(0.0, 2.0));
        let expected = [-4.0, -2.0, -2.0, 0.0, 0.0, 2.0, 2.0, 4.0];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }

        let s = 2.0 * 2f64.sqrt();
        let e = numeric_spectrum(params(1.0, 0.0));
        let expected = [-s, -s, 0.0, 0.0, 0.0, 0.0, s, s];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let cf = closed_form_spectrum(params(1.0, 0.0)).sorted();
        for (a, b) in cf.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_labels() {
        let cf = closed_form_spectrum(params(0.0, 2.0));
        assert!((cf.energies[2] + 2.0).abs() < 1e-15);
        assert!((cf.energies[5] - 2.0).abs() < 1e-15);

        for &(k, l) in &[(2.0, 3.0), (3.0, 1.5), (1.0, -1.0), (0.3, 0.01), (-4.0, 7.0)] {
            let p = params(k, l);
            let cf = closed_form_spectrum(p);
            let e = cf.energies;
            assert!((e[0] + e[7]).abs() < 1e-12);
            assert!((e[1] + e[6]).abs() < 1e-12);
            assert!((e[3] + e[4]).abs() < 1e-12);
            assert!(e.iter().sum::<f64>().abs() < 1e-9);
            let ac = |x: f64| (x + l) * (x - 2.0 - l) * (x + 2.0 - l) - 4.0 * k * k * (x - l);
            let df = |x: f64| (x - l) * (x - 2.0 + l) * (x + 2.0 + l) - 4.0 * k * k * (x + l);
            for &i in EigenFamily::AC.labels() {
                assert!(ac(e[i]).abs() < 1e-8, "AC root {i} at {k},{l}");
            }
            for &i in EigenFamily::DF.labels() {
                assert!(df(e[i]).abs() < 1e-8, "DF root {i} at {k},{l}");
            }
            for (a, b) in cf.sorted().iter().zip(numeric_spectrum(p)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        // Lowest level is E_0 for λ > 0 and E_1 for λ < 0.
        let e = closed_form_spectrum(params(1.0, 2.0)).energies;
        assert!(e.iter().all(|&x| x >= e[0]));
        let e = closed_form_spectrum(params(1.0, -2.0)).energies;
        assert!(e.iter().all(|&x| x >= e[1]));
    }

    #[test]
    fn eigenvectors_closed_form() {
        for &(k, l) in &[(1.0, 1.0), (2.0, -3.0), (0.4, 0.2), (5.0, 2.5)] {
            let p = params(k, l);
            let h = build_hamiltonian(p);
            let e = closed_form_spectrum(p).energies;
            for fam in [EigenFamily::AC, EigenFamily::DF, EigenFamily::E2, EigenFamily::E5] {
                for &lab in fam.labels() {
                    let v = closed_form_eigenvector(p, fam, e[lab]).unwrap();
                    assert!((norm(&v) - 1.0).abs() < 1e-12);
                    assert!(residual(&h, &v, e[lab]) < 1e-9, "{fam:?} E{lab} at {k},{l}");
                }
            }
        }
        let v = closed_form_eigenvector(params(0.7, 1.0), EigenFamily::E2, -1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[3].re + s).abs() < 1e-15 && (v[6].re - s).abs() < 1e-15);
    }

    #[test]
    fn eigenvector_errors() {
        let p = params(1.0, 1.0);
        let e = closed_form_spectrum(p).energies;
        assert!(matches!(
            closed_form_eigenvector(p, EigenFamily::AC, e[0]),
            Err(ModelError::FamilyMismatch { .. })
        ));
        // κ = 0: AC level E = λ + 2 sits on a pole.
        let p = params(0.0, 0.5);
        let e = closed_form_spectrum(p).energies;
        let on_pole = EigenFamily::AC.labels().iter().map(|&i| e[i]).find(|x| (x - 2.5).abs() < 1e-12).unwrap();
        assert!(matches!(
            closed_form_eigenvector(p, EigenFamily::AC, on_pole),
            Err(ModelError::ClosedFormBreakdown { .. })
        ));
    }

    #[test]
    fn degenerate_ground_vectors() {
        let p = params(1.0, 0.0);
        let h = build_hamiltonian(p);
        let e0 = -2.0 * 2f64.sqrt();
        let v = closed_form_eigenvector(p, EigenFamily::DF, e0).unwrap();
        assert!(residual(&h, &v, e0) < 1e-9);

        for &k in &[0.0, 0.5, 1.0, 3.0, -2.0] {
            let h = build_hamiltonian(params(k, 0.0));
            let e = -2.0 * (1.0 + k * k).sqrt();
            for branch in [Branch::Plus, Branch::Minus] {
                let g = separable_ground_state(k, branch);
                assert!((norm(&g) - 1.0).abs() < 1e-12);
                assert!(residual(&h, &g, e) < 1e-10, "kappa {k} {branch:?}");
                // No correlations between the edge spins in a product state.
                let rho13 = linalg::partial_trace(&ComplexMatrix::outer(&g), &[1, 3]).unwrap();
                let rho1 = linalg::partial_trace(&ComplexMatrix::outer(&g), &[1]).unwrap();
                let rho3 = linalg::partial_trace(&ComplexMatrix::outer(&g), &[3]).unwrap();
                assert!(rho13.max_abs_diff(&linalg::kron(&rho1, &rho3)) < 1e-12);
            }
        }
    }

    #[test]
    fn gibbs_limits() {
        let rho = gibbs_state(params(1.3, -0.4), temp(1e6));
        assert!(rho.max_abs_diff(&ComplexMatrix::identity(8).scale_re(0.125)) < 1e-5);

        let p = params(1.0, 2.0);
        let rho = gibbs_state(p, Temperature::ZERO);
        let e0 = closed_form_spectrum(p).energies[0];
        let g = closed_form_eigenvector(p, EigenFamily::DF, e0).unwrap();
        assert!(rho.max_abs_diff(&ComplexMatrix::outer(&g)) < 1e-10);

        // λ = 0: equal mixture over the two-dimensional ground level.
        let p = params(1.0, 0.0);
        let rho = gibbs_state(p, Temperature::ZERO);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let eig = hermitian_eig(&rho).unwrap();
        assert!((eig.eigenvalues[7] - 0.5).abs() < 1e-12 && (eig.eigenvalues[6] - 0.5).abs() < 1e-12);

        // Tiny temperatures must not overflow.
        let rho = gibbs_state(params(2.0, 1.0), temp(1e-6));
        assert!(rho.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    }

    #[test]
    fn gibbs_invariants_and_zero_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..30 {
            let p = params(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let t = temp(rng.gen_range(0.0..3.0));
            let rho = gibbs_state(p, t);
            let h = build_hamiltonian(p);
            assert!((rho.trace() - ONE).norm() < 1e-12);
            assert!(rho.is_psd(1e-12));
            assert!(rho.commutator(&h).max_abs() < 1e-10);
        }
        let rho = gibbs_state(params(1.0, 1.0), temp(1.0));
        let template = thermal_functionals(params(1.0, 1.0), temp(1.0)).density_matrix();
        for i in 0..8 {
            for j in 0..8 {
                if template[(i, j)] == ZERO {
                    assert!(rho[(i, j)].norm() < 1e-12, "entry ({i},{j}) should vanish");
                }
            }
        }
    }

    #[test]
    fn functionals_reassemble_gibbs_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..100 {
            let p = params(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
            let t = temp(if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.05..5.0) });
            let tf = thermal_functionals(p, t);
            assert_eq!(tf.source, FunctionalSource::ClosedForm);
            assert!(tf.density_matrix().max_abs_diff(&gibbs_state(p, t)) < 1e-9, "{p:?} {t:?}");
        }
    }

    #[test]
    fn functional_invariants() {
        let tf = thermal_functionals(params(2.0, 0.0), temp(1.0));
        assert!(tf.a_fn.abs() < 1e-12);

        let tf = thermal_functionals(params(1.0, 1.0), temp(1.0));
        assert!((0.0..=1.0).contains(&tf.r_fn));
        assert!(tf.b_fn < 0.0);
        assert!((tf.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(tf.p.iter().all(|&x| x >= 0.0));
        assert!(tf.c1.is_none());

        let res = verify_functional_identities(&thermal_functionals(params(1.0, 0.0), temp(0.5)));
        let z = res.lambda_zero.expect("λ = 0 identities apply");
        for r in [z.f4_f3_p2, z.f2_f5, z.f5, z.a_fn, z.c1_closed_form, z.c2_closed_form] {
            assert!(r.abs() <= 1e-9, "{res:?}");
        }

        let res = verify_functional_identities(&thermal_functionals(params(2.0, 3.0), temp(1.0)));
        assert!(res.lambda_zero.is_none());
        assert!(res.max_abs() <= 1e-9);

        let a = thermal_functionals(params(2.0, 3.0), temp(1.0));
        let b = thermal_functionals(params(2.0, -3.0), temp(1.0));
        assert!((a.a_fn - b.a_fn).abs() < 1e-9);
        assert!((a.r_fn - b.r_fn).abs() < 1e-9);
        assert!((a.b_fn - b.b_fn).abs() < 1e-9);
    }

    #[test]
    fn c1_c2_at_lambda_zero() {
        for &k in &[0.5, 1.0, 2.0, 10.0] {
            for &t in &[0.0, 0.1, 1.0, 10.0] {
                let tf = thermal_functionals(params(k, 0.0), temp(t));
                let (c1, c2) = (tf.c1.unwrap(), tf.c2.unwrap());
                assert!(c1 > 0.0 && c2 > 0.0);
                assert!(c1 >= (1.0 + k * k).sqrt() * c2 - 1e-12);
                let (c1_cf, c2_cf) = closed_form_c1_c2(k, temp(t));
                assert!((c1 - c1_cf).abs() < 1e-9 && (c2 - c2_cf).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn weak_coupling_keeps_precision() {
        // Ground energy a distance O(κ²) from a pole.
        for (k, l) in [(0.05, 10.0), (0.05, 5.3061224489795915), (1e-3, -7.0), (2e-3, 3.0)] {
            let (p, t) = (params(k, l), temp(0.0));
            let tf = thermal_functionals(p, t);
            assert_eq!(tf.source, FunctionalSource::ClosedForm);
            assert!(tf.density_matrix().max_abs_diff(&gibbs_state(p, t)) < 1e-13, "{k} {l}");
        }
    }

    #[test]
    fn pole_fallback_reads_matrix() {
        let tf = thermal_functionals(params(0.0, 1.5), temp(0.8));
        assert_eq!(tf.source, FunctionalSource::MatrixEntries);
        assert!(verify_functional_identities(&tf).max_abs() < 1e-9);
        assert!(tf.density_matrix().max_abs_diff(&gibbs_state(params(0.0, 1.5), temp(0.8))) < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn spectrum_agrees_with_eigensolver(k in -10.0f64..10.0, l in -10.0f64..10.0) {
                let p = params(k, l);
                for (a, b) in closed_form_spectrum(p).sorted().iter().zip(numeric_spectrum(p)) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }

            #[test]
            fn spectrum_even_in_kappa(k in -10.0f64..10.0, l in -10.0f64..10.0) {
                let a = closed_form_spectrum(params(k, l)).sorted();
                let b = closed_form_spectrum(params(-k, l)).sorted();
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }

            #[test]
            fn functional_parities(k in 0.05f64..6.0, l in 0.05f64..6.0, t in 0.05f64..4.0) {
                let t = temp(t);
                let base = thermal_functionals(params(k, l), t);
                let flip_l = thermal_functionals(params(k, -l), t);
                let flip_k = thermal_functionals(params(-k, l), t);
                for i in 0..6 {
                    let (f, j) = (base.f_vals[i], base.j_vals[i]);
                    prop_assert!(((f + j) - (flip_l.f_vals[i] + flip_l.j_vals[i])).abs() < 1e-9);
                    prop_assert!(((f - j).abs() - (flip_l.f_vals[i] - flip_l.j_vals[i]).abs()).abs() < 1e-9);
                    let odd = i == 1 || i == 4;
                    let sign = if odd { -1.0 } else { 1.0 };
                    prop_assert!((flip_k.f_vals[i] - sign * f).abs() < 1e-9);
                    prop_assert!((flip_k.j_vals[i] - sign * j).abs() < 1e-9);
                }
                let res = verify_functional_identities(&base);
                prop_assert!(res.max_abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&base.r_fn));
                prop_assert!(base.b_fn < 0.0);
            }
        }
    }
}
