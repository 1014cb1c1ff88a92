//! One-shot regression run over every closed-form/oracle identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlations::{discord, oracle, CorrelationError, XStateParams};
use crate::genmeas::{build_p_matrix, random_kraus_family, GenMeasError, LossContext};
use crate::linalg::hermitian_eig;
use crate::model::{
    build_hamiltonian, closed_form_spectrum, thermal_functionals, verify_functional_identities, ModelError, ModelParams,
    Temperature,
};
use crate::protocol::{teleported_energy_bruteforce, teleported_energy_closed, ProtocolAngles};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("trials must be positive")]
    NoTrials,
    #[error("tolerance must be a non-negative finite number, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error(transparent)]
    GenMeas(#[from] GenMeasError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub seed: u64,
    pub trials: usize,
    /// Replaces every per-check tolerance when set.
    pub tolerance: Option<f64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { seed: 0, trials: 100, tolerance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Where the largest residual occurred.
    pub worst_case: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<AuditCheck>,
    pub failures: Vec<String>,
    pub passed: bool,
}

struct Tracker {
    name: &'static str,
    tolerance: f64,
    samples: usize,
    worst: f64,
    worst_case: String,
}

impl Tracker {
    fn new(name: &'static str, default_tol: f64, cfg: &AuditConfig) -> Self {
        Self { name, tolerance: cfg.tolerance.unwrap_or(default_tol), samples: 0, worst: 0.0, worst_case: String::new() }
    }

    fn record(&mut self, residual: f64, at: impl FnOnce() -> String) {
        self.samples += 1;
        let residual = if residual.is_nan() { f64::INFINITY } else { residual.abs() };
        if residual > self.worst || self.worst_case.is_empty() {
            self.worst = residual;
            self.worst_case = at();
        }
    }

    fn finish(self) -> AuditCheck {
        AuditCheck {
            name: self.name.to_string(),
            samples: self.samples,
            max_residual: self.worst,
            tolerance: self.tolerance,
            passed: self.worst <= self.tolerance,
            worst_case: self.worst_case,
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    let kappa = rng.gen_range(-10.0..10.0);
    let lambda = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(-10.0..10.0) };
    let t = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.05..5.0) };
    (kappa, lambda, t)
}

fn random_angles(rng: &mut ChaCha8Rng) -> ProtocolAngles {
    let pi = std::f64::consts::PI;
    ProtocolAngles {
        theta: rng.gen_range(0.0..pi),
        phi: rng.gen_range(0.0..2.0 * pi),
        r: rng.gen_range(-pi..pi),
        delta: rng.gen_range(0.0..pi),
        gamma: rng.gen_range(0.0..2.0 * pi),
    }
}

fn label(k: f64, l: f64, t: f64) -> String {
    format!("kappa={k:.6}, lambda={l:.6}, T={t:.6}")
}

pub fn run_audit(cfg: &AuditConfig) -> Result<AuditReport, AuditError> {
    if cfg.trials == 0 {
        return Err(AuditError::NoTrials);
    }
    if let Some(t) = cfg.tolerance {
        if !(t.is_finite() && t >= 0.0) {
            return Err(AuditError::BadTolerance(t));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let heavy = (cfg.trials / 20).max(2);

    let mut spectrum = Tracker::new("spectrum", 1e-9, cfg);
    let mut identities = Tracker::new("functional_identities", 1e-9, cfg);
    let mut energy = Tracker::new("e_b_closed_vs_bruteforce", 1e-9, cfg);
    for _ in 0..cfg.trials {
        let (k, l, t) = random_point(&mut rng);
        let params = ModelParams::new(k, l)?;
        let temp = Temperature::new(t)?;

        let numeric = hermitian_eig(&build_hamiltonian(params)).expect("Hermitian").eigenvalues;
        let closed = closed_form_spectrum(params).sorted();
        let diff = numeric.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        spectrum.record(diff, || label(k, l, t));

        let residuals = verify_functional_identities(&thermal_functionals(params, temp));
        identities.record(residuals.max_abs(), || label(k, l, t));

        let angles = random_angles(&mut rng);
        let diff = teleported_energy_closed(params, temp, &angles) - teleported_energy_bruteforce(params, temp, &angles);
        energy.record(diff, || format!("{}, angles={angles:?}", label(k, l, t)));
    }

    let mut discord_check = Tracker::new("discord_minimizer", 1e-6, cfg);
    let mut p_spectrum = Tracker::new("p_matrix_spectrum", 1e-9, cfg);
    let mut p_psd = Tracker::new("p_matrix_min_eigenvalue", 1e-10, cfg);
    for _ in 0..heavy {
        let (k, l, t) = random_point(&mut rng);
        let params = ModelParams::new(k, l)?;
        let temp = Temperature::new(t)?;
        let x = XStateParams::from_functionals(&thermal_functionals(params, temp));
        let (closed, _) = discord(&x)?;
        let numeric = oracle::numeric_discord(&x.to_matrix(), oracle::MeasuredQubit::First);
        discord_check.record(closed - numeric.discord, || label(k, l, t));

        let kappa = rng.gen_range(0.1..10.0);
        let t = rng.gen_range(0.1..10.0);
        let p = build_p_matrix(ModelParams::new(kappa, 0.0)?, Temperature::new(t)?)?;
        let eig = p.eigenvalues();
        let cf = p.closed_form_spectrum();
        let mut expected: Vec<f64> = cf.iter().flat_map(|&v| [v; 8]).collect();
        expected.sort_by(f64::total_cmp);
        let diff = eig.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(p.block_residual, f64::max);
        p_spectrum.record(diff, || label(kappa, 0.0, t));
        p_psd.record((-eig[0]).max(0.0), || label(kappa, 0.0, t));
    }

    let mut a_alpha = Tracker::new("a_alpha_vanishing", 1e-10, cfg);
    let kappa = rng.gen_range(0.1..10.0);
    let t = rng.gen_range(0.1..5.0);
    let ctx = LossContext::new(ModelParams::new(kappa, 0.0)?, Temperature::new(t)?);
    for _ in 0..cfg.trials {
        let family = random_kraus_family(rng.gen(), 2)?;
        let dir = {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let rho = (1.0 - z * z).sqrt();
            [rho * phi.cos(), rho * phi.sin(), z]
        };
        for coeffs in &family.outcomes {
            let (a, _) = ctx.coefficients(&coeffs.operator(), dir)?;
            a_alpha.record(a, || label(kappa, 0.0, t));
        }
    }

    let checks: Vec<AuditCheck> =
        [spectrum, identities, energy, discord_check, p_spectrum, p_psd, a_alpha].into_iter().map(Tracker::finish).collect();
    let failures: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: residual {:.3e} > tolerance {:.3e} at {}", c.name, c.max_residual, c.tolerance, c.worst_case))
        .collect();
    Ok(AuditReport { seed: cfg.seed, trials: cfg.trials, passed: failures.is_empty(), checks, failures })
}
