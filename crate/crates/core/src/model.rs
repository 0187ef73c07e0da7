//! Physical scene: one dressed electron coupled to up to three nuclear spins.
//!
//! The electron factor comes first in every tensor product, followed by the
//! nuclei in declaration order. In the Hamiltonian basis the electron levels
//! are ordered (|+x⟩, |−x⟩), so the dressed `σ_z` is `diag(½, −½)` and the
//! reset state |−x⟩ is the second basis vector.

use std::f64::consts::FRAC_1_SQRT_2;

use thiserror::Error;

use crate::numerics::{c, kron, ComplexMatrix, C64};

pub const MAX_NUCLEI: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0} nuclei requested; between 1 and {MAX_NUCLEI} are supported")]
    UnsupportedNucleusCount(usize),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NucleusSpec {
    /// Transverse hyperfine component a⊥ (rad/s).
    pub a_perp: f64,
    /// Longitudinal hyperfine component a∥ (rad/s).
    pub a_par: f64,
    /// Nuclear dephasing time (s).
    pub t2n: Option<f64>,
    /// Effective Larmor frequency (rad/s), replacing γB₀ − a∥/2.
    pub larmor_override: Option<f64>,
}

impl NucleusSpec {
    pub fn new(a_perp: f64, a_par: f64) -> Self {
        Self {
            a_perp,
            a_par,
            t2n: None,
            larmor_override: None,
        }
    }

    pub fn with_larmor(mut self, larmor: f64) -> Self {
        self.larmor_override = Some(larmor);
        self
    }

    pub fn with_t2n(mut self, t2n: f64) -> Self {
        self.t2n = Some(t2n);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub nuclei: Vec<NucleusSpec>,
    /// Bare Larmor γₙB₀ (rad/s).
    pub gamma_b0: f64,
}

impl SystemSpec {
    pub fn single(nucleus: NucleusSpec, gamma_b0: f64) -> Self {
        Self {
            nuclei: vec![nucleus],
            gamma_b0,
        }
    }

    pub fn n_nuclei(&self) -> usize {
        self.nuclei.len()
    }

    pub fn nuclear_dim(&self) -> usize {
        1 << self.nuclei.len()
    }

    pub fn larmor(&self, i: usize) -> f64 {
        let n = &self.nuclei[i];
        n.larmor_override
            .unwrap_or_else(|| effective_larmor(self.gamma_b0, n.a_par))
    }

    pub fn larmors(&self) -> Vec<f64> {
        (0..self.nuclei.len()).map(|i| self.larmor(i)).collect()
    }

    /// Copy with the first nucleus's effective Larmor set to `value`; every
    /// other nucleus keeps its offset from the first.
    pub fn with_primary_larmor(&self, value: f64) -> Self {
        let base = self.larmor(0);
        let mut out = self.clone();
        for i in 0..out.nuclei.len() {
            let offset = self.larmor(i) - base;
            out.nuclei[i].larmor_override = Some(value + offset);
        }
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.nuclei.is_empty() || self.nuclei.len() > MAX_NUCLEI {
            return Err(ModelError::UnsupportedNucleusCount(self.nuclei.len()));
        }
        if !self.gamma_b0.is_finite() {
            return Err(invalid("gamma_b0", "must be finite"));
        }
        for n in &self.nuclei {
            if !(n.a_perp.is_finite() && n.a_perp >= 0.0) {
                return Err(invalid("a_perp", "must be finite and non-negative"));
            }
            if !n.a_par.is_finite() {
                return Err(invalid("a_par", "must be finite"));
            }
            if let Some(t) = n.t2n {
                if t.is_nan() || t <= 0.0 {
                    return Err(invalid("t2n", "must be positive"));
                }
            }
            if let Some(l) = n.larmor_override {
                if !l.is_finite() {
                    return Err(invalid("larmor", "must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// Axis of the electron dephasing noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DephasingAxis {
    /// Fluctuations of the lab-frame electron splitting (lab `S_z`), which in
    /// the dressed frame is the flip operator `σ_x`.
    #[default]
    Lab,
    /// Dressed-frame `σ_z`, along the drive.
    Dressed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    /// Dressed splitting Ω (rad/s).
    pub omega: f64,
    /// Reset period (s).
    pub t_reset: f64,
    /// Electron dephasing time (s).
    pub t2e: Option<f64>,
    pub dephasing_axis: DephasingAxis,
}

impl DriveSpec {
    pub fn new(omega: f64, t_reset: f64) -> Self {
        Self {
            omega,
            t_reset,
            t2e: None,
            dephasing_axis: DephasingAxis::Lab,
        }
    }

    pub fn with_t2e(mut self, t2e: Option<f64>) -> Self {
        self.t2e = t2e.filter(|t| t.is_finite());
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(invalid("omega", "must be finite and non-negative"));
        }
        if !(self.t_reset.is_finite() && self.t_reset > 0.0) {
            return Err(invalid("t_reset", "must be finite and positive"));
        }
        if let Some(t) = self.t2e {
            if t.is_nan() || t <= 0.0 {
                return Err(invalid("t2e", "must be positive"));
            }
        }
        Ok(())
    }
}

fn invalid(name: &'static str, reason: &str) -> ModelError {
    ModelError::InvalidParameter {
        name,
        reason: reason.to_string(),
    }
}

/// γB₀ − a∥/2.
pub fn effective_larmor(gamma_b0: f64, a_par: f64) -> f64 {
    gamma_b0 - a_par / 2.0
}

/// Spin-½ operators (eigenvalues ±½).
pub fn spin_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 0.5], &[0.5, 0.0]])
}

pub fn spin_y() -> ComplexMatrix {
    ComplexMatrix::from_row_major(2, 2, vec![c(0.0, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.0, 0.0)])
        .expect("2x2")
}

pub fn spin_z() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.5, 0.0], &[0.0, -0.5]])
}

/// Single-site operator placed at `site` among `n_sites` qubits.
pub fn embed(op: &ComplexMatrix, site: usize, n_sites: usize) -> ComplexMatrix {
    let id = ComplexMatrix::identity(2);
    let mut acc = if site == 0 { op.clone() } else { id.clone() };
    for k in 1..n_sites {
        acc = kron(&acc, if k == site { op } else { &id });
    }
    acc
}

/// Nuclear spin component on nucleus `i` within the nuclear space alone.
pub fn nuclear_op(op: &ComplexMatrix, i: usize, n_nuclei: usize) -> ComplexMatrix {
    embed(op, i, n_nuclei)
}

/// Dressed state |±x⟩ = (|0⟩ ± |−1⟩)/√2 as amplitudes on the lab levels (|0⟩, |−1⟩).
pub fn dressed_state(plus: bool) -> [C64; 2] {
    let s = if plus { 1.0 } else { -1.0 };
    [c(FRAC_1_SQRT_2, 0.0), c(s * FRAC_1_SQRT_2, 0.0)]
}

/// Unitary taking lab amplitudes to the Hamiltonian basis (|+x⟩, |−x⟩). It is
/// its own inverse.
pub fn lab_to_dressed() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], &[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]])
}

/// |−x⟩⟨−x| in the Hamiltonian basis.
pub fn reset_projector() -> ComplexMatrix {
    ComplexMatrix::diagonal(&[c(0.0, 0.0), c(1.0, 0.0)])
}

/// Electron dephasing jump operator in the Hamiltonian basis.
pub fn electron_dephasing_operator(axis: DephasingAxis) -> ComplexMatrix {
    match axis {
        DephasingAxis::Lab => spin_x(),
        DephasingAxis::Dressed => spin_z(),
    }
}

/// Electron-free part Ω·σ_z + Σ ωₙᵢ I_zⁱ.
pub fn free_hamiltonian(system: &SystemSpec, drive: &DriveSpec) -> Result<ComplexMatrix, ModelError> {
    system.validate()?;
    let n = system.n_nuclei() + 1;
    let mut h = embed(&spin_z(), 0, n).scale_real(drive.omega);
    for i in 0..system.n_nuclei() {
        h = &h + &embed(&spin_z(), i + 1, n).scale_real(system.larmor(i));
    }
    Ok(h)
}

/// Hyperfine part σ_x ⊗ Σ (a∥ᵢ I_zⁱ + a⊥ᵢ I_xⁱ), optionally restricted to the
/// longitudinal or transverse terms.
pub fn coupling_hamiltonian(system: &SystemSpec, longitudinal: bool, transverse: bool) -> Result<ComplexMatrix, ModelError> {
    system.validate()?;
    let n = system.n_nuclei() + 1;
    let dim = 1 << n;
    let mut h = ComplexMatrix::zeros(dim, dim);
    let sx = embed(&spin_x(), 0, n);
    for (i, nuc) in system.nuclei.iter().enumerate() {
        if longitudinal {
            h = &h + &(&sx * &embed(&spin_z(), i + 1, n)).scale_real(nuc.a_par);
        }
        if transverse {
            h = &h + &(&sx * &embed(&spin_x(), i + 1, n)).scale_real(nuc.a_perp);
        }
    }
    Ok(h)
}

/// H = Ω·σ_z + Σ ωₙᵢ I_zⁱ + σ_x ⊗ Σ (a∥ᵢ I_zⁱ + a⊥ᵢ I_xⁱ).
pub fn build_hamiltonian(system: &SystemSpec, drive: &DriveSpec) -> Result<ComplexMatrix, ModelError> {
    drive.validate()?;
    let h0 = free_hamiltonian(system, drive)?;
    let v = coupling_hamiltonian(system, true, true)?;
    Ok(&h0 + &v)
}
