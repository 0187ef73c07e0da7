//! The one-cycle map on the nuclei: attach a fresh |−x⟩ electron, evolve for
//! one reset period, trace the electron out.
//!
//! Superoperators use column stacking, `vec(A X B) = (Bᵀ ⊗ A) vec(X)` with
//! `vec(X)[i + j·d] = X[i][j]`.

use std::cell::Cell;

use thiserror::Error;

use crate::model::{
    build_hamiltonian, electron_dephasing_operator, embed, spin_z, DriveSpec, ModelError, SystemSpec,
};
use crate::numerics::{
    c, expm_general, expm_hermitian, hermitian_eigenvalues, kron, partial_trace, ComplexMatrix,
    NumericsError, C64,
};
use crate::steady::{observables, NuclearObservables};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("no dephasing time is set; use the unitary cycle channel")]
    NoDephasing,
    #[error("dimension mismatch: channel acts on dimension {expected}, state has {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    UnitaryCycle,
    LindbladCycle,
    Perturbative,
    Custom,
}

/// Superoperator of a map on `dim`x`dim` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel {
    pub dim: usize,
    pub matrix: ComplexMatrix,
    pub kind: ChannelKind,
    /// Duration of one application (s).
    pub t_reset: f64,
}

thread_local! {
    static RESET_INJECTIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of electron re-initialisations performed on this thread so far.
pub fn reset_injection_count() -> u64 {
    RESET_INJECTIONS.with(|c| c.get())
}

fn record_reset_injection() {
    RESET_INJECTIONS.with(|c| c.set(c.get() + 1));
}

impl QuantumChannel {
    pub fn from_superoperator(dim: usize, matrix: ComplexMatrix, kind: ChannelKind, t_reset: f64) -> Self {
        assert_eq!(matrix.rows(), dim * dim);
        assert_eq!(matrix.cols(), dim * dim);
        Self { dim, matrix, kind, t_reset }
    }

    pub fn identity(dim: usize, t_reset: f64) -> Self {
        Self::from_superoperator(dim, ComplexMatrix::identity(dim * dim), ChannelKind::Custom, t_reset)
    }

    /// Conjugation channel ρ ↦ UρU†.
    pub fn unitary_conjugation(u: &ComplexMatrix, t_reset: f64) -> Self {
        Self::from_superoperator(u.rows(), kron(&u.conj(), u), ChannelKind::Custom, t_reset)
    }

    /// ρ ↦ Σ K ρ K†.
    pub fn from_kraus(kraus: &[ComplexMatrix], kind: ChannelKind, t_reset: f64) -> Self {
        let d = kraus[0].rows();
        let mut s = ComplexMatrix::zeros(d * d, d * d);
        for k in kraus {
            s = &s + &kron(&k.conj(), k);
        }
        Self::from_superoperator(d, s, kind, t_reset)
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix, ChannelError> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(ChannelError::DimensionMismatch {
                expected: self.dim,
                found: rho.rows(),
            });
        }
        let out = self.matrix.mul_vec(&rho.vectorize());
        Ok(ComplexMatrix::unvectorize(&out, self.dim)?.hermitian_part())
    }

    /// Raw image of an arbitrary (not necessarily Hermitian) matrix.
    pub fn apply_raw(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let out = self.matrix.mul_vec(&x.vectorize());
        ComplexMatrix::unvectorize(&out, self.dim).expect("square superoperator")
    }

    /// The channel applied `k` times.
    pub fn power(&self, k: u64) -> Self {
        let mut result = ComplexMatrix::identity(self.dim * self.dim);
        let mut base = self.matrix.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = &base * &result;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Self {
            dim: self.dim,
            matrix: result,
            kind: self.kind,
            t_reset: self.t_reset * k as f64,
        }
    }

    /// Heisenberg-picture image T†(X).
    pub fn adjoint_apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        // Tr(T†(X)† ρ) = Tr(X† T(ρ)) ⇒ vec(T†(X)) = S† vec(X)
        let out = self.matrix.adjoint().mul_vec(&x.vectorize());
        ComplexMatrix::unvectorize(&out, self.dim).expect("square superoperator")
    }

    /// Iterates from `rho0`, recording the nuclear observables after every cycle.
    pub fn evolve(&self, rho0: &ComplexMatrix, n_cycles: usize) -> Result<Trajectory, ChannelError> {
        let n_nuclei = self.dim.trailing_zeros() as usize;
        let mut rho = rho0.clone();
        let mut rows = Vec::with_capacity(n_cycles + 1);
        rows.push(TrajectoryRow {
            cycle: 0,
            time: 0.0,
            observables: observables(&rho, n_nuclei),
        });
        for k in 1..=n_cycles {
            rho = self.apply(&rho)?;
            rows.push(TrajectoryRow {
                cycle: k,
                time: k as f64 * self.t_reset,
                observables: observables(&rho, n_nuclei),
            });
        }
        Ok(Trajectory { rows, final_state: rho })
    }

    /// Choi matrix Σᵢⱼ Eᵢⱼ ⊗ T(Eᵢⱼ).
    pub fn choi_matrix(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut choi = ComplexMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let col = i + j * d;
                for a in 0..d {
                    for b in 0..d {
                        choi[(i * d + a, j * d + b)] = self.matrix[(a + b * d, col)];
                    }
                }
            }
        }
        choi
    }

    pub fn cptp_report(&self) -> Result<CptpReport, ChannelError> {
        let d = self.dim;
        let mut trace_dev: f64 = 0.0;
        let mut herm_dev: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let col = i + j * d;
                let tr: C64 = (0..d).map(|a| self.matrix[(a + a * d, col)]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                trace_dev = trace_dev.max((tr - expected).norm());
                // T(E_ij)† must equal T(E_ji)
                let col_t = j + i * d;
                for a in 0..d {
                    for b in 0..d {
                        let lhs = self.matrix[(b + a * d, col)].conj();
                        let rhs = self.matrix[(a + b * d, col_t)];
                        herm_dev = herm_dev.max((lhs - rhs).norm());
                    }
                }
            }
        }
        let choi = self.choi_matrix().hermitian_part();
        let choi_min = hermitian_eigenvalues(&choi)?[0];
        Ok(CptpReport {
            trace_deviation: trace_dev,
            hermiticity_deviation: herm_dev,
            choi_min_eigenvalue: choi_min,
        })
    }

    pub fn is_cptp(&self, tol: f64) -> bool {
        self.cptp_report().map(|r| r.passes(tol)).unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CptpReport {
    pub trace_deviation: f64,
    pub hermiticity_deviation: f64,
    pub choi_min_eigenvalue: f64,
}

impl CptpReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.trace_deviation <= tol && self.hermiticity_deviation <= tol && self.choi_min_eigenvalue >= -tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub cycle: usize,
    /// Elapsed time (s).
    pub time: f64,
    pub observables: Vec<NuclearObservables>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub final_state: ComplexMatrix,
}

impl Trajectory {
    pub fn series(&self, nucleus: usize, pick: impl Fn(&NuclearObservables) -> f64) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|r| (r.time, pick(&r.observables[nucleus])))
            .collect()
    }
}

/// Fully mixed nuclear state.
pub fn fully_mixed(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64)
}

/// Exact unitary cycle: T(ρ) = Tr_e[U (|−x⟩⟨−x| ⊗ ρ) U†].
pub fn unitary_cycle_channel(system: &SystemSpec, drive: &DriveSpec) -> Result<QuantumChannel, ChannelError> {
    let h = build_hamiltonian(system, drive)?;
    let u = expm_hermitian(&h, drive.t_reset)?;
    Ok(channel_from_joint_unitary(&u, system.nuclear_dim(), ChannelKind::UnitaryCycle, drive.t_reset))
}

/// Electron trace-and-reset of a joint unitary, via the Kraus operators ⟨m|U|−x⟩.
pub fn channel_from_joint_unitary(u: &ComplexMatrix, d: usize, kind: ChannelKind, t_reset: f64) -> QuantumChannel {
    record_reset_injection();
    let kraus: Vec<ComplexMatrix> = (0..2)
        .map(|m| ComplexMatrix::from_fn(d, d, |i, j| u[(m * d + i, d + j)]))
        .collect();
    QuantumChannel::from_kraus(&kraus, kind, t_reset)
}

/// Vectorised Lindblad generator −i[H,·] + Σ γ D[J].
pub fn lindblad_generator(h: &ComplexMatrix, jumps: &[(f64, ComplexMatrix)]) -> ComplexMatrix {
    let n = h.rows();
    let id = ComplexMatrix::identity(n);
    let mut l = (&kron(&id, h) - &kron(&h.transpose(), &id)).scale(c(0.0, -1.0));
    for (rate, j) in jumps {
        let jdj = &j.adjoint() * j;
        let term = &(&kron(&j.conj(), j) - &kron(&id, &jdj).scale_real(0.5)) - &kron(&jdj.transpose(), &id).scale_real(0.5);
        l = &l + &term.scale_real(*rate);
    }
    l
}

/// Cycle channel whose intra-cycle dynamics include electron and/or nuclear
/// dephasing. A jump operator with eigenvalues ±½ at rate 2/T₂ makes the
/// coherence between its eigenstates decay as e^(−t/T₂).
pub fn lindblad_cycle_channel(system: &SystemSpec, drive: &DriveSpec) -> Result<QuantumChannel, ChannelError> {
    let has_nuclear = system.nuclei.iter().any(|n| n.t2n.is_some());
    if drive.t2e.is_none() && !has_nuclear {
        return Err(ChannelError::NoDephasing);
    }
    let h = build_hamiltonian(system, drive)?;
    let n_sites = system.n_nuclei() + 1;
    let mut jumps = Vec::new();
    if let Some(t2e) = drive.t2e {
        let j = embed(&electron_dephasing_operator(drive.dephasing_axis), 0, n_sites);
        jumps.push((2.0 / t2e, j));
    }
    for (i, n) in system.nuclei.iter().enumerate() {
        if let Some(t2n) = n.t2n {
            jumps.push((2.0 / t2n, embed(&spin_z(), i + 1, n_sites)));
        }
    }
    let gen = lindblad_generator(&h, &jumps).scale_real(drive.t_reset);
    let prop = expm_general(&gen)?;
    Ok(channel_from_joint_propagator(&prop, system.nuclear_dim(), ChannelKind::LindbladCycle, drive.t_reset))
}

/// Electron trace-and-reset of a joint superoperator propagator.
pub fn channel_from_joint_propagator(prop: &ComplexMatrix, d: usize, kind: ChannelKind, t_reset: f64) -> QuantumChannel {
    record_reset_injection();
    let big = 2 * d;
    let mut s = ComplexMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            // |−x⟩⟨−x| ⊗ E_ab sits at joint entry (d + a, d + b)
            let col = (d + a) + (d + b) * big;
            for i in 0..d {
                for j in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for m in 0..2 {
                        acc += prop[((m * d + i) + (m * d + j) * big, col)];
                    }
                    s[(i + j * d, a + b * d)] = acc;
                }
            }
        }
    }
    QuantumChannel::from_superoperator(d, s, kind, t_reset)
}

/// Lindblad cycle if any dephasing time is set, otherwise the unitary cycle.
pub fn cycle_channel(system: &SystemSpec, drive: &DriveSpec) -> Result<QuantumChannel, ChannelError> {
    match lindblad_cycle_channel(system, drive) {
        Err(ChannelError::NoDephasing) => unitary_cycle_channel(system, drive),
        other => other,
    }
}

/// Direct joint computation Tr_e[U(|−x⟩⟨−x| ⊗ ρ)U†]; slow, used as a reference.
pub fn direct_cycle(system: &SystemSpec, drive: &DriveSpec, rho: &ComplexMatrix) -> Result<ComplexMatrix, ChannelError> {
    let h = build_hamiltonian(system, drive)?;
    let u = expm_hermitian(&h, drive.t_reset)?;
    let joint = kron(&crate::model::reset_projector(), rho);
    let evolved = &(&u * &joint) * &u.adjoint();
    let mut dims = vec![2];
    dims.extend(std::iter::repeat_n(2, system.n_nuclei()));
    let keep: Vec<usize> = (1..=system.n_nuclei()).collect();
    Ok(partial_trace(&evolved, &dims, &keep)?)
}
