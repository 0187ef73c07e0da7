//! Fixed points and convergence structure of a cycle channel.

use thiserror::Error;

use crate::channel::{fully_mixed, QuantumChannel};
use crate::model::{nuclear_op, spin_x, spin_y, spin_z};
use crate::numerics::{c, eigenvalues, hermitian_eigen, null_vector, ComplexMatrix, NumericsError, C64};

/// Eigenvalues closer than this to 1 count as fixed-point directions.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Tolerated negative eigenvalue of a computed steady state before clipping.
pub const NEGATIVITY_CLIP: f64 = -1e-10;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error("fixed point is not unique: {multiplicity} eigenvalues within {DEGENERACY_TOL:e} of 1; conserved: {witness}")]
    NonUnique { multiplicity: usize, witness: String },
    #[error("steady state has eigenvalue {min_eigenvalue:e}, below the clipping threshold")]
    Negativity { min_eigenvalue: f64 },
    #[error("fixed point not converged: residual {residual:e} exceeds tolerance {tol:e}")]
    NotConverged { residual: f64, tol: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// ⟨2I_z⟩, ⟨2I_x⟩, ⟨2I_y⟩ of one nucleus.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NuclearObservables {
    pub iz: f64,
    pub ix: f64,
    pub iy: f64,
}

/// Per-nucleus ⟨2I_α⟩ = 2·Tr(ρ I_α).
pub fn observables(rho: &ComplexMatrix, n_nuclei: usize) -> Vec<NuclearObservables> {
    let expect = |op: &ComplexMatrix| 2.0 * (rho * op).trace().re;
    (0..n_nuclei)
        .map(|i| NuclearObservables {
            iz: expect(&nuclear_op(&spin_z(), i, n_nuclei)),
            ix: expect(&nuclear_op(&spin_x(), i, n_nuclei)),
            iy: expect(&nuclear_op(&spin_y(), i, n_nuclei)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateResult {
    pub rho_ss: ComplexMatrix,
    /// max |T(ρ) − ρ|.
    pub residual: f64,
    /// 1 − |λ₂| per cycle.
    pub gap: f64,
    /// t_reset / gap (s); absent when the gap vanishes.
    pub tau_converge: Option<f64>,
    pub observables: Vec<NuclearObservables>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapInfo {
    /// Eigenvalues sorted by decreasing modulus.
    pub eigenvalues: Vec<C64>,
    pub gap: f64,
    pub tau_converge: Option<f64>,
}

/// Superoperator spectrum, gap 1 − |λ₂| and τ = t_reset/gap.
pub fn spectral_gap(channel: &QuantumChannel) -> Result<GapInfo, SteadyError> {
    let mut ev = eigenvalues(&channel.matrix)?;
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let gap = if ev.len() < 2 {
        1.0
    } else {
        (1.0 - ev[1].norm()).clamp(0.0, 1.0)
    };
    let tau = (gap > 0.0).then(|| channel.t_reset / gap);
    Ok(GapInfo {
        eigenvalues: ev,
        gap,
        tau_converge: tau,
    })
}

/// Single-nucleus spin components conserved by the channel (T†(I_α) = I_α).
pub fn conserved_quantities(channel: &QuantumChannel) -> Vec<String> {
    let n = channel.dim.trailing_zeros() as usize;
    let mut found = Vec::new();
    for i in 0..n {
        for (name, op) in [("I_z", spin_z()), ("I_x", spin_x()), ("I_y", spin_y())] {
            let o = nuclear_op(&op, i, n);
            if channel.adjoint_apply(&o).max_diff(&o) < 1e-9 {
                found.push(format!("{name} of nucleus {}", i + 1));
            }
        }
    }
    found
}

/// Unique fixed point of the channel.
pub fn steady_state(channel: &QuantumChannel, tol: f64) -> Result<SteadyStateResult, SteadyError> {
    let info = spectral_gap(channel)?;
    let multiplicity = info
        .eigenvalues
        .iter()
        .filter(|z| (*z - c(1.0, 0.0)).norm() < DEGENERACY_TOL)
        .count();
    if multiplicity >= 2 {
        let conserved = conserved_quantities(channel);
        let witness = if conserved.is_empty() {
            "no single-spin component; symmetry outside the checked set".to_string()
        } else {
            conserved.join(", ")
        };
        return Err(SteadyError::NonUnique { multiplicity, witness });
    }

    let d = channel.dim;
    let shifted = &channel.matrix - &ComplexMatrix::identity(d * d);
    let (v, _) = null_vector(&shifted)?;
    let raw = ComplexMatrix::unvectorize(&v, d)?;
    let tr = raw.trace();
    let mut rho = if tr.norm() > 1e-8 {
        raw.scale(tr.inv()).hermitian_part()
    } else {
        power_iterate(channel, tol)?
    };
    if residual(channel, &rho) > tol {
        rho = power_iterate(channel, tol)?;
    }
    let rho = clip_positive(&rho)?;
    let res = residual(channel, &rho);
    if res > tol {
        return Err(SteadyError::NotConverged { residual: res, tol });
    }
    let n_nuclei = d.trailing_zeros() as usize;
    Ok(SteadyStateResult {
        observables: observables(&rho, n_nuclei),
        rho_ss: rho,
        residual: res,
        gap: info.gap,
        tau_converge: info.tau_converge,
    })
}

fn residual(channel: &QuantumChannel, rho: &ComplexMatrix) -> f64 {
    channel.apply_raw(rho).max_diff(rho)
}

/// Fixed point by repeated squaring of the superoperator, from the fully mixed state.
fn power_iterate(channel: &QuantumChannel, tol: f64) -> Result<ComplexMatrix, SteadyError> {
    let d = channel.dim;
    let start = fully_mixed(d);
    let mut p = channel.matrix.clone();
    let mut rho = channel.apply_raw(&start);
    for _ in 0..64 {
        p = &p * &p;
        let next = ComplexMatrix::unvectorize(&p.mul_vec(&start.vectorize()), d)?;
        let change = next.max_diff(&rho);
        rho = next;
        if change < 0.1 * tol {
            break;
        }
    }
    let tr = rho.trace();
    Ok(rho.scale(tr.inv()).hermitian_part())
}

fn clip_positive(rho: &ComplexMatrix) -> Result<ComplexMatrix, SteadyError> {
    let (values, vectors) = hermitian_eigen(rho)?;
    let min = values[0];
    if min >= 0.0 {
        return Ok(rho.clone());
    }
    if min < NEGATIVITY_CLIP {
        return Err(SteadyError::Negativity { min_eigenvalue: min });
    }
    let d = rho.rows();
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let scaled = ComplexMatrix::from_fn(d, d, |i, j| vectors[(i, j)] * (clipped[j] / total));
    Ok(&scaled * &vectors.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::unitary_cycle_channel;
    use crate::hz;
    use crate::model::{DriveSpec, NucleusSpec, SystemSpec};

    fn spec(ap: f64, apar: f64, wn: f64, om: f64, t: f64) -> (SystemSpec, DriveSpec) {
        (
            SystemSpec::single(NucleusSpec::new(hz(ap), hz(apar)).with_larmor(hz(wn)), 0.0),
            DriveSpec::new(hz(om), t),
        )
    }

    #[test]
    fn observable_examples() {
        let o = observables(&fully_mixed(2), 1)[0];
        assert_eq!((o.iz, o.ix, o.iy), (0.0, 0.0, 0.0));
        let up = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!((observables(&up, 1)[0].iz - 1.0).abs() < 1e-15);
        let plus = ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!((observables(&plus, 1)[0].ix - 1.0).abs() < 1e-15);
        // second nucleus of a product state
        let two = crate::numerics::kron(&fully_mixed(2), &up);
        let obs = observables(&two, 2);
        assert_eq!(obs[0].iz, 0.0);
        assert!((obs[1].iz - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_is_non_unique() {
        let (s, d) = spec(0.0, 0.0, 15e3, 200e3, 11e-6);
        let ch = unitary_cycle_channel(&s, &d).unwrap();
        match steady_state(&ch, DEFAULT_TOL) {
            Err(SteadyError::NonUnique { multiplicity, witness }) => {
                assert!(multiplicity >= 2);
                assert!(witness.contains("I_z of nucleus 1"), "{witness}");
            }
            other => panic!("expected non-unique, got {other:?}"),
        }
    }

    #[test]
    fn identity_channel_has_zero_gap() {
        let g = spectral_gap(&QuantumChannel::identity(2, 1e-5)).unwrap();
        assert_eq!(g.gap, 0.0);
        assert!(g.tau_converge.is_none());
    }

    #[test]
    fn strong_coupling_steady_state_valid() {
        let (s, d) = spec(40e3, 10e3, 15e3, 200e3, 11e-6);
        let ch = unitary_cycle_channel(&s, &d).unwrap();
        let r = steady_state(&ch, DEFAULT_TOL).unwrap();
        assert!(r.residual <= DEFAULT_TOL);
        assert!((r.rho_ss.trace().re - 1.0).abs() < 1e-12);
        assert!(r.rho_ss.is_hermitian(1e-12));
        assert!(hermitian_eigen(&r.rho_ss).unwrap().0[0] >= NEGATIVITY_CLIP);
        assert!((0.0..=1.0).contains(&r.gap));
        let o = r.observables[0];
        assert!(o.iz.abs() <= 1.0 && o.ix.abs() <= 1.0 && o.iy.abs() <= 1.0);
    }

    #[test]
    fn evolve_converges_to_fixed_point() {
        for (ap, apar, wn, om, t) in [(40e3, 10e3, 15e3, 200e3, 11e-6), (4e3, 500.0, 22.64e3, 2e3, 44e-6)] {
            let (s, d) = spec(ap, apar, wn, om, t);
            let ch = unitary_cycle_channel(&s, &d).unwrap();
            let r = steady_state(&ch, DEFAULT_TOL).unwrap();
            let n = (12.0 / r.gap).ceil() as usize;
            let tr = ch.evolve(&fully_mixed(2), n).unwrap();
            let last = tr.rows.last().unwrap().observables[0];
            assert!((last.iz - r.observables[0].iz).abs() <= 1e-4);
            assert!((last.ix - r.observables[0].ix).abs() <= 1e-4);
        }
    }

    #[test]
    fn strong_coupling_horizon_matches_solver() {
        let (s, d) = spec(40e3, 10e3, 15e3, 200e3, 11e-6);
        let ch = unitary_cycle_channel(&s, &d).unwrap();
        let r = steady_state(&ch, DEFAULT_TOL).unwrap();
        let cycles = 1000;
        let tr = ch.evolve(&fully_mixed(2), cycles).unwrap();
        // only meaningful when the gap implies convergence within the horizon
        if (1.0 - r.gap).powi(cycles as i32) < 1e-7 {
            assert!((tr.rows[cycles].observables[0].iz - r.observables[0].iz).abs() <= 1e-6);
        }
    }

    #[test]
    fn power_iteration_agrees_with_eigensolver() {
        let (s, d) = spec(4e3, 500.0, 22.64e3, 2e3, 44e-6);
        let ch = unitary_cycle_channel(&s, &d).unwrap();
        let direct = steady_state(&ch, DEFAULT_TOL).unwrap();
        let powered = power_iterate(&ch, 1e-13).unwrap();
        assert!(direct.rho_ss.max_diff(&powered) < 1e-9);
    }

    #[test]
    fn convergence_time_scale_at_reversal() {
        let wn = crate::analytics::reversal_point(1, 44e-6, hz(4e3)).unwrap();
        let (s, d) = spec(4e3, 500.0, wn / std::f64::consts::TAU, 2e3, 44e-6);
        let ch = unitary_cycle_channel(&s, &d).unwrap();
        let tau = spectral_gap(&ch).unwrap().tau_converge.unwrap();
        assert!(tau > 36.9e-3 / 2.0 && tau < 36.9e-3 * 2.0, "tau = {tau}");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn spectrum_in_unit_disk(ap in 0.5e3f64..50e3, apar in -10e3f64..10e3, wn in 1e3f64..100e3,
                                 om in 0.0f64..200e3, t in 2e-6f64..60e-6) {
            let (s, d) = spec(ap, apar, wn, om, t);
            let ch = unitary_cycle_channel(&s, &d).unwrap();
            let g = spectral_gap(&ch).unwrap();
            proptest::prop_assert!(g.eigenvalues.iter().all(|z| z.norm() <= 1.0 + 1e-10));
            if let Ok(r) = steady_state(&ch, 1e-9) {
                proptest::prop_assert!(r.residual <= 1e-9);
                proptest::prop_assert!((r.rho_ss.trace().re - 1.0).abs() < 1e-12);
            }
        }
    }
}
