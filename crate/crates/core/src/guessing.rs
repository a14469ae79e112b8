//! Bob's ability to guess Alice's output: perfect-distinguishability tests,
//! exact binary discrimination, iterative multi-state discrimination, and
//! min-entropy.
//!
//! Convention for subnormalized ensembles: discrimination optima are reported
//! raw (weighted by the ensemble masses), so summing the per-`y` optima for
//! the states `{rho_ab^xy}_x` gives the a-priori probability that Bob
//! guesses `x` after measuring `y`.

use thiserror::Error;

use crate::model::{ModelError, SecondPlayerStates, Strategy};
use crate::numerics::{
    self, hermitian_eig, hs_norm, psd_inv_sqrt, sandwich, support_projector, CMatrix,
    NumericsError,
};

pub const DEFAULT_PG_TOL: f64 = 1e-8;
pub const DEFAULT_ITER_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Ensembles whose total mass is below this are treated as empty.
const ZERO_MASS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GuessingError {
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("guessing probability must be positive to take a min-entropy, got {0}")]
    DomainError(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A list of subnormalized PSD states indexed by Alice's output.
#[derive(Clone)]
pub struct Ensemble {
    pub states: Vec<CMatrix>,
}

impl Ensemble {
    pub fn new(states: Vec<CMatrix>) -> Result<Self, GuessingError> {
        if states.len() < 2 {
            return Err(GuessingError::InvalidEnsemble(
                "need at least two hypotheses".into(),
            ));
        }
        let dim = states[0].rows();
        for (i, s) in states.iter().enumerate() {
            if s.rows() != dim || s.cols() != dim {
                return Err(GuessingError::InvalidEnsemble(format!(
                    "state {i} is {}x{}, expected {dim}x{dim}",
                    s.rows(),
                    s.cols()
                )));
            }
            let e = hermitian_eig(&s.hermitize())?;
            if let Some(&min) = e.eigenvalues.last() {
                if min < -numerics::PSD_TOL {
                    return Err(GuessingError::InvalidEnsemble(format!(
                        "state {i} has eigenvalue {min:.3e}"
                    )));
                }
            }
        }
        Ok(Ensemble { states })
    }

    pub fn dim(&self) -> usize {
        self.states[0].rows()
    }

    pub fn total_mass(&self) -> f64 {
        self.states.iter().map(|s| s.trace_re()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GuessMethod {
    Helstrom,
    Iterative,
    PgmBound,
}

/// Result of a discrimination problem.
pub struct GuessReport {
    /// Success probability, weighted by the ensemble masses.
    pub p_guess: f64,
    /// Measurement achieving (or approaching) it; empty for aggregated
    /// reports where the optimal strategy is adaptive.
    pub povm: Vec<CMatrix>,
    pub method: GuessMethod,
    pub iterations: usize,
    /// Upper bound on the distance to the true optimum, from dual
    /// feasibility. Zero for exact methods.
    pub gap_bound: f64,
    pub converged: bool,
}

impl GuessReport {
    pub fn min_entropy(&self) -> Result<f64, GuessingError> {
        min_entropy(self)
    }
}

/// `-log2(p_guess)` in bits.
pub fn min_entropy(report: &GuessReport) -> Result<f64, GuessingError> {
    if report.p_guess <= 0.0 {
        return Err(GuessingError::DomainError(report.p_guess));
    }
    // `+ 0.0` turns the negative zero from p_guess = 1 into a plain zero.
    Ok(-report.p_guess.log2() + 0.0)
}

/// True iff all pairs of states have orthogonal supports (within `tol` on
/// the Hilbert-Schmidt norm of the support-projector products).
pub fn perfectly_distinguishable(ens: &Ensemble, tol: f64) -> Result<bool, GuessingError> {
    Ok(max_support_overlap(&ens.states, tol)? <= tol)
}

/// Max over pairs of `||P_i P_j||_2` for the support projectors.
pub fn max_support_overlap(states: &[CMatrix], support_tol: f64) -> Result<f64, GuessingError> {
    let projectors: Vec<CMatrix> = states
        .iter()
        .map(|s| support_projector(&s.hermitize(), support_tol))
        .collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..projectors.len() {
        for j in (i + 1)..projectors.len() {
            worst = worst.max(hs_norm(&(&projectors[i] * &projectors[j])));
        }
    }
    Ok(worst)
}

/// Witness for a failed perfect-guessing check.
#[derive(Clone, Copy, Debug)]
pub struct PerfectGuessingWitness {
    pub a: usize,
    pub b: usize,
    pub y: usize,
    /// Support overlap norm of the offending pair of conditional states.
    pub overlap: f64,
}

pub struct PerfectGuessingReport {
    pub allowed: bool,
    pub witness: Option<PerfectGuessingWitness>,
    pub max_overlap: f64,
}

/// Does the strategy allow Bob to guess Alice's output with certainty?
/// Checks perfect distinguishability of `{rho_ab^xy}_x` for every `(a, b, y)`.
pub fn allows_perfect_guessing(
    strategy: &Strategy,
    tol: f64,
) -> Result<PerfectGuessingReport, GuessingError> {
    let states = SecondPlayerStates::new(strategy)?;
    allows_perfect_guessing_from_states(&states, tol)
}

pub fn allows_perfect_guessing_from_states(
    states: &SecondPlayerStates,
    tol: f64,
) -> Result<PerfectGuessingReport, GuessingError> {
    let mut max_overlap: f64 = 0.0;
    let mut witness = None;
    for a in 0..states.na {
        for b in 0..states.nb {
            for y in 0..states.ny {
                let ens: Vec<CMatrix> = (0..states.nx)
                    .map(|x| states.rho_abxy(a, b, x, y).clone())
                    .collect();
                let overlap = max_support_overlap(&ens, tol)?;
                if overlap > max_overlap {
                    max_overlap = overlap;
                }
                if overlap > tol && witness.is_none() {
                    witness = Some(PerfectGuessingWitness { a, b, y, overlap });
                }
            }
        }
    }
    Ok(PerfectGuessingReport {
        allowed: witness.is_none(),
        witness,
        max_overlap,
    })
}

/// Exact minimum-error discrimination of two subnormalized states:
/// `p = Tr[P+ s0] + Tr[(I - P+) s1]` with `P+` the projector onto the
/// positive part of `s0 - s1`.
pub fn helstrom_binary(s0: &CMatrix, s1: &CMatrix) -> Result<GuessReport, GuessingError> {
    let ens = Ensemble::new(vec![s0.clone(), s1.clone()])?;
    let delta = &ens.states[0] - &ens.states[1];
    let e = hermitian_eig(&delta.hermitize())?;
    let p_plus = e.apply(|lam| if lam > 0.0 { 1.0 } else { 0.0 });
    let m0 = p_plus;
    let m1 = &CMatrix::identity(ens.dim()) - &m0;
    let p_guess = (&m0 * &ens.states[0]).trace().re + (&m1 * &ens.states[1]).trace().re;
    Ok(GuessReport {
        p_guess,
        povm: vec![m0, m1],
        method: GuessMethod::Helstrom,
        iterations: 0,
        gap_bound: 0.0,
        converged: true,
    })
}

/// Pretty-good measurement for an ensemble, completed to a full POVM by
/// assigning the kernel of the average state to the first outcome.
pub fn pretty_good_measurement(ens: &Ensemble) -> Result<Vec<CMatrix>, GuessingError> {
    let dim = ens.dim();
    let mut total = CMatrix::zeros(dim, dim);
    for s in &ens.states {
        total = &total + s;
    }
    let total = total.hermitize();
    let w = psd_inv_sqrt(&total, 1e-12)?;
    let mut povm: Vec<CMatrix> = ens
        .states
        .iter()
        .map(|s| sandwich(&w, s).hermitize())
        .collect();
    let mut sum = CMatrix::zeros(dim, dim);
    for m in &povm {
        sum = &sum + m;
    }
    let kernel = &CMatrix::identity(dim) - &sum;
    povm[0] = (&povm[0] + &kernel).hermitize();
    Ok(povm)
}

/// Fixed-point iteration for minimum-error discrimination of an arbitrary
/// ensemble, started from the pretty-good measurement.
///
/// Update: `M_x <- G^{-1/2} s_x M_x s_x G^{-1/2}` with
/// `G = sum_x s_x M_x s_x`; the success probability is monotone along the
/// iteration and the dual residual gives an explicit optimality gap.
pub fn discriminate_iterative(
    ens: &Ensemble,
    tol: f64,
    max_iter: usize,
) -> Result<GuessReport, GuessingError> {
    let dim = ens.dim();
    let states: Vec<CMatrix> = ens.states.iter().map(|s| s.hermitize()).collect();
    let mut povm = pretty_good_measurement(ens)?;
    let mut p_prev = success_probability(&povm, &states);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut g = CMatrix::zeros(dim, dim);
        let pushed: Vec<CMatrix> = states
            .iter()
            .zip(&povm)
            .map(|(s, m)| sandwich(s, m))
            .collect();
        for t in &pushed {
            g = &g + t;
        }
        let g = g.hermitize();
        let gi = psd_inv_sqrt(&g, 1e-14)?;
        let mut next: Vec<CMatrix> = pushed.iter().map(|t| sandwich(&gi, t).hermitize()).collect();
        // complete on the kernel of G so the POVM still sums to identity
        let mut sum = CMatrix::zeros(dim, dim);
        for m in &next {
            sum = &sum + m;
        }
        let kernel = &CMatrix::identity(dim) - &sum;
        next[0] = (&next[0] + &kernel).hermitize();
        let p_next = success_probability(&next, &states);
        if p_next + 1e-13 < p_prev {
            // fixed point reached up to roundoff; keep the better POVM
            converged = true;
            break;
        }
        povm = next;
        if (p_next - p_prev).abs() < tol {
            converged = true;
            break;
        }
        p_prev = p_next;
    }
    let p_guess = success_probability(&povm, &states);
    let gap_bound = dual_gap_bound(&povm, &states, p_guess)?;
    Ok(GuessReport {
        p_guess,
        povm,
        method: GuessMethod::Iterative,
        iterations,
        gap_bound,
        converged,
    })
}

fn success_probability(povm: &[CMatrix], states: &[CMatrix]) -> f64 {
    povm.iter()
        .zip(states)
        .map(|(m, s)| (m * s).trace().re)
        .sum()
}

/// Dual bound: `Y = sym(sum M_x s_x)` shifted by the worst violation of
/// `Y >= s_x` is dual feasible, so `Tr[Y + rI] - p` bounds the gap.
fn dual_gap_bound(povm: &[CMatrix], states: &[CMatrix], p: f64) -> Result<f64, GuessingError> {
    let dim = states[0].rows();
    let mut y = CMatrix::zeros(dim, dim);
    for (m, s) in povm.iter().zip(states) {
        y = &y + &(m * s);
    }
    let y = y.hermitize();
    let mut r: f64 = 0.0;
    for s in states {
        let e = hermitian_eig(&(s - &y).hermitize())?;
        r = r.max(e.eigenvalues.first().copied().unwrap_or(0.0));
    }
    let r = r.max(0.0);
    Ok((y.trace_re() + r * dim as f64 - p).max(0.0))
}

/// Bob's probability of guessing Alice's output after his own measurement:
/// he measures `y` first, then optimally discriminates `{rho_ab^xy}_x`.
pub fn guessing_probability(
    strategy: &Strategy,
    a: usize,
    b: usize,
) -> Result<GuessReport, GuessingError> {
    let states = SecondPlayerStates::new(strategy)?;
    guessing_probability_from_states(&states, a, b)
}

pub fn guessing_probability_from_states(
    states: &SecondPlayerStates,
    a: usize,
    b: usize,
) -> Result<GuessReport, GuessingError> {
    if a >= states.na || b >= states.nb {
        return Err(GuessingError::Model(ModelError::UnknownInput(format!(
            "(a, b) = ({a}, {b})"
        ))));
    }
    let mut total = 0.0;
    let mut iterations = 0;
    let mut gap_bound = 0.0;
    let mut method = GuessMethod::Helstrom;
    let mut converged = true;
    for y in 0..states.ny {
        let slice: Vec<CMatrix> = (0..states.nx)
            .map(|x| states.rho_abxy(a, b, x, y).clone())
            .collect();
        let mass: f64 = slice.iter().map(|s| s.trace_re()).sum();
        if mass < ZERO_MASS {
            continue;
        }
        let report = if states.nx == 2 {
            helstrom_binary(&slice[0], &slice[1])?
        } else {
            let ens = Ensemble::new(slice)?;
            method = GuessMethod::Iterative;
            discriminate_iterative(&ens, DEFAULT_ITER_TOL, DEFAULT_MAX_ITER)?
        };
        total += report.p_guess;
        iterations += report.iterations;
        gap_bound += report.gap_bound;
        converged &= report.converged;
    }
    Ok(GuessReport {
        p_guess: total,
        povm: Vec::new(),
        method,
        iterations,
        gap_bound,
        converged,
    })
}

/// Bob's guessing probability if he could guess before his own measurement:
/// optimal discrimination of the pre-measurement states `{rho_a^x}_x`.
pub fn pre_measurement_guessing(
    strategy: &Strategy,
    a: usize,
) -> Result<GuessReport, GuessingError> {
    let states = SecondPlayerStates::new(strategy)?;
    if a >= states.na {
        return Err(GuessingError::Model(ModelError::UnknownInput(format!(
            "a = {a}"
        ))));
    }
    let slice: Vec<CMatrix> = (0..states.nx).map(|x| states.rho_ax(a, x).clone()).collect();
    if states.nx == 2 {
        helstrom_binary(&slice[0], &slice[1])
    } else {
        let ens = Ensemble::new(slice)?;
        discriminate_iterative(&ens, DEFAULT_ITER_TOL, DEFAULT_MAX_ITER)
    }
}
