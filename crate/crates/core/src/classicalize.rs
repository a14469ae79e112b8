//! Constructive classicalization of strategies that allow perfect guessing.
//!
//! Pipeline: restrict Bob's space to the support of his reduced state,
//! read off the induced projective measurements, verify that they commute
//! with Bob's POVMs, tensor-factor Bob's space so the two families act on
//! separate factors, and trace out the projector factor. The result is a
//! strategy whose shared state commutes with Alice's measurement operators,
//! together with a replayable certificate.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::guessing::{self, GuessingError};
use crate::model::{
    achieved_correlation, Correlation, Game, ModelError, SecondPlayerStates, Strategy,
};
use crate::numerics::{
    self, commutator, hermitian_eig, hs_norm, kron, op_norm, partial_trace, psd_inv_sqrt, psd_sqrt,
    sandwich, support_projector, CMatrix, NumericsError, TraceSide,
};

pub const DEFAULT_PIPELINE_TOL: f64 = 1e-8;
const STEP_CORR_TOL: f64 = 1e-9;
const MAX_CLOSURE_ROUNDS: usize = 20;
const MAX_FACTOR_RETRIES: usize = 10;
const FACTOR_BASE_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum ClassicalizeError {
    #[error("game does not have complete support; zero-probability input pairs: {pairs:?}")]
    NotCompleteSupport { pairs: Vec<(String, String)> },
    #[error(
        "strategy does not allow perfect guessing: conditional states for \
         inputs (a={a}, b={b}), Bob outcome y={y} overlap with norm {overlap:.3e}"
    )]
    NotPerfectGuessing {
        a: usize,
        b: usize,
        y: usize,
        overlap: f64,
    },
    #[error("projector/POVM families fail to commute: norm {norm:.3e}")]
    NotCommuting { norm: f64 },
    #[error("final state does not commute with Alice's operators: norm {norm:.3e}")]
    CommutationViolation { norm: f64 },
    #[error("factorization failed: {0}")]
    FactorizationFailed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Guessing(#[from] GuessingError),
}

/// Whether a step maps into a larger space or collapses one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepDirection {
    Forward,
    Backward,
}

/// One congruence move on Bob's side. Steps carry enough data to replay
/// the transformation of the shared state.
#[derive(Debug, Clone)]
pub enum CongruenceStep {
    /// Compress E to the support of Bob's reduced state; `isometry` has the
    /// retained basis as columns (old dim x new dim).
    RestrictSupport { isometry: CMatrix },
    /// Embed E into E1 tensor E2; `isometry` is (e1*e2) x e with orthonormal
    /// columns.
    UnitaryEmbedding {
        isometry: CMatrix,
        dim_e1: usize,
        dim_e2: usize,
    },
    /// Trace out the trailing factor of Bob's space.
    PartialTrace { dim_kept: usize, dim_traced: usize },
}

impl CongruenceStep {
    pub fn kind(&self) -> &'static str {
        match self {
            CongruenceStep::RestrictSupport { .. } => "restrict_support",
            CongruenceStep::UnitaryEmbedding { .. } => "unitary_embedding",
            CongruenceStep::PartialTrace { .. } => "partial_trace",
        }
    }

    pub fn direction(&self) -> StepDirection {
        match self {
            CongruenceStep::UnitaryEmbedding { .. } => StepDirection::Forward,
            _ => StepDirection::Backward,
        }
    }

    /// Replay this step on a shared state over D tensor E.
    pub fn apply_gamma(
        &self,
        gamma: &CMatrix,
        dim_d: usize,
    ) -> Result<CMatrix, ClassicalizeError> {
        match self {
            CongruenceStep::RestrictSupport { isometry } => {
                let lift = kron(&CMatrix::identity(dim_d), isometry);
                Ok(&(&lift.dagger() * gamma) * &lift)
            }
            CongruenceStep::UnitaryEmbedding { isometry, .. } => {
                let lift = kron(&CMatrix::identity(dim_d), isometry);
                Ok(sandwich(&lift, gamma))
            }
            CongruenceStep::PartialTrace {
                dim_kept,
                dim_traced,
            } => Ok(partial_trace(
                gamma,
                dim_d * dim_kept,
                *dim_traced,
                TraceSide::Second,
            )?),
        }
    }
}

/// Projective measurements on E reproducing Bob's conditional states.
#[derive(Debug)]
pub struct InducedProjectors {
    /// `q[a][x]`, acting on E after support restriction.
    pub q: Vec<Vec<CMatrix>>,
    /// Max over (a, x) of the Frobenius deviation of Q rho Q from rho_a^x.
    pub residual: f64,
}

#[derive(Debug)]
pub struct CommutationReport {
    /// Max over (a, b, x, y) of the spectral norm of [Q_a^x, S_b^y].
    pub commutator_norm: f64,
    /// Max over x != x' of the Frobenius norm of Q_a^x S_b^y Q_a^{x'}.
    pub cross_term_norm: f64,
}

/// Tensor factorization splitting two commuting operator families.
#[derive(Debug)]
pub struct Factorization {
    /// Embedding of the original space into E1 tensor E2, (e1*e2) x e.
    pub isometry: CMatrix,
    pub dim_e1: usize,
    pub dim_e2: usize,
    /// Factors of the first family on E1, same order as the input list.
    pub mbar: Vec<CMatrix>,
    /// Factors of the second family on E2, same order as the input list.
    pub nbar: Vec<CMatrix>,
    /// Max Frobenius deviation of the reconstruction identities.
    pub reconstruction_residual: f64,
}

#[derive(Debug)]
pub struct ClassicalizationCertificate {
    pub steps: Vec<CongruenceStep>,
    /// Strategy on D tensor E1 whose state commutes with Alice's operators.
    pub final_strategy: Strategy,
    /// Max over (a, x) of the spectral norm of [final gamma, R_a^x ⊗ I].
    pub commutator_norm: f64,
    /// Max deviation of the normalized readout pattern from 0/1.
    pub tau_check: f64,
    /// Smallest eigenvalue of Bob's reduced state after restriction.
    pub min_rho_eigenvalue: f64,
    pub induced_residual: f64,
    pub reconstruction_residual: f64,
}

/// Compress Bob's space to the support of his reduced state.
pub fn restrict_to_support(
    strategy: &Strategy,
) -> Result<(Strategy, CongruenceStep), ClassicalizeError> {
    strategy.validate(crate::model::DEFAULT_TOL)?;
    let rho = partial_trace(
        &strategy.gamma,
        strategy.dim_d,
        strategy.dim_e,
        TraceSide::First,
    )?
    .hermitize();
    let v = numerics::support_isometry(&rho, numerics::SUPPORT_TOL)?;
    let new_dim = v.cols();
    let step = CongruenceStep::RestrictSupport {
        isometry: v.clone(),
    };
    if new_dim == strategy.dim_e {
        // full rank: keep the strategy as-is, record the (identity-sized)
        // step for replay
        let compressed = Strategy {
            dim_d: strategy.dim_d,
            dim_e: strategy.dim_e,
            r: strategy.r.clone(),
            s: compress_povms(&strategy.s, &v),
            gamma: step.apply_gamma(&strategy.gamma, strategy.dim_d)?,
        };
        return Ok((compressed, step));
    }
    let compressed = Strategy {
        dim_d: strategy.dim_d,
        dim_e: new_dim,
        r: strategy.r.clone(),
        s: compress_povms(&strategy.s, &v),
        gamma: step.apply_gamma(&strategy.gamma, strategy.dim_d)?,
    };
    Ok((compressed, step))
}

fn compress_povms(fam: &[Vec<CMatrix>], v: &CMatrix) -> Vec<Vec<CMatrix>> {
    fam.iter()
        .map(|povm| {
            povm.iter()
                .map(|m| (&(&v.dagger() * m) * v).hermitize())
                .collect()
        })
        .collect()
}

/// Support projectors of Bob's conditional states, completed to projective
/// measurements.
///
/// Requires perfect guessing: for fixed `a` the states `rho_a^x` must have
/// orthogonal supports, so their projectors sum to a projector. Any
/// deficiency is assigned to the first outcome with nonzero mass.
pub fn induced_projectors(
    strategy: &Strategy,
    tol: f64,
) -> Result<InducedProjectors, ClassicalizeError> {
    let report = guessing::allows_perfect_guessing(strategy, tol)?;
    if let Some(w) = report.witness {
        return Err(ClassicalizeError::NotPerfectGuessing {
            a: w.a,
            b: w.b,
            y: w.y,
            overlap: w.overlap,
        });
    }
    let states = SecondPlayerStates::new(strategy)?;
    let dim = strategy.dim_e;
    let mut q = Vec::with_capacity(states.na);
    let mut residual: f64 = 0.0;
    for a in 0..states.na {
        let mut row = Vec::with_capacity(states.nx);
        let mut sum = CMatrix::zeros(dim, dim);
        let mut first_mass: Option<usize> = None;
        for x in 0..states.nx {
            let rho_ax = states.rho_ax(a, x);
            let mass = rho_ax.trace_re();
            let p = if mass > 1e-12 {
                if first_mass.is_none() {
                    first_mass = Some(x);
                }
                support_projector(&rho_ax.hermitize(), numerics::SUPPORT_TOL)?
            } else {
                CMatrix::zeros(dim, dim)
            };
            sum = &sum + &p;
            row.push(p);
        }
        let deficiency = &CMatrix::identity(dim) - &sum;
        if deficiency.max_abs() > 1e-12 {
            let x0 = first_mass.ok_or_else(|| {
                ClassicalizeError::FactorizationFailed(format!(
                    "no outcome has mass for Alice input {a}"
                ))
            })?;
            row[x0] = (&row[x0] + &deficiency).hermitize();
        }
        for x in 0..states.nx {
            let dev = hs_norm(&(&sandwich(&row[x], &states.rho) - states.rho_ax(a, x)));
            residual = residual.max(dev);
        }
        q.push(row);
    }
    Ok(InducedProjectors { q, residual })
}

/// Commutation diagnostics between the induced projectors and Bob's POVMs.
pub fn commutation_check(
    q: &InducedProjectors,
    s: &[Vec<CMatrix>],
    _tol: f64,
) -> Result<CommutationReport, ClassicalizeError> {
    let mut comm: f64 = 0.0;
    let mut cross: f64 = 0.0;
    for row in &q.q {
        for (x, qx) in row.iter().enumerate() {
            for povm in s {
                for sb in povm {
                    comm = comm.max(op_norm(&commutator(qx, sb))?);
                    for (xp, qxp) in row.iter().enumerate() {
                        if xp != x {
                            cross = cross.max(hs_norm(&(&(qx * sb) * qxp)));
                        }
                    }
                }
            }
        }
    }
    Ok(CommutationReport {
        commutator_norm: comm,
        cross_term_norm: cross,
    })
}

/// Orthonormalize `cand` against `basis` (trace inner product); push and
/// report true when a genuinely new direction remains.
fn absorb(basis: &mut Vec<CMatrix>, cand: CMatrix, new_dir_tol: f64) -> bool {
    let mut v = cand;
    for _ in 0..2 {
        for b in basis.iter() {
            let c = b.inner(&v);
            v = &v - &b.scale_complex(c);
        }
    }
    let norm = hs_norm(&v);
    if norm > new_dir_tol {
        basis.push(v.scale(1.0 / norm));
        true
    } else {
        false
    }
}

/// Orthonormal basis (trace inner product) of the unital algebra generated
/// by `generators`, via span closure under left multiplication.
fn algebra_closure(generators: &[CMatrix], dim: usize) -> Result<Vec<CMatrix>, ClassicalizeError> {
    let mut basis: Vec<CMatrix> = Vec::new();
    let scale: f64 = 1.0 + generators.iter().map(hs_norm).fold(0.0, f64::max);
    let tol = 1e-9 * scale;
    absorb(&mut basis, CMatrix::identity(dim), tol);
    for g in generators {
        absorb(&mut basis, g.clone(), tol);
    }
    for _ in 0..MAX_CLOSURE_ROUNDS {
        let mut grew = false;
        let snapshot = basis.len();
        for g in generators {
            for i in 0..snapshot {
                let cand = g * &basis[i];
                if absorb(&mut basis, cand, tol) {
                    grew = true;
                }
            }
        }
        if !grew {
            return Ok(basis);
        }
        if basis.len() > dim * dim {
            return Err(ClassicalizeError::FactorizationFailed(
                "algebra closure exceeded the full matrix algebra".into(),
            ));
        }
    }
    Err(ClassicalizeError::FactorizationFailed(
        "algebra closure did not stabilize".into(),
    ))
}

/// Basis of the center of the algebra: elements commuting with every
/// generator, found as the nullspace of a Gram matrix of commutators.
fn center_basis(
    basis: &[CMatrix],
    generators: &[CMatrix],
) -> Result<Vec<CMatrix>, ClassicalizeError> {
    let d = basis.len();
    let mut g = CMatrix::zeros(d, d);
    for n in generators {
        let comms: Vec<CMatrix> = basis.iter().map(|b| commutator(b, n)).collect();
        for i in 0..d {
            for j in 0..d {
                let v = g.get(i, j) + comms[i].inner(&comms[j]);
                g.set(i, j, v);
            }
        }
    }
    let eig = hermitian_eig(&g.hermitize())?;
    let lmax = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let cut = 1e-10 * (1.0 + lmax);
    let mut center = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() <= cut {
            let mut z = CMatrix::zeros(basis[0].rows(), basis[0].cols());
            for i in 0..d {
                z = &z + &basis[i].scale_complex(eig.eigenvectors.get(i, k));
            }
            center.push(z);
        }
    }
    if center.is_empty() {
        return Err(ClassicalizeError::FactorizationFailed(
            "algebra has an empty center (identity missing?)".into(),
        ));
    }
    Ok(center)
}

/// Split sorted-descending eigenvalues into clusters separated by `gap`.
fn clusters(eigenvalues: &[f64], gap: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..eigenvalues.len() {
        if eigenvalues[i - 1] - eigenvalues[i] > gap {
            out.push((start, i));
            start = i;
        }
    }
    out.push((start, eigenvalues.len()));
    out
}

fn random_span_element(rng: &mut ChaCha8Rng, basis: &[CMatrix], hermitian: bool) -> CMatrix {
    let mut z = CMatrix::zeros(basis[0].rows(), basis[0].cols());
    for b in basis {
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        z = &z + &b.scale_complex(c);
    }
    if hermitian {
        z = (&z + &z.dagger()).scale(0.5);
    }
    z
}

/// Tensor-factor a space so that `ms` act on the first factor and `ns` on
/// the second. Requires `[m, n] = 0` for every pair within `tol`.
pub fn factorize_commuting(
    ms: &[CMatrix],
    ns: &[CMatrix],
    tol: f64,
) -> Result<Factorization, ClassicalizeError> {
    if ms.is_empty() || ns.is_empty() {
        return Err(ClassicalizeError::FactorizationFailed(
            "both operator families must be nonempty".into(),
        ));
    }
    let dim = ms[0].rows();
    for op in ms.iter().chain(ns) {
        if op.rows() != dim || op.cols() != dim {
            return Err(ClassicalizeError::FactorizationFailed(format!(
                "operator is {}x{}, expected {dim}x{dim}",
                op.rows(),
                op.cols()
            )));
        }
    }
    let mut worst: f64 = 0.0;
    for m in ms {
        for n in ns {
            worst = worst.max(op_norm(&commutator(m, n))?);
        }
    }
    if worst > tol {
        return Err(ClassicalizeError::NotCommuting { norm: worst });
    }

    let basis = algebra_closure(ns, dim)?;
    let center = center_basis(&basis, ns)?;

    let mut last_err = None;
    for attempt in 0..MAX_FACTOR_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(FACTOR_BASE_SEED + attempt as u64);
        match try_factorize(ms, ns, dim, &basis, &center, &mut rng) {
            Ok(f) => return Ok(f),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        ClassicalizeError::FactorizationFailed("factorization retries exhausted".into())
    }))
}

fn try_factorize(
    ms: &[CMatrix],
    ns: &[CMatrix],
    dim: usize,
    basis: &[CMatrix],
    center: &[CMatrix],
    rng: &mut ChaCha8Rng,
) -> Result<Factorization, ClassicalizeError> {
    // central blocks: eigenvalue clusters of a random Hermitian central
    // element
    let z = random_span_element(rng, center, true);
    let ez = hermitian_eig(&z.hermitize())?;
    let spread = ez.eigenvalues.first().copied().unwrap_or(0.0)
        - ez.eigenvalues.last().copied().unwrap_or(0.0);
    let ranges = clusters(&ez.eigenvalues, 1e-5 * (1.0 + spread));

    struct Block {
        lift: CMatrix,  // dim x (m*k) columns; block basis as product basis
        mult: usize,    // m
        rep: usize,     // k
    }
    let mut blocks = Vec::new();
    for &(lo, hi) in &ranges {
        let nc = hi - lo;
        // isometry onto the central block
        let vc = CMatrix::from_fn(dim, nc, |i, j| ez.eigenvectors.get(i, lo + j));
        // algebra restricted to the block
        let mut bc: Vec<CMatrix> = Vec::new();
        for b in basis {
            let proj = &(&vc.dagger() * b) * &vc;
            absorb(&mut bc, proj, 1e-8);
        }
        let k2 = bc.len();
        let k = (k2 as f64).sqrt().round() as usize;
        if k * k != k2 || k == 0 || nc % k != 0 {
            return Err(ClassicalizeError::FactorizationFailed(format!(
                "block of size {nc} carries an algebra of dimension {k2}"
            )));
        }
        let m = nc / k;
        // eigenspaces of a random Hermitian block element: k clusters of
        // multiplicity m
        let x = random_span_element(rng, &bc, true);
        let exg = hermitian_eig(&x.hermitize())?;
        let xspread = exg.eigenvalues.first().copied().unwrap_or(0.0)
            - exg.eigenvalues.last().copied().unwrap_or(0.0);
        let xranges = clusters(&exg.eigenvalues, 1e-5 * (1.0 + xspread));
        if xranges.len() != k || xranges.iter().any(|&(lo, hi)| hi - lo != m) {
            return Err(ClassicalizeError::FactorizationFailed(format!(
                "degenerate spectrum: {} clusters in a block expecting {k}",
                xranges.len()
            )));
        }
        let w: Vec<CMatrix> = xranges
            .iter()
            .map(|&(lo, _)| CMatrix::from_fn(nc, m, |i, j| exg.eigenvectors.get(i, lo + j)))
            .collect();
        // align multiplicity bases across eigenspaces with a generic
        // algebra element
        let t = random_span_element(rng, &bc, false);
        let mut cols: Vec<CMatrix> = Vec::with_capacity(k);
        for wi in w.iter() {
            let ci = &(&wi.dagger() * &t) * &w[0];
            let gram = (&ci.dagger() * &ci).hermitize();
            let ge = hermitian_eig(&gram)?;
            let top = ge.eigenvalues.first().copied().unwrap_or(0.0);
            let bottom = ge.eigenvalues.last().copied().unwrap_or(0.0);
            if top <= 0.0 || bottom < 1e-10 * top {
                return Err(ClassicalizeError::FactorizationFailed(
                    "alignment element is singular between eigenspaces".into(),
                ));
            }
            let u = &ci * &psd_inv_sqrt(&gram, 1e-12)?;
            cols.push(wi * &u);
        }
        // product basis: column (j*k + i) is multiplicity j, representation i
        let mut lift = CMatrix::zeros(dim, nc);
        for j in 0..m {
            for i in 0..k {
                let col = &vc * &CMatrix::from_fn(nc, 1, |r, _| cols[i].get(r, j));
                for r in 0..dim {
                    lift.set(r, j * k + i, col.get(r, 0));
                }
            }
        }
        blocks.push(Block {
            lift,
            mult: m,
            rep: k,
        });
    }

    let dim_e1: usize = blocks.iter().map(|b| b.mult).sum();
    let dim_e2: usize = blocks.iter().map(|b| b.rep).sum();
    // global embedding: block (j, i) basis vector lands on
    // e1[o1 + j] tensor e2[o2 + i]
    let mut iso = CMatrix::zeros(dim_e1 * dim_e2, dim);
    let mut o1 = 0;
    let mut o2 = 0;
    let mut offsets = Vec::new();
    for b in &blocks {
        offsets.push((o1, o2));
        for j in 0..b.mult {
            for i in 0..b.rep {
                let row = (o1 + j) * dim_e2 + (o2 + i);
                for col in 0..dim {
                    let v = b.lift.get(col, j * b.rep + i).conj();
                    if v.norm_sqr() != 0.0 {
                        iso.set(row, col, v);
                    }
                }
            }
        }
        o1 += b.mult;
        o2 += b.rep;
    }

    // factors per block, assembled block-diagonally
    let mut mbar = vec![CMatrix::zeros(dim_e1, dim_e1); ms.len()];
    let mut nbar = vec![CMatrix::zeros(dim_e2, dim_e2); ns.len()];
    for (bi, b) in blocks.iter().enumerate() {
        let (o1, o2) = offsets[bi];
        for (op_idx, op) in ms.iter().enumerate() {
            let inside = &(&b.lift.dagger() * op) * &b.lift;
            let factor = partial_trace(&inside, b.mult, b.rep, TraceSide::Second)?
                .scale(1.0 / b.rep as f64);
            for j1 in 0..b.mult {
                for j2 in 0..b.mult {
                    mbar[op_idx].set(o1 + j1, o1 + j2, factor.get(j1, j2));
                }
            }
        }
        for (op_idx, op) in ns.iter().enumerate() {
            let inside = &(&b.lift.dagger() * op) * &b.lift;
            let factor = partial_trace(&inside, b.mult, b.rep, TraceSide::First)?
                .scale(1.0 / b.mult as f64);
            for i1 in 0..b.rep {
                for i2 in 0..b.rep {
                    nbar[op_idx].set(o2 + i1, o2 + i2, factor.get(i1, i2));
                }
            }
        }
    }
    for op in mbar.iter_mut().chain(nbar.iter_mut()) {
        *op = op.hermitize();
    }

    // reconstruction identities
    let mut residual: f64 = 0.0;
    let i1 = CMatrix::identity(dim_e1);
    let i2 = CMatrix::identity(dim_e2);
    for (op, factor) in ms.iter().zip(&mbar) {
        let back = &(&iso.dagger() * &kron(factor, &i2)) * &iso;
        residual = residual.max(hs_norm(&(&back - op)));
    }
    for (op, factor) in ns.iter().zip(&nbar) {
        let back = &(&iso.dagger() * &kron(&i1, factor)) * &iso;
        residual = residual.max(hs_norm(&(&back - op)));
    }
    let ortho = (&(&iso.dagger() * &iso) - &CMatrix::identity(dim)).max_abs();
    if ortho > 1e-8 {
        return Err(ClassicalizeError::FactorizationFailed(format!(
            "embedding is not an isometry (deviation {ortho:.3e})"
        )));
    }

    Ok(Factorization {
        isometry: iso,
        dim_e1,
        dim_e2,
        mbar,
        nbar,
        reconstruction_residual: residual,
    })
}

/// Full pipeline from a perfect-guessing strategy to a certificate whose
/// final state commutes with Alice's measurement operators.
pub fn classicalize(
    strategy: &Strategy,
    game: &Game,
    tol: f64,
) -> Result<ClassicalizationCertificate, ClassicalizeError> {
    if !game.complete_support() {
        return Err(ClassicalizeError::NotCompleteSupport {
            pairs: game.zero_probability_pairs(),
        });
    }
    let corr0 = achieved_correlation(strategy)?;
    if (game.na(), game.nb(), game.nx(), game.ny()) != (corr0.na, corr0.nb, corr0.nx, corr0.ny) {
        return Err(ClassicalizeError::Model(ModelError::AlphabetMismatch(
            "game and strategy alphabets differ".into(),
        )));
    }
    let mut steps = Vec::new();

    let (restricted, step) = restrict_to_support(strategy)?;
    check_step_preserves(&corr0, &restricted, step.kind())?;
    steps.push(step);

    let rho = partial_trace(
        &restricted.gamma,
        restricted.dim_d,
        restricted.dim_e,
        TraceSide::First,
    )?
    .hermitize();
    let min_rho_eigenvalue = hermitian_eig(&rho)?
        .eigenvalues
        .last()
        .copied()
        .unwrap_or(0.0);

    let induced = induced_projectors(&restricted, tol)?;
    let report = commutation_check(&induced, &restricted.s, tol)?;
    if report.commutator_norm > tol.max(1e-6) {
        return Err(ClassicalizeError::CommutationViolation {
            norm: report.commutator_norm,
        });
    }

    let s_flat: Vec<CMatrix> = restricted.s.iter().flatten().cloned().collect();
    let q_flat: Vec<CMatrix> = induced.q.iter().flatten().cloned().collect();
    let factorization = factorize_commuting(&s_flat, &q_flat, tol.max(1e-6))?;
    let dim_e1 = factorization.dim_e1;
    let dim_e2 = factorization.dim_e2;

    // embed: gamma on D (E1 E2); Bob measures on E1 only
    let embed_step = CongruenceStep::UnitaryEmbedding {
        isometry: factorization.isometry.clone(),
        dim_e1,
        dim_e2,
    };
    let gamma_bar = embed_step.apply_gamma(&restricted.gamma, restricted.dim_d)?;
    let i2 = CMatrix::identity(dim_e2);
    let ny = restricted.ny();
    let sbar: Vec<Vec<CMatrix>> = factorization
        .mbar
        .chunks(ny)
        .map(|c| c.to_vec())
        .collect();
    let s_lifted: Vec<Vec<CMatrix>> = sbar
        .iter()
        .map(|povm| povm.iter().map(|m| kron(m, &i2)).collect())
        .collect();
    let embedded = Strategy {
        dim_d: restricted.dim_d,
        dim_e: dim_e1 * dim_e2,
        r: restricted.r.clone(),
        s: s_lifted,
        gamma: gamma_bar.clone(),
    };
    check_step_preserves(&corr0, &embedded, embed_step.kind())?;
    steps.push(embed_step);

    let nx = restricted.nx();
    let qbar: Vec<Vec<CMatrix>> = factorization
        .nbar
        .chunks(nx)
        .map(|c| c.to_vec())
        .collect();

    // readout pattern: tracing E2 against Qbar_a^x must reproduce Alice's
    // outcome deterministically
    let front = restricted.dim_d * dim_e1;
    let i_e1 = CMatrix::identity(dim_e1);
    let mut tau_check: f64 = 0.0;
    for (a, row) in qbar.iter().enumerate() {
        for (x, qb) in row.iter().enumerate() {
            let lifted = kron(&CMatrix::identity(front), qb);
            let tau = partial_trace(&sandwich(&lifted, &gamma_bar), front, dim_e2, TraceSide::Second)?;
            let mass = tau.trace_re();
            if mass <= 1e-12 {
                continue;
            }
            for xp in 0..nx {
                let probe = kron(&restricted.r[a][xp], &i_e1);
                let val = (&probe * &tau).trace().re / mass;
                let expected = if xp == x { 1.0 } else { 0.0 };
                tau_check = tau_check.max((val - expected).abs());
            }
        }
    }

    let trace_step = CongruenceStep::PartialTrace {
        dim_kept: dim_e1,
        dim_traced: dim_e2,
    };
    let final_gamma = trace_step
        .apply_gamma(&gamma_bar, restricted.dim_d)?
        .hermitize();
    let final_strategy = Strategy {
        dim_d: restricted.dim_d,
        dim_e: dim_e1,
        r: restricted.r.clone(),
        s: sbar,
        gamma: final_gamma,
    };
    final_strategy.validate(tol.max(1e-7))?;
    check_step_preserves(&corr0, &final_strategy, trace_step.kind())?;
    steps.push(trace_step);

    let mut commutator_norm: f64 = 0.0;
    for row in &final_strategy.r {
        for rx in row {
            let lifted = kron(rx, &i_e1);
            commutator_norm =
                commutator_norm.max(op_norm(&commutator(&final_strategy.gamma, &lifted))?);
        }
    }
    if commutator_norm > tol {
        return Err(ClassicalizeError::CommutationViolation {
            norm: commutator_norm,
        });
    }

    Ok(ClassicalizationCertificate {
        steps,
        final_strategy,
        commutator_norm,
        tau_check,
        min_rho_eigenvalue,
        induced_residual: induced.residual,
        reconstruction_residual: factorization.reconstruction_residual,
    })
}

fn check_step_preserves(
    corr0: &Correlation,
    next: &Strategy,
    kind: &str,
) -> Result<(), ClassicalizeError> {
    let corr = achieved_correlation(next)?;
    let dev = corr0.max_entry_distance(&corr);
    if dev > STEP_CORR_TOL {
        return Err(ClassicalizeError::FactorizationFailed(format!(
            "step {kind} changed the correlation by {dev:.3e}"
        )));
    }
    Ok(())
}

/// Replay the certificate's steps on the original strategy and recompute
/// its headline numbers.
pub fn verify_certificate(
    original: &Strategy,
    cert: &ClassicalizationCertificate,
    tol: f64,
) -> Result<f64, ClassicalizeError> {
    let mut gamma = original.gamma.clone();
    for step in &cert.steps {
        if let CongruenceStep::RestrictSupport { isometry }
        | CongruenceStep::UnitaryEmbedding { isometry, .. } = step
        {
            let dev = (&(&isometry.dagger() * isometry)
                - &CMatrix::identity(isometry.cols()))
                .max_abs();
            if dev > 1e-8 {
                return Err(ClassicalizeError::FactorizationFailed(format!(
                    "step {} carries a non-isometry (deviation {dev:.3e})",
                    step.kind()
                )));
            }
        }
        gamma = step.apply_gamma(&gamma, original.dim_d)?;
    }
    let dev = (&gamma - &cert.final_strategy.gamma).max_abs();
    if dev > tol {
        return Err(ClassicalizeError::FactorizationFailed(format!(
            "replayed state deviates from the certificate by {dev:.3e}"
        )));
    }
    let corr0 = achieved_correlation(original)?;
    let corr1 = achieved_correlation(&cert.final_strategy)?;
    let cdev = corr0.max_entry_distance(&corr1);
    if cdev > STEP_CORR_TOL {
        return Err(ClassicalizeError::FactorizationFailed(format!(
            "certificate changes the correlation by {cdev:.3e}"
        )));
    }
    let i_e = CMatrix::identity(cert.final_strategy.dim_e);
    let mut commutator_norm: f64 = 0.0;
    for row in &cert.final_strategy.r {
        for rx in row {
            commutator_norm = commutator_norm
                .max(op_norm(&commutator(&cert.final_strategy.gamma, &kron(rx, &i_e)))?);
        }
    }
    if (commutator_norm - cert.commutator_norm).abs() > 1e-10 {
        return Err(ClassicalizeError::FactorizationFailed(format!(
            "recomputed commutator norm {commutator_norm:.3e} does not match \
             the certificate value {:.3e}",
            cert.commutator_norm
        )));
    }
    Ok(commutator_norm)
}

/// Partial trace keeping an arbitrary subset of tensor factors.
fn ptrace_keep(m: &CMatrix, dims: &[usize], keep: &[bool]) -> CMatrix {
    assert_eq!(dims.len(), keep.len());
    let kept: Vec<usize> = dims
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(&d, _)| d)
        .collect();
    let traced: Vec<usize> = dims
        .iter()
        .zip(keep)
        .filter(|(_, &k)| !k)
        .map(|(&d, _)| d)
        .collect();
    let dk: usize = kept.iter().product();
    let dt: usize = traced.iter().product::<usize>().max(1);
    let full_index = |ik: usize, it: usize| -> usize {
        // interleave kept and traced digits back into the full index
        let mut digits = vec![0usize; dims.len()];
        let mut rk = ik;
        for (pos, &d) in dims.iter().enumerate().rev() {
            if keep[pos] {
                digits[pos] = rk % d;
                rk /= d;
            }
        }
        let mut rt = it;
        for (pos, &d) in dims.iter().enumerate().rev() {
            if !keep[pos] {
                digits[pos] = rt % d;
                rt /= d;
            }
        }
        let mut idx = 0;
        for (pos, &d) in dims.iter().enumerate() {
            idx = idx * d + digits[pos];
        }
        idx
    };
    CMatrix::from_fn(dk, dk, |i, j| {
        let mut s = Complex64::new(0.0, 0.0);
        for t in 0..dt {
            s += m.get(full_index(i, t), full_index(j, t));
        }
        s
    })
}

/// Apply Alice's nondestructive measurement chain to the shared state,
/// recording each input's outcome in its own classical register.
///
/// Valid when the state commutes with Alice's operators: the chain then
/// leaves the joint state undisturbed, each register's marginal with E
/// matches the measure-and-record state, and the correlation can be read
/// off the classical registers jointly with Bob's measurements.
pub fn alice_nondestructive_chain(
    strategy: &Strategy,
    tol: f64,
) -> Result<(CMatrix, Correlation), ClassicalizeError> {
    strategy.validate(crate::model::DEFAULT_TOL)?;
    let na = strategy.na();
    let nx = strategy.nx();
    let (dim_d, dim_e) = (strategy.dim_d, strategy.dim_e);
    let i_e = CMatrix::identity(dim_e);
    let mut comm: f64 = 0.0;
    for row in &strategy.r {
        for rx in row {
            comm = comm.max(op_norm(&commutator(&strategy.gamma, &kron(rx, &i_e)))?);
        }
    }
    if comm > tol {
        return Err(ClassicalizeError::NotCommuting { norm: comm });
    }

    let sqrt_r: Vec<Vec<CMatrix>> = strategy
        .r
        .iter()
        .map(|row| row.iter().map(|m| psd_sqrt(&m.hermitize())).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;

    // registers accumulate in front: after step a the state lives on
    // V_1 ... V_a (D E)
    let mut lam = strategy.gamma.clone();
    let mut front = 1usize; // product of register dims so far
    let de = dim_d * dim_e;
    for row in &sqrt_r {
        let mut next = CMatrix::zeros(front * nx * de, front * nx * de);
        for (x, sr) in row.iter().enumerate() {
            let op = kron(&CMatrix::identity(front), &kron(sr, &i_e));
            let moved = sandwich(&op, &lam);
            // insert the register |x><x| between the existing registers and
            // D E
            for v1 in 0..front {
                for v2 in 0..front {
                    for p in 0..de {
                        for q in 0..de {
                            let val = moved.get(v1 * de + p, v2 * de + q);
                            if val.norm_sqr() == 0.0 {
                                continue;
                            }
                            next.set(
                                (v1 * nx + x) * de + p,
                                (v2 * nx + x) * de + q,
                                val,
                            );
                        }
                    }
                }
            }
        }
        lam = next;
        front *= nx;
    }

    // dims: V_1, ..., V_na, D, E
    let mut dims = vec![nx; na];
    dims.push(dim_d);
    dims.push(dim_e);

    // each register's marginal with E must match measure-and-record
    let states = SecondPlayerStates::new(strategy)?;
    let mut marginal_dev: f64 = 0.0;
    for a in 0..na {
        let mut keep = vec![false; dims.len()];
        keep[a] = true;
        keep[na + 1] = true;
        let got = ptrace_keep(&lam, &dims, &keep);
        let mut want = CMatrix::zeros(nx * dim_e, nx * dim_e);
        for x in 0..nx {
            let rho_ax = states.rho_ax(a, x);
            for p in 0..dim_e {
                for q in 0..dim_e {
                    want.set(x * dim_e + p, x * dim_e + q, rho_ax.get(p, q));
                }
            }
        }
        marginal_dev = marginal_dev.max((&got - &want).max_abs());
    }
    if marginal_dev > tol.max(1e-8) {
        return Err(ClassicalizeError::NotCommuting {
            norm: marginal_dev,
        });
    }

    // correlation: register a jointly with Bob's measurement on E
    let nb = strategy.nb();
    let ny = strategy.ny();
    let mut p = vec![0.0; na * nb * nx * ny];
    for a in 0..na {
        let mut keep = vec![false; dims.len()];
        keep[a] = true;
        keep[na + 1] = true;
        let marg = ptrace_keep(&lam, &dims, &keep);
        for x in 0..nx {
            let block = CMatrix::from_fn(dim_e, dim_e, |i, j| {
                marg.get(x * dim_e + i, x * dim_e + j)
            });
            for b in 0..nb {
                for y in 0..ny {
                    let v = (&strategy.s[b][y] * &block).trace().re;
                    p[((a * nb + b) * nx + x) * ny + y] = v;
                }
            }
        }
    }
    let corr = Correlation::new(na, nb, nx, ny, p, 1e-8)?;
    Ok((lam, corr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{local_membership, Membership};
    use crate::generator::{perfect_guessing_instance, GeneratorConfig};
    use crate::model::{angle_projector, chsh_game, chsh_optimal_strategy};

    fn diag_strategy() -> Strategy {
        // gamma diagonal, Alice projective in the same basis, Bob holds a
        // correlated qubit
        let p0 = CMatrix::diag_real(&[1.0, 0.0]);
        let p1 = CMatrix::diag_real(&[0.0, 1.0]);
        let gamma = CMatrix::diag_real(&[0.3, 0.0, 0.0, 0.7]);
        Strategy {
            dim_d: 2,
            dim_e: 2,
            r: vec![vec![p0.clone(), p1.clone()]],
            s: vec![vec![p0, p1]],
            gamma,
        }
    }

    #[test]
    fn restrict_full_rank_is_identity() {
        let strategy = chsh_optimal_strategy();
        let (restricted, step) = restrict_to_support(&strategy).unwrap();
        assert_eq!(restricted.dim_e, 2);
        match step {
            CongruenceStep::RestrictSupport { isometry } => {
                assert_eq!(isometry.cols(), 2);
            }
            _ => panic!("wrong step kind"),
        }
        let c0 = achieved_correlation(&strategy).unwrap();
        let c1 = achieved_correlation(&restricted).unwrap();
        assert!(c0.max_entry_distance(&c1) < 1e-10);
    }

    #[test]
    fn restrict_pure_product_state() {
        let p0 = CMatrix::diag_real(&[1.0, 0.0]);
        let p1 = CMatrix::diag_real(&[0.0, 1.0]);
        let strategy = Strategy {
            dim_d: 2,
            dim_e: 2,
            r: vec![vec![p0.clone(), p1.clone()]],
            s: vec![vec![p0.clone(), p1.clone()]],
            gamma: kron(&p0, &p0),
        };
        let (restricted, _) = restrict_to_support(&strategy).unwrap();
        assert_eq!(restricted.dim_e, 1);
        let c0 = achieved_correlation(&strategy).unwrap();
        let c1 = achieved_correlation(&restricted).unwrap();
        assert!(c0.max_entry_distance(&c1) < 1e-10);
    }

    #[test]
    fn restrict_preserves_correlation_on_padded_instances() {
        for seed in 0..5 {
            let mut cfg = GeneratorConfig::small(seed);
            cfg.pad_e = 2;
            let inst = perfect_guessing_instance(&cfg);
            let (restricted, _) = restrict_to_support(&inst.strategy).unwrap();
            assert!(restricted.dim_e < inst.strategy.dim_e);
            let c0 = achieved_correlation(&inst.strategy).unwrap();
            let c1 = achieved_correlation(&restricted).unwrap();
            assert!(c0.max_entry_distance(&c1) < 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn induced_projectors_reject_chsh() {
        let (restricted, _) = restrict_to_support(&chsh_optimal_strategy()).unwrap();
        match induced_projectors(&restricted, 1e-8) {
            Err(ClassicalizeError::NotPerfectGuessing { .. }) => {}
            other => panic!("expected NotPerfectGuessing, got {other:?}"),
        }
    }

    #[test]
    fn induced_projectors_on_generator() {
        let inst = perfect_guessing_instance(&GeneratorConfig::small(7));
        let (restricted, _) = restrict_to_support(&inst.strategy).unwrap();
        let induced = induced_projectors(&restricted, 1e-8).unwrap();
        assert!(induced.residual < 1e-9, "residual {}", induced.residual);
        for row in &induced.q {
            let mut sum = CMatrix::zeros(restricted.dim_e, restricted.dim_e);
            for p in row {
                // projector
                assert!((&(p * p) - p).max_abs() < 1e-9);
                sum = &sum + p;
            }
            assert!((&sum - &CMatrix::identity(restricted.dim_e)).max_abs() < 1e-9);
        }
    }

    #[test]
    fn induced_projectors_deterministic_alice() {
        let (restricted, _) = restrict_to_support(&diag_strategy()).unwrap();
        let induced = induced_projectors(&restricted, 1e-8).unwrap();
        // both outcomes occur; projectors split E by Alice's outcome
        let q = &induced.q[0];
        assert!((&(&q[0] + &q[1]) - &CMatrix::identity(restricted.dim_e)).max_abs() < 1e-9);
    }

    #[test]
    fn commutation_check_product_space() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = crate::generator::random_povm(&mut rng, 2, 2);
        let q_parts: Vec<CMatrix> = vec![
            kron(&CMatrix::identity(2), &CMatrix::diag_real(&[1.0, 0.0])),
            kron(&CMatrix::identity(2), &CMatrix::diag_real(&[0.0, 1.0])),
        ];
        let s_parts: Vec<Vec<CMatrix>> = vec![a
            .iter()
            .map(|m| kron(m, &CMatrix::identity(2)))
            .collect()];
        let induced = InducedProjectors {
            q: vec![q_parts],
            residual: 0.0,
        };
        let rep = commutation_check(&induced, &s_parts, 1e-9).unwrap();
        assert!(rep.commutator_norm < 1e-12);
        assert!(rep.cross_term_norm < 1e-12);
    }

    #[test]
    fn commutation_check_detects_half() {
        let q = vec![vec![
            CMatrix::diag_real(&[1.0, 0.0]),
            CMatrix::diag_real(&[0.0, 1.0]),
        ]];
        let p = angle_projector(std::f64::consts::PI / 4.0);
        let s = vec![vec![p.clone(), &CMatrix::identity(2) - &p]];
        let induced = InducedProjectors { q, residual: 0.0 };
        let rep = commutation_check(&induced, &s, 1e-9).unwrap();
        assert!((rep.commutator_norm - 0.5).abs() < 1e-9);
    }

    #[test]
    fn factorize_explicit_product() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = crate::generator::random_povm(&mut rng, 2, 3);
        // two non-commuting generators so the second family generates all
        // of M_2
        let b = vec![
            crate::generator::random_psd(&mut rng, 2),
            crate::generator::random_psd(&mut rng, 2),
        ];
        let i3 = CMatrix::identity(3);
        let i2 = CMatrix::identity(2);
        let ms: Vec<CMatrix> = a.iter().map(|m| kron(m, &i2)).collect();
        let ns: Vec<CMatrix> = b.iter().map(|m| kron(&i3, m)).collect();
        let f = factorize_commuting(&ms, &ns, 1e-8).unwrap();
        assert_eq!(f.dim_e1, 3);
        assert_eq!(f.dim_e2, 2);
        assert!(
            f.reconstruction_residual < 1e-9,
            "residual {}",
            f.reconstruction_residual
        );
    }

    #[test]
    fn factorize_commuting_diagonals() {
        let ms = vec![CMatrix::diag_real(&[1.0, 2.0, 3.0])];
        let ns = vec![CMatrix::diag_real(&[0.5, 0.25, 0.125])];
        let f = factorize_commuting(&ms, &ns, 1e-8).unwrap();
        assert!(f.reconstruction_residual < 1e-9);
        // abelian algebra: three 1-dimensional representations, so the
        // space splits block-classically
        assert_eq!(f.dim_e1, 3);
        assert_eq!(f.dim_e2, 3);
        let back = &(&f.isometry.dagger() * &kron(&f.mbar[0], &CMatrix::identity(3)))
            * &f.isometry;
        assert!(hs_norm(&(&back - &ms[0])) < 1e-9);
    }

    #[test]
    fn factorize_rejects_noncommuting() {
        let ms = vec![CMatrix::diag_real(&[1.0, 0.0])];
        let ns = vec![angle_projector(std::f64::consts::PI / 4.0)];
        match factorize_commuting(&ms, &ns, 1e-8) {
            Err(ClassicalizeError::NotCommuting { norm }) => assert!(norm > 0.4),
            other => panic!("expected NotCommuting, got {other:?}"),
        }
    }

    #[test]
    fn factorize_generator_families() {
        let inst = perfect_guessing_instance(&GeneratorConfig::small(21));
        let (restricted, _) = restrict_to_support(&inst.strategy).unwrap();
        let induced = induced_projectors(&restricted, 1e-8).unwrap();
        let s_flat: Vec<CMatrix> = restricted.s.iter().flatten().cloned().collect();
        let q_flat: Vec<CMatrix> = induced.q.iter().flatten().cloned().collect();
        let f = factorize_commuting(&s_flat, &q_flat, 1e-6).unwrap();
        assert!(
            f.reconstruction_residual < 1e-8,
            "residual {}",
            f.reconstruction_residual
        );
        // Q reconstruction specifically
        let i1 = CMatrix::identity(f.dim_e1);
        for (q, qb) in q_flat.iter().zip(&f.nbar) {
            let back = &(&f.isometry.dagger() * &kron(&i1, qb)) * &f.isometry;
            assert!(hs_norm(&(&back - q)) < 1e-8);
        }
    }

    #[test]
    fn classicalize_generator_instance() {
        let inst = perfect_guessing_instance(&GeneratorConfig::small(3));
        let cert = classicalize(&inst.strategy, &inst.game, 1e-8).unwrap();
        assert!(cert.commutator_norm <= 1e-8, "{}", cert.commutator_norm);
        assert!(cert.tau_check <= 1e-8, "{}", cert.tau_check);
        assert!(cert.min_rho_eigenvalue > 0.0);
        assert_eq!(cert.steps.len(), 3);
        let replayed = verify_certificate(&inst.strategy, &cert, 1e-8).unwrap();
        assert!((replayed - cert.commutator_norm).abs() <= 1e-10);
    }

    #[test]
    fn classicalize_already_classical() {
        let strategy = diag_strategy();
        let game = crate::generator::random_complete_support_game(11, 1, 1, 2, 2);
        let cert = classicalize(&strategy, &game, 1e-8).unwrap();
        assert!(cert.commutator_norm <= 1e-10);
        let c0 = achieved_correlation(&strategy).unwrap();
        let c1 = achieved_correlation(&cert.final_strategy).unwrap();
        assert!(c0.max_entry_distance(&c1) < 1e-9);
    }

    #[test]
    fn classicalize_rejects_chsh() {
        match classicalize(&chsh_optimal_strategy(), &chsh_game(), 1e-8) {
            Err(ClassicalizeError::NotPerfectGuessing { .. }) => {}
            other => panic!("expected NotPerfectGuessing, got {other:?}"),
        }
    }

    #[test]
    fn classicalize_rejects_incomplete_support() {
        let game = chsh_game();
        let q = vec![0.5, 0.5, 0.0, 0.0];
        let bad = Game::new(
            game.a_names.clone(),
            game.b_names.clone(),
            game.x_names.clone(),
            game.y_names.clone(),
            q,
            game.h_table().to_vec(),
        )
        .unwrap();
        match classicalize(&chsh_optimal_strategy(), &bad, 1e-8) {
            Err(ClassicalizeError::NotCompleteSupport { pairs }) => {
                assert_eq!(pairs.len(), 2);
            }
            other => panic!("expected NotCompleteSupport, got {other:?}"),
        }
    }

    #[test]
    fn end_to_end_theorem_small_sweep() {
        for seed in 0..8 {
            let mut cfg = GeneratorConfig::small(100 + seed);
            if seed % 2 == 1 {
                cfg.nx = 3;
                cfg.num_labels = 3;
            }
            let inst = perfect_guessing_instance(&cfg);
            let cert = classicalize(&inst.strategy, &inst.game, 1e-8)
                .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!(cert.commutator_norm <= 1e-8, "seed {seed}");
            let corr = achieved_correlation(&inst.strategy).unwrap();
            match local_membership(&corr, 1e-7, crate::classical::DEFAULT_VERTEX_CAP).unwrap() {
                Membership::Local(_) => {}
                Membership::Nonlocal(cert) => {
                    panic!("seed {seed}: classical correlation rejected, gap {}", cert.gap)
                }
            }
        }
    }

    #[test]
    fn chain_on_diagonal_strategy() {
        let strategy = diag_strategy();
        let (lam, corr) = alice_nondestructive_chain(&strategy, 1e-9).unwrap();
        assert!((lam.trace_re() - 1.0).abs() < 1e-10);
        let c0 = achieved_correlation(&strategy).unwrap();
        assert!(c0.max_entry_distance(&corr) < 1e-10);
    }

    #[test]
    fn chain_on_classicalized_generator() {
        let inst = perfect_guessing_instance(&GeneratorConfig::small(13));
        let cert = classicalize(&inst.strategy, &inst.game, 1e-8).unwrap();
        let (_, corr) = alice_nondestructive_chain(&cert.final_strategy, 1e-7).unwrap();
        let c0 = achieved_correlation(&inst.strategy).unwrap();
        assert!(c0.max_entry_distance(&corr) < 1e-8);
        match local_membership(&corr, 1e-7, crate::classical::DEFAULT_VERTEX_CAP).unwrap() {
            Membership::Local(_) => {}
            Membership::Nonlocal(_) => panic!("chain correlation must be classical"),
        }
    }

    #[test]
    fn chain_single_input_alice() {
        let p0 = CMatrix::diag_real(&[1.0, 0.0]);
        let p1 = CMatrix::diag_real(&[0.0, 1.0]);
        let strategy = Strategy {
            dim_d: 2,
            dim_e: 2,
            r: vec![vec![p0.clone(), p1.clone()]],
            s: vec![vec![p0.clone(), p1.clone()]],
            gamma: CMatrix::diag_real(&[0.25, 0.25, 0.25, 0.25]),
        };
        let (lam, _) = alice_nondestructive_chain(&strategy, 1e-9).unwrap();
        assert_eq!(lam.rows(), 2 * 4);
        assert!((lam.trace_re() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn chain_rejects_noncommuting() {
        match alice_nondestructive_chain(&chsh_optimal_strategy(), 1e-9) {
            Err(ClassicalizeError::NotCommuting { norm }) => assert!(norm > 1e-3),
            other => panic!("expected NotCommuting, got {other:?}"),
        }
    }

    #[test]
    fn super_classical_score_blocks_perfect_guessing() {
        // noisy interpolations of the optimal strategy: whenever the score
        // stays above 3/4, perfect guessing is impossible
        let game = chsh_game();
        let base = chsh_optimal_strategy();
        for &p in &[1.0, 0.9, 0.75] {
            let noisy = Strategy {
                gamma: (&base.gamma.scale(p)
                    + &CMatrix::identity(4).scale((1.0 - p) / 4.0))
                    .hermitize(),
                ..base.clone()
            };
            let corr = achieved_correlation(&noisy).unwrap();
            let score = crate::model::expected_score(&game, &corr).unwrap();
            assert!(score > 0.75 + 1e-6, "p={p} score={score}");
            let rep = guessing::allows_perfect_guessing(&noisy, 1e-8).unwrap();
            assert!(!rep.allowed, "p={p}");
        }
    }
}
