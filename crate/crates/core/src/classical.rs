//! Classical values and local-polytope membership: the classical set is the
//! convex hull of deterministic strategies, so membership is a small linear
//! program over vertex weights and nonlocality comes with a separating Bell
//! functional as a certificate.

use thiserror::Error;

use crate::model::{Correlation, Game, ModelError};
use crate::simplex::{self, LpOutcome};

/// Default cap on the number of enumerated deterministic strategies.
pub const DEFAULT_VERTEX_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("vertex enumeration too large: {count} deterministic strategies exceed cap {cap}")]
    TooLarge { count: u128, cap: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A pair of deterministic response functions `f: A -> X`, `g: B -> Y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeterministicStrategy {
    pub f: Vec<usize>,
    pub g: Vec<usize>,
}

impl DeterministicStrategy {
    /// The 0/1 correlation table this vertex produces.
    pub fn correlation(&self, nx: usize, ny: usize) -> Correlation {
        let (na, nb) = (self.f.len(), self.g.len());
        let mut p = vec![0.0; na * nb * nx * ny];
        for a in 0..na {
            for b in 0..nb {
                let idx = ((a * nb + b) * nx + self.f[a]) * ny + self.g[b];
                p[idx] = 1.0;
            }
        }
        Correlation::new(na, nb, nx, ny, p, 0.0).expect("vertex table is valid")
    }
}

/// All deterministic strategies in lexicographic order (f varies slowest).
pub fn enumerate_deterministic(
    na: usize,
    nb: usize,
    nx: usize,
    ny: usize,
    cap: usize,
) -> Result<Vec<DeterministicStrategy>, ClassicalError> {
    let count = (nx as u128).pow(na as u32) * (ny as u128).pow(nb as u32);
    if count > cap as u128 {
        return Err(ClassicalError::TooLarge { count, cap });
    }
    let fs = enumerate_functions(na, nx);
    let gs = enumerate_functions(nb, ny);
    let mut out = Vec::with_capacity(count as usize);
    for f in &fs {
        for g in &gs {
            out.push(DeterministicStrategy {
                f: f.clone(),
                g: g.clone(),
            });
        }
    }
    Ok(out)
}

fn enumerate_functions(domain: usize, range: usize) -> Vec<Vec<usize>> {
    let total = range.pow(domain as u32);
    let mut out = Vec::with_capacity(total);
    for mut k in 0..total {
        let mut f = vec![0; domain];
        // most significant digit first so the order is lexicographic
        for slot in (0..domain).rev() {
            f[slot] = k % range;
            k /= range;
        }
        out.push(f);
    }
    out
}

/// Maximum expected score over deterministic strategies, with a witness.
/// Ties break toward the earlier vertex in enumeration order.
pub fn classical_value(
    game: &Game,
    cap: usize,
) -> Result<(f64, DeterministicStrategy), ClassicalError> {
    let vertices = enumerate_deterministic(game.na(), game.nb(), game.nx(), game.ny(), cap)?;
    let mut best = f64::NEG_INFINITY;
    let mut witness = None;
    for v in &vertices {
        let mut score = 0.0;
        for a in 0..game.na() {
            for b in 0..game.nb() {
                score += game.q_at(a, b) * game.h_at(a, b, v.f[a], v.g[b]);
            }
        }
        if score > best {
            best = score;
            witness = Some(v.clone());
        }
    }
    Ok((best, witness.expect("alphabets are nonempty")))
}

/// Explicit convex decomposition over deterministic vertices.
#[derive(Debug)]
pub struct LocalDecomposition {
    /// `(vertex, weight)` pairs with weight above 1e-12.
    pub parts: Vec<(DeterministicStrategy, f64)>,
    /// Max-entry reconstruction error of the weighted vertex mixture.
    pub residual: f64,
}

/// Separating Bell functional certifying nonlocality. Coefficients are a
/// score table over `(a, b, x, y)` normalized to `[0, 1/(|A||B|)]`, so a
/// value is directly comparable to a uniform-input game score.
#[derive(Debug)]
pub struct BellCertificate {
    pub na: usize,
    pub nb: usize,
    pub nx: usize,
    pub ny: usize,
    pub coeffs: Vec<f64>,
    /// Max of the functional over all deterministic vertices.
    pub vertex_max: f64,
    /// Value of the functional on the tested correlation.
    pub corr_value: f64,
    pub gap: f64,
}

impl BellCertificate {
    pub fn value_on(&self, corr: &Correlation) -> f64 {
        self.coeffs
            .iter()
            .zip(corr.table())
            .map(|(c, p)| c * p)
            .sum()
    }

    pub fn value_on_vertex(&self, v: &DeterministicStrategy) -> f64 {
        self.value_on(&v.correlation(self.nx, self.ny))
    }
}

#[derive(Debug)]
pub enum Membership {
    Local(LocalDecomposition),
    Nonlocal(BellCertificate),
}

/// Decide membership of a correlation in the local polytope.
///
/// Feasible: returns convex weights over deterministic vertices reproducing
/// the correlation within `tol`. Infeasible: returns a Bell functional whose
/// value on the correlation exceeds its vertex maximum by more than `tol`.
pub fn local_membership(
    corr: &Correlation,
    tol: f64,
    cap: usize,
) -> Result<Membership, ClassicalError> {
    let vertices = enumerate_deterministic(corr.na, corr.nb, corr.nx, corr.ny, cap)?;
    let entries = corr.table().len();
    let nv = vertices.len();

    // rows: one equality per table entry plus the normalization row
    let m = entries + 1;
    let mut a = vec![0.0; m * nv];
    for (j, v) in vertices.iter().enumerate() {
        let vc = v.correlation(corr.nx, corr.ny);
        for (i, &entry) in vc.table().iter().enumerate() {
            a[i * nv + j] = entry;
        }
        a[entries * nv + j] = 1.0;
    }
    let mut b: Vec<f64> = corr.table().to_vec();
    b.push(1.0);
    let c = vec![0.0; nv];

    match simplex::solve(&a, m, nv, &b, &c) {
        LpOutcome::Optimal { x, .. } => {
            // honest residual: re-evaluate the mixture
            let mut recon = vec![0.0; entries];
            for (j, v) in vertices.iter().enumerate() {
                if x[j] == 0.0 {
                    continue;
                }
                let vc = v.correlation(corr.nx, corr.ny);
                for (i, &entry) in vc.table().iter().enumerate() {
                    recon[i] += x[j] * entry;
                }
            }
            let residual = recon
                .iter()
                .zip(corr.table())
                .map(|(r, p)| (r - p).abs())
                .fold(0.0, f64::max);
            if residual > tol {
                // phase 1 scraped by numerically but the mixture misses
                return Ok(Membership::Nonlocal(deepest_cut(corr, &vertices)));
            }
            let parts = vertices
                .into_iter()
                .zip(x)
                .filter(|(_, w)| *w > 1e-12)
                .map(|(v, w)| (v, w))
                .collect();
            Ok(Membership::Local(LocalDecomposition { parts, residual }))
        }
        LpOutcome::Infeasible { .. } => Ok(Membership::Nonlocal(deepest_cut(corr, &vertices))),
        LpOutcome::Unbounded => unreachable!("bounded feasibility LP"),
    }
}

/// Maximum-violation Bell functional with coefficients boxed in
/// `[0, 1/(|A||B|)]`: maximize `f . corr - max_v f . v` by LP.
fn deepest_cut(corr: &Correlation, vertices: &[DeterministicStrategy]) -> BellCertificate {
    let entries = corr.table().len();
    let nv = vertices.len();
    let u = 1.0 / (corr.na * corr.nb) as f64;

    // variables: f_e (entries), t, slack per vertex row, slack per bound row
    let n = entries + 1 + nv + entries;
    let m = nv + entries;
    let mut a = vec![0.0; m * n];
    let mut b = vec![0.0; m];
    // vertex rows: f.v - t + s_v = 0
    for (i, v) in vertices.iter().enumerate() {
        let vc = v.correlation(corr.nx, corr.ny);
        for (e, &entry) in vc.table().iter().enumerate() {
            a[i * n + e] = entry;
        }
        a[i * n + entries] = -1.0;
        a[i * n + entries + 1 + i] = 1.0;
        b[i] = 0.0;
    }
    // bound rows: f_e + s_e = u
    for e in 0..entries {
        let row = nv + e;
        a[row * n + e] = 1.0;
        a[row * n + entries + 1 + nv + e] = 1.0;
        b[row] = u;
    }
    // objective: minimize t - f . corr
    let mut c = vec![0.0; n];
    for (e, &p) in corr.table().iter().enumerate() {
        c[e] = -p;
    }
    c[entries] = 1.0;

    let coeffs = match simplex::solve(&a, m, n, &b, &c) {
        LpOutcome::Optimal { x, .. } => x[..entries].to_vec(),
        _ => unreachable!("deepest-cut LP is feasible and bounded"),
    };
    let mut cert = BellCertificate {
        na: corr.na,
        nb: corr.nb,
        nx: corr.nx,
        ny: corr.ny,
        coeffs,
        vertex_max: 0.0,
        corr_value: 0.0,
        gap: 0.0,
    };
    cert.vertex_max = vertices
        .iter()
        .map(|v| cert.value_on_vertex(v))
        .fold(f64::NEG_INFINITY, f64::max);
    cert.corr_value = cert.value_on(corr);
    cert.gap = cert.corr_value - cert.vertex_max;
    cert
}

/// The PR-box correlation: `x XOR y = a AND b` with uniform marginals.
pub fn pr_box() -> Correlation {
    let mut p = vec![0.0; 16];
    for a in 0..2usize {
        for b in 0..2usize {
            for x in 0..2usize {
                for y in 0..2usize {
                    if x ^ y == a & b {
                        p[((a * 2 + b) * 2 + x) * 2 + y] = 0.5;
                    }
                }
            }
        }
    }
    Correlation::new(2, 2, 2, 2, p, 0.0).expect("PR box table is valid")
}
