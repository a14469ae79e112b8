//! Games, correlations, strategies, and the scoring / state-extraction
//! formulas that tie them together.
//!
//! Tensor ordering is fixed globally: Alice's space D first, Bob's space E
//! second; tables are stored row-major over `(a, b, x, y)` with symbols in
//! lexicographic order.

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{
    self, kron, partial_trace, psd_sqrt, sandwich, CMatrix, NumericsError, TraceSide,
};

/// Default validation tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("invalid correlation: {0}")]
    InvalidCorrelation(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("unknown input index: {0}")]
    UnknownInput(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// A two-player game: input distribution `q` over A x B and nonnegative
/// score table `H` over A x B x X x Y.
#[derive(Clone, Debug)]
pub struct Game {
    pub a_names: Vec<String>,
    pub b_names: Vec<String>,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    q: Vec<f64>,
    h: Vec<f64>,
}

fn check_sorted(names: &[String], which: &str) -> Result<(), ModelError> {
    if names.is_empty() {
        return Err(ModelError::InvalidGame(format!("empty alphabet {which}")));
    }
    for w in names.windows(2) {
        if w[0] >= w[1] {
            return Err(ModelError::InvalidGame(format!(
                "alphabet {which} must be strictly increasing (lexicographic), got {:?} then {:?}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

impl Game {
    pub fn new(
        a_names: Vec<String>,
        b_names: Vec<String>,
        x_names: Vec<String>,
        y_names: Vec<String>,
        q: Vec<f64>,
        h: Vec<f64>,
    ) -> Result<Self, ModelError> {
        check_sorted(&a_names, "A")?;
        check_sorted(&b_names, "B")?;
        check_sorted(&x_names, "X")?;
        check_sorted(&y_names, "Y")?;
        let (na, nb, nx, ny) = (a_names.len(), b_names.len(), x_names.len(), y_names.len());
        if q.len() != na * nb {
            return Err(ModelError::InvalidGame(format!(
                "q table has {} entries, expected {}",
                q.len(),
                na * nb
            )));
        }
        if h.len() != na * nb * nx * ny {
            return Err(ModelError::InvalidGame(format!(
                "H table has {} entries, expected {}",
                h.len(),
                na * nb * nx * ny
            )));
        }
        for &v in q.iter().chain(h.iter()) {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::InvalidGame(format!(
                    "tables must be finite and nonnegative, got {v}"
                )));
            }
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidGame(format!(
                "q sums to {total}, expected 1"
            )));
        }
        Ok(Game {
            a_names,
            b_names,
            x_names,
            y_names,
            q,
            h,
        })
    }

    pub fn na(&self) -> usize {
        self.a_names.len()
    }
    pub fn nb(&self) -> usize {
        self.b_names.len()
    }
    pub fn nx(&self) -> usize {
        self.x_names.len()
    }
    pub fn ny(&self) -> usize {
        self.y_names.len()
    }

    pub fn q_at(&self, a: usize, b: usize) -> f64 {
        self.q[a * self.nb() + b]
    }

    pub fn h_at(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.h[((a * self.nb() + b) * self.nx() + x) * self.ny() + y]
    }

    pub fn q_table(&self) -> &[f64] {
        &self.q
    }

    pub fn h_table(&self) -> &[f64] {
        &self.h
    }

    /// True iff `q(a, b) > 0` for every input pair.
    pub fn complete_support(&self) -> bool {
        self.q.iter().all(|&v| v > 0.0)
    }

    /// Input pairs with `q(a, b) = 0`.
    pub fn zero_probability_pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for a in 0..self.na() {
            for b in 0..self.nb() {
                if self.q_at(a, b) == 0.0 {
                    out.push((self.a_names[a].clone(), self.b_names[b].clone()));
                }
            }
        }
        out
    }
}

/// A conditional probability table `p(x, y | a, b)` with its diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Correlation {
    pub na: usize,
    pub nb: usize,
    pub nx: usize,
    pub ny: usize,
    p: Vec<f64>,
}

impl Correlation {
    pub fn new(
        na: usize,
        nb: usize,
        nx: usize,
        ny: usize,
        mut p: Vec<f64>,
        tol: f64,
    ) -> Result<Self, ModelError> {
        if p.len() != na * nb * nx * ny {
            return Err(ModelError::InvalidCorrelation(format!(
                "table has {} entries, expected {}",
                p.len(),
                na * nb * nx * ny
            )));
        }
        for v in &mut p {
            if !v.is_finite() {
                return Err(ModelError::InvalidCorrelation("non-finite entry".into()));
            }
            if *v < 0.0 {
                if *v < -tol {
                    return Err(ModelError::InvalidCorrelation(format!(
                        "negative entry {v}"
                    )));
                }
                *v = 0.0;
            }
        }
        Ok(Correlation { na, nb, nx, ny, p })
    }

    pub fn uniform(na: usize, nb: usize, nx: usize, ny: usize) -> Self {
        let v = 1.0 / (nx * ny) as f64;
        Correlation {
            na,
            nb,
            nx,
            ny,
            p: vec![v; na * nb * nx * ny],
        }
    }

    #[inline]
    pub fn idx(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((a * self.nb + b) * self.nx + x) * self.ny + y
    }

    pub fn at(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[self.idx(a, b, x, y)]
    }

    pub fn table(&self) -> &[f64] {
        &self.p
    }

    /// `p_a^x` computed from slice `b` (independent of `b` when no-signaling).
    pub fn marginal_a(&self, a: usize, x: usize, b: usize) -> f64 {
        (0..self.ny).map(|y| self.at(a, b, x, y)).sum()
    }

    /// `p_b^y` computed from slice `a`.
    pub fn marginal_b(&self, b: usize, y: usize, a: usize) -> f64 {
        (0..self.nx).map(|x| self.at(a, b, x, y)).sum()
    }

    /// Max deviation of any `(a, b)` slice from summing to 1.
    pub fn normalization_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.na {
            for b in 0..self.nb {
                let s: f64 = (0..self.nx)
                    .flat_map(|x| (0..self.ny).map(move |y| (x, y)))
                    .map(|(x, y)| self.at(a, b, x, y))
                    .sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }

    /// Max dependence of a marginal on the far input.
    pub fn no_signaling_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.na {
            for x in 0..self.nx {
                let m0 = self.marginal_a(a, x, 0);
                for b in 1..self.nb {
                    worst = worst.max((self.marginal_a(a, x, b) - m0).abs());
                }
            }
        }
        for b in 0..self.nb {
            for y in 0..self.ny {
                let m0 = self.marginal_b(b, y, 0);
                for a in 1..self.na {
                    worst = worst.max((self.marginal_b(b, y, a) - m0).abs());
                }
            }
        }
        worst
    }

    pub fn max_entry_distance(&self, other: &Correlation) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A quantum strategy: POVM families on D (Alice) and E (Bob) plus a shared
/// density operator on D tensor E.
#[derive(Clone, Debug)]
pub struct Strategy {
    pub dim_d: usize,
    pub dim_e: usize,
    /// `r[a][x]` acting on D.
    pub r: Vec<Vec<CMatrix>>,
    /// `s[b][y]` acting on E.
    pub s: Vec<Vec<CMatrix>>,
    /// Density operator on D tensor E.
    pub gamma: CMatrix,
}

impl Strategy {
    pub fn na(&self) -> usize {
        self.r.len()
    }
    pub fn nb(&self) -> usize {
        self.s.len()
    }
    pub fn nx(&self) -> usize {
        self.r[0].len()
    }
    pub fn ny(&self) -> usize {
        self.s[0].len()
    }

    pub fn validate(&self, tol: f64) -> Result<(), ModelError> {
        if self.r.is_empty() || self.s.is_empty() {
            return Err(ModelError::InvalidStrategy("empty POVM family".into()));
        }
        validate_povm_family(&self.r, self.dim_d, tol, "Alice")?;
        validate_povm_family(&self.s, self.dim_e, tol, "Bob")?;
        let d = self.dim_d * self.dim_e;
        if self.gamma.rows() != d || self.gamma.cols() != d {
            return Err(ModelError::InvalidStrategy(format!(
                "gamma is {}x{}, expected {d}x{d}",
                self.gamma.rows(),
                self.gamma.cols()
            )));
        }
        if !self.gamma.is_hermitian(tol.max(numerics::HERMITIAN_TOL)) {
            return Err(ModelError::InvalidStrategy("gamma is not Hermitian".into()));
        }
        let eig = numerics::hermitian_eig(&self.gamma.hermitize())?;
        if let Some(&min) = eig.eigenvalues.last() {
            if min < -tol.max(numerics::PSD_TOL) {
                return Err(ModelError::InvalidStrategy(format!(
                    "gamma has negative eigenvalue {min:.3e}"
                )));
            }
        }
        if (self.gamma.trace_re() - 1.0).abs() > tol {
            return Err(ModelError::InvalidStrategy(format!(
                "gamma has trace {:.12}, expected 1",
                self.gamma.trace_re()
            )));
        }
        Ok(())
    }
}

fn validate_povm_family(
    fam: &[Vec<CMatrix>],
    dim: usize,
    tol: f64,
    who: &str,
) -> Result<(), ModelError> {
    let n_out = fam[0].len();
    for (input, povm) in fam.iter().enumerate() {
        if povm.len() != n_out {
            return Err(ModelError::InvalidStrategy(format!(
                "{who} POVM for input {input} has {} outcomes, expected {n_out}",
                povm.len()
            )));
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for m in povm {
            if m.rows() != dim || m.cols() != dim {
                return Err(ModelError::InvalidStrategy(format!(
                    "{who} POVM element is {}x{}, expected {dim}x{dim}",
                    m.rows(),
                    m.cols()
                )));
            }
            if !m.is_hermitian(tol.max(numerics::HERMITIAN_TOL)) {
                return Err(ModelError::InvalidStrategy(format!(
                    "{who} POVM element for input {input} is not Hermitian"
                )));
            }
            let eig = numerics::hermitian_eig(&m.hermitize())?;
            if let Some(&min) = eig.eigenvalues.last() {
                if min < -tol.max(numerics::PSD_TOL) {
                    return Err(ModelError::InvalidStrategy(format!(
                        "{who} POVM element for input {input} has eigenvalue {min:.3e}"
                    )));
                }
            }
            sum = &sum + m;
        }
        let dev = (&sum - &CMatrix::identity(dim)).max_abs();
        if dev > tol.max(1e-8) {
            return Err(ModelError::InvalidStrategy(format!(
                "{who} POVM for input {input} sums to identity only within {dev:.3e}"
            )));
        }
    }
    Ok(())
}

/// `sum q(a,b) H(a,b,x,y) p_ab^xy`.
pub fn expected_score(game: &Game, corr: &Correlation) -> Result<f64, ModelError> {
    if (game.na(), game.nb(), game.nx(), game.ny()) != (corr.na, corr.nb, corr.nx, corr.ny) {
        return Err(ModelError::AlphabetMismatch(format!(
            "game is {}x{}x{}x{}, correlation is {}x{}x{}x{}",
            game.na(),
            game.nb(),
            game.nx(),
            game.ny(),
            corr.na,
            corr.nb,
            corr.nx,
            corr.ny
        )));
    }
    let mut total = 0.0;
    for a in 0..game.na() {
        for b in 0..game.nb() {
            let q = game.q_at(a, b);
            if q == 0.0 {
                continue;
            }
            for x in 0..game.nx() {
                for y in 0..game.ny() {
                    total += q * game.h_at(a, b, x, y) * corr.at(a, b, x, y);
                }
            }
        }
    }
    Ok(total)
}

/// Born-rule correlation `p_ab^xy = Tr[gamma (R_a^x tensor S_b^y)]`.
pub fn achieved_correlation(strategy: &Strategy) -> Result<Correlation, ModelError> {
    strategy.validate(DEFAULT_TOL)?;
    let (na, nb, nx, ny) = (
        strategy.na(),
        strategy.nb(),
        strategy.nx(),
        strategy.ny(),
    );
    let mut p = vec![0.0; na * nb * nx * ny];
    let mut k = 0;
    for a in 0..na {
        for b in 0..nb {
            for x in 0..nx {
                for y in 0..ny {
                    let op = kron(&strategy.r[a][x], &strategy.s[b][y]);
                    p[k] = (&strategy.gamma * &op).trace().re;
                    k += 1;
                }
            }
        }
    }
    Correlation::new(na, nb, nx, ny, p, 1e-9)
}

/// Bob's subnormalized conditional states for a strategy.
pub struct SecondPlayerStates {
    pub na: usize,
    pub nb: usize,
    pub nx: usize,
    pub ny: usize,
    /// `rho_ab^xy` on E, indexed `(a, b, x, y)`.
    rho_abxy: Vec<CMatrix>,
    /// `rho_a^x` (pre-measurement, S replaced by identity), indexed `(a, x)`.
    rho_ax: Vec<CMatrix>,
    /// `rho = Tr_D gamma`.
    pub rho: CMatrix,
}

impl SecondPlayerStates {
    pub fn new(strategy: &Strategy) -> Result<Self, ModelError> {
        strategy.validate(DEFAULT_TOL)?;
        let (na, nb, nx, ny) = (
            strategy.na(),
            strategy.nb(),
            strategy.nx(),
            strategy.ny(),
        );
        let (dd, de) = (strategy.dim_d, strategy.dim_e);
        let sqrt_r: Vec<Vec<CMatrix>> = strategy
            .r
            .iter()
            .map(|povm| povm.iter().map(|m| psd_sqrt(&m.hermitize())).collect())
            .collect::<Result<Vec<Vec<_>>, _>>()?;
        let sqrt_s: Vec<Vec<CMatrix>> = strategy
            .s
            .iter()
            .map(|povm| povm.iter().map(|m| psd_sqrt(&m.hermitize())).collect())
            .collect::<Result<Vec<Vec<_>>, _>>()?;
        let mut rho_abxy = Vec::with_capacity(na * nb * nx * ny);
        for a in 0..na {
            for b in 0..nb {
                for x in 0..nx {
                    for y in 0..ny {
                        let k = kron(&sqrt_r[a][x], &sqrt_s[b][y]);
                        let post = sandwich(&k, &strategy.gamma);
                        rho_abxy.push(partial_trace(&post, dd, de, TraceSide::First)?);
                    }
                }
            }
        }
        let ie = CMatrix::identity(de);
        let mut rho_ax = Vec::with_capacity(na * nx);
        for a in 0..na {
            for x in 0..nx {
                let k = kron(&sqrt_r[a][x], &ie);
                let post = sandwich(&k, &strategy.gamma);
                rho_ax.push(partial_trace(&post, dd, de, TraceSide::First)?);
            }
        }
        let rho = partial_trace(&strategy.gamma, dd, de, TraceSide::First)?;
        Ok(SecondPlayerStates {
            na,
            nb,
            nx,
            ny,
            rho_abxy,
            rho_ax,
            rho,
        })
    }

    pub fn rho_abxy(&self, a: usize, b: usize, x: usize, y: usize) -> &CMatrix {
        &self.rho_abxy[((a * self.nb + b) * self.nx + x) * self.ny + y]
    }

    pub fn rho_ax(&self, a: usize, x: usize) -> &CMatrix {
        &self.rho_ax[a * self.nx + x]
    }

    /// All states for one input pair, indexed `[x][y]`.
    pub fn slice(&self, a: usize, b: usize) -> Result<Vec<Vec<&CMatrix>>, ModelError> {
        if a >= self.na || b >= self.nb {
            return Err(ModelError::UnknownInput(format!(
                "(a, b) = ({a}, {b}) out of range {}x{}",
                self.na, self.nb
            )));
        }
        Ok((0..self.nx)
            .map(|x| (0..self.ny).map(|y| self.rho_abxy(a, b, x, y)).collect())
            .collect())
    }
}

fn names01() -> Vec<String> {
    vec!["0".to_string(), "1".to_string()]
}

/// The CHSH game: uniform inputs, win iff `x XOR y = a AND b`.
pub fn chsh_game() -> Game {
    let mut h = vec![0.0; 16];
    for a in 0..2usize {
        for b in 0..2usize {
            for x in 0..2usize {
                for y in 0..2usize {
                    if x ^ y == a & b {
                        h[((a * 2 + b) * 2 + x) * 2 + y] = 1.0;
                    }
                }
            }
        }
    }
    Game::new(names01(), names01(), names01(), names01(), vec![0.25; 4], h)
        .expect("CHSH game construction is static")
}

fn angle_ket(theta: f64) -> [Complex64; 2] {
    [
        Complex64::new(theta.cos(), 0.0),
        Complex64::new(theta.sin(), 0.0),
    ]
}

/// Projector onto `cos(theta)|0> + sin(theta)|1>`.
pub fn angle_projector(theta: f64) -> CMatrix {
    let v = angle_ket(theta);
    CMatrix::outer(&v, &v)
}

/// The optimal CHSH strategy: maximally entangled state, Alice measures at
/// angles 0 and pi/4, Bob at pi/8 and -pi/8.
pub fn chsh_optimal_strategy() -> Strategy {
    use std::f64::consts::PI;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi = [
        Complex64::new(s, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(s, 0.0),
    ];
    let gamma = CMatrix::outer(&phi, &phi);
    let pair = |theta: f64| {
        let p = angle_projector(theta);
        let c = &CMatrix::identity(2) - &p;
        vec![p, c]
    };
    Strategy {
        dim_d: 2,
        dim_e: 2,
        r: vec![pair(0.0), pair(PI / 4.0)],
        s: vec![pair(PI / 8.0), pair(-PI / 8.0)],
        gamma,
    }
}
