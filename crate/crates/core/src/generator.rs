//! Seeded constructors for random strategies, random complete-support games,
//! and strategies that allow perfect guessing by construction.
//!
//! The perfect-guessing construction: a shared classical label `r` is copied
//! into Alice's space and into a dedicated register on Bob's side, Alice
//! outputs `f_r(a)` deterministically, and Bob's game measurement acts on an
//! independent quantum working register. Bob can always recover `x` from the
//! label register, so the second-player states for distinct `x` live in
//! orthogonal label sectors. Both local spaces are then scrambled by random
//! unitaries so nothing is diagonal by accident.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Game, Strategy};
use crate::numerics::{kron, psd_inv_sqrt, sandwich, CMatrix};

pub fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| random_complex(rng))
}

/// Haar-ish random unitary via Gram-Schmidt on a random complex matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    loop {
        let g = random_matrix(rng, n, n);
        if let Some(u) = gram_schmidt_columns(&g) {
            return u;
        }
    }
}

fn gram_schmidt_columns(g: &CMatrix) -> Option<CMatrix> {
    let n = g.rows();
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for j in 0..g.cols() {
        let mut v = g.col_vec(j);
        for prev in &cols {
            let ip: Complex64 = prev.iter().zip(&v).map(|(p, x)| p.conj() * x).sum();
            for (vi, pi) in v.iter_mut().zip(prev) {
                *vi -= ip * pi;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return None;
        }
        for vi in &mut v {
            *vi /= norm;
        }
        cols.push(v);
    }
    Some(CMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]))
}

/// Full-rank random PSD matrix `G G† + eps I`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = random_matrix(rng, n, n);
    let m = &g * &g.dagger();
    &m + &CMatrix::identity(n).scale(0.05)
}

/// Random full-rank density operator.
pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let m = random_psd(rng, n);
    m.scale(1.0 / m.trace_re())
}

/// Random full-support POVM: `n_out` random PSD matrices normalized through
/// the inverse square root of their sum.
pub fn random_povm(rng: &mut ChaCha8Rng, n_out: usize, dim: usize) -> Vec<CMatrix> {
    let parts: Vec<CMatrix> = (0..n_out).map(|_| random_psd(rng, dim)).collect();
    let mut sum = CMatrix::zeros(dim, dim);
    for p in &parts {
        sum = &sum + p;
    }
    let w = psd_inv_sqrt(&sum.hermitize(), 1e-12).expect("sum of full-rank PSD is PD");
    parts.iter().map(|p| sandwich(&w, p).hermitize()).collect()
}

/// Generic random strategy (no particular guessing structure).
pub fn random_strategy(
    seed: u64,
    na: usize,
    nb: usize,
    nx: usize,
    ny: usize,
    dim_d: usize,
    dim_e: usize,
) -> Strategy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = (0..na).map(|_| random_povm(&mut rng, nx, dim_d)).collect();
    let s = (0..nb).map(|_| random_povm(&mut rng, ny, dim_e)).collect();
    let gamma = random_density(&mut rng, dim_d * dim_e);
    Strategy {
        dim_d,
        dim_e,
        r,
        s,
        gamma,
    }
}

fn sorted_names(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Random game with strictly positive input distribution.
pub fn random_complete_support_game(
    seed: u64,
    na: usize,
    nb: usize,
    nx: usize,
    ny: usize,
) -> Game {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..na * nb).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = q.iter().sum();
    for v in &mut q {
        *v /= total;
    }
    let h: Vec<f64> = (0..na * nb * nx * ny)
        .map(|_| rng.gen_range(0.0..1.0))
        .collect();
    Game::new(
        sorted_names(na),
        sorted_names(nb),
        sorted_names(nx),
        sorted_names(ny),
        q,
        h,
    )
    .expect("random game construction is valid")
}

/// Configuration for the perfect-guessing constructor.
#[derive(Clone, Debug)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub na: usize,
    pub nb: usize,
    pub nx: usize,
    pub ny: usize,
    /// Dimension of Bob's quantum working register E1.
    pub dim_e1: usize,
    /// Number of shared classical labels; also dim D and dim of the label
    /// register on Bob's side.
    pub num_labels: usize,
    /// Embed Bob's space into extra dead dimensions so the reduced state is
    /// rank deficient and support restriction has work to do.
    pub pad_e: usize,
}

impl GeneratorConfig {
    pub fn small(seed: u64) -> Self {
        GeneratorConfig {
            seed,
            na: 2,
            nb: 2,
            nx: 2,
            ny: 2,
            dim_e1: 2,
            num_labels: 2,
            pad_e: 0,
        }
    }
}

/// A strategy that allows perfect guessing, together with the hidden
/// classical structure it was built from.
pub struct PerfectGuessingInstance {
    pub strategy: Strategy,
    pub game: Game,
    /// `assignments[r][a] = x`: Alice's deterministic output per label.
    pub assignments: Vec<Vec<usize>>,
    /// Label distribution.
    pub weights: Vec<f64>,
    /// Scrambling unitary applied to Bob's space (E1 tensor label register).
    pub scramble_e: CMatrix,
}

/// Build a strategy that allows perfect guessing by construction.
pub fn perfect_guessing_instance(cfg: &GeneratorConfig) -> PerfectGuessingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nr = cfg.num_labels;
    let dim_d = nr;
    let dim_e_core = cfg.dim_e1 * nr;
    let dim_e = dim_e_core + cfg.pad_e;

    // label distribution, bounded away from zero
    let mut weights: Vec<f64> = (0..nr).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }

    // Alice's deterministic outputs per label
    let assignments: Vec<Vec<usize>> = (0..nr)
        .map(|_| (0..cfg.na).map(|_| rng.gen_range(0..cfg.nx)).collect())
        .collect();

    // gamma = sum_r w_r |r><r|_D tensor sigma_r tensor |r><r|_label
    let mut gamma = CMatrix::zeros(dim_d * dim_e_core, dim_d * dim_e_core);
    let mut sigmas = Vec::with_capacity(nr);
    for r in 0..nr {
        let sigma = random_density(&mut rng, cfg.dim_e1);
        let mut er = vec![Complex64::new(0.0, 0.0); nr];
        er[r] = Complex64::new(1.0, 0.0);
        let label = CMatrix::outer(&er, &er);
        let term = kron(&label, &kron(&sigma, &label)).scale(weights[r]);
        gamma = &gamma + &term;
        sigmas.push(sigma);
    }

    // Alice: R_a^x projects onto the labels with f_r(a) = x
    let mut r_fam: Vec<Vec<CMatrix>> = Vec::with_capacity(cfg.na);
    for a in 0..cfg.na {
        let mut povm = Vec::with_capacity(cfg.nx);
        for x in 0..cfg.nx {
            let mut p = CMatrix::zeros(dim_d, dim_d);
            for r in 0..nr {
                if assignments[r][a] == x {
                    p.set(r, r, Complex64::new(1.0, 0.0));
                }
            }
            povm.push(p);
        }
        r_fam.push(povm);
    }

    // Bob: random POVMs on E1, identity on the label register
    let label_identity = CMatrix::identity(nr);
    let mut s_fam: Vec<Vec<CMatrix>> = Vec::with_capacity(cfg.nb);
    for _ in 0..cfg.nb {
        let t = random_povm(&mut rng, cfg.ny, cfg.dim_e1);
        s_fam.push(t.iter().map(|m| kron(m, &label_identity)).collect());
    }

    // optional dead dimensions on Bob's side
    let (mut gamma, mut s_fam, scramble_dim) = if cfg.pad_e > 0 {
        let mut s_padded = Vec::with_capacity(cfg.nb);
        for povm in &s_fam {
            let padded: Vec<CMatrix> = povm
                .iter()
                .map(|m| {
                    let mut big = CMatrix::zeros(dim_e, dim_e);
                    for i in 0..dim_e_core {
                        for j in 0..dim_e_core {
                            big.set(i, j, m.get(i, j));
                        }
                    }
                    // keep the POVM complete on the dead block
                    let share = 1.0 / povm.len() as f64;
                    for i in dim_e_core..dim_e {
                        big.set(i, i, Complex64::new(share, 0.0));
                    }
                    big
                })
                .collect();
            s_padded.push(padded);
        }
        let embed = CMatrix::from_fn(dim_e, dim_e_core, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let big_gamma = sandwich(&kron(&CMatrix::identity(dim_d), &embed), &gamma);
        (big_gamma, s_padded, dim_e)
    } else {
        (gamma, s_fam, dim_e)
    };

    // scramble both local spaces
    let u_d = random_unitary(&mut rng, dim_d);
    let u_e = random_unitary(&mut rng, scramble_dim);
    gamma = sandwich(&kron(&u_d, &u_e), &gamma);
    for povm in &mut r_fam {
        for m in povm.iter_mut() {
            *m = sandwich(&u_d, m).hermitize();
        }
    }
    for povm in &mut s_fam {
        for m in povm.iter_mut() {
            *m = sandwich(&u_e, m).hermitize();
        }
    }

    let strategy = Strategy {
        dim_d,
        dim_e,
        r: r_fam,
        s: s_fam,
        gamma: gamma.hermitize(),
    };
    let game = random_complete_support_game(
        cfg.seed.wrapping_add(0x9e3779b97f4a7c15),
        cfg.na,
        cfg.nb,
        cfg.nx,
        cfg.ny,
    );
    let _ = sigmas;
    PerfectGuessingInstance {
        strategy,
        game,
        assignments,
        weights,
        scramble_e: u_e,
    }
}

/// Deterministic sweep of small generator configurations, used by tests.
pub fn instance_sweep(count: usize, base_seed: u64) -> Vec<GeneratorConfig> {
    let mut out = Vec::with_capacity(count);
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    for k in 0..count {
        let na = rng.gen_range(1..=3);
        let nb = rng.gen_range(1..=3);
        let nx = rng.gen_range(2..=3);
        let ny = rng.gen_range(2..=3);
        let num_labels = rng.gen_range(2..=3);
        let dim_e1 = rng.gen_range(1..=2);
        let pad_e = if k % 5 == 0 { rng.gen_range(1..=2) } else { 0 };
        out.push(GeneratorConfig {
            seed: base_seed.wrapping_add(k as u64),
            na,
            nb,
            nx,
            ny,
            dim_e1,
            num_labels,
            pad_e,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::achieved_correlation;

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(&mut rng, 5);
        let dev = (&(&u.dagger() * &u) - &CMatrix::identity(5)).max_abs();
        assert!(dev < 1e-12);
    }

    #[test]
    fn random_povm_is_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let povm = random_povm(&mut rng, 3, 4);
        let mut sum = CMatrix::zeros(4, 4);
        for m in &povm {
            sum = &sum + m;
        }
        assert!((&sum - &CMatrix::identity(4)).max_abs() < 1e-10);
    }

    #[test]
    fn generated_strategies_validate() {
        for seed in 0..10 {
            let inst = perfect_guessing_instance(&GeneratorConfig::small(seed));
            inst.strategy.validate(1e-8).unwrap();
            let corr = achieved_correlation(&inst.strategy).unwrap();
            assert!(corr.normalization_residual() < 1e-9);
        }
    }

    #[test]
    fn padded_strategy_validates() {
        let mut cfg = GeneratorConfig::small(7);
        cfg.pad_e = 2;
        let inst = perfect_guessing_instance(&cfg);
        inst.strategy.validate(1e-8).unwrap();
        assert_eq!(inst.strategy.dim_e, 2 * 2 + 2);
    }

    #[test]
    fn alice_output_follows_assignments() {
        // without scrambling the correlation is classical by construction;
        // check the marginal of Alice's output matches the label mixture
        let inst = perfect_guessing_instance(&GeneratorConfig::small(3));
        let corr = achieved_correlation(&inst.strategy).unwrap();
        for a in 0..2 {
            for x in 0..2 {
                let want: f64 = inst
                    .weights
                    .iter()
                    .zip(&inst.assignments)
                    .filter(|(_, f)| f[a] == x)
                    .map(|(w, _)| w)
                    .sum();
                let got = corr.marginal_a(a, x, 0);
                assert!((got - want).abs() < 1e-9, "a={a} x={x}: {got} vs {want}");
            }
        }
    }
}
