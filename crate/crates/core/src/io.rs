//! JSON interchange for games, strategies, and classicalization
//! certificates.
//!
//! One document may carry a `game`, a `strategy`, or both. Complex numbers
//! are two-element arrays `[re, im]`; matrices are row-major nested arrays.
//! Parsers reject NaN and infinities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classicalize::{ClassicalizationCertificate, CongruenceStep};
use crate::model::{Game, ModelError, Strategy};
use crate::numerics::CMatrix;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid document: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type MatrixDoc = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDoc {
    pub a_names: Vec<String>,
    pub b_names: Vec<String>,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    /// Input distribution, row-major over (a, b).
    pub q: Vec<f64>,
    /// Score table, row-major over (a, b, x, y).
    pub h: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyDoc {
    pub dim_d: usize,
    pub dim_e: usize,
    /// `r[a][x]` is Alice's POVM element for input a, output x.
    pub r: Vec<Vec<MatrixDoc>>,
    /// `s[b][y]` is Bob's POVM element for input b, output y.
    pub s: Vec<Vec<MatrixDoc>>,
    pub gamma: MatrixDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub game: Option<GameDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDoc {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isometry: Option<MatrixDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_e1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_e2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_kept: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_traced: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDoc {
    pub steps: Vec<StepDoc>,
    pub final_strategy: StrategyDoc,
    pub commutator_norm: f64,
    pub tau_check: f64,
    pub min_rho_eigenvalue: f64,
    pub induced_residual: f64,
    pub reconstruction_residual: f64,
    /// Tolerance the pipeline was run at.
    pub tol: f64,
    /// Seed material for the deterministic factorization retries.
    pub seed: u64,
}

fn check_finite(values: &[f64], what: &str) -> Result<(), IoError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(IoError::Invalid(format!("{what} contains NaN or Inf")));
    }
    Ok(())
}

pub fn matrix_to_doc(m: &CMatrix) -> MatrixDoc {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| {
                    let v = m.get(i, j);
                    [v.re, v.im]
                })
                .collect()
        })
        .collect()
}

pub fn matrix_from_doc(doc: &MatrixDoc, what: &str) -> Result<CMatrix, IoError> {
    if doc.is_empty() || doc[0].is_empty() {
        return Err(IoError::Invalid(format!("{what} is empty")));
    }
    let cols = doc[0].len();
    for (i, row) in doc.iter().enumerate() {
        if row.len() != cols {
            return Err(IoError::Invalid(format!(
                "{what} row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        for &[re, im] in row {
            if !re.is_finite() || !im.is_finite() {
                return Err(IoError::Invalid(format!("{what} contains NaN or Inf")));
            }
        }
    }
    Ok(CMatrix::from_fn(doc.len(), cols, |i, j| {
        Complex64::new(doc[i][j][0], doc[i][j][1])
    }))
}

pub fn game_to_doc(game: &Game) -> GameDoc {
    GameDoc {
        a_names: game.a_names.clone(),
        b_names: game.b_names.clone(),
        x_names: game.x_names.clone(),
        y_names: game.y_names.clone(),
        q: game.q_table().to_vec(),
        h: game.h_table().to_vec(),
    }
}

pub fn game_from_doc(doc: &GameDoc) -> Result<Game, IoError> {
    check_finite(&doc.q, "input distribution")?;
    check_finite(&doc.h, "score table")?;
    Ok(Game::new(
        doc.a_names.clone(),
        doc.b_names.clone(),
        doc.x_names.clone(),
        doc.y_names.clone(),
        doc.q.clone(),
        doc.h.clone(),
    )?)
}

pub fn strategy_to_doc(strategy: &Strategy) -> StrategyDoc {
    let fam = |f: &Vec<Vec<CMatrix>>| {
        f.iter()
            .map(|row| row.iter().map(matrix_to_doc).collect())
            .collect()
    };
    StrategyDoc {
        dim_d: strategy.dim_d,
        dim_e: strategy.dim_e,
        r: fam(&strategy.r),
        s: fam(&strategy.s),
        gamma: matrix_to_doc(&strategy.gamma),
    }
}

pub fn strategy_from_doc(doc: &StrategyDoc, tol: f64) -> Result<Strategy, IoError> {
    let fam = |f: &Vec<Vec<MatrixDoc>>, who: &str| -> Result<Vec<Vec<CMatrix>>, IoError> {
        f.iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, m)| matrix_from_doc(m, &format!("{who} POVM element ({i}, {j})")))
                    .collect()
            })
            .collect()
    };
    let strategy = Strategy {
        dim_d: doc.dim_d,
        dim_e: doc.dim_e,
        r: fam(&doc.r, "Alice")?,
        s: fam(&doc.s, "Bob")?,
        gamma: matrix_from_doc(&doc.gamma, "gamma")?,
    };
    strategy.validate(tol)?;
    Ok(strategy)
}

pub fn parse_document(text: &str) -> Result<Document, IoError> {
    Ok(serde_json::from_str(text)?)
}

pub fn document_to_string(doc: &Document) -> Result<String, IoError> {
    Ok(serde_json::to_string_pretty(doc)?)
}

fn step_to_doc(step: &CongruenceStep) -> StepDoc {
    let mut doc = StepDoc {
        kind: step.kind().to_string(),
        isometry: None,
        dim_e1: None,
        dim_e2: None,
        dim_kept: None,
        dim_traced: None,
    };
    match step {
        CongruenceStep::RestrictSupport { isometry } => {
            doc.isometry = Some(matrix_to_doc(isometry));
        }
        CongruenceStep::UnitaryEmbedding {
            isometry,
            dim_e1,
            dim_e2,
        } => {
            doc.isometry = Some(matrix_to_doc(isometry));
            doc.dim_e1 = Some(*dim_e1);
            doc.dim_e2 = Some(*dim_e2);
        }
        CongruenceStep::PartialTrace {
            dim_kept,
            dim_traced,
        } => {
            doc.dim_kept = Some(*dim_kept);
            doc.dim_traced = Some(*dim_traced);
        }
    }
    doc
}

fn step_from_doc(doc: &StepDoc) -> Result<CongruenceStep, IoError> {
    match doc.kind.as_str() {
        "restrict_support" => {
            let m = doc
                .isometry
                .as_ref()
                .ok_or_else(|| IoError::Invalid("restrict_support step lacks isometry".into()))?;
            Ok(CongruenceStep::RestrictSupport {
                isometry: matrix_from_doc(m, "step isometry")?,
            })
        }
        "unitary_embedding" => {
            let m = doc
                .isometry
                .as_ref()
                .ok_or_else(|| IoError::Invalid("unitary_embedding step lacks isometry".into()))?;
            let (e1, e2) = match (doc.dim_e1, doc.dim_e2) {
                (Some(e1), Some(e2)) => (e1, e2),
                _ => {
                    return Err(IoError::Invalid(
                        "unitary_embedding step lacks factor dimensions".into(),
                    ))
                }
            };
            Ok(CongruenceStep::UnitaryEmbedding {
                isometry: matrix_from_doc(m, "step isometry")?,
                dim_e1: e1,
                dim_e2: e2,
            })
        }
        "partial_trace" => match (doc.dim_kept, doc.dim_traced) {
            (Some(k), Some(t)) => Ok(CongruenceStep::PartialTrace {
                dim_kept: k,
                dim_traced: t,
            }),
            _ => Err(IoError::Invalid(
                "partial_trace step lacks factor dimensions".into(),
            )),
        },
        other => Err(IoError::Invalid(format!("unknown step kind {other:?}"))),
    }
}

pub fn certificate_to_doc(
    cert: &ClassicalizationCertificate,
    tol: f64,
    seed: u64,
) -> CertificateDoc {
    CertificateDoc {
        steps: cert.steps.iter().map(step_to_doc).collect(),
        final_strategy: strategy_to_doc(&cert.final_strategy),
        commutator_norm: cert.commutator_norm,
        tau_check: cert.tau_check,
        min_rho_eigenvalue: cert.min_rho_eigenvalue,
        induced_residual: cert.induced_residual,
        reconstruction_residual: cert.reconstruction_residual,
        tol,
        seed,
    }
}

pub fn certificate_from_doc(doc: &CertificateDoc) -> Result<ClassicalizationCertificate, IoError> {
    for v in [
        doc.commutator_norm,
        doc.tau_check,
        doc.min_rho_eigenvalue,
        doc.induced_residual,
        doc.reconstruction_residual,
        doc.tol,
    ] {
        if !v.is_finite() {
            return Err(IoError::Invalid("certificate contains NaN or Inf".into()));
        }
    }
    Ok(ClassicalizationCertificate {
        steps: doc
            .steps
            .iter()
            .map(step_from_doc)
            .collect::<Result<_, _>>()?,
        final_strategy: strategy_from_doc(&doc.final_strategy, doc.tol.max(1e-7))?,
        commutator_norm: doc.commutator_norm,
        tau_check: doc.tau_check,
        min_rho_eigenvalue: doc.min_rho_eigenvalue,
        induced_residual: doc.induced_residual,
        reconstruction_residual: doc.reconstruction_residual,
    })
}

pub fn certificate_to_string(doc: &CertificateDoc) -> Result<String, IoError> {
    Ok(serde_json::to_string_pretty(doc)?)
}

pub fn certificate_from_string(text: &str) -> Result<CertificateDoc, IoError> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classicalize::{classicalize, verify_certificate};
    use crate::generator::{perfect_guessing_instance, GeneratorConfig};
    use crate::model::{achieved_correlation, chsh_game, chsh_optimal_strategy};

    #[test]
    fn game_round_trip() {
        let game = chsh_game();
        let doc = Document {
            game: Some(game_to_doc(&game)),
            strategy: None,
        };
        let text = document_to_string(&doc).unwrap();
        let back = parse_document(&text).unwrap();
        let game2 = game_from_doc(back.game.as_ref().unwrap()).unwrap();
        assert_eq!(game.q_table(), game2.q_table());
        assert_eq!(game.h_table(), game2.h_table());
        assert_eq!(game.a_names, game2.a_names);
    }

    #[test]
    fn strategy_round_trip() {
        let strategy = chsh_optimal_strategy();
        let doc = Document {
            game: None,
            strategy: Some(strategy_to_doc(&strategy)),
        };
        let text = document_to_string(&doc).unwrap();
        let back = parse_document(&text).unwrap();
        let strategy2 = strategy_from_doc(back.strategy.as_ref().unwrap(), 1e-9).unwrap();
        let c1 = achieved_correlation(&strategy).unwrap();
        let c2 = achieved_correlation(&strategy2).unwrap();
        assert!(c1.max_entry_distance(&c2) < 1e-12);
    }

    #[test]
    fn rejects_nan() {
        let text = r#"{"game": {"a_names": ["0"], "b_names": ["0"],
            "x_names": ["0"], "y_names": ["0"], "q": [NaN], "h": [1.0]}}"#;
        assert!(parse_document(text).is_err());
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = r#"{"game": null, "strategy": null, "extra": 1}"#;
        assert!(parse_document(text).is_err());
    }

    #[test]
    fn rejects_ragged_matrix() {
        let doc: MatrixDoc = vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0]]];
        assert!(matrix_from_doc(&doc, "test").is_err());
    }

    #[test]
    fn rejects_infinite_entry() {
        let doc: MatrixDoc = vec![vec![[f64::INFINITY, 0.0]]];
        assert!(matrix_from_doc(&doc, "test").is_err());
    }

    #[test]
    fn certificate_round_trip_reverifies() {
        let inst = perfect_guessing_instance(&GeneratorConfig::small(2));
        let cert = classicalize(&inst.strategy, &inst.game, 1e-8).unwrap();
        let doc = certificate_to_doc(&cert, 1e-8, 2);
        let text = certificate_to_string(&doc).unwrap();
        let back = certificate_from_string(&text).unwrap();
        let cert2 = certificate_from_doc(&back).unwrap();
        let replayed = verify_certificate(&inst.strategy, &cert2, 1e-8).unwrap();
        assert!((replayed - cert.commutator_norm).abs() <= 1e-10);
    }
}
