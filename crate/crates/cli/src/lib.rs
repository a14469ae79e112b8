//! Command-line front end: file ingestion, one subcommand per analysis,
//! text and machine-readable reports, and a demo reproducing the CHSH
//! numbers.
//!
//! Exit codes: 0 success, 2 input error, 3 hypothesis not met, 4 numerical
//! failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use nonlocal_core::classical::{self, ClassicalError, Membership};
use nonlocal_core::classicalize::{self, ClassicalizeError};
use nonlocal_core::guessing;
use nonlocal_core::io as nio;
use nonlocal_core::model::{
    achieved_correlation, chsh_game, chsh_optimal_strategy, expected_score, Correlation, Game,
    ModelError, Strategy,
};
use nonlocal_core::numerics::NumericsError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Machine,
}

#[derive(Parser)]
#[command(
    name = "nonlocal",
    about = "Analyze two-player nonlocal game strategies",
    version
)]
pub struct Cli {
    /// Validation tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Support-overlap tolerance for perfect-guessing checks.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol_pg: f64,
    /// Seed for randomized internals.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// Cap on the number of enumerated deterministic strategies.
    #[arg(long, global = true, default_value_t = classical::DEFAULT_VERTEX_CAP)]
    pub max_vertices: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Score a strategy against a game.
    Score(ScoreArgs),
    /// Best classical score of a game, with a witness.
    ClassicalValue(ClassicalValueArgs),
    /// Bob's probability of guessing Alice's output.
    Guess(GuessArgs),
    /// Run the classicalization pipeline and write a certificate.
    Classicalize(ClassicalizeArgs),
    /// Reproduce the CHSH numbers.
    ChshDemo(ChshDemoArgs),
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Document containing a game.
    #[arg(long)]
    pub game: PathBuf,
    /// Document containing a strategy.
    #[arg(long)]
    pub strategy: PathBuf,
}

#[derive(Args)]
pub struct ClassicalValueArgs {
    #[arg(long)]
    pub game: PathBuf,
}

#[derive(Args)]
pub struct GuessArgs {
    #[arg(long)]
    pub strategy: PathBuf,
    /// Analyze Bob's guessing power before his own measurement.
    #[arg(long)]
    pub pre: bool,
}

#[derive(Args)]
pub struct ClassicalizeArgs {
    #[arg(long)]
    pub strategy: PathBuf,
    #[arg(long)]
    pub game: PathBuf,
    /// Where to write the certificate document.
    #[arg(long, default_value = "certificate.json")]
    pub certificate: PathBuf,
}

#[derive(Args)]
pub struct ChshDemoArgs {
    /// Also write the demo game and strategy documents to this directory.
    #[arg(long)]
    pub emit: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliFailure {
    pub code: i32,
    pub message: String,
}

impl CliFailure {
    fn input(message: impl Into<String>) -> Self {
        CliFailure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<nio::IoError> for CliFailure {
    fn from(e: nio::IoError) -> Self {
        CliFailure::input(e.to_string())
    }
}

impl From<ModelError> for CliFailure {
    fn from(e: ModelError) -> Self {
        CliFailure::input(e.to_string())
    }
}

impl From<NumericsError> for CliFailure {
    fn from(e: NumericsError) -> Self {
        CliFailure {
            code: EXIT_NUMERICAL,
            message: e.to_string(),
        }
    }
}

impl From<ClassicalError> for CliFailure {
    fn from(e: ClassicalError) -> Self {
        CliFailure::input(e.to_string())
    }
}

impl From<guessing::GuessingError> for CliFailure {
    fn from(e: guessing::GuessingError) -> Self {
        CliFailure {
            code: EXIT_NUMERICAL,
            message: e.to_string(),
        }
    }
}

impl From<ClassicalizeError> for CliFailure {
    fn from(e: ClassicalizeError) -> Self {
        let code = match &e {
            ClassicalizeError::NotCompleteSupport { .. }
            | ClassicalizeError::NotPerfectGuessing { .. } => EXIT_HYPOTHESIS,
            ClassicalizeError::Model(_) => EXIT_INPUT,
            _ => EXIT_NUMERICAL,
        };
        CliFailure {
            code,
            message: e.to_string(),
        }
    }
}

/// Round to 10 significant digits so printed values parse back to
/// themselves.
pub fn sig10(v: f64) -> f64 {
    format!("{v:.9e}").parse().unwrap_or(v)
}

pub fn run(cli: Cli, out: &mut impl std::io::Write) -> Result<(), CliFailure> {
    if cli.tol <= 0.0 || cli.tol_pg <= 0.0 {
        return Err(CliFailure::input("tolerances must be positive"));
    }
    match &cli.command {
        Command::Score(args) => cmd_score(&cli, args, out),
        Command::ClassicalValue(args) => cmd_classical_value(&cli, args, out),
        Command::Guess(args) => cmd_guess(&cli, args, out),
        Command::Classicalize(args) => cmd_classicalize(&cli, args, out),
        Command::ChshDemo(args) => cmd_chsh_demo(&cli, args, out),
    }
}

fn read_document(path: &Path) -> Result<nio::Document, CliFailure> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliFailure::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(nio::parse_document(&text)?)
}

fn load_game(path: &Path) -> Result<Game, CliFailure> {
    let doc = read_document(path)?;
    let game = doc
        .game
        .ok_or_else(|| CliFailure::input(format!("{} contains no game", path.display())))?;
    Ok(nio::game_from_doc(&game)?)
}

fn load_strategy(path: &Path, tol: f64) -> Result<Strategy, CliFailure> {
    let doc = read_document(path)?;
    let strategy = doc
        .strategy
        .ok_or_else(|| CliFailure::input(format!("{} contains no strategy", path.display())))?;
    Ok(nio::strategy_from_doc(&strategy, tol)?)
}

fn write_out(out: &mut impl std::io::Write, text: &str) -> Result<(), CliFailure> {
    writeln!(out, "{text}").map_err(|e| CliFailure {
        code: EXIT_NUMERICAL,
        message: format!("cannot write output: {e}"),
    })
}

fn correlation_json(corr: &Correlation) -> serde_json::Value {
    json!(corr.table().iter().map(|&v| sig10(v)).collect::<Vec<_>>())
}

fn cmd_score(
    cli: &Cli,
    args: &ScoreArgs,
    out: &mut impl std::io::Write,
) -> Result<(), CliFailure> {
    let game = load_game(&args.game)?;
    let strategy = load_strategy(&args.strategy, cli.tol)?;
    let corr = achieved_correlation(&strategy)?;
    let score = expected_score(&game, &corr)?;
    let ns = corr.no_signaling_residual();
    match cli.format {
        OutputFormat::Machine => {
            let doc = json!({
                "score": sig10(score),
                "no_signaling_residual": sig10(ns),
                "correlation": correlation_json(&corr),
            });
            write_out(out, &doc.to_string())
        }
        OutputFormat::Text => {
            write_out(out, &format!("expected score: {score:.10}"))?;
            write_out(out, &format!("no-signaling residual: {ns:.3e}"))?;
            write_out(out, "correlation p(x,y | a,b):")?;
            for a in 0..corr.na {
                for b in 0..corr.nb {
                    let rows: Vec<String> = (0..corr.nx)
                        .map(|x| {
                            (0..corr.ny)
                                .map(|y| format!("{:.6}", corr.at(a, b, x, y)))
                                .collect::<Vec<_>>()
                                .join(" ")
                        })
                        .collect();
                    write_out(out, &format!("  inputs ({a}, {b}): {}", rows.join(" | ")))?;
                }
            }
            Ok(())
        }
    }
}

fn cmd_classical_value(
    cli: &Cli,
    args: &ClassicalValueArgs,
    out: &mut impl std::io::Write,
) -> Result<(), CliFailure> {
    let game = load_game(&args.game)?;
    let (value, witness) = classical::classical_value(&game, cli.max_vertices)?;
    match cli.format {
        OutputFormat::Machine => {
            let doc = json!({
                "classical_value": sig10(value),
                "witness_f": witness.f,
                "witness_g": witness.g,
            });
            write_out(out, &doc.to_string())
        }
        OutputFormat::Text => {
            write_out(out, &format!("classical value: {value:.10}"))?;
            write_out(
                out,
                &format!(
                    "witness: Alice outputs {:?}, Bob outputs {:?} (indexed by input)",
                    witness.f, witness.g
                ),
            )
        }
    }
}

fn cmd_guess(
    cli: &Cli,
    args: &GuessArgs,
    out: &mut impl std::io::Write,
) -> Result<(), CliFailure> {
    let strategy = load_strategy(&args.strategy, cli.tol)?;
    if args.pre {
        let mut per_a = Vec::new();
        for a in 0..strategy.na() {
            let rep = guessing::pre_measurement_guessing(&strategy, a)?;
            per_a.push((a, rep.p_guess, guessing::min_entropy(&rep)?));
        }
        match cli.format {
            OutputFormat::Machine => {
                let doc = json!({
                    "mode": "pre",
                    "per_input": per_a.iter().map(|&(a, p, h)| json!({
                        "a": a, "p_guess": sig10(p), "min_entropy": sig10(h),
                    })).collect::<Vec<_>>(),
                });
                write_out(out, &doc.to_string())
            }
            OutputFormat::Text => {
                for (a, p, h) in per_a {
                    write_out(
                        out,
                        &format!(
                            "input a={a}: pre-measurement guessing {p:.10} \
                             (min-entropy {h:.6} bits)"
                        ),
                    )?;
                }
                Ok(())
            }
        }
    } else {
        let mut per_ab = Vec::new();
        let mut worst: f64 = 0.0;
        for a in 0..strategy.na() {
            for b in 0..strategy.nb() {
                let rep = guessing::guessing_probability(&strategy, a, b)?;
                worst = worst.max(rep.p_guess);
                per_ab.push((a, b, rep.p_guess, guessing::min_entropy(&rep)?));
            }
        }
        match cli.format {
            OutputFormat::Machine => {
                let doc = json!({
                    "mode": "post",
                    "per_input_pair": per_ab.iter().map(|&(a, b, p, h)| json!({
                        "a": a, "b": b, "p_guess": sig10(p), "min_entropy": sig10(h),
                    })).collect::<Vec<_>>(),
                    "worst_p_guess": sig10(worst),
                    "worst_min_entropy": sig10(-worst.log2()),
                });
                write_out(out, &doc.to_string())
            }
            OutputFormat::Text => {
                for (a, b, p, h) in per_ab {
                    write_out(
                        out,
                        &format!(
                            "inputs (a={a}, b={b}): guessing probability {p:.10} \
                             (min-entropy {h:.6} bits)"
                        ),
                    )?;
                }
                write_out(
                    out,
                    &format!(
                        "worst case: {worst:.10} ({:.6} bits)",
                        -worst.log2()
                    ),
                )
            }
        }
    }
}

fn cmd_classicalize(
    cli: &Cli,
    args: &ClassicalizeArgs,
    out: &mut impl std::io::Write,
) -> Result<(), CliFailure> {
    let game = load_game(&args.game)?;
    let strategy = load_strategy(&args.strategy, cli.tol)?;
    if !game.complete_support() {
        let pairs = game.zero_probability_pairs();
        return Err(CliFailure {
            code: EXIT_HYPOTHESIS,
            message: format!(
                "game does not have complete support; q(a,b) = 0 for input pairs {pairs:?}"
            ),
        });
    }
    let cert = classicalize::classicalize(&strategy, &game, cli.tol_pg)?;
    let corr = achieved_correlation(&strategy)?;
    let membership = classical::local_membership(&corr, 1e-7, cli.max_vertices)?;
    let (verdict, residual_or_gap) = match &membership {
        Membership::Local(dec) => ("local", dec.residual),
        Membership::Nonlocal(bell) => ("nonlocal", bell.gap),
    };
    let (dim_e1, dim_e2) = cert
        .steps
        .iter()
        .find_map(|s| match s {
            classicalize::CongruenceStep::UnitaryEmbedding {
                dim_e1, dim_e2, ..
            } => Some((*dim_e1, *dim_e2)),
            _ => None,
        })
        .unwrap_or((cert.final_strategy.dim_e, 1));
    let doc = nio::certificate_to_doc(&cert, cli.tol_pg, cli.seed);
    let text = nio::certificate_to_string(&doc)?;
    fs::write(&args.certificate, text).map_err(|e| {
        CliFailure::input(format!("cannot write {}: {e}", args.certificate.display()))
    })?;
    match cli.format {
        OutputFormat::Machine => {
            let doc = json!({
                "certificate": args.certificate.display().to_string(),
                "dim_e1": dim_e1,
                "dim_e2": dim_e2,
                "commutator_norm": sig10(cert.commutator_norm),
                "tau_check": sig10(cert.tau_check),
                "min_rho_eigenvalue": sig10(cert.min_rho_eigenvalue),
                "membership": verdict,
                "membership_residual": sig10(residual_or_gap),
            });
            write_out(out, &doc.to_string())
        }
        OutputFormat::Text => {
            write_out(
                out,
                &format!("certificate written to {}", args.certificate.display()),
            )?;
            write_out(out, &format!("factor dimensions: E1={dim_e1}, E2={dim_e2}"))?;
            write_out(
                out,
                &format!("commutator norm: {:.3e}", cert.commutator_norm),
            )?;
            write_out(out, &format!("readout deviation: {:.3e}", cert.tau_check))?;
            write_out(
                out,
                &format!("achieved correlation is {verdict} (residual {residual_or_gap:.3e})"),
            )
        }
    }
}

fn cmd_chsh_demo(
    cli: &Cli,
    args: &ChshDemoArgs,
    out: &mut impl std::io::Write,
) -> Result<(), CliFailure> {
    use nonlocal_core::model::SecondPlayerStates;
    let game = chsh_game();
    let strategy = chsh_optimal_strategy();
    let (classical_value, _) = classical::classical_value(&game, cli.max_vertices)?;
    let corr = achieved_correlation(&strategy)?;
    let quantum_score = expected_score(&game, &corr)?;
    let states = SecondPlayerStates::new(&strategy)?;
    // y-conditioned weights of the (a,b) = (0,0) block
    let mut weights = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            weights.push(states.rho_abxy(0, 0, x, y).trace_re() * 2.0);
        }
    }
    let mut post: f64 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            post = post.max(guessing::guessing_probability(&strategy, a, b)?.p_guess);
        }
    }
    let mut pre = f64::INFINITY;
    for a in 0..2 {
        pre = pre.min(guessing::pre_measurement_guessing(&strategy, a)?.p_guess);
    }
    if let Some(dir) = &args.emit {
        fs::create_dir_all(dir)
            .map_err(|e| CliFailure::input(format!("cannot create {}: {e}", dir.display())))?;
        let game_doc = nio::Document {
            game: Some(nio::game_to_doc(&game)),
            strategy: None,
        };
        let strategy_doc = nio::Document {
            game: None,
            strategy: Some(nio::strategy_to_doc(&strategy)),
        };
        for (name, doc) in [("chsh_game.json", game_doc), ("chsh_strategy.json", strategy_doc)] {
            let path = dir.join(name);
            fs::write(&path, nio::document_to_string(&doc)?)
                .map_err(|e| CliFailure::input(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    let adversary_min_entropy = 1.0;
    let bob_min_entropy = -post.log2();
    match cli.format {
        OutputFormat::Machine => {
            let doc = json!({
                "classical_value": sig10(classical_value),
                "quantum_score": sig10(quantum_score),
                "state_weights_00": weights.iter().map(|&w| sig10(w)).collect::<Vec<_>>(),
                "adversary_min_entropy": sig10(adversary_min_entropy),
                "bob_min_entropy": sig10(bob_min_entropy),
                "pre_measurement_guessing": sig10(pre),
                "post_measurement_guessing": sig10(post),
            });
            write_out(out, &doc.to_string())
        }
        OutputFormat::Text => {
            write_out(out, &format!("classical value: {classical_value:.10}"))?;
            write_out(out, &format!("quantum score:   {quantum_score:.10}"))?;
            write_out(
                out,
                "second-player states at inputs (0, 0), conditioned on Bob's outcome:",
            )?;
            let angles = ["pi/8", "5pi/8", "pi/8", "5pi/8"];
            let mut k = 0;
            for x in 0..2 {
                for y in 0..2 {
                    write_out(
                        out,
                        &format!(
                            "  outputs (x={x}, y={y}): weight {:.10} on |{}>",
                            weights[k], angles[k]
                        ),
                    )?;
                    k += 1;
                }
            }
            write_out(
                out,
                &format!("external adversary min-entropy: {adversary_min_entropy:.4} bits"),
            )?;
            write_out(
                out,
                &format!("second-player min-entropy:      {bob_min_entropy:.6} bits"),
            )?;
            write_out(
                out,
                &format!(
                    "certified erasure: pre-measurement guessing {pre:.10}, \
                     post-measurement {post:.10}"
                ),
            )
        }
    }
}
