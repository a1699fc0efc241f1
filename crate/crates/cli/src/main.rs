//! Command-line surface: JSON operator descriptions in, human-readable and
//! machine-readable reports out.
//!
//! Exit codes: 0 = ok; 1 = invalid input; 2 = mathematically negative result
//! with witness (obstruction, not similar, not maximal); 3 = unsupported
//! input (spectrum does not split over the piecewise-rational field).

mod schema;

use clap::{Parser, Subcommand};
use ovjordan::certificate::SimilarityCertificate;
use ovjordan::commutant::{self, MasiError};
use ovjordan::error::EngineError;
use ovjordan::ktheory::{self, K0Class, SimilarityVerdict};
use ovjordan::opmatrix::OpMatrix;
use ovjordan::oracle::{self, SamplePlan};
use ovjordan::structure::{
    self, CanonicalForm, CanonicalOutcome, Frame, FrameObstruction, WitnessPoint,
};
use schema::{emit_document, emit_ratfunc, parse_document, OperatorDocument};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ovjordan",
    version,
    about = "Exact canonical forms, commutants and local K-theory for operator-valued matrices"
)]
struct Cli {
    /// Samples per cell for numeric verification.
    #[arg(long, default_value_t = 100, global = true)]
    samples: usize,
    /// Relative tolerance for numeric verification.
    #[arg(long, default_value_t = 1e-8, global = true)]
    tol: f64,
    /// Seed for the deterministic placement of verification samples.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Emit the machine-readable JSON report.
    #[arg(long, global = true, conflicts_with = "text")]
    json: bool,
    /// Emit the human-readable text report (default).
    #[arg(long, global = true)]
    text: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diagonalize a bounded idempotent with an exact certificate.
    DiagonalizeIdempotent { file: PathBuf },
    /// Decide finite-frame existence; print the frame or the obstruction.
    Frame { file: PathBuf },
    /// Compute the canonical local block structure.
    Canonical { file: PathBuf },
    /// Solve the relative commutant exactly.
    Commutant { file: PathBuf },
    /// Diagonalize an idempotent of the commutant by an element of the
    /// commutant (the operator must be in canonical block form).
    InCommutantDiagonalize {
        operator: PathBuf,
        idempotent: PathBuf,
    },
    /// Conjugate one maximal abelian idempotent set onto another inside the
    /// commutant.
    ConjugateMasi {
        operator: PathBuf,
        #[arg(long = "gen-p", required = true)]
        gen_p: Vec<PathBuf>,
        #[arg(long = "gen-q", required = true)]
        gen_q: Vec<PathBuf>,
    },
    /// Compute the local K0 invariant of the relative commutant.
    K0 { file: PathBuf },
    /// Decide similarity with an exact certificate or a K0 witness.
    Similar { a: PathBuf, b: PathBuf },
    /// Run the full pipeline with numeric cross-checks.
    Verify { file: PathBuf },
}

#[derive(Serialize)]
struct Verification {
    samples: usize,
    tolerance: f64,
    max_residual: f64,
    pass: bool,
}

#[derive(Serialize)]
struct Report {
    schema: String,
    command: String,
    status: String,
    payload: Value,
    verification: Option<Verification>,
}

struct Outcome {
    report: Report,
    exit: u8,
    text: Vec<String>,
}

fn load(path: &PathBuf) -> Result<OpMatrix, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {}", path.display(), e))?;
    let doc: OperatorDocument =
        serde_json::from_slice(&bytes).map_err(|e| format!("{}: {}", path.display(), e))?;
    parse_document(&doc).map_err(|e| format!("{}: {}", path.display(), e))
}

fn cert_payload(cert: &SimilarityCertificate) -> Value {
    json!({
        "x": emit_document(cert.x()),
        "x_inv": emit_document(cert.x_inv()),
        "bounded": cert.bounded(),
    })
}

fn witness_point_payload(w: &WitnessPoint) -> Value {
    match w {
        WitnessPoint::Rational(p) => json!(schema::emit_rational_str(p)),
        WitnessPoint::Isolated { lo, hi } => json!({
            "isolating_interval": [schema::emit_rational_str(lo), schema::emit_rational_str(hi)]
        }),
    }
}

fn obstruction_payload(ob: &FrameObstruction) -> Value {
    json!({
        "witness_point": witness_point_payload(&ob.witness_point),
        "quotient": emit_ratfunc(&ob.quotient),
        "quotient_display": schema::display_ratfunc(&ob.quotient),
        "narrative": ob.narrative,
    })
}

fn frame_payload(frame: &Frame) -> Value {
    json!({
        "elements": frame.elements.iter().map(emit_document).collect::<Vec<_>>(),
        "supports": frame.supports,
    })
}

fn blocks_payload(form: &CanonicalForm) -> Value {
    let cells: Vec<Value> = form
        .blocks
        .iter()
        .map(|cell| {
            let blocks: Vec<Value> = cell
                .iter()
                .map(|b| {
                    json!({
                        "offset": b.offset,
                        "size": b.size,
                        "diagonal": emit_ratfunc(&b.diagonal),
                        "superdiagonals": b.superdiagonals.iter().map(emit_ratfunc).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json!(blocks)
        })
        .collect();
    json!(cells)
}

fn k0_payload(k0: &K0Class) -> Value {
    let cells: Vec<Value> = k0
        .families
        .iter()
        .map(|fams| {
            json!({
                "free_rank": fams.iter().map(|f| 1 + f.splittings.iter().map(|(_, c)| c - 1).sum::<usize>()).sum::<usize>(),
                "families": fams.iter().map(|f| json!({
                    "size": f.size,
                    "diagonal": emit_ratfunc(&f.diagonal),
                    "multiplicity": f.multiplicity,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let collisions: Vec<Value> = k0
        .collisions
        .iter()
        .map(|c| {
            json!({
                "cell": c.cell,
                "point": witness_point_payload(&c.point),
                "family": c.family,
                "local_classes": c.local_classes,
            })
        })
        .collect();
    json!({
        "partition": k0.partition.points().iter().map(schema::emit_rational_str).collect::<Vec<_>>(),
        "cells": cells,
        "collisions": collisions,
    })
}

fn report(
    command: &str,
    status: &str,
    payload: Value,
    verification: Option<Verification>,
) -> Report {
    Report {
        schema: schema::SCHEMA.to_string(),
        command: command.to_string(),
        status: status.to_string(),
        payload,
        verification,
    }
}

fn engine_error_outcome(command: &str, e: &EngineError) -> Outcome {
    let (status, exit) = match e {
        EngineError::SpectrumNotSplit { .. } | EngineError::IrrationalStructurePoint(_) => {
            ("unsupported", 3u8)
        }
        _ => ("invalid", 1u8),
    };
    Outcome {
        report: report(command, status, json!({ "error": e.to_string() }), None),
        exit,
        text: vec![format!("{}: {}", status, e)],
    }
}

fn invalid(command: &str, msg: String) -> Outcome {
    Outcome {
        report: report(command, "invalid", json!({ "error": msg }), None),
        exit: 1,
        text: vec![format!("invalid: {}", msg)],
    }
}

fn verify_conjugation(
    a: &OpMatrix,
    cert: &SimilarityCertificate,
    expected: &OpMatrix,
    cli_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<Verification, EngineError> {
    let plan = SamplePlan::for_matrices(
        &[a, cert.x(), cert.x_inv(), expected],
        cli_samples,
        tol,
        seed,
    )?;
    let rep = oracle::check_conjugation(a, cert, expected, &plan);
    Ok(Verification {
        samples: rep.samples,
        tolerance: tol,
        max_residual: rep.max_residual,
        pass: rep.pass,
    })
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::DiagonalizeIdempotent { file } => {
            let cmd = "diagonalize-idempotent";
            let p = match load(file) {
                Ok(m) => m,
                Err(e) => return invalid(cmd, e),
            };
            match ovjordan::diag::diagonalize_idempotent(&p) {
                Ok((cert, d)) => {
                    let verification =
                        match verify_conjugation(&p, &cert, &d, cli.samples, cli.tol, cli.seed) {
                            Ok(v) => v,
                            Err(e) => return engine_error_outcome(cmd, &e),
                        };
                    let text = vec![
                        "stage: trace partition and pivot selection".to_string(),
                        "stage: row switch and column elimination".to_string(),
                        "stage: block shear to the diagonal projection".to_string(),
                        format!(
                            "ok: diagonal conjugate reached; oracle residual {:.3e} over {} samples",
                            verification.max_residual, verification.samples
                        ),
                    ];
                    Outcome {
                        report: report(
                            cmd,
                            "ok",
                            json!({
                                "certificate": cert_payload(&cert),
                                "diagonal": emit_document(&d),
                            }),
                            Some(verification),
                        ),
                        exit: 0,
                        text,
                    }
                }
                Err(e) => engine_error_outcome(cmd, &e),
            }
        }
        Command::Frame { file } => {
            let cmd = "frame";
            let a = match load(file) {
                Ok(m) => m,
                Err(e) => return invalid(cmd, e),
            };
            match structure::frame_exists(&a) {
                Ok(CanonicalOutcome::Form(frame, _form)) => Outcome {
                    report: report(
                        cmd,
                        "ok",
                        json!({ "exists": true, "frame": frame_payload(&frame) }),
                        None,
                    ),
                    exit: 0,
                    text: vec![format!(
                        "ok: finite frame with {} elements",
                        frame.elements.len()
                    )],
                },
                Ok(CanonicalOutcome::Obstruction(ob)) => Outcome {
                    report: report(
                        cmd,
                        "obstruction",
                        json!({ "exists": false, "obstruction": obstruction_payload(&ob) }),
                        None,
                    ),
                    exit: 2,
                    text: vec![
                        "stage: exact triangularization".to_string(),
                        "stage: splitting idempotent solve".to_string(),
                        format!(
                            "obstruction: no finite frame; unbounded quotient {} at {}",
                            schema::display_ratfunc(&ob.quotient),
                            ob.witness_point
                        ),
                    ],
                },
                Err(e) => engine_error_outcome(cmd, &e),
            }
        }
        Command::Canonical { file } => {
            let cmd = "canonical";
            let a = match load(file) {
                Ok(m) => m,
                Err(e) => return invalid(cmd, e),
            };
            match structure::canonical_form(&a) {
                Ok(CanonicalOutcome::Form(frame, form)) => {
                    let total = match form.total() {
                        Ok(t) => t,
                        Err(e) => return engine_error_outcome(cmd, &e),
                    };
                    let verification = match verify_conjugation(
                        &a.refine(form.normal_form.partition()),
                        &total,
                        &form.normal_form,
                        cli.samples,
                        cli.tol,
                        cli.seed,
                    ) {
                        Ok(v) => v,
                        Err(e) => return engine_error_outcome(cmd, &e),
                    };
                    let text = vec![
                        "stage: exact triangularization".to_string(),
                        "stage: bounded idempotent splitting".to_string(),
                        "stage: block ordering and extraction".to_string(),
                        format!(
                            "ok: {} cell(s); blocks per cell: {:?}; oracle residual {:.3e}",
                            form.blocks.len(),
                            form.blocks.iter().map(|c| c.len()).collect::<Vec<_>>(),
                            verification.max_residual
                        ),
                    ];
                    Outcome {
                        report: report(
                            cmd,
                            "ok",
                            json!({
                                "certificate": cert_payload(&form.cert),
                                "unitary": cert_payload(&form.unitary_cert),
                                "normal_form": emit_document(&form.normal_form),
                                "blocks": blocks_payload(&form),
                                "frame": frame_payload(&frame),
                            }),
                            Some(verification),
                        ),
                        exit: 0,
                        text,
                    }
                }
                Ok(CanonicalOutcome::Obstruction(ob)) => Outcome {
                    report: report(cmd, "obstruction", obstruction_payload(&ob), None),
                    exit: 2,
                    text: vec![
                        "stage: exact triangularization".to_string(),
                        "stage: splitting idempotent solve".to_string(),
                        format!(
                            "obstruction: witness point {}, unbounded quotient {}",
                            ob.witness_point,
                            schema::display_ratfunc(&ob.quotient)
                        ),
                    ],
                },
                Err(e) => engine_error_outcome(cmd, &e),
            }
        }
        Command::Commutant { file } => {
            let cmd = "commutant";
            let a = match load(file) {
                Ok(m) => m,
                Err(e) => return invalid(cmd, e),
            };
            match commutant::solve_commutant(&a) {
                Ok(cm) => {
                    let cells: Vec<Value> = (0..cm.basis.len())
                        .map(|ci| {
                            json!({
                                "dim": cm.dim(ci),
                                "bounded": cm.bounded[ci],
                                "zero_pattern": cm.zero_pattern[ci],
                                "basis": cm.basis[ci].iter().map(|b| {
                                    let mut flat = Vec::new();
                                    for i in 0..b.rows() {
                                        for j in 0..b.cols() {
                                            flat.push(emit_ratfunc(b.at(i, j)));
                                        }
                                    }
                                    flat
                                }).collect::<Vec<_>>(),
                            })
                        })
                        .collect();
                    let dims: Vec<usize> = (0..cm.basis.len()).map(|ci| cm.dim(ci)).collect();
                    Outcome {
                        report: report(
                            cmd,
                            "ok",
                            json!({
                                "partition": cm.partition.points().iter().map(schema::emit_rational_str).collect::<Vec<_>>(),
                                "cells": cells,
                            }),
                            None,
                        ),
                        exit: 0,
                        text: vec![format!("ok: commutant dimensions per cell {:?}", dims)],
                    }
                }
                Err(e) => engine_error_outcome(cmd, &e),
            }
        }
        Command::InCommutantDiagonalize {
            operator,
            idempotent,
        } => {
            let cmd = "in-commutant-diagonalize";
            let a = match load(operator) {
                Ok(m) => m,
                Err(e) => return invalid(cmd, e),
            };
            let p = match load(idempotent) {
                Ok(m) => m,
                Err(e) => return invalid(cmd, e),
            };
            match commutant::diagonalize_idempotent_in_commutant(&a, &p) {
                Ok(cert) => {
                    let d = match cert.conjugate(&p.refine(cert.x().partition())) {
                        Ok(d) => d,
                        Err(e) => return engine_error_outcome(cmd, &e),
                    };
                    Outcome {
                        report: report(
                            cmd,
                            "ok",
                            json!({
                                "certificate": cert_payload(&cert),
                                "diagonal": emit_document(&d),
                            }),
                            None,
                        ),
                        exit: 0,
                        text: vec![
                            "stage: graded layout and pivot elimination".to_string(),
                            "stage: nilpotent strip-off".to_string(),
                            "ok: idempotent diagonalized inside the commutant".to_string(),
                        ],
                    }
                }
                Err(e) => engine_error_outcome(cmd, &e),
            }
        }
        Command::ConjugateMasi {
            operator,
            gen_p,
            gen_q,
        } => {
            let cmd = "conjugate-masi";
            let a = match load(operator) {
                Ok(m) => m,
                Err(e) => return invalid(cmd, e),
            };
            let mut ps = Vec::new();
            for f in gen_p {
                match load(f) {
                    Ok(m) => ps.push(m),
                    Err(e) => return invalid(cmd, e),
                }
            }
            let mut qs = Vec::new();
            for f in gen_q {
                match load(f) {
                    Ok(m) => qs.push(m),
                    Err(e) => return invalid(cmd, e),
                }
            }
            match commutant::conjugate_masi(&a, &ps, &qs) {
                Ok(cert) => Outcome {
                    report: report(
                        cmd,
                        "ok",
                        json!({ "certificate": cert_payload(&cert) }),
                        None,
                    ),
                    exit: 0,
                    text: vec![
                        "stage: atom extraction and minimality validation".to_string(),
                        "stage: in-commutant frame diagonalization (both sets)".to_string(),
                        "ok: generator sets conjugate inside the commutant".to_string(),
                    ],
                },
                Err(MasiError::NotMaximal { witness }) => Outcome {
                    report: report(
                        cmd,
                        "not-maximal",
                        json!({ "witness": emit_document(&witness) }),
                        None,
                    ),
                    exit: 2,
                    text: vec![
                        "not-maximal: a commuting idempotent lies outside the generated algebra"
                            .to_string(),
                    ],
                },
                Err(MasiError::Engine(e)) => engine_error_outcome(cmd, &e),
            }
        }
        Command::K0 { file } => {
            let cmd = "k0";
            let a = match load(file) {
                Ok(m) => m,
                Err(e) => return invalid(cmd, e),
            };
            match ktheory::k0_of_commutant(&a) {
                Ok(k0) => {
                    let ranks: Vec<usize> =
                        (0..k0.families.len()).map(|c| k0.free_rank(c)).collect();
                    Outcome {
                        report: report(cmd, "ok", k0_payload(&k0), None),
                        exit: 0,
                        text: vec![format!(
                            "ok: free rank per cell {:?}; {} collision point(s)",
                            ranks,
                            k0.collisions.len()
                        )],
                    }
                }
                Err(EngineError::NoCanonicalForm) => match structure::canonical_form(&a) {
                    Ok(CanonicalOutcome::Obstruction(ob)) => Outcome {
                        report: report(cmd, "obstruction", obstruction_payload(&ob), None),
                        exit: 2,
                        text: vec![format!(
                            "obstruction: no canonical form, witness at {}",
                            ob.witness_point
                        )],
                    },
                    Ok(_) => invalid(cmd, "canonical form changed between calls".into()),
                    Err(e) => engine_error_outcome(cmd, &e),
                },
                Err(e) => engine_error_outcome(cmd, &e),
            }
        }
        Command::Similar { a, b } => {
            let cmd = "similar";
            let ma = match load(a) {
                Ok(m) => m,
                Err(e) => return invalid(cmd, e),
            };
            let mb = match load(b) {
                Ok(m) => m,
                Err(e) => return invalid(cmd, e),
            };
            match ktheory::similar(&ma, &mb) {
                Ok(SimilarityVerdict::Similar(cert)) => {
                    let verification = match verify_conjugation(
                        &ma.refine(cert.x().partition()),
                        &cert,
                        &mb.refine(cert.x().partition()),
                        cli.samples,
                        cli.tol,
                        cli.seed,
                    ) {
                        Ok(v) => v,
                        Err(e) => return engine_error_outcome(cmd, &e),
                    };
                    Outcome {
                        report: report(
                            cmd,
                            "ok",
                            json!({ "similar": true, "certificate": cert_payload(&cert) }),
                            Some(verification),
                        ),
                        exit: 0,
                        text: vec![
                            "stage: canonical forms of both operators".to_string(),
                            "stage: blockwise bounded intertwiner matching".to_string(),
                            "ok: similar with exact certificate".to_string(),
                        ],
                    }
                }
                Ok(SimilarityVerdict::NotSimilar { joint_k0, reason }) => Outcome {
                    report: report(
                        cmd,
                        "not-similar",
                        json!({
                            "similar": false,
                            "reason": reason,
                            "joint_k0": k0_payload(&joint_k0),
                        }),
                        None,
                    ),
                    exit: 2,
                    text: vec![format!("not-similar: {}", reason)],
                },
                Ok(SimilarityVerdict::Undecided { reason }) => Outcome {
                    report: report(cmd, "undecided", json!({ "reason": reason }), None),
                    exit: 3,
                    text: vec![format!("undecided: {}", reason)],
                },
                Err(e) => engine_error_outcome(cmd, &e),
            }
        }
        Command::Verify { file } => {
            let cmd = "verify";
            let a = match load(file) {
                Ok(m) => m,
                Err(e) => return invalid(cmd, e),
            };
            match structure::canonical_form(&a) {
                Ok(CanonicalOutcome::Form(_frame, form)) => {
                    let total = match form.total() {
                        Ok(t) => t,
                        Err(e) => return engine_error_outcome(cmd, &e),
                    };
                    let ar = a.refine(form.normal_form.partition());
                    let verification = match verify_conjugation(
                        &ar,
                        &total,
                        &form.normal_form,
                        cli.samples,
                        cli.tol,
                        cli.seed,
                    ) {
                        Ok(v) => v,
                        Err(e) => return engine_error_outcome(cmd, &e),
                    };
                    let cm = match commutant::solve_commutant(&ar) {
                        Ok(cm) => cm,
                        Err(e) => return engine_error_outcome(cmd, &e),
                    };
                    let plan = match SamplePlan::for_matrices(&[&ar], 5, cli.tol, cli.seed) {
                        Ok(p) => p,
                        Err(e) => return engine_error_outcome(cmd, &e),
                    };
                    let mut dim_checks = 0usize;
                    let mut dim_agree = true;
                    for (ci, pts) in plan.points.iter().enumerate() {
                        let symbolic = cm.dim(ci.min(cm.basis.len() - 1));
                        for x in pts {
                            dim_checks += 1;
                            if oracle::numeric_commutant_dim(&ar, x) != symbolic {
                                dim_agree = false;
                            }
                        }
                    }
                    let mut profile_checks = 0usize;
                    let mut profile_agree = true;
                    for (ci, pts) in plan.points.iter().enumerate() {
                        let cell_blocks = &form.blocks[ci.min(form.blocks.len() - 1)];
                        let mut expected: Vec<usize> = cell_blocks.iter().map(|b| b.size).collect();
                        expected.sort_unstable_by(|x, y| y.cmp(x));
                        for x in pts {
                            if let Ok(prof) = oracle::numeric_jordan_profile(&ar, x) {
                                profile_checks += 1;
                                let mut sizes: Vec<usize> =
                                    prof.iter().flat_map(|(_, s)| s.iter().copied()).collect();
                                sizes.sort_unstable_by(|x, y| y.cmp(x));
                                if sizes != expected {
                                    profile_agree = false;
                                }
                            }
                        }
                    }
                    let pass = verification.pass && dim_agree && profile_agree;
                    let status = if pass { "ok" } else { "invalid" };
                    let exit = if pass { 0 } else { 1 };
                    Outcome {
                        report: report(
                            cmd,
                            status,
                            json!({
                                "conjugation_residual": verification.max_residual,
                                "commutant_dim_checks": dim_checks,
                                "commutant_dim_agree": dim_agree,
                                "profile_checks": profile_checks,
                                "profile_agree": profile_agree,
                            }),
                            Some(verification),
                        ),
                        exit,
                        text: vec![format!(
                            "{}: conjugation residual ok, {} dimension checks (agree: {}), {} profile checks (agree: {})",
                            status, dim_checks, dim_agree, profile_checks, profile_agree
                        )],
                    }
                }
                Ok(CanonicalOutcome::Obstruction(ob)) => Outcome {
                    report: report(cmd, "obstruction", obstruction_payload(&ob), None),
                    exit: 2,
                    text: vec![format!(
                        "obstruction: witness at {}, quotient {}",
                        ob.witness_point,
                        schema::display_ratfunc(&ob.quotient)
                    )],
                },
                Err(e) => engine_error_outcome(cmd, &e),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(&cli);
    if cli.json {
        // round-trip through Value so every object gets sorted keys and the
        // bytes are identical across runs
        let value = serde_json::to_value(&outcome.report).expect("report serializes");
        println!(
            "{}",
            serde_json::to_string_pretty(&value).expect("report serializes")
        );
    } else {
        for line in &outcome.text {
            println!("{}", line);
        }
    }
    ExitCode::from(outcome.exit)
}
