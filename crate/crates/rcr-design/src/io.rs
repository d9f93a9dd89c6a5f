//! JSON problem and design documents, canonical artifact serialization, and
//! atomic file output.
//!
//! A problem document carries `groups`, a `criterion` sub-document, and an
//! optional `solver` sub-document; grids are either tabulated point lists with
//! explicit basis matrices or a monomial shorthand over numeric points. All
//! artifacts are emitted through [`canonical_json`], which fixes float
//! formatting at twelve significant digits so identical runs produce
//! byte-identical files.

use crate::criteria::{v_average_prediction, Criterion};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::model::{
    exact_to_approximate, monomial_grid, CompoundProblem, Design, GridPoint, GroupSpec,
};
use crate::solver::SolverConfig;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    groups: Vec<GroupDoc>,
    criterion: CriterionDoc,
    #[serde(default)]
    solver: Option<SolverDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupDoc {
    n: usize,
    m: usize,
    sigma: MatrixDoc,
    #[serde(rename = "D")]
    dmat: MatrixDoc,
    grid: GridDoc,
}

// a scalar stands for a 1×1 matrix
#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixDoc {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixDoc {
    fn to_matrix(&self) -> Result<Matrix> {
        match self {
            MatrixDoc::Scalar(v) => Matrix::from_rows(&[vec![*v]]),
            MatrixDoc::Rows(rows) => Matrix::from_rows(rows),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GridDoc {
    Monomial {
        basis: String,
        degree: usize,
        points: Vec<f64>,
    },
    Tabulated(Vec<PointDoc>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointDoc {
    #[serde(default)]
    x: Option<f64>,
    #[serde(default)]
    label: Option<String>,
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(tag = "type")]
enum CriterionDoc {
    D,
    A,
    #[serde(rename = "c")]
    CVector { c: Vec<f64> },
    #[serde(rename = "IMSE")]
    Imse {
        #[serde(default)]
        nu: Option<NuDoc>,
    },
    L {
        #[serde(rename = "V")]
        v: Vec<Vec<f64>>,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NuDoc {
    Keyword(String),
    Weights(Vec<f64>),
}

// every field optional: absent fields keep the solver defaults
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverDoc {
    #[serde(default)]
    algorithm: Option<String>,
    #[serde(default)]
    max_iters: Option<usize>,
    #[serde(default)]
    gap_tol: Option<f64>,
    #[serde(default)]
    step_rule: Option<String>,
    #[serde(default)]
    restarts: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
}

fn build_grid(doc: &GridDoc) -> Result<Vec<GridPoint>> {
    match doc {
        GridDoc::Monomial { basis, degree, points } => {
            if basis != "monomial" {
                return Err(Error::InvalidData(format!(
                    "unknown grid basis {basis:?}; expected \"monomial\""
                )));
            }
            monomial_grid(points, *degree)
        }
        GridDoc::Tabulated(points) => points
            .iter()
            .enumerate()
            .map(|(idx, pt)| {
                let label = match (&pt.label, pt.x) {
                    (Some(l), _) => l.clone(),
                    (None, Some(x)) => format!("{x}"),
                    (None, None) => idx.to_string(),
                };
                Ok(GridPoint::new(label, Matrix::from_rows(&pt.g)?))
            })
            .collect(),
    }
}

fn build_criterion(doc: &CriterionDoc, groups: &[GroupSpec]) -> Result<Criterion> {
    let p = groups.first().map(|g| g.p()).unwrap_or(0);
    match doc {
        CriterionDoc::D => Ok(Criterion::d()),
        CriterionDoc::A => Ok(Criterion::a(p)),
        CriterionDoc::CVector { c } => Criterion::c(c),
        CriterionDoc::Imse { nu } => {
            let points = groups
                .first()
                .ok_or_else(|| Error::InvalidProblem("no groups".into()))?
                .points();
            let weights = match nu {
                None => None,
                Some(NuDoc::Keyword(word)) if word == "uniform" => None,
                Some(NuDoc::Keyword(word)) => {
                    return Err(Error::InvalidData(format!(
                        "unknown nu keyword {word:?}; expected \"uniform\" or a weight vector"
                    )))
                }
                Some(NuDoc::Weights(w)) => Some(w.as_slice()),
            };
            Ok(Criterion::l(v_average_prediction(points, weights)?))
        }
        CriterionDoc::L { v } => Ok(Criterion::l(Matrix::from_rows(v)?)),
    }
}

fn build_solver_config(doc: Option<SolverDoc>) -> Result<SolverConfig> {
    let mut cfg = SolverConfig::default();
    let Some(doc) = doc else { return Ok(cfg) };
    if let Some(a) = doc.algorithm {
        cfg.algorithm = a.parse().map_err(Error::InvalidData)?;
    }
    if let Some(v) = doc.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = doc.gap_tol {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::DomainError { name: "gap_tol", value: v, domain: "(0, inf)" });
        }
        cfg.gap_tol = v;
    }
    if let Some(r) = doc.step_rule {
        cfg.step_rule = r.parse().map_err(Error::InvalidData)?;
    }
    if let Some(v) = doc.restarts {
        cfg.restarts = v;
    }
    if let Some(v) = doc.seed {
        cfg.seed = v;
    }
    Ok(cfg)
}

/// Parses a problem document, returning the problem and the solver
/// configuration (defaults where the document leaves fields out).
pub fn parse_problem(text: &str) -> Result<(CompoundProblem, SolverConfig)> {
    let doc: ProblemDoc = serde_json::from_str(text)
        .map_err(|e| Error::InvalidData(format!("problem document: {e}")))?;
    let groups = doc
        .groups
        .iter()
        .map(|g| {
            GroupSpec::new(
                build_grid(&g.grid)?,
                SpdMatrix::from_matrix(g.sigma.to_matrix()?)?,
                g.dmat.to_matrix()?,
                g.m,
                g.n,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let criterion = build_criterion(&doc.criterion, &groups)?;
    let config = build_solver_config(doc.solver)?;
    Ok((CompoundProblem::new(groups, criterion)?, config))
}

/// Reads and parses a problem document from a file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<(CompoundProblem, SolverConfig)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidData(format!("cannot read {}: {e}", path.display())))?;
    parse_problem(&text)
}

/// Designs read from a design document: always the normalized weights, plus
/// the raw exact counts when the document provided them.
#[derive(Debug, Clone)]
pub struct DesignInput {
    pub designs: Vec<Design>,
    pub counts: Option<Vec<Vec<usize>>>,
}

// accepts {designs: [...]}, {counts: [...]}, a full solve report (extra
// fields ignored), or a bare array of weight vectors
#[derive(Deserialize)]
#[serde(untagged)]
enum DesignDoc {
    Object {
        #[serde(default)]
        designs: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        counts: Option<Vec<Vec<usize>>>,
    },
    Bare(Vec<Vec<f64>>),
}

/// Parses a design document against a problem (for grid sizes and m).
pub fn parse_designs(text: &str, prob: &CompoundProblem) -> Result<DesignInput> {
    let doc: DesignDoc = serde_json::from_str(text)
        .map_err(|e| Error::InvalidData(format!("design document: {e}")))?;
    let (weights, counts) = match doc {
        DesignDoc::Object { designs, counts } => (designs, counts),
        DesignDoc::Bare(w) => (Some(w), None),
    };
    let designs = match (&weights, &counts) {
        (Some(w), _) => w.iter().cloned().map(Design::new).collect::<Result<Vec<_>>>()?,
        (None, Some(c)) => c
            .iter()
            .zip(prob.groups())
            .map(|(counts, g)| exact_to_approximate(counts, g.m()))
            .collect::<Result<Vec<_>>>()?,
        (None, None) => {
            return Err(Error::InvalidData(
                "design document needs a \"designs\" or \"counts\" field".into(),
            ))
        }
    };
    if designs.len() != prob.s() {
        return Err(Error::CountMismatch { expected: prob.s(), got: designs.len() });
    }
    for (i, (d, g)) in designs.iter().zip(prob.groups()).enumerate() {
        if d.weights().len() != g.k() {
            return Err(Error::InvalidData(format!(
                "group {i} design has {} weights, grid has {} points",
                d.weights().len(),
                g.k()
            )));
        }
    }
    if let Some(c) = &counts {
        if c.len() != prob.s() {
            return Err(Error::CountMismatch { expected: prob.s(), got: c.len() });
        }
    }
    Ok(DesignInput { designs, counts })
}

/// Reads and parses a design document from a file.
pub fn load_designs(path: impl AsRef<Path>, prob: &CompoundProblem) -> Result<DesignInput> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidData(format!("cannot read {}: {e}", path.display())))?;
    parse_designs(&text, prob)
}

// fixed float formatting: twelve significant digits, scientific notation
struct CanonicalFormatter;

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        write!(writer, "{value:.11e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f32,
    ) -> std::io::Result<()> {
        write!(writer, "{value:.11e}")
    }
}

/// Serializes any artifact to canonical JSON: struct-declared key order,
/// floats at twelve significant digits, non-finite values as null, trailing
/// newline. Identical inputs yield byte-identical output.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidData(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::InvalidData(format!("non-UTF8 artifact: {e}")))
}

/// Writes bytes to `path` atomically: temp file in the same directory, then
/// rename. Readers never observe a half-written artifact.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Error::InvalidData(format!("cannot create temp file in {}: {e}", dir.display())))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.flush())
        .map_err(|e| Error::InvalidData(format!("write failed: {e}")))?;
    tmp.persist(path)
        .map_err(|e| Error::InvalidData(format!("cannot rename into {}: {e}", path.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::evaluate;
    use crate::solver::{solve, Algorithm, StepRule};

    // two-group random-intercept line problem, one grid tabulated and one
    // monomial, to exercise both grid encodings in a single document
    const LINE_DOC: &str = r#"{
        "groups": [
            {
                "n": 1, "m": 5, "sigma": 1.0,
                "D": [[1.0, 0.0], [0.0, 0.0]],
                "grid": {"basis": "monomial", "degree": 1, "points": [0.0, 1.0]}
            },
            {
                "n": 1, "m": 5, "sigma": [[1.0]],
                "D": [[1.0, 0.0], [0.0, 0.0]],
                "grid": [
                    {"x": 0.0, "G": [[1.0, 0.0]]},
                    {"label": "one", "G": [[1.0, 1.0]]}
                ]
            }
        ],
        "criterion": {"type": "A"},
        "solver": {"algorithm": "vertex-direction", "gap_tol": 1e-9, "seed": 3}
    }"#;

    #[test]
    fn problem_document_parses_and_solves_to_the_known_optimum() {
        let (prob, config) = parse_problem(LINE_DOC).unwrap();
        assert_eq!(prob.s(), 2);
        assert_eq!(prob.groups()[1].points()[1].label, "one");
        assert_eq!(config.algorithm, Algorithm::VertexDirection);
        assert_eq!(config.gap_tol, 1e-9);
        assert_eq!(config.seed, 3);
        assert_eq!(config.step_rule, StepRule::ExactLineSearch, "default retained");
        let report = solve(&prob, &config).unwrap();
        let w = report.designs[0].weights()[1];
        assert!((w - 0.414).abs() <= 1e-3, "solved weight {w}");
    }

    #[test]
    fn criterion_variants_all_construct() {
        for (crit, expect_ok) in [
            (r#"{"type": "D"}"#, true),
            (r#"{"type": "A"}"#, true),
            (r#"{"type": "c", "c": [1.0, 0.0]}"#, true),
            (r#"{"type": "IMSE"}"#, true),
            (r#"{"type": "IMSE", "nu": "uniform"}"#, true),
            (r#"{"type": "IMSE", "nu": [0.25, 0.75]}"#, true),
            (r#"{"type": "L", "V": [[1.0, 0.0], [0.0, 1.0]]}"#, true),
            (r#"{"type": "IMSE", "nu": "gaussian"}"#, false),
            (r#"{"type": "E"}"#, false),
        ] {
            let doc = format!(
                r#"{{"groups": [{{"n": 1, "m": 2, "sigma": 1.0, "D": [[0.0, 0.0], [0.0, 0.0]],
                    "grid": {{"basis": "monomial", "degree": 1, "points": [0.0, 1.0]}}}}],
                    "criterion": {crit}}}"#
            );
            let got = parse_problem(&doc);
            assert_eq!(got.is_ok(), expect_ok, "criterion {crit}: {got:?}");
        }
    }

    #[test]
    fn imse_with_identity_weights_matches_the_a_criterion() {
        // uniform nu over the two-point line grid averages the two point
        // moments, so V = ([[1,0],[0,0]] + [[1,1],[1,1]])/2, checked via L
        let doc_l = r#"{
            "groups": [{"n": 1, "m": 5, "sigma": 1.0, "D": [[1.0, 0.0], [0.0, 0.0]],
                "grid": {"basis": "monomial", "degree": 1, "points": [0.0, 1.0]}}],
            "criterion": {"type": "L", "V": [[1.0, 0.5], [0.5, 0.5]]}
        }"#;
        let doc_imse = r#"{
            "groups": [{"n": 1, "m": 5, "sigma": 1.0, "D": [[1.0, 0.0], [0.0, 0.0]],
                "grid": {"basis": "monomial", "degree": 1, "points": [0.0, 1.0]}}],
            "criterion": {"type": "IMSE", "nu": [0.5, 0.5]}
        }"#;
        let (prob_l, _) = parse_problem(doc_l).unwrap();
        let (prob_imse, _) = parse_problem(doc_imse).unwrap();
        let designs = vec![Design::new(vec![0.5, 0.5]).unwrap()];
        let a = evaluate(&prob_l, &designs).unwrap().value();
        let b = evaluate(&prob_imse, &designs).unwrap().value();
        assert!((a - b).abs() <= 1e-14, "L {a} vs IMSE {b}");
    }

    #[test]
    fn malformed_documents_are_rejected_with_context() {
        let bad_basis = LINE_DOC.replace("monomial", "fourier");
        match parse_problem(&bad_basis) {
            Err(Error::InvalidData(msg)) => assert!(msg.contains("fourier"), "msg: {msg}"),
            other => panic!("expected InvalidData, got {other:?}"),
        }
        let bad_solver = LINE_DOC.replace("vertex-direction", "gradient-descent");
        match parse_problem(&bad_solver) {
            Err(Error::InvalidData(msg)) => {
                assert!(msg.contains("gradient-descent"), "msg: {msg}")
            }
            other => panic!("expected InvalidData, got {other:?}"),
        }
        match parse_problem("{\"groups\": []}") {
            Err(Error::InvalidData(msg)) => {
                assert!(msg.contains("criterion"), "msg: {msg}")
            }
            other => panic!("expected InvalidData, got {other:?}"),
        }
    }

    #[test]
    fn design_documents_accept_weights_counts_and_bare_arrays() {
        let (prob, _) = parse_problem(LINE_DOC).unwrap();
        let from_weights =
            parse_designs(r#"{"designs": [[0.5, 0.5], [0.3, 0.7]]}"#, &prob).unwrap();
        assert_eq!(from_weights.designs[1].weights(), &[0.3, 0.7]);
        assert!(from_weights.counts.is_none());

        let from_counts = parse_designs(r#"{"counts": [[2, 3], [1, 4]]}"#, &prob).unwrap();
        assert_eq!(from_counts.designs[0].weights(), &[0.4, 0.6]);
        assert_eq!(from_counts.designs[1].weights(), &[0.2, 0.8]);
        assert_eq!(from_counts.counts.as_ref().unwrap()[1], vec![1, 4]);

        let bare = parse_designs("[[0.5, 0.5], [0.5, 0.5]]", &prob).unwrap();
        assert_eq!(bare.designs.len(), 2);

        match parse_designs(r#"{"counts": [[2, 2], [1, 4]]}"#, &prob) {
            Err(Error::CountMismatch { expected: 5, got: 4 }) => {}
            other => panic!("expected CountMismatch, got {other:?}"),
        }
        match parse_designs(r#"{"designs": [[0.5, 0.5]]}"#, &prob) {
            Err(Error::CountMismatch { expected: 2, got: 1 }) => {}
            other => panic!("expected CountMismatch, got {other:?}"),
        }
    }

    #[test]
    fn solve_reports_round_trip_as_design_documents() {
        let (prob, config) = parse_problem(LINE_DOC).unwrap();
        let report = solve(&prob, &config).unwrap();
        let artifact = canonical_json(&report).unwrap();
        let reread = parse_designs(&artifact, &prob).unwrap();
        for (a, b) in reread.designs.iter().zip(&report.designs) {
            for (x, y) in a.weights().iter().zip(b.weights()) {
                assert!(
                    (x - y).abs() <= 1e-11 * (1.0 + y.abs()),
                    "12-digit round trip moved a weight: {x} vs {y}"
                );
            }
        }
    }

    #[test]
    fn canonical_json_fixes_float_formatting() {
        #[derive(Serialize)]
        struct Probe {
            a: f64,
            b: f64,
            c: f64,
        }
        let text = canonical_json(&Probe { a: 0.25, b: 1.0, c: f64::NAN }).unwrap();
        assert_eq!(text, "{\"a\":2.50000000000e-1,\"b\":1.00000000000e0,\"c\":null}\n");
        let again = canonical_json(&Probe { a: 0.25, b: 1.0, c: f64::NAN }).unwrap();
        assert_eq!(text, again, "byte-identical across calls");
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("artifact.json");
        write_atomic(&path, b"first\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"first\n");
        write_atomic(&path, b"second\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second\n");
    }
}
