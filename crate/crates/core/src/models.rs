//! Benchmark models and JSON (de)serialization of systems.
//!
//! Full systems are stored as `{"n","m","p","A","B","C"}`, structured or
//! reduced models as `{"J","R","B","C"}`. Matrices are arrays of rows and
//! every float is written with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::lti::StateSpace;
use crate::manifold::ManifoldPoint;
use crate::structured::point_to_state_space;

/// Factors of the mass-spring-damper chain, `A = (J - R)Q`.
#[derive(Clone, Debug)]
pub struct MsdFactors {
    pub j: Mat,
    pub r: Mat,
    pub q: Mat,
    pub b: Mat,
    pub c: Mat,
}

/// Chain of `n/2` unit-damped masses (mass 4, spring 4) with forces on the
/// first two momenta and the first displacement measured.
///
/// States alternate displacement and momentum.
pub fn gen_msd(n: usize) -> Result<(StateSpace, MsdFactors)> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::Domain(format!("MSD order must be even and >= 4, got {n}")));
    }
    let mut j = Mat::zeros(n, n);
    let mut r = Mat::zeros(n, n);
    let mut q = Mat::zeros(n, n);
    for i in (0..n).step_by(2) {
        j[(i, i + 1)] = 1.0;
        j[(i + 1, i)] = -1.0;
        r[(i + 1, i + 1)] = 1.0;
        q[(i + 1, i + 1)] = 0.25;
        q[(i, i)] = if i == 0 { 4.0 } else { 8.0 };
        if i + 2 < n {
            q[(i, i + 2)] = -4.0;
            q[(i + 2, i)] = -4.0;
        }
    }
    let mut b = Mat::zeros(n, 2);
    b[(1, 0)] = 1.0;
    b[(3, 1)] = 1.0;
    let mut c = Mat::zeros(1, n);
    c[(0, 0)] = 1.0;
    let sys = StateSpace::new((&j - &r) * &q, b.clone(), c.clone())?;
    Ok((sys, MsdFactors { j, r, q, b, c }))
}

/// Order-4 reduction of `gen_msd(50)` found by a trust-region run in the
/// original study, embedded verbatim.
pub fn reference_r4_point() -> ManifoldPoint {
    let j = Mat::from_row_slice(
        4,
        4,
        &[
            0.0, -0.049530743507566, 0.018625039127746, -0.007106890495913,
            0.049530743507566, 0.0, -0.626524211054092, 1.083765311671058,
            -0.018625039127746, 0.626524211054092, 0.0, 0.066881602488369,
            0.007106890495913, -1.083765311671058, -0.066881602488369, 0.0,
        ],
    );
    let r = Mat::from_row_slice(
        4,
        4,
        &[
            0.020979798103068, 0.008729495305520, -0.026753473825891, -0.003019900398660,
            0.008729495305520, 0.296162218193050, 0.016509857981159, -0.169695898367632,
            -0.026753473825891, 0.016509857981159, 0.277287705425208, -0.447429037737505,
            -0.003019900398660, -0.169695898367632, -0.447429037737505, 1.303620534440710,
        ],
    );
    let b = Mat::from_row_slice(
        4,
        2,
        &[
            1.087281955207546, 1.075128712585373,
            0.019632883027025, -0.081897882654859,
            -0.060704161404099, -0.031902870273656,
            0.013609328117831, -0.011572768539278,
        ],
    );
    let c = Mat::from_row_slice(
        1,
        4,
        &[0.079020553332377, 0.648595865888539, 0.877453660076422, -3.055799879863735],
    );
    ManifoldPoint::new(j, r, b, c).expect("embedded fixture is a valid point")
}

/// Contents of a model file in either schema.
#[derive(Clone, Debug)]
pub enum ModelFile {
    Full(StateSpace),
    Structured(ManifoldPoint),
}

impl ModelFile {
    pub fn to_state_space(&self) -> Result<StateSpace> {
        match self {
            ModelFile::Full(s) => Ok(s.clone()),
            ModelFile::Structured(p) => point_to_state_space(p),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FullRaw {
    n: usize,
    m: usize,
    p: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StructuredRaw {
    #[serde(rename = "J")]
    j: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
}

fn field_error(field: &str, message: impl Into<String>) -> Error {
    Error::Parse { message: message.into(), line: None, field: Some(field.to_string()) }
}

fn json_error(e: serde_json::Error) -> Error {
    let message = e.to_string();
    let field = message
        .split('`')
        .nth(1)
        .filter(|_| message.contains("field"))
        .map(str::to_string);
    Error::Parse { message, line: Some(e.line()), field }
}

fn to_matrix(field: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<Mat> {
    if rows.len() != nrows {
        return Err(field_error(field, format!("expected {nrows} rows, found {}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(field_error(
                field,
                format!("row {i} has {} entries, expected {ncols}", row.len()),
            ));
        }
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Parses either schema from a JSON string.
pub fn parse_model(text: &str) -> Result<ModelFile> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_error)?;
    let is_structured = value.get("J").is_some() || value.get("R").is_some();
    if is_structured {
        let raw: StructuredRaw = serde_json::from_str(text).map_err(json_error)?;
        let r = raw.j.len();
        let m = raw.b.first().map_or(0, Vec::len);
        let p = raw.c.len();
        let point = ManifoldPoint::new(
            to_matrix("J", &raw.j, r, r)?,
            to_matrix("R", &raw.r, r, r)?,
            to_matrix("B", &raw.b, r, m)?,
            to_matrix("C", &raw.c, p, r)?,
        )?;
        Ok(ModelFile::Structured(point))
    } else {
        let raw: FullRaw = serde_json::from_str(text).map_err(json_error)?;
        let sys = StateSpace::new(
            to_matrix("A", &raw.a, raw.n, raw.n)?,
            to_matrix("B", &raw.b, raw.n, raw.m)?,
            to_matrix("C", &raw.c, raw.p, raw.n)?,
        )?;
        Ok(ModelFile::Full(sys))
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    parse_model(&std::fs::read_to_string(path)?)
}

/// Loads a file in either schema as a state-space model.
pub fn load_system(path: impl AsRef<Path>) -> Result<StateSpace> {
    load_model(path)?.to_state_space()
}

fn write_matrix(out: &mut String, m: &Mat) {
    out.push('[');
    for i in 0..m.nrows() {
        if i > 0 {
            out.push_str(",\n    ");
        }
        out.push('[');
        for j in 0..m.ncols() {
            if j > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{:.16e}", m[(i, j)]);
        }
        out.push(']');
    }
    out.push(']');
}

pub fn system_to_json(sys: &StateSpace) -> String {
    let mut out = format!(
        "{{\n  \"n\": {},\n  \"m\": {},\n  \"p\": {},\n  \"A\": ",
        sys.order(),
        sys.inputs(),
        sys.outputs()
    );
    write_matrix(&mut out, &sys.a);
    out.push_str(",\n  \"B\": ");
    write_matrix(&mut out, &sys.b);
    out.push_str(",\n  \"C\": ");
    write_matrix(&mut out, &sys.c);
    out.push_str("\n}\n");
    out
}

pub fn point_to_json(p: &ManifoldPoint) -> String {
    let mut out = String::from("{\n  \"J\": ");
    write_matrix(&mut out, p.j());
    out.push_str(",\n  \"R\": ");
    write_matrix(&mut out, p.r());
    out.push_str(",\n  \"B\": ");
    write_matrix(&mut out, p.b());
    out.push_str(",\n  \"C\": ");
    write_matrix(&mut out, p.c());
    out.push_str("\n}\n");
    out
}

pub fn save_system(sys: &StateSpace, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, system_to_json(sys))?)
}

pub fn save_point(p: &ManifoldPoint, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, point_to_json(p))?)
}
