//! JSON (de)serialization of the domain objects. All files share one schema
//! family with a top-level `"kind"` discriminator; for convenience the
//! parsers also accept bare payloads without the discriminator.
//!
//! Complex matrices are encoded row-major as `[[re, im], ...]` entry pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::complex::HilbertComplex;
use crate::cone::ComplexMorphism;
use crate::error::{Result, TorsionError};
use crate::morse::{
    CriticalPoint, HermitianStructure, Incidence, MorseDatum, Representation, Word,
};
use num_complex::Complex64;

use crate::operator::{AlgebraTag, CMat, Operator, Payload};

// --- matrices ----------------------------------------------------------

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<CMat> {
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != cols) {
        return Err(TorsionError::InvalidInput(
            "matrix rows have inconsistent lengths".into(),
        ));
    }
    Ok(CMat::from_fn(rows.len(), cols, |i, j| {
        Complex64::new(rows[i][j][0], rows[i][j][1])
    }))
}

// --- operators ---------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrigTermJson {
    pub n: i64,
    pub c: MatrixJson,
}

/// Operator payload: scalar operators carry `matrix`, circle-fibered ones
/// either `trig_poly` (Fourier modes) or `samples` (fibers at midpoints
/// (j + 1/2)/N of a uniform grid).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorJson {
    pub algebra: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trig_poly: Option<Vec<TrigTermJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<MatrixJson>>,
}

fn algebra_from_str(s: &str) -> Result<AlgebraTag> {
    match s {
        "scalar" => Ok(AlgebraTag::Scalar),
        "circle_fibered" => Ok(AlgebraTag::CircleFibered),
        other => Err(TorsionError::InvalidInput(format!(
            "unknown algebra {other:?} (expected \"scalar\" or \"circle_fibered\")"
        ))),
    }
}

pub fn algebra_to_str(tag: AlgebraTag) -> &'static str {
    match tag {
        AlgebraTag::Scalar => "scalar",
        AlgebraTag::CircleFibered => "circle_fibered",
    }
}

impl OperatorJson {
    pub fn to_operator(&self) -> Result<Operator> {
        let tag = algebra_from_str(&self.algebra)?;
        let op = match (tag, &self.matrix, &self.trig_poly, &self.samples) {
            (AlgebraTag::Scalar, Some(m), None, None) => {
                let mat = matrix_from_json(m)?;
                // a zero-size matrix serializes without its other dimension;
                // recover it from the declared rows/cols
                if mat.nrows() == 0 || mat.ncols() == 0 {
                    let r = self.rows.unwrap_or(mat.nrows());
                    let c = self.cols.unwrap_or(mat.ncols());
                    if r != 0 && c != 0 {
                        return Err(TorsionError::InvalidInput(
                            "empty matrix payload with nonzero declared dimensions".into(),
                        ));
                    }
                    Operator::scalar(CMat::zeros(r, c))
                } else {
                    Operator::scalar(mat)
                }
            }
            (AlgebraTag::CircleFibered, None, Some(terms), None) => {
                let parsed: Result<Vec<(i64, CMat)>> = terms
                    .iter()
                    .map(|t| Ok((t.n, matrix_from_json(&t.c)?)))
                    .collect();
                let parsed = parsed?;
                let (rows, cols) = match (self.rows, self.cols) {
                    (Some(r), Some(c)) => (r, c),
                    _ => match parsed.first() {
                        Some((_, m)) => (m.nrows(), m.ncols()),
                        None => {
                            return Err(TorsionError::InvalidInput(
                                "empty trig_poly needs explicit rows/cols".into(),
                            ))
                        }
                    },
                };
                Operator::trig_poly(rows, cols, parsed)?
            }
            (AlgebraTag::CircleFibered, None, None, Some(fibers)) => {
                let parsed: Result<Vec<CMat>> = fibers.iter().map(matrix_from_json).collect();
                Operator::sampled(parsed?)?
            }
            _ => {
                return Err(TorsionError::InvalidInput(
                    "operator needs exactly one payload: \"matrix\" for scalar, \
                     \"trig_poly\" or \"samples\" for circle_fibered"
                        .into(),
                ))
            }
        };
        if let Some(r) = self.rows {
            if r != op.rows() {
                return Err(TorsionError::InvalidInput(format!(
                    "declared rows {r} but payload has {}",
                    op.rows()
                )));
            }
        }
        if let Some(c) = self.cols {
            if c != op.cols() {
                return Err(TorsionError::InvalidInput(format!(
                    "declared cols {c} but payload has {}",
                    op.cols()
                )));
            }
        }
        Ok(op)
    }

    pub fn from_operator(op: &Operator) -> OperatorJson {
        let mut out = OperatorJson {
            algebra: algebra_to_str(op.algebra()).to_string(),
            rows: Some(op.rows()),
            cols: Some(op.cols()),
            matrix: None,
            trig_poly: None,
            samples: None,
        };
        match op.payload() {
            Payload::Scalar(m) => out.matrix = Some(matrix_to_json(m)),
            Payload::TrigPoly(terms) => {
                out.trig_poly = Some(
                    terms
                        .iter()
                        .map(|(&n, c)| TrigTermJson {
                            n,
                            c: matrix_to_json(c),
                        })
                        .collect(),
                )
            }
            Payload::Sampled(fibers) => {
                out.samples = Some(fibers.iter().map(matrix_to_json).collect())
            }
        }
        out
    }
}

// --- complexes and morphisms -------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexJson {
    pub algebra: String,
    /// fiber dimensions k_0, ..., k_N of the modules
    pub modules: Vec<usize>,
    pub differentials: Vec<OperatorJson>,
}

impl ComplexJson {
    pub fn to_complex(&self) -> Result<HilbertComplex> {
        let tag = algebra_from_str(&self.algebra)?;
        let diffs: Result<Vec<Operator>> =
            self.differentials.iter().map(|d| d.to_operator()).collect();
        HilbertComplex::new(tag, self.modules.clone(), diffs?)
    }

    pub fn from_complex(c: &HilbertComplex) -> ComplexJson {
        ComplexJson {
            algebra: algebra_to_str(c.algebra()).to_string(),
            modules: c.dims().to_vec(),
            differentials: c
                .differentials()
                .iter()
                .map(OperatorJson::from_operator)
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MorphismJson {
    pub source: ComplexJson,
    pub target: ComplexJson,
    pub components: Vec<OperatorJson>,
}

impl MorphismJson {
    pub fn to_morphism(&self) -> Result<ComplexMorphism> {
        let comps: Result<Vec<Operator>> =
            self.components.iter().map(|c| c.to_operator()).collect();
        ComplexMorphism::new(self.source.to_complex()?, self.target.to_complex()?, comps?)
    }

    pub fn from_morphism(f: &ComplexMorphism) -> MorphismJson {
        MorphismJson {
            source: ComplexJson::from_complex(f.source()),
            target: ComplexJson::from_complex(f.target()),
            components: f
                .components()
                .iter()
                .map(OperatorJson::from_operator)
                .collect(),
        }
    }
}

// --- words -------------------------------------------------------------

/// Parse a word string like `"g^2*h^-1"`; `"1"` or `""` is the empty word.
pub fn parse_word(s: &str) -> Result<Word> {
    let s = s.trim();
    if s.is_empty() || s == "1" {
        return Ok(Vec::new());
    }
    s.split('*')
        .map(|factor| {
            let factor = factor.trim();
            let (name, power) = match factor.split_once('^') {
                Some((n, p)) => {
                    let k: i64 = p.trim().parse().map_err(|_| {
                        TorsionError::InvalidInput(format!("bad exponent in word factor {factor:?}"))
                    })?;
                    (n.trim(), k)
                }
                None => (factor, 1),
            };
            if name.is_empty() {
                return Err(TorsionError::InvalidInput(format!(
                    "empty generator name in word factor {factor:?}"
                )));
            }
            Ok((name.to_string(), power))
        })
        .collect()
}

pub fn word_to_string(w: &Word) -> String {
    if w.is_empty() {
        return "1".to_string();
    }
    w.iter()
        .map(|(g, k)| format!("{g}^{k}"))
        .collect::<Vec<_>>()
        .join("*")
}

// --- Morse data --------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointJson {
    pub id: String,
    pub index: usize,
    /// critical value of the Morse function
    pub h: f64,
    /// parameter position on the circle; defaults to `h`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IncidenceJson {
    pub from: String,
    pub to: String,
    pub word: String,
    pub coeff: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MorseJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub points: Vec<PointJson>,
    pub incidence: Vec<IncidenceJson>,
}

impl MorseJson {
    pub fn to_datum(&self) -> Result<MorseDatum> {
        let points: Vec<CriticalPoint> = self
            .points
            .iter()
            .map(|p| CriticalPoint {
                id: p.id.clone(),
                index: p.index,
                value: p.h,
                position: p.position.unwrap_or(p.h),
            })
            .collect();
        if points.is_empty() {
            return Err(TorsionError::InvalidInput("no critical points".into()));
        }
        let dim = self
            .dim
            .unwrap_or_else(|| points.iter().map(|p| p.index).max().unwrap_or(1));
        let incidence: Result<Vec<Incidence>> = self
            .incidence
            .iter()
            .map(|e| {
                Ok(Incidence {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    word: parse_word(&e.word)?,
                    coeff: e.coeff,
                })
            })
            .collect();
        let incidence = incidence?;
        for e in &incidence {
            for id in [&e.from, &e.to] {
                if !points.iter().any(|p| &p.id == id) {
                    return Err(TorsionError::InvalidInput(format!(
                        "incidence references unknown point {id:?}"
                    )));
                }
            }
        }
        Ok(MorseDatum {
            dim,
            points,
            incidence,
        })
    }

    pub fn from_datum(d: &MorseDatum) -> MorseJson {
        MorseJson {
            dim: Some(d.dim),
            points: d
                .points
                .iter()
                .map(|p| PointJson {
                    id: p.id.clone(),
                    index: p.index,
                    h: p.value,
                    position: Some(p.position),
                })
                .collect(),
            incidence: d
                .incidence
                .iter()
                .map(|e| IncidenceJson {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    word: word_to_string(&e.word),
                    coeff: e.coeff,
                })
                .collect(),
        }
    }
}

// --- representations and Hermitian structures --------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepresentationJson {
    pub generators: BTreeMap<String, OperatorJson>,
}

impl RepresentationJson {
    pub fn to_representation(&self) -> Result<Representation> {
        let gens: Result<BTreeMap<String, Operator>> = self
            .generators
            .iter()
            .map(|(name, op)| Ok((name.clone(), op.to_operator()?)))
            .collect();
        Representation::new(gens?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HermitianJson {
    /// uniform sample grid k/n, k = 0..=n
    pub t: Vec<f64>,
    pub mu: Vec<MatrixJson>,
    pub holonomy: OperatorJson,
}

impl HermitianJson {
    pub fn to_structure(&self) -> Result<HermitianStructure> {
        if self.t.len() != self.mu.len() {
            return Err(TorsionError::InvalidInput(format!(
                "{} grid points but {} matrices",
                self.t.len(),
                self.mu.len()
            )));
        }
        let n = self.t.len().checked_sub(1).filter(|&n| n >= 1).ok_or_else(|| {
            TorsionError::InvalidInput("need at least two samples".into())
        })?;
        for (k, &t) in self.t.iter().enumerate() {
            if (t - k as f64 / n as f64).abs() > 1e-9 {
                return Err(TorsionError::InvalidInput(
                    "sample grid must be uniform over [0, 1]".into(),
                ));
            }
        }
        let values: Result<Vec<CMat>> = self.mu.iter().map(matrix_from_json).collect();
        let holonomy = match self.holonomy.to_operator()?.payload() {
            Payload::Scalar(m) => m.clone(),
            _ => {
                return Err(TorsionError::InvalidInput(
                    "holonomy of a Hermitian structure must be a constant matrix".into(),
                ))
            }
        };
        HermitianStructure::from_samples(values?, holonomy)
    }

    pub fn from_structure(mu: &HermitianStructure) -> HermitianJson {
        let n = mu.samples().len() - 1;
        HermitianJson {
            t: (0..=n).map(|k| k as f64 / n as f64).collect(),
            mu: mu.samples().iter().map(matrix_to_json).collect(),
            holonomy: OperatorJson::from_operator(&Operator::scalar(mu.holonomy().clone())),
        }
    }
}

// --- top-level parsing with the "kind" discriminator -------------------

fn strip_kind(text: &str, expected: &str) -> Result<Value> {
    let mut value: Value = serde_json::from_str(text)
        .map_err(|e| TorsionError::InvalidInput(format!("malformed JSON: {e}")))?;
    if let Some(obj) = value.as_object_mut() {
        if let Some(kind) = obj.remove("kind") {
            let kind = kind.as_str().unwrap_or_default().to_string();
            if kind != expected {
                return Err(TorsionError::InvalidInput(format!(
                    "expected kind {expected:?}, found {kind:?}"
                )));
            }
        }
    }
    Ok(value)
}

fn from_value<T: serde::de::DeserializeOwned>(value: Value, what: &str) -> Result<T> {
    serde_json::from_value(value)
        .map_err(|e| TorsionError::InvalidInput(format!("malformed {what} file: {e}")))
}

pub fn parse_operator(text: &str) -> Result<Operator> {
    from_value::<OperatorJson>(strip_kind(text, "operator")?, "operator")?.to_operator()
}

pub fn parse_complex(text: &str) -> Result<HilbertComplex> {
    from_value::<ComplexJson>(strip_kind(text, "complex")?, "complex")?.to_complex()
}

pub fn parse_morphism(text: &str) -> Result<ComplexMorphism> {
    from_value::<MorphismJson>(strip_kind(text, "morphism")?, "morphism")?.to_morphism()
}

/// Parse a morphism file without the chain-map validation, for payloads
/// whose components deliberately anticommute (couplings).
pub fn parse_morphism_raw(text: &str) -> Result<MorphismJson> {
    from_value::<MorphismJson>(strip_kind(text, "morphism")?, "morphism")
}

pub fn parse_morse(text: &str) -> Result<MorseDatum> {
    from_value::<MorseJson>(strip_kind(text, "morse")?, "morse")?.to_datum()
}

pub fn parse_representation(text: &str) -> Result<Representation> {
    from_value::<RepresentationJson>(strip_kind(text, "representation")?, "representation")?
        .to_representation()
}

pub fn parse_hermitian(text: &str) -> Result<HermitianStructure> {
    from_value::<HermitianJson>(strip_kind(text, "hermitian_structure")?, "hermitian structure")?
        .to_structure()
}

fn tag_kind<T: Serialize>(payload: &T, kind: &str) -> Value {
    let mut value = serde_json::to_value(payload).expect("serialization cannot fail");
    value
        .as_object_mut()
        .expect("payloads are objects")
        .insert("kind".to_string(), Value::String(kind.to_string()));
    value
}

pub fn operator_to_value(op: &Operator) -> Value {
    tag_kind(&OperatorJson::from_operator(op), "operator")
}

pub fn complex_to_value(c: &HilbertComplex) -> Value {
    tag_kind(&ComplexJson::from_complex(c), "complex")
}

pub fn morphism_to_value(f: &ComplexMorphism) -> Value {
    tag_kind(&MorphismJson::from_morphism(f), "morphism")
}

pub fn morse_to_value(d: &MorseDatum) -> Value {
    tag_kind(&MorseJson::from_datum(d), "morse")
}

pub fn hermitian_to_value(mu: &HermitianStructure) -> Value {
    tag_kind(&HermitianJson::from_structure(mu), "hermitian_structure")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    #[test]
    fn operator_round_trip_all_payloads() {
        let mut r = gen::rng(7);
        let scalar = Operator::scalar(gen::random_matrix(2, 3, &mut r));
        let trig = Operator::trig_poly(
            2,
            2,
            vec![
                (0, gen::random_matrix(2, 2, &mut r)),
                (-1, gen::random_matrix(2, 2, &mut r)),
            ],
        )
        .unwrap();
        let sampled = Operator::sampled(
            (0..8).map(|_| gen::random_matrix(1, 2, &mut r)).collect(),
        )
        .unwrap();
        for op in [&scalar, &trig, &sampled] {
            let text = serde_json::to_string(&operator_to_value(op)).unwrap();
            let back = parse_operator(&text).unwrap();
            assert_eq!(back.algebra(), op.algebra());
            assert!(back.distance(op) < 1e-12);
        }
    }

    #[test]
    fn complex_and_morphism_round_trip() {
        let built = gen::random_complex(AlgebraTag::Scalar, &[2, 4, 3], &[1, 1, 1], 11);
        let text = serde_json::to_string(&complex_to_value(&built.complex)).unwrap();
        let back = parse_complex(&text).unwrap();
        assert!((back.log_torsion().unwrap() - built.complex.log_torsion().unwrap()).abs() < 1e-12);

        let f = crate::cone::ComplexMorphism::identity(&built.complex);
        let text = serde_json::to_string(&morphism_to_value(&f)).unwrap();
        let back = parse_morphism(&text).unwrap();
        assert!(back.relative_torsion().unwrap().abs() < 1e-9);
    }

    #[test]
    fn word_parsing() {
        assert_eq!(parse_word("1").unwrap(), Vec::<(String, i64)>::new());
        assert_eq!(
            parse_word("g^2*h^-1").unwrap(),
            vec![("g".to_string(), 2), ("h".to_string(), -1)]
        );
        assert_eq!(parse_word("g").unwrap(), vec![("g".to_string(), 1)]);
        assert!(parse_word("^3").is_err());
        assert_eq!(word_to_string(&parse_word("g^-1").unwrap()), "g^-1");
    }

    #[test]
    fn morse_file_round_trip_preserves_torsion() {
        let datum = MorseDatum::circle(&[0.1, 0.5], &[0.3, 0.8]).unwrap();
        let rho = Representation::scalar_holonomy(Complex64::new(3.0, 0.0));
        let reference = crate::morse::build_complex(&datum, &rho, None)
            .unwrap()
            .log_torsion()
            .unwrap();
        let text = serde_json::to_string(&morse_to_value(&datum)).unwrap();
        let back = parse_morse(&text).unwrap();
        let again = crate::morse::build_complex(&back, &rho, None)
            .unwrap()
            .log_torsion()
            .unwrap();
        assert!((reference - again).abs() < 1e-12);
    }

    #[test]
    fn hermitian_round_trip_and_validation() {
        let mu = HermitianStructure::from_fn(
            |t| CMat::identity(1, 1) * Complex64::new(9.0f64.powf(t), 0.0),
            64,
            CMat::identity(1, 1) * Complex64::new(1.0 / 3.0, 0.0),
        )
        .unwrap();
        let text = serde_json::to_string(&hermitian_to_value(&mu)).unwrap();
        let back = parse_hermitian(&text).unwrap();
        assert!((back.at(0.4)[(0, 0)].re - mu.at(0.4)[(0, 0)].re).abs() < 1e-12);

        // non-uniform grid is rejected
        let bad = r#"{"t":[0.0,0.3,1.0],"mu":[[[[1,0]]],[[[1,0]]],[[[1,0]]]],
                      "holonomy":{"algebra":"scalar","matrix":[[[1,0]]]}}"#;
        assert!(parse_hermitian(bad).is_err());
    }

    #[test]
    fn kind_discriminator_is_checked() {
        let text = r#"{"kind":"complex","algebra":"scalar","matrix":[[[1,0]]]}"#;
        assert!(parse_operator(text).is_err());
        let bare = r#"{"algebra":"scalar","matrix":[[[2,0]]]}"#;
        assert!(parse_operator(bare).is_ok());
    }
}
