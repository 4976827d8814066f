//! JSON formats. Complex numbers are `[re, im]` pairs, matrices are arrays of rows.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::composition::GateWithError;
use crate::error::{invalid, Error, Result};
use crate::error_matrix::{Convention, ErrorMatrix};
use crate::linalg::{c, Mat};
use crate::lindblad::{GateSchedule, LindbladChannel, Segment};
use crate::process_matrix::ProcessMatrix;
use crate::spam::{CalibrationSet, SpamModel};
use crate::tomo_harness::{Record, Shots, TomographyDataset};

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &Mat) -> JsonMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<Mat> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return invalid("matrix rows are empty or ragged");
    }
    Ok(Mat::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessMatrixJson {
    pub n_qubits: usize,
    pub convention: String,
    pub entries: JsonMatrix,
}

impl From<&ProcessMatrix> for ProcessMatrixJson {
    fn from(p: &ProcessMatrix) -> Self {
        Self { n_qubits: p.n_qubits, convention: "chi".into(), entries: matrix_to_json(&p.entries) }
    }
}

impl ProcessMatrixJson {
    pub fn into_model(self) -> Result<ProcessMatrix> {
        if self.convention != "chi" {
            return invalid(format!("expected a process matrix, found convention {:?}", self.convention));
        }
        ProcessMatrix::new(self.n_qubits, matrix_from_json(&self.entries)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorMatrixJson {
    pub n_qubits: usize,
    pub convention: String,
    pub entries: JsonMatrix,
    pub reference_unitary: JsonMatrix,
}

impl From<&ErrorMatrix> for ErrorMatrixJson {
    fn from(e: &ErrorMatrix) -> Self {
        Self {
            n_qubits: e.n_qubits(),
            convention: e.convention.as_str().into(),
            entries: matrix_to_json(&e.chi.entries),
            reference_unitary: matrix_to_json(&e.reference_unitary),
        }
    }
}

impl ErrorMatrixJson {
    pub fn into_model(self) -> Result<ErrorMatrix> {
        let chi = ProcessMatrix::new(self.n_qubits, matrix_from_json(&self.entries)?)?;
        ErrorMatrix::new(chi, Convention::parse(&self.convention)?, matrix_from_json(&self.reference_unitary)?)
    }
}

/// A unitary file: either a bare matrix or `{ "unitary": matrix }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnitaryJson {
    Bare(JsonMatrix),
    Wrapped { unitary: JsonMatrix },
}

impl UnitaryJson {
    pub fn into_model(self) -> Result<Mat> {
        match self {
            Self::Bare(m) | Self::Wrapped { unitary: m } => matrix_from_json(&m),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrausTermJson {
    #[serde(default = "one")]
    pub weight: f64,
    pub matrix: JsonMatrix,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrausJson {
    pub operators: Vec<KrausTermJson>,
}

impl KrausJson {
    pub fn into_model(self) -> Result<Vec<(f64, Mat)>> {
        self.operators.iter().map(|t| Ok((t.weight, matrix_from_json(&t.matrix)?))).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateWithErrorJson {
    pub desired: JsonMatrix,
    pub error: ErrorMatrixJson,
}

impl From<&GateWithError> for GateWithErrorJson {
    fn from(g: &GateWithError) -> Self {
        Self { desired: matrix_to_json(&g.desired), error: (&g.error).into() }
    }
}

impl GateWithErrorJson {
    pub fn into_model(self) -> Result<GateWithError> {
        GateWithError::new(matrix_from_json(&self.desired)?, self.error.into_model()?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelJson {
    pub rate: f64,
    pub operator: JsonMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentJson {
    pub duration: f64,
    pub hamiltonian: JsonMatrix,
    #[serde(default)]
    pub channels: Vec<ChannelJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleJson {
    pub segments: Vec<SegmentJson>,
}

impl From<&GateSchedule> for ScheduleJson {
    fn from(s: &GateSchedule) -> Self {
        Self {
            segments: s
                .segments
                .iter()
                .map(|seg| SegmentJson {
                    duration: seg.duration,
                    hamiltonian: matrix_to_json(&seg.hamiltonian),
                    channels: seg
                        .channels
                        .iter()
                        .map(|ch| ChannelJson { rate: ch.rate, operator: matrix_to_json(&ch.operator) })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl ScheduleJson {
    pub fn into_model(self) -> Result<GateSchedule> {
        let segments = self
            .segments
            .into_iter()
            .map(|s| {
                Ok(Segment {
                    duration: s.duration,
                    hamiltonian: matrix_from_json(&s.hamiltonian)?,
                    channels: s
                        .channels
                        .iter()
                        .map(|ch| Ok(LindbladChannel::new(ch.rate, matrix_from_json(&ch.operator)?)))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        GateSchedule::new(segments)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationGateJson {
    pub label: String,
    pub err_exp: ErrorMatrixJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationSetJson {
    pub gates: Vec<CalibrationGateJson>,
}

impl From<&CalibrationSet> for CalibrationSetJson {
    fn from(c: &CalibrationSet) -> Self {
        Self {
            gates: c
                .entries
                .iter()
                .map(|e| CalibrationGateJson { label: e.label.clone(), err_exp: (&e.err_exp).into() })
                .collect(),
        }
    }
}

impl CalibrationSetJson {
    pub fn into_model(self) -> Result<CalibrationSet> {
        let measured = self
            .gates
            .into_iter()
            .map(|g| Ok((g.label, g.err_exp.into_model()?)))
            .collect::<Result<Vec<_>>>()?;
        CalibrationSet::from_measurements(measured)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpamModelJson {
    pub n_qubits: usize,
    pub chi_prep: JsonMatrix,
    pub chi_meas: JsonMatrix,
    pub depolarizing_split: String,
}

impl From<&SpamModel> for SpamModelJson {
    fn from(s: &SpamModel) -> Self {
        Self {
            n_qubits: s.n_qubits(),
            chi_prep: matrix_to_json(&s.chi_prep.entries),
            chi_meas: matrix_to_json(&s.chi_meas.entries),
            depolarizing_split: s.depolarizing_split.as_str().into(),
        }
    }
}

impl SpamModelJson {
    /// Identified models may be slightly non-positive, so only shape and split are checked.
    pub fn into_model(self) -> Result<SpamModel> {
        if self.depolarizing_split != "meas" {
            return invalid(format!("unsupported depolarizing split {:?}", self.depolarizing_split));
        }
        Ok(SpamModel {
            chi_prep: ProcessMatrix::new(self.n_qubits, matrix_from_json(&self.chi_prep)?)?,
            chi_meas: ProcessMatrix::new(self.n_qubits, matrix_from_json(&self.chi_meas)?)?,
            depolarizing_split: Default::default(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetupJson {
    pub n_qubits: usize,
    pub inputs: Vec<String>,
    pub settings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordJson {
    pub input: usize,
    pub setting: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetJson {
    pub setup: SetupJson,
    pub records: Vec<RecordJson>,
    /// Shot count, or `"inf"`.
    pub shots: serde_json::Value,
    pub seed: u64,
}

fn input_labels(n: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    for _ in 0..n {
        out = out
            .iter()
            .flat_map(|p| ["0", "1", "+", "+i"].map(|s| if p.is_empty() { s.to_string() } else { format!("{p}⊗{s}") }))
            .collect();
    }
    out
}

impl From<&TomographyDataset> for DatasetJson {
    fn from(d: &TomographyDataset) -> Self {
        Self {
            setup: SetupJson {
                n_qubits: d.n_qubits,
                inputs: input_labels(d.n_qubits),
                settings: crate::tomo_harness::measurement_settings(d.n_qubits),
            },
            records: d
                .records
                .iter()
                .map(|r| RecordJson {
                    input: r.input,
                    setting: r.setting,
                    counts: r.counts.clone(),
                    frequencies: r.counts.is_none().then(|| r.frequencies.clone()),
                })
                .collect(),
            shots: match d.shots {
                Shots::Finite(n) => n.into(),
                Shots::Infinite => "inf".into(),
            },
            seed: d.seed,
        }
    }
}

impl DatasetJson {
    pub fn into_model(self) -> Result<TomographyDataset> {
        let shots = match &self.shots {
            serde_json::Value::Number(n) => Shots::Finite(n.as_u64().filter(|&v| v > 0).ok_or_else(|| {
                Error::Validation("shots must be a positive integer".into())
            })?),
            serde_json::Value::String(s) => Shots::parse(s)?,
            _ => return invalid("shots must be a number or \"inf\""),
        };
        if self.setup.settings != crate::tomo_harness::measurement_settings(self.setup.n_qubits) {
            return invalid("dataset settings differ from the standard Pauli settings");
        }
        let records = self
            .records
            .into_iter()
            .map(|r| {
                let frequencies = match (&r.counts, r.frequencies) {
                    (Some(cnt), _) => {
                        let total: u64 = cnt.iter().sum();
                        if total == 0 {
                            return invalid("record has zero counts");
                        }
                        cnt.iter().map(|&k| k as f64 / total as f64).collect()
                    }
                    (None, Some(f)) => f,
                    (None, None) => return invalid("record has neither counts nor frequencies"),
                };
                Ok(Record { input: r.input, setting: r.setting, counts: r.counts, frequencies })
            })
            .collect::<Result<_>>()?;
        Ok(TomographyDataset { n_qubits: self.setup.n_qubits, records, shots, seed: self.seed })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn to_json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value)?;
    s.push('\n');
    Ok(s)
}
