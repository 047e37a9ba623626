//! Portable on-disk dataset format.
//!
//! ```text
//! <root>/manifest.json        subjects, shapes, sampling rates, demographics path
//! <root>/demographics.csv     subject_id + the 12 demographic columns
//! <root>/<subject>/emg.bin    little-endian f32, trials x channels x samples
//! <root>/<subject>/labels.csv trial_index,gesture_id
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const N_DEMOGRAPHICS: usize = 12;

/// Demographic columns, in table order.
pub const DEMOGRAPHIC_COLUMNS: [&str; N_DEMOGRAPHICS] = [
    "Age",
    "Sex",
    "Height",
    "Weight",
    "Skin_Hydration",
    "Skin_Elasticity",
    "Subcutaneous_Fat_1",
    "Subcutaneous_Fat_2",
    "Subcutaneous_Fat_3",
    "Subcutaneous_Fat_4",
    "Hair_Density_1",
    "Hair_Density_2",
];
pub const SEX_COLUMN: usize = 1;
/// Columns whose joint absence excludes a subject: Height, Weight,
/// Skin_Elasticity, Skin_Hydration.
pub const EXCLUSION_COLUMNS: [usize; 4] = [2, 3, 5, 4];

const KNOWN_RATES_HZ: [f64; 2] = [2000.0, 2148.0];

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema violation in {field}{}: {message}", subject.as_ref().map(|s| format!(" (subject {s})")).unwrap_or_default())]
    Schema { subject: Option<String>, field: String, message: String },
    #[error("shape mismatch for subject {subject}: expected {expected} bytes, found {actual}")]
    ShapeMismatch { subject: String, expected: u64, actual: u64 },
    #[error("window [{start}, {end}) does not fit a trial of {len} samples")]
    WindowOutOfBounds { start: usize, end: usize, len: usize },
}

impl DatasetError {
    fn schema(subject: Option<&str>, field: &str, message: impl Into<String>) -> Self {
        DatasetError::Schema {
            subject: subject.map(str::to_string),
            field: field.to_string(),
            message: message.into(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// One subject's recordings, trials x channels x samples (row-major, mV).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTensor {
    pub subject_id: String,
    pub n_trials: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    pub data: Vec<f32>,
    pub labels: Vec<u32>,
    pub sampling_rate_hz: f64,
}

impl TrialTensor {
    pub fn new(
        subject_id: impl Into<String>,
        shape: (usize, usize, usize),
        data: Vec<f32>,
        labels: Vec<u32>,
        sampling_rate_hz: f64,
    ) -> Result<Self, DatasetError> {
        let subject_id = subject_id.into();
        let (n_trials, n_channels, n_samples) = shape;
        let sid = Some(subject_id.as_str());
        if n_trials == 0 || n_channels == 0 || n_samples == 0 {
            return Err(DatasetError::schema(sid, "shape", "all dimensions must be positive"));
        }
        if data.len() != n_trials * n_channels * n_samples {
            return Err(DatasetError::ShapeMismatch {
                subject: subject_id,
                expected: (n_trials * n_channels * n_samples * 4) as u64,
                actual: (data.len() * 4) as u64,
            });
        }
        if labels.len() != n_trials {
            return Err(DatasetError::schema(sid, "labels", format!("expected {n_trials} labels, got {}", labels.len())));
        }
        if !(sampling_rate_hz > 0.0) {
            return Err(DatasetError::schema(sid, "sampling_rate_hz", "must be positive"));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::schema(sid, "emg.bin", format!("non-finite sample at flat index {i}")));
        }
        Ok(Self { subject_id, n_trials, n_channels, n_samples, data, labels, sampling_rate_hz })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_trials, self.n_channels, self.n_samples)
    }

    pub fn channel(&self, trial: usize, channel: usize) -> &[f32] {
        let start = (trial * self.n_channels + channel) * self.n_samples;
        &self.data[start..start + self.n_samples]
    }
}

/// Per-subject demographic rows; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicTable {
    pub subject_ids: Vec<String>,
    pub cells: Vec<[Option<f64>; N_DEMOGRAPHICS]>,
}

impl DemographicTable {
    pub fn len(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subject_ids.is_empty()
    }

    pub fn row_of(&self, subject: &str) -> Option<usize> {
        self.subject_ids.iter().position(|s| s == subject)
    }

    pub fn missing_mask(&self) -> Vec<[bool; N_DEMOGRAPHICS]> {
        self.cells.iter().map(|r| r.map(|c| c.is_none())).collect()
    }

    pub fn n_missing(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// Dense values; errors if any cell is missing.
    pub fn complete_values(&self) -> Option<Vec<[f64; N_DEMOGRAPHICS]>> {
        self.cells
            .iter()
            .map(|r| {
                let mut out = [0.0; N_DEMOGRAPHICS];
                for (o, c) in out.iter_mut().zip(r) {
                    *o = (*c)?;
                }
                Some(out)
            })
            .collect()
    }

    pub fn subset(&self, subjects: &[String]) -> Option<Self> {
        let mut cells = Vec::with_capacity(subjects.len());
        for s in subjects {
            cells.push(self.cells[self.row_of(s)?]);
        }
        Some(Self { subject_ids: subjects.to_vec(), cells })
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        for (sid, row) in self.subject_ids.iter().zip(&self.cells) {
            for (j, cell) in row.iter().enumerate() {
                let Some(v) = *cell else { continue };
                let name = DEMOGRAPHIC_COLUMNS[j];
                let bad = |msg: &str| Err(DatasetError::schema(Some(sid), name, msg));
                if !v.is_finite() {
                    return bad("non-finite value");
                }
                match j {
                    0 if v <= 0.0 => return bad("age must be positive"),
                    SEX_COLUMN if v != 0.0 && v != 1.0 => return bad("sex must be coded 0 or 1"),
                    2 | 3 | 6..=11 if v < 0.0 => return bad("must be nonnegative"),
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self, DatasetError> {
        let field = "demographics.csv";
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| DatasetError::schema(None, field, e.to_string()))?.clone();
        let expected: Vec<&str> = std::iter::once("subject_id").chain(DEMOGRAPHIC_COLUMNS).collect();
        let got: Vec<&str> = header.iter().collect();
        if got != expected {
            return Err(DatasetError::schema(None, field, format!("header must be {}", expected.join(","))));
        }
        let mut table = Self { subject_ids: Vec::new(), cells: Vec::new() };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| DatasetError::schema(None, field, e.to_string()))?;
            let sid = rec[0].to_string();
            if sid.is_empty() {
                return Err(DatasetError::schema(None, "subject_id", "empty subject id"));
            }
            if table.row_of(&sid).is_some() {
                return Err(DatasetError::schema(Some(&sid), "subject_id", "duplicate row"));
            }
            let mut row = [None; N_DEMOGRAPHICS];
            for (j, cell) in row.iter_mut().enumerate() {
                let raw = &rec[j + 1];
                if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                    continue;
                }
                *cell = Some(raw.parse::<f64>().map_err(|_| {
                    DatasetError::schema(Some(&sid), DEMOGRAPHIC_COLUMNS[j], format!("cannot parse {raw:?}"))
                })?);
            }
            table.subject_ids.push(sid);
            table.cells.push(row);
        }
        table.validate()?;
        Ok(table)
    }

    pub fn to_csv(&self, preamble: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(p) = preamble {
            out.push_str(p);
        }
        out.push_str("subject_id,");
        out.push_str(&DEMOGRAPHIC_COLUMNS.join(","));
        out.push('\n');
        for (sid, row) in self.subject_ids.iter().zip(&self.cells) {
            out.push_str(sid);
            for c in row {
                out.push(',');
                if let Some(v) = c {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub removed: Vec<String>,
    pub retained: usize,
}

/// Drops subjects missing all of Height, Weight, Skin_Elasticity and Skin_Hydration.
pub fn apply_exclusion(table: &DemographicTable) -> (DemographicTable, ExclusionReport) {
    let mut kept = DemographicTable { subject_ids: Vec::new(), cells: Vec::new() };
    let mut removed = Vec::new();
    for (sid, row) in table.subject_ids.iter().zip(&table.cells) {
        if EXCLUSION_COLUMNS.iter().all(|&j| row[j].is_none()) {
            removed.push(sid.clone());
        } else {
            kept.subject_ids.push(sid.clone());
            kept.cells.push(*row);
        }
    }
    if kept.is_empty() {
        log::warn!("exclusion rule removed every subject");
    }
    let retained = kept.len();
    (kept, ExclusionReport { removed, retained })
}

/// Centered analysis window over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisWindow {
    pub start: usize,
    pub end: usize,
    pub fraction: f64,
}

impl AnalysisWindow {
    pub const DEFAULT_FRACTION: f64 = 0.70;

    /// `start = floor((1 - fraction) / 2 * n)`, `end = n - start`.
    pub fn centered(n_samples: usize, fraction: f64) -> Self {
        let f = fraction.clamp(0.0, 1.0);
        // The nudge keeps exact products (0.15 * 4000) from flooring down.
        let start = (((1.0 - f) / 2.0) * n_samples as f64 + 1e-9).floor() as usize;
        let start = start.min(n_samples / 2);
        Self { start, end: n_samples - start, fraction: f }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

pub fn extract_window<'a, T>(trial: &'a [T], window: &AnalysisWindow) -> Result<&'a [T], DatasetError> {
    if window.start >= window.end || window.end > trial.len() {
        return Err(DatasetError::WindowOutOfBounds { start: window.start, end: window.end, len: trial.len() });
    }
    Ok(&trial[window.start..window.end])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    /// Directory relative to the manifest; defaults to `id`.
    #[serde(default)]
    pub path: Option<String>,
    pub n_trials: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    pub sampling_rate_hz: f64,
}

fn default_gestures() -> Vec<u32> {
    (0..10).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub demographics: String,
    /// Meaning of the 0/1 Sex codes, e.g. `{"0": "female", "1": "male"}`.
    pub sex_coding: BTreeMap<String, String>,
    #[serde(default = "default_gestures")]
    pub gestures: Vec<u32>,
    pub subjects: Vec<SubjectEntry>,
}

impl Manifest {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.format_version != FORMAT_VERSION {
            return Err(DatasetError::schema(None, "format_version", format!("unsupported version {}", self.format_version)));
        }
        let codes: Vec<&str> = self.sex_coding.keys().map(String::as_str).collect();
        if codes != ["0", "1"] {
            return Err(DatasetError::schema(None, "sex_coding", "must map exactly the codes \"0\" and \"1\""));
        }
        if self.subjects.is_empty() {
            return Err(DatasetError::schema(None, "subjects", "no subjects listed"));
        }
        let mut seen = HashMap::new();
        for s in &self.subjects {
            let sid = Some(s.id.as_str());
            if seen.insert(s.id.clone(), ()).is_some() {
                return Err(DatasetError::schema(sid, "id", "duplicate subject"));
            }
            for (name, v) in [("n_trials", s.n_trials), ("n_channels", s.n_channels), ("n_samples", s.n_samples)] {
                if v == 0 {
                    return Err(DatasetError::schema(sid, name, "must be positive"));
                }
            }
            if !(s.sampling_rate_hz > 0.0) {
                return Err(DatasetError::schema(sid, "sampling_rate_hz", "must be positive"));
            }
        }
        Ok(())
    }
}

/// A validated manifest plus its root directory; subjects load lazily.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub warnings: Vec<String>,
}

impl DatasetIndex {
    pub fn open(manifest_path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| DatasetError::schema(None, MANIFEST_FILE, e.to_string()))?;
        manifest.validate()?;
        let mut warnings = Vec::new();
        for s in &manifest.subjects {
            if !KNOWN_RATES_HZ.iter().any(|r| (r - s.sampling_rate_hz).abs() < 1e-6) {
                let w = format!("subject {}: unusual sampling rate {} Hz", s.id, s.sampling_rate_hz);
                log::warn!("{w}");
                warnings.push(w);
            }
        }
        let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, manifest, warnings })
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.manifest.subjects.iter().map(|s| s.id.clone()).collect()
    }

    fn subject_dir(&self, s: &SubjectEntry) -> PathBuf {
        self.root.join(s.path.as_deref().unwrap_or(&s.id))
    }

    pub fn load_subject(&self, index: usize) -> Result<TrialTensor, DatasetError> {
        let s = &self.manifest.subjects[index];
        let dir = self.subject_dir(s);
        let bin_path = dir.join("emg.bin");
        let bytes = fs::read(&bin_path).map_err(io_err(&bin_path))?;
        let expected = (s.n_trials * s.n_channels * s.n_samples * 4) as u64;
        if bytes.len() as u64 != expected {
            return Err(DatasetError::ShapeMismatch { subject: s.id.clone(), expected, actual: bytes.len() as u64 });
        }
        let data: Vec<f32> =
            bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        let labels = self.read_labels(s, &dir)?;
        TrialTensor::new(s.id.clone(), (s.n_trials, s.n_channels, s.n_samples), data, labels, s.sampling_rate_hz)
    }

    fn read_labels(&self, s: &SubjectEntry, dir: &Path) -> Result<Vec<u32>, DatasetError> {
        let path = dir.join("labels.csv");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let sid = Some(s.id.as_str());
        let mut labels = vec![None; s.n_trials];
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| DatasetError::schema(sid, "labels.csv", e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != ["trial_index", "gesture_id"] {
            return Err(DatasetError::schema(sid, "labels.csv", "header must be trial_index,gesture_id"));
        }
        for rec in rdr.records() {
            let rec = rec.map_err(|e| DatasetError::schema(sid, "labels.csv", e.to_string()))?;
            let parse = |k: usize, name: &str| {
                rec[k].parse::<u32>().map_err(|_| DatasetError::schema(sid, name, format!("bad value {:?}", &rec[k])))
            };
            let t = parse(0, "trial_index")? as usize;
            let g = parse(1, "gesture_id")?;
            if t >= s.n_trials {
                return Err(DatasetError::schema(sid, "trial_index", format!("{t} out of range")));
            }
            if !self.manifest.gestures.contains(&g) {
                return Err(DatasetError::schema(sid, "gesture_id", format!("{g} not in declared gesture set")));
            }
            labels[t] = Some(g);
        }
        labels
            .into_iter()
            .enumerate()
            .map(|(t, l)| l.ok_or_else(|| DatasetError::schema(sid, "labels.csv", format!("missing label for trial {t}"))))
            .collect()
    }

    pub fn demographics_path(&self) -> PathBuf {
        self.root.join(&self.manifest.demographics)
    }

    /// Demographics restricted to and ordered by the manifest's subjects.
    pub fn load_demographics(&self) -> Result<DemographicTable, DatasetError> {
        let table = DemographicTable::read_csv(&self.demographics_path())?;
        let ids = self.subject_ids();
        for id in &ids {
            if table.row_of(id).is_none() {
                return Err(DatasetError::schema(Some(id), "demographics.csv", "subject has no demographic row"));
            }
        }
        Ok(table.subset(&ids).expect("all rows checked"))
    }
}

/// Fully materialized dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub tensors: Vec<TrialTensor>,
    pub demographics: DemographicTable,
    pub warnings: Vec<String>,
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, DatasetError> {
    let index = DatasetIndex::open(manifest_path)?;
    let demographics = index.load_demographics()?;
    let tensors = (0..index.manifest.subjects.len()).map(|i| index.load_subject(i)).collect::<Result<_, _>>()?;
    Ok(Dataset { tensors, demographics, warnings: index.warnings })
}

/// Writes tensors and demographics in the portable format under `root`.
pub fn write_dataset(
    root: &Path,
    tensors: &[TrialTensor],
    demographics: &DemographicTable,
    sex_coding: &BTreeMap<String, String>,
) -> Result<PathBuf, DatasetError> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    let mut gestures: Vec<u32> = tensors.iter().flat_map(|t| t.labels.iter().copied()).collect();
    gestures.sort_unstable();
    gestures.dedup();
    let mut subjects = Vec::with_capacity(tensors.len());
    for t in tensors {
        let dir = root.join(&t.subject_id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let bin_path = dir.join("emg.bin");
        let file = fs::File::create(&bin_path).map_err(io_err(&bin_path))?;
        let mut w = BufWriter::new(file);
        for v in &t.data {
            w.write_all(&v.to_le_bytes()).map_err(io_err(&bin_path))?;
        }
        w.flush().map_err(io_err(&bin_path))?;
        let mut labels = String::from("trial_index,gesture_id\n");
        for (i, g) in t.labels.iter().enumerate() {
            labels.push_str(&format!("{i},{g}\n"));
        }
        let lpath = dir.join("labels.csv");
        fs::write(&lpath, labels).map_err(io_err(&lpath))?;
        subjects.push(SubjectEntry {
            id: t.subject_id.clone(),
            path: None,
            n_trials: t.n_trials,
            n_channels: t.n_channels,
            n_samples: t.n_samples,
            sampling_rate_hz: t.sampling_rate_hz,
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        demographics: "demographics.csv".into(),
        sex_coding: sex_coding.clone(),
        gestures,
        subjects,
    };
    let dpath = root.join("demographics.csv");
    fs::write(&dpath, demographics.to_csv(None)).map_err(io_err(&dpath))?;
    let mpath = root.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&mpath, json).map_err(io_err(&mpath))?;
    Ok(mpath)
}

pub fn default_sex_coding() -> BTreeMap<String, String> {
    BTreeMap::from([("0".to_string(), "female".to_string()), ("1".to_string(), "male".to_string())])
}
