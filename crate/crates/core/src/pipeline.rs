//! Staged runner: ingest, exclude, impute, extract, fit, audit, spls, report.
//!
//! Each stage records the SHA-256 of its outputs in `.cache/<stage>.json`
//! together with a key chained from the config hash, the input fingerprint
//! and the upstream records. A stage whose key and files still match is
//! skipped; later stages read its outputs back from disk when they need them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{distributions_csv, run_audit, sensitivity_csv, summary_csv, AuditOutput};
use crate::config::{ConfigError, PipelineConfig};
use crate::dataset::{
    apply_exclusion, load_dataset, Dataset, DatasetError, DatasetIndex, DemographicTable, TrialTensor,
    DEMOGRAPHIC_COLUMNS, MANIFEST_FILE,
};
use crate::features::{build_feature_matrix, FeatureCatalog, FeatureError, FeatureMatrix};
use crate::lmm::{fit_all, results_csv, standardize_design, variance_csv, LmmError, LmmFit};
use crate::mice::{mice_impute, MiceError};
use crate::report::{emit_reports, Stamp};
use crate::spls::{
    build_cim, fit_spls, loadings_csv, q2_crossval, q2_csv, standardize_columns, standardize_lenient, CimLayout,
    SplsError,
};
use crate::synth::{generate_population, write_population, SynthError};

pub const CACHE_DIR: &str = ".cache";
pub const SYNTH_DIR: &str = "synth_data";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Exclude,
    Impute,
    Extract,
    Fit,
    Audit,
    Spls,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] =
        [Stage::Ingest, Stage::Exclude, Stage::Impute, Stage::Extract, Stage::Fit, Stage::Audit, Stage::Spls, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Exclude => "exclude",
            Stage::Impute => "impute",
            Stage::Extract => "extract",
            Stage::Fit => "fit",
            Stage::Audit => "audit",
            Stage::Spls => "spls",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} failed: {message}")]
    Data { stage: Stage, message: String },
    #[error("{stage} failed with a numeric error: {message}")]
    Numeric { stage: Stage, message: String },
    #[error("{stage} failed: io error on {path}: {source}")]
    Io { stage: Stage, path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    /// 2 config, 3 data or io, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data { .. } | PipelineError::Io { .. } => 3,
            PipelineError::Numeric { .. } => 4,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Config(_) => None,
            PipelineError::Data { stage, .. } | PipelineError::Numeric { stage, .. } | PipelineError::Io { stage, .. } => {
                Some(*stage)
            }
        }
    }

    fn data(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError::Data { stage, message: e.to_string() }
    }

    fn numeric(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError::Numeric { stage, message: e.to_string() }
    }
}

fn from_dataset(stage: Stage, e: DatasetError) -> PipelineError {
    match e {
        DatasetError::Io { path, source } => PipelineError::Io { stage, path, source },
        other => PipelineError::data(stage, other),
    }
}

fn from_lmm(e: LmmError) -> PipelineError {
    match e {
        LmmError::Numeric(_) | LmmError::NonFinite { .. } => PipelineError::numeric(Stage::Fit, e),
        other => PipelineError::data(Stage::Fit, other),
    }
}

fn from_features(e: FeatureError) -> PipelineError {
    match e {
        FeatureError::NonFinite { .. } => PipelineError::numeric(Stage::Extract, e),
        other => PipelineError::data(Stage::Extract, other),
    }
}

fn from_spls(e: SplsError) -> PipelineError {
    match e {
        SplsError::ZeroCovariance => PipelineError::numeric(Stage::Spls, e),
        other => PipelineError::data(Stage::Spls, other),
    }
}

fn from_mice(e: MiceError) -> PipelineError {
    PipelineError::data(Stage::Impute, e)
}

fn from_synth(e: SynthError) -> PipelineError {
    match e {
        SynthError::Io { path, source } => PipelineError::Io { stage: Stage::Ingest, path, source },
        SynthError::Dataset(d) => from_dataset(Stage::Ingest, d),
        other => PipelineError::data(Stage::Ingest, other),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Cached,
}

impl fmt::Display for StageStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageStatus::Ran => "ran",
            StageStatus::Cached => "cached",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub status: StageStatus,
    pub seconds: f64,
    /// Output paths relative to the output directory.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheRecord {
    stage: Stage,
    key: String,
    files: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IngestSummary {
    source: String,
    manifest: String,
    n_subjects: usize,
    subjects: Vec<String>,
    n_trials: usize,
    warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeatureSidecar {
    window_fraction: f64,
    n_rows: usize,
    config: crate::features::FeatureConfig,
    catalog: FeatureCatalog,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplsSummary {
    n_subjects: usize,
    keep_x: usize,
    q2: Vec<f64>,
    retained: usize,
}

/// Artifacts held in memory during one invocation; filled lazily.
#[derive(Default)]
struct State {
    dataset: Option<Dataset>,
    raw_demographics: Option<DemographicTable>,
    retained: Option<DemographicTable>,
    imputed: Option<DemographicTable>,
    features: Option<FeatureMatrix>,
    fits: Option<Vec<LmmFit>>,
    audit: Option<AuditOutput>,
    cim: Option<CimLayout>,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    hash: String,
    stamp: Stamp,
    out: PathBuf,
    state: State,
    catalog: FeatureCatalog,
}

impl Pipeline {
    /// Applies the seed override and validates the config.
    pub fn new(mut cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.apply_seed();
        cfg.validate()?;
        let hash = cfg.hash();
        let out = cfg.out.clone();
        Ok(Self { stamp: Stamp::new(&hash), hash, out, cfg, state: State::default(), catalog: FeatureCatalog::standard() })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    /// Manifest of the data the run reads: the configured dataset or the
    /// synthetic one under the output directory.
    pub fn manifest_path(&self) -> PathBuf {
        match &self.cfg.dataset {
            Some(p) => p.clone(),
            None => self.out.join(SYNTH_DIR).join(MANIFEST_FILE),
        }
    }

    fn csv_preamble(&self) -> String {
        self.stamp.csv_preamble()
    }

    /// Hash over every input file of a real dataset; a constant for synthetic runs.
    fn input_fingerprint(&self) -> Result<String, PipelineError> {
        let Some(manifest) = &self.cfg.dataset else {
            return Ok("synthetic".into());
        };
        let index = DatasetIndex::open(manifest).map_err(|e| from_dataset(Stage::Ingest, e))?;
        let mut hasher = Sha256::new();
        let mut feed = |path: PathBuf| -> Result<(), PipelineError> {
            let bytes = fs::read(&path).map_err(|source| PipelineError::Io { stage: Stage::Ingest, path: path.clone(), source })?;
            hasher.update(path.to_string_lossy().as_bytes());
            hasher.update(sha256_hex(&bytes).as_bytes());
            Ok(())
        };
        feed(manifest.clone())?;
        feed(index.demographics_path())?;
        for s in &index.manifest.subjects {
            let dir = index.root.join(s.path.as_deref().unwrap_or(&s.id));
            feed(dir.join("emg.bin"))?;
            feed(dir.join("labels.csv"))?;
        }
        Ok(hex::encode(hasher.finalize()))
    }

    fn cache_path(&self, stage: Stage) -> PathBuf {
        self.out.join(CACHE_DIR).join(format!("{}.json", stage.name()))
    }

    fn read_record(&self, stage: Stage) -> Option<CacheRecord> {
        let text = fs::read_to_string(self.cache_path(stage)).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn record_is_fresh(&self, rec: &CacheRecord, key: &str) -> bool {
        rec.key == key
            && rec.files.iter().all(|(rel, digest)| {
                fs::read(self.out.join(rel)).map(|b| &sha256_hex(&b) == digest).unwrap_or(false)
            })
    }

    fn write_file(&self, stage: Stage, rel: &str, contents: &[u8]) -> Result<(), PipelineError> {
        let path = self.out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|source| PipelineError::Io { stage, path: dir.to_path_buf(), source })?;
        }
        fs::write(&path, contents).map_err(|source| PipelineError::Io { stage, path, source })
    }

    fn read_text(&self, stage: Stage, rel: &str) -> Result<String, PipelineError> {
        let path = self.out.join(rel);
        fs::read_to_string(&path).map_err(|source| PipelineError::Io { stage, path, source })
    }

    fn read_json<T: DeserializeOwned>(&self, stage: Stage, rel: &str, key: &str) -> Result<T, PipelineError> {
        let text = self.read_text(stage, rel)?;
        let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| PipelineError::data(stage, format!("{rel}: {e}")))?;
        let payload = v.get_mut(key).map(serde_json::Value::take).ok_or_else(|| PipelineError::data(stage, format!("{rel}: missing `{key}`")))?;
        serde_json::from_value(payload).map_err(|e| PipelineError::data(stage, format!("{rel}: {e}")))
    }

    /// Runs every stage up to and including `target`.
    pub fn run_until(&mut self, target: Stage) -> Result<Vec<StageOutcome>, PipelineError> {
        let fingerprint = self.input_fingerprint()?;
        let mut chain = sha256_hex(format!("{}|{}", self.hash, fingerprint).as_bytes());
        let mut outcomes = Vec::new();
        for stage in Stage::ALL.into_iter().filter(|s| *s <= target) {
            let key = sha256_hex(format!("{chain}|{}", stage.name()).as_bytes());
            let t0 = Instant::now();
            let (status, files) = match self.read_record(stage).filter(|r| self.record_is_fresh(r, &key)) {
                Some(rec) => (StageStatus::Cached, rec.files),
                None => {
                    let outputs = self.execute(stage)?;
                    let mut files = BTreeMap::new();
                    for rel in outputs {
                        let path = self.out.join(&rel);
                        let bytes = fs::read(&path).map_err(|source| PipelineError::Io { stage, path, source })?;
                        files.insert(rel, sha256_hex(&bytes));
                    }
                    let rec = CacheRecord { stage, key: key.clone(), files: files.clone() };
                    let json = serde_json::to_string_pretty(&rec).expect("record serializes");
                    self.write_file(stage, &format!("{CACHE_DIR}/{}.json", stage.name()), json.as_bytes())?;
                    (StageStatus::Ran, files)
                }
            };
            log::info!("{stage}: {status} in {:.2?}", t0.elapsed());
            chain = sha256_hex(format!("{key}|{}", serde_json::to_string(&files).expect("map serializes")).as_bytes());
            outcomes.push(StageOutcome { stage, status, seconds: t0.elapsed().as_secs_f64(), outputs: files.into_keys().collect() });
        }
        Ok(outcomes)
    }

    pub fn run(&mut self) -> Result<Vec<StageOutcome>, PipelineError> {
        self.run_until(Stage::Report)
    }

    fn execute(&mut self, stage: Stage) -> Result<Vec<String>, PipelineError> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Exclude => self.exclude(),
            Stage::Impute => self.impute(),
            Stage::Extract => self.extract(),
            Stage::Fit => self.fit(),
            Stage::Audit => self.audit(),
            Stage::Spls => self.spls(),
            Stage::Report => self.report(),
        }
    }

    /// Everything is validated before the output directory is touched.
    fn ingest(&mut self) -> Result<Vec<String>, PipelineError> {
        let mut outputs = Vec::new();
        let (dataset, source, manifest) = match &self.cfg.synth {
            Some(spec) => {
                let pop = generate_population(spec).map_err(from_synth)?;
                let root = self.out.join(SYNTH_DIR);
                write_population(&root, &pop).map_err(from_synth)?;
                for entry in walk_files(&root).map_err(|source| PipelineError::Io { stage: Stage::Ingest, path: root.clone(), source })? {
                    let rel = entry.strip_prefix(&self.out).expect("under out").to_string_lossy().replace('\\', "/");
                    outputs.push(rel);
                }
                let ds = Dataset { tensors: pop.tensors, demographics: pop.demographics, warnings: Vec::new() };
                (ds, "synthetic", format!("{SYNTH_DIR}/{MANIFEST_FILE}"))
            }
            None => {
                let path = self.manifest_path();
                let ds = load_dataset(&path).map_err(|e| from_dataset(Stage::Ingest, e))?;
                (ds, "dataset", path.to_string_lossy().into_owned())
            }
        };
        let summary = IngestSummary {
            source: source.into(),
            manifest,
            n_subjects: dataset.tensors.len(),
            subjects: dataset.tensors.iter().map(|t| t.subject_id.clone()).collect(),
            n_trials: dataset.tensors.iter().map(|t| t.n_trials).sum(),
            warnings: dataset.warnings.clone(),
        };
        self.write_file(Stage::Ingest, "ingest.json", self.stamp.wrap_json("ingest", &summary).as_bytes())?;
        outputs.push("ingest.json".into());
        self.state.raw_demographics = Some(dataset.demographics.clone());
        self.state.dataset = Some(dataset);
        Ok(outputs)
    }

    fn raw_demographics(&mut self) -> Result<&DemographicTable, PipelineError> {
        if self.state.raw_demographics.is_none() {
            let index = DatasetIndex::open(&self.manifest_path()).map_err(|e| from_dataset(Stage::Exclude, e))?;
            let table = index.load_demographics().map_err(|e| from_dataset(Stage::Exclude, e))?;
            self.state.raw_demographics = Some(table);
        }
        Ok(self.state.raw_demographics.as_ref().expect("just filled"))
    }

    fn exclude(&mut self) -> Result<Vec<String>, PipelineError> {
        let (kept, report) = apply_exclusion(self.raw_demographics()?);
        if kept.is_empty() {
            return Err(PipelineError::data(Stage::Exclude, "exclusion removed every subject"));
        }
        log::info!("exclusion removed {} subject(s)", report.removed.len());
        self.write_file(Stage::Exclude, "demographics_retained.csv", kept.to_csv(Some(&self.csv_preamble())).as_bytes())?;
        self.write_file(Stage::Exclude, "exclusion_report.json", self.stamp.wrap_json("exclusion", &report).as_bytes())?;
        self.state.retained = Some(kept);
        Ok(vec!["demographics_retained.csv".into(), "exclusion_report.json".into()])
    }

    fn load_table(&self, stage: Stage, rel: &str) -> Result<DemographicTable, PipelineError> {
        DemographicTable::parse_csv(&self.read_text(stage, rel)?).map_err(|e| from_dataset(stage, e))
    }

    fn impute(&mut self) -> Result<Vec<String>, PipelineError> {
        if self.state.retained.is_none() {
            self.state.retained = Some(self.load_table(Stage::Impute, "demographics_retained.csv")?);
        }
        let retained = self.state.retained.as_ref().expect("just filled");
        let (table, report) = mice_impute(retained, &self.cfg.mice).map_err(from_mice)?;
        self.write_file(Stage::Impute, "demographics_imputed.csv", table.to_csv(Some(&self.csv_preamble())).as_bytes())?;
        self.write_file(Stage::Impute, "imputation_report.json", self.stamp.wrap_json("imputation", &report).as_bytes())?;
        self.state.imputed = Some(table);
        Ok(vec!["demographics_imputed.csv".into(), "imputation_report.json".into()])
    }

    fn imputed(&mut self, stage: Stage) -> Result<DemographicTable, PipelineError> {
        if self.state.imputed.is_none() {
            self.state.imputed = Some(self.load_table(stage, "demographics_imputed.csv")?);
        }
        Ok(self.state.imputed.clone().expect("just filled"))
    }

    /// Tensors of the retained subjects, in manifest order.
    fn retained_tensors(&mut self, keep: &BTreeSet<String>) -> Result<Vec<TrialTensor>, PipelineError> {
        if let Some(ds) = self.state.dataset.take() {
            return Ok(ds.tensors.into_iter().filter(|t| keep.contains(&t.subject_id)).collect());
        }
        let index = DatasetIndex::open(&self.manifest_path()).map_err(|e| from_dataset(Stage::Extract, e))?;
        let mut out = Vec::new();
        for (i, s) in index.manifest.subjects.iter().enumerate() {
            if keep.contains(&s.id) {
                out.push(index.load_subject(i).map_err(|e| from_dataset(Stage::Extract, e))?);
            }
        }
        Ok(out)
    }

    fn extract(&mut self) -> Result<Vec<String>, PipelineError> {
        let imputed = self.imputed(Stage::Extract)?;
        let keep: BTreeSet<String> = imputed.subject_ids.iter().cloned().collect();
        let tensors = self.retained_tensors(&keep)?;
        let fm = build_feature_matrix(&tensors, &self.catalog, self.cfg.window_fraction, &self.cfg.features)
            .map_err(from_features)?;
        let sidecar = FeatureSidecar {
            window_fraction: self.cfg.window_fraction,
            n_rows: fm.n_rows(),
            config: self.cfg.features.clone(),
            catalog: self.catalog.clone(),
        };
        self.write_file(Stage::Extract, "features.csv", fm.to_csv(Some(&self.csv_preamble())).as_bytes())?;
        self.write_file(Stage::Extract, "features.json", self.stamp.wrap_json("features", &sidecar).as_bytes())?;
        self.state.features = Some(fm);
        Ok(vec!["features.csv".into(), "features.json".into()])
    }

    fn features(&mut self, stage: Stage) -> Result<&FeatureMatrix, PipelineError> {
        if self.state.features.is_none() {
            let text = self.read_text(stage, "features.csv")?;
            let fm = FeatureMatrix::from_csv(&text).map_err(|e| PipelineError::data(stage, e))?;
            self.state.features = Some(fm);
        }
        Ok(self.state.features.as_ref().expect("just filled"))
    }

    fn fit(&mut self) -> Result<Vec<String>, PipelineError> {
        let imputed = self.imputed(Stage::Fit)?;
        let data = standardize_design(self.features(Stage::Fit)?, &imputed).map_err(from_lmm)?;
        let fits = fit_all(&data, &self.cfg.lmm).map_err(from_lmm)?;
        let factor_names: Vec<String> = data.design.factors.iter().map(|f| f.name.clone()).collect();
        let pre = self.csv_preamble();
        self.write_file(Stage::Fit, "lmm_results.csv", results_csv(&fits, &pre).as_bytes())?;
        self.write_file(Stage::Fit, "lmm_variance.csv", variance_csv(&fits, &factor_names, &pre).as_bytes())?;
        self.write_file(Stage::Fit, "lmm_fits.json", self.stamp.wrap_json("fits", &fits).as_bytes())?;
        let unconverged = fits.iter().filter(|f| !f.converged).count();
        if unconverged > 0 {
            log::warn!("{unconverged} of {} fits stopped before convergence", fits.len());
        }
        self.state.fits = Some(fits);
        Ok(vec!["lmm_results.csv".into(), "lmm_variance.csv".into(), "lmm_fits.json".into()])
    }

    fn audit(&mut self) -> Result<Vec<String>, PipelineError> {
        let fits = match self.state.fits.take() {
            Some(f) => f,
            None => self.read_json(Stage::Audit, "lmm_fits.json", "fits")?,
        };
        let out = run_audit(&fits, &self.cfg.audit);
        log::info!("{} significant feature-demographic pairs", out.n_significant);
        let pre = self.csv_preamble();
        self.write_file(Stage::Audit, "sensitivity.csv", sensitivity_csv(&out.results, &pre).as_bytes())?;
        self.write_file(Stage::Audit, "feature_summary.csv", summary_csv(&out.summaries, &pre).as_bytes())?;
        self.write_file(Stage::Audit, "effect_size_distributions.csv", distributions_csv(&out.distributions, &pre).as_bytes())?;
        self.write_file(Stage::Audit, "audit.json", self.stamp.wrap_json("audit", &out).as_bytes())?;
        self.state.fits = Some(fits);
        self.state.audit = Some(out);
        Ok(vec![
            "sensitivity.csv".into(),
            "feature_summary.csv".into(),
            "effect_size_distributions.csv".into(),
            "audit.json".into(),
        ])
    }

    fn spls(&mut self) -> Result<Vec<String>, PipelineError> {
        let imputed = self.imputed(Stage::Spls)?;
        let fm = self.features(Stage::Spls)?;
        let feature_names = fm.feature_names.clone();
        let (subjects, means) = fm.subject_means();
        let n = subjects.len();
        let x = DMatrix::from_fn(n, feature_names.len(), |i, j| means[i][j]);
        let mut y = DMatrix::zeros(n, DEMOGRAPHIC_COLUMNS.len());
        for (i, s) in subjects.iter().enumerate() {
            let r = imputed.row_of(s).ok_or_else(|| PipelineError::data(Stage::Spls, format!("no demographics for {s}")))?;
            for j in 0..DEMOGRAPHIC_COLUMNS.len() {
                y[(i, j)] = imputed.cells[r][j]
                    .ok_or_else(|| PipelineError::data(Stage::Spls, format!("{s}: {} still missing", DEMOGRAPHIC_COLUMNS[j])))?;
            }
        }
        let s = &self.cfg.spls;
        let xs = standardize_lenient(&x);
        let ys = standardize_columns(&y)
            .map_err(|j| PipelineError::data(Stage::Spls, format!("{} is constant across subjects", DEMOGRAPHIC_COLUMNS[j])))?;
        let n_comp = s.n_components.min(n.saturating_sub(1)).max(1);
        let mut model = fit_spls(&xs, &ys, s.keep_x, n_comp).map_err(from_spls)?;
        model.q2 = q2_crossval(&x, &y, s.keep_x, n_comp, s.folds.min(n), s.seed).map_err(from_spls)?;
        let demo_names: Vec<String> = DEMOGRAPHIC_COLUMNS.iter().map(|d| d.to_string()).collect();
        let cim = build_cim(&model, 1, &feature_names, &demo_names).map_err(from_spls)?;
        let pre = self.csv_preamble();
        self.write_file(Stage::Spls, "spls_loadings.csv", loadings_csv(&model, &feature_names, &demo_names, &pre).as_bytes())?;
        self.write_file(Stage::Spls, "spls_q2.csv", q2_csv(&model.q2, &pre).as_bytes())?;
        self.write_file(Stage::Spls, "cim_layout.json", self.stamp.wrap_json("layout", &cim).as_bytes())?;
        let summary = SplsSummary { n_subjects: n, keep_x: s.keep_x, retained: model.retained(), q2: model.q2.clone() };
        self.write_file(Stage::Spls, "spls_summary.json", self.stamp.wrap_json("spls", &summary).as_bytes())?;
        self.state.cim = Some(cim);
        Ok(vec!["spls_loadings.csv".into(), "spls_q2.csv".into(), "cim_layout.json".into(), "spls_summary.json".into()])
    }

    fn report(&mut self) -> Result<Vec<String>, PipelineError> {
        let audit = match self.state.audit.take() {
            Some(a) => a,
            None => self.read_json(Stage::Report, "audit.json", "audit")?,
        };
        let cim = match self.state.cim.take() {
            Some(c) => c,
            None => self.read_json(Stage::Report, "cim_layout.json", "layout")?,
        };
        let mut outputs = Vec::new();
        for fig in emit_reports(&audit, &cim, &self.stamp) {
            for (ext, body) in [("csv", &fig.csv), ("svg", &fig.svg)] {
                let rel = format!("figures/{}.{ext}", fig.stem);
                self.write_file(Stage::Report, &rel, body.as_bytes())?;
                outputs.push(rel);
            }
        }
        self.state.audit = Some(audit);
        self.state.cim = Some(cim);
        Ok(outputs)
    }
}

/// Regular files below `root`, sorted.
fn walk_files(root: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(std::io::Error::other)?;
        if entry.file_type().is_file() {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}
