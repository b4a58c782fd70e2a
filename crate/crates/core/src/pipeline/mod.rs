//! Staged, re-runnable experiment pipeline: synth, landmarks, extract,
//! train, evaluate and report. Every stage writes a [`RunManifest`] next to
//! its outputs and refuses to consume upstream outputs whose checksums no
//! longer match, unless forced.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::corpus::wav::{read_wav, write_wav};
use crate::corpus::{
    derive_landmarks, parse_alignment, read_landmark_file, synthesize_corpus, write_alignment,
    write_landmark_file, Landmark, PhoneClassMap, PhoneSegment, Waveform, SAMPLE_RATE,
};
use crate::error::{Error, Result};
use crate::eval::{
    render_increment_table, reports_from_csv, reports_to_csv, CrossLingualReport, EvalReport,
    REPORT_CSV_HEADER,
};
use crate::features::{FeatureExtractor, FeatureKind, FeatureTable};
use crate::models::{load_model, save_model, train, ModelFamily};

pub use config::{derive_seed, CorpusConfig, ExperimentConfig, PipelineConfig};
pub use manifest::{sha256_file, FileRecord, RunManifest};

/// Runtime switches that are not part of the experiment definition.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Consume upstream outputs even when their manifests say they are stale.
    pub force: bool,
    /// Overrides `jobs` from the config.
    pub jobs: Option<usize>,
    /// Overrides `out_dir` from the config (used as given, not config-relative).
    pub out_dir: Option<PathBuf>,
}

/// One utterance on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceFiles {
    /// Path of the alignment relative to the corpus root, without extension.
    pub id: String,
    pub audio: PathBuf,
    pub alignment: PathBuf,
}

/// Finds every `.phn` under `dir`, paired with the `.wav` of the same stem, sorted by id.
pub fn discover_utterances(dir: &Path) -> Result<Vec<UtteranceFiles>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("phn"))
            {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut found = Vec::new();
    walk(dir, &mut found)?;
    let mut utts: Vec<UtteranceFiles> = found
        .into_iter()
        .map(|alignment| {
            let rel = alignment
                .strip_prefix(dir)
                .unwrap_or(&alignment)
                .with_extension("");
            UtteranceFiles {
                id: rel.to_string_lossy().replace('\\', "/"),
                audio: alignment.with_extension("wav"),
                alignment,
            }
        })
        .collect();
    if utts.is_empty() {
        return Err(Error::Structure(format!(
            "no alignments found in {}",
            dir.display()
        )));
    }
    utts.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(utts)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_alignment(path: &Path, id: &str) -> Result<Vec<PhoneSegment>> {
    parse_alignment(&read_file(path)?, SAMPLE_RATE, id).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

/// Outcome of the landmark stage for one corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkSummary {
    pub corpus: String,
    pub files: Vec<PathBuf>,
    pub landmarks: usize,
    /// Landmarks that yield a classification region (obstruent landmarks).
    pub obstruent_landmarks: usize,
}

/// The experiment pipeline bound to a config and an output directory.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub out: PathBuf,
    force: bool,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, options: RunOptions) -> Result<Self> {
        let out = options
            .out_dir
            .unwrap_or_else(|| config.resolve(&config.out_dir));
        let jobs = options.jobs.unwrap_or(config.jobs);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        Ok(Self {
            config,
            out,
            force: options.force,
            pool,
        })
    }

    fn manifest(&self, stage: &str) -> RunManifest {
        RunManifest::new(stage, &self.config.hash(), self.config.seed)
    }

    fn check(&self, manifest_path: &Path, upstream: &str) -> Result<Option<RunManifest>> {
        if !manifest_path.exists() {
            if self.force {
                return Ok(None);
            }
            return Err(Error::Stale {
                path: manifest_path.to_path_buf(),
                msg: format!("no {upstream} manifest; run `voicing {upstream}` first"),
            });
        }
        let m = RunManifest::read(manifest_path)?;
        if !self.force {
            m.verify(&self.out)?;
        }
        Ok(Some(m))
    }

    pub fn corpus_dir(&self, id: &str) -> Result<PathBuf> {
        Ok(self.config.resolve(&self.config.corpus(id)?.dir))
    }

    pub fn phone_map(&self, id: &str) -> Result<PhoneClassMap> {
        match &self.config.corpus(id)?.phone_map {
            Some(p) => PhoneClassMap::parse(&read_file(&self.config.resolve(p))?),
            None => Ok(PhoneClassMap::english()),
        }
    }

    pub fn landmark_dir(&self, id: &str) -> PathBuf {
        self.out.join("landmarks").join(id)
    }

    pub fn feature_path(&self, id: &str, kind: FeatureKind) -> PathBuf {
        self.out
            .join("features")
            .join(id)
            .join(format!("{kind}.csv"))
    }

    pub fn model_path(&self, kind: FeatureKind, family: ModelFamily) -> PathBuf {
        self.out
            .join("models")
            .join(format!("{kind}-{family}.json"))
    }

    pub fn report_path(&self, kind: FeatureKind, family: ModelFamily) -> PathBuf {
        self.out
            .join("reports")
            .join(format!("{kind}-{family}.csv"))
    }

    /// Writes every configured synthetic corpus (or just `only`) to its corpus directory.
    pub fn synth(&self, only: Option<&str>) -> Result<Vec<PathBuf>> {
        if let Some(id) = only {
            if !self.config.synth.contains_key(id) {
                return Err(Error::Config(format!("no [synth.{id}] section")));
            }
        }
        if self.config.synth.is_empty() {
            return Err(Error::Config("config has no [synth.*] sections".into()));
        }
        let mut dirs = Vec::new();
        for (id, spec) in self
            .config
            .synth
            .iter()
            .filter(|(id, _)| only.is_none_or(|o| o == id.as_str()))
        {
            let dir = self.corpus_dir(id)?;
            create_dir(&dir)?;
            let corpus = self.pool.install(|| synthesize_corpus(spec))?;
            let mut manifest = self.manifest("synth");
            let mut truth = String::from(
                "utterance_id,index,phone,label,f0,start,end,vot,vowel_start,vowel_end\n",
            );
            for u in &corpus.utterances {
                let wav = dir.join(format!("{}.wav", u.id));
                let phn = dir.join(format!("{}.phn", u.id));
                write_wav(&wav, &u.audio)?;
                write_file(&phn, &write_alignment(&u.segments, SAMPLE_RATE))?;
                manifest.add_output(&dir, &wav)?;
                manifest.add_output(&dir, &phn)?;
                for t in &u.tokens {
                    let _ = writeln!(
                        truth,
                        "{},{},{},{},{:.3},{:.6},{:.6},{:.6},{:.6},{:.6}",
                        t.utterance_id,
                        t.index,
                        t.phone,
                        if t.label.is_voiced() {
                            "voiced"
                        } else {
                            "unvoiced"
                        },
                        t.f0,
                        t.start,
                        t.end,
                        t.vot,
                        t.vowel_start,
                        t.vowel_end
                    );
                }
            }
            let truth_path = dir.join("truth.csv");
            write_file(&truth_path, &truth)?;
            manifest.add_output(&dir, &truth_path)?;
            manifest.write(&dir.join("manifest.json"))?;
            info!(
                "synth {id}: {} utterances in {}",
                corpus.utterances.len(),
                dir.display()
            );
            dirs.push(dir);
        }
        Ok(dirs)
    }

    /// Derives landmark files for each corpus.
    pub fn landmarks(&self, corpora: &[String]) -> Result<Vec<LandmarkSummary>> {
        corpora.iter().map(|id| self.landmarks_for(id)).collect()
    }

    fn landmarks_for(&self, id: &str) -> Result<LandmarkSummary> {
        let dir = self.corpus_dir(id)?;
        let utts = discover_utterances(&dir)?;
        let map = self.phone_map(id)?;
        let aligned: Vec<Vec<PhoneSegment>> = self.pool.install(|| {
            utts.par_iter()
                .map(|u| read_alignment(&u.alignment, &u.id))
                .collect::<Result<_>>()
        })?;

        let mut unmapped: BTreeMap<&str, usize> = BTreeMap::new();
        for seg in aligned.iter().flatten() {
            if map.get(&seg.label).is_none() {
                *unmapped.entry(&seg.label).or_default() += 1;
            }
        }
        if !unmapped.is_empty() {
            let list: Vec<String> = unmapped.iter().map(|(p, n)| format!("{p} ({n})")).collect();
            return Err(Error::UnmappedPhone(format!(
                "{} in corpus {id}",
                list.join(", ")
            )));
        }

        let out_dir = self.landmark_dir(id);
        create_dir(&out_dir)?;
        let mut manifest = self.manifest("landmarks");
        if let Some(p) = &self.config.corpus(id)?.phone_map {
            manifest.add_input(&self.out, &self.config.resolve(p))?;
        }
        let mut summary = LandmarkSummary {
            corpus: id.to_string(),
            files: Vec::new(),
            landmarks: 0,
            obstruent_landmarks: 0,
        };
        for (u, segs) in utts.iter().zip(&aligned) {
            let lms = derive_landmarks(segs, &map)?;
            summary.landmarks += lms.len();
            summary.obstruent_landmarks += lms.iter().filter(|l| l.kind.is_obstruent()).count();
            let path = out_dir.join(format!("{}.lm", u.id));
            write_file(&path, &write_landmark_file(&lms))?;
            manifest.add_input(&self.out, &u.alignment)?;
            manifest.add_output(&self.out, &path)?;
            summary.files.push(path);
        }
        manifest.write(&out_dir.join("manifest.json"))?;
        info!(
            "landmarks {id}: {} files, {} landmarks",
            summary.files.len(),
            summary.landmarks
        );
        Ok(summary)
    }

    /// Feature CSVs of one kind for each corpus.
    pub fn extract(&self, corpora: &[String], kind: FeatureKind) -> Result<Vec<PathBuf>> {
        let fx = FeatureExtractor::new(&self.config.features, SAMPLE_RATE)?;
        corpora
            .iter()
            .map(|id| self.extract_for(id, kind, &fx))
            .collect()
    }

    fn extract_for(&self, id: &str, kind: FeatureKind, fx: &FeatureExtractor) -> Result<PathBuf> {
        let lm_dir = self.landmark_dir(id);
        self.check(&lm_dir.join("manifest.json"), "landmarks")?;
        let utts = discover_utterances(&self.corpus_dir(id)?)?;
        let map = self.phone_map(id)?;
        let force = self.force;
        let loaded: Vec<(Waveform, Vec<PhoneSegment>)> = self.pool.install(|| {
            utts.par_iter()
                .map(|u| {
                    if !u.audio.exists() {
                        return Err(Error::Structure(format!(
                            "utterance {} has no audio ({})",
                            u.id,
                            u.audio.display()
                        )));
                    }
                    let segs = read_alignment(&u.alignment, &u.id)?;
                    let lm_path = lm_dir.join(format!("{}.lm", u.id));
                    if !force {
                        let recorded = read_landmark_file(&read_file(&lm_path)?)?;
                        let derived = derive_landmarks(&segs, &map)?;
                        if !same_landmarks(&recorded, &derived) {
                            return Err(Error::Stale {
                                path: lm_path,
                                msg: "landmarks differ from the current alignment; rerun `voicing landmarks`".into(),
                            });
                        }
                    }
                    Ok((read_wav(&u.audio)?, segs))
                })
                .collect::<Result<_>>()
        })?;
        let items: Vec<(&Waveform, &[PhoneSegment])> =
            loaded.iter().map(|(w, s)| (w, s.as_slice())).collect();
        let table = self.pool.install(|| fx.table(items, &map, kind))?;

        let path = self.feature_path(id, kind);
        write_file(&path, &table.to_csv())?;
        let mut manifest = self.manifest("extract");
        for u in &utts {
            manifest.add_input(&self.out, &u.audio)?;
            manifest.add_input(&self.out, &u.alignment)?;
        }
        manifest.add_output(&self.out, &path)?;
        manifest.write(&path.with_extension("manifest.json"))?;
        info!("extract {id}/{kind}: {} rows", table.len());
        Ok(path)
    }

    fn load_features(&self, id: &str, kind: FeatureKind) -> Result<FeatureTable> {
        let path = self.feature_path(id, kind);
        self.check(&path.with_extension("manifest.json"), "extract")?;
        let table = FeatureTable::from_csv(&read_file(&path)?)?;
        if table.kind != kind {
            return Err(Error::invalid(format!(
                "{} holds {} features, expected {kind}",
                path.display(),
                table.kind
            )));
        }
        Ok(table)
    }

    /// Trains on the train corpus; writes the artifact, training log and manifest.
    pub fn train(&self, kind: FeatureKind, family: ModelFamily) -> Result<PathBuf> {
        let corpus = &self.config.experiment.train_corpus;
        let table = self.load_features(corpus, kind)?;
        let (mut model, log) = self.pool.install(|| {
            train(
                family,
                kind,
                &table.matrix(),
                &table.labels(),
                &self.config.train,
            )
        })?;
        model.metadata.corpus_id.clone_from(corpus);
        let path = self.model_path(kind, family);
        create_dir(path.parent().unwrap_or(&self.out))?;
        save_model(&model, &path)?;
        let log_path = path.with_extension("log.csv");
        write_file(&log_path, &log.to_csv())?;
        let mut manifest = self.manifest("train");
        manifest.add_input(&self.out, &self.feature_path(corpus, kind))?;
        manifest.add_output(&self.out, &path)?;
        manifest.add_output(&self.out, &log_path)?;
        manifest.write(&path.with_extension("manifest.json"))?;
        info!(
            "train {kind}/{family}: best epoch {} of {}",
            log.best_epoch,
            log.records.len()
        );
        Ok(path)
    }

    /// Evaluates a trained model on the reference and test corpora.
    ///
    /// `artifact` defaults to the model trained for `kind`/`family` by [`Pipeline::train`].
    pub fn evaluate(
        &self,
        kind: FeatureKind,
        family: ModelFamily,
        artifact: Option<&Path>,
    ) -> Result<CrossLingualReport> {
        let default_path = self.model_path(kind, family);
        let model_path = artifact.unwrap_or(&default_path);
        if artifact.is_none() {
            self.check(&model_path.with_extension("manifest.json"), "train")?;
        }
        let model = load_model(model_path)?;
        if model.features != kind {
            return Err(Error::invalid(format!(
                "model {} was trained on {} features but {kind} features were requested",
                model_path.display(),
                model.features
            )));
        }
        let mut corpora = vec![self.config.reference_corpus().to_string()];
        corpora.extend(self.config.experiment.test_corpora.iter().cloned());
        let mut reports = Vec::new();
        let mut manifest = self.manifest("evaluate");
        manifest.add_input(&self.out, model_path)?;
        for id in &corpora {
            let table = self.load_features(id, kind)?;
            let predictions = self.pool.install(|| model.predict_all(&table.matrix()))?;
            reports.push(EvalReport::from_predictions(
                id,
                kind.as_str(),
                model.family.as_str(),
                &predictions,
                &table.labels(),
            )?);
            manifest.add_input(&self.out, &self.feature_path(id, kind))?;
        }
        let reference = reports.remove(0);
        let report = CrossLingualReport::new(reference, reports)?;
        let path = self.report_path(kind, model.family);
        write_file(&path, &reports_to_csv(std::slice::from_ref(&report)))?;
        let text_path = path.with_extension("txt");
        write_file(
            &text_path,
            &render_increment_table(std::slice::from_ref(&report)),
        )?;
        manifest.add_output(&self.out, &path)?;
        manifest.add_output(&self.out, &text_path)?;
        manifest.write(&path.with_extension("manifest.json"))?;
        Ok(report)
    }

    /// Merges every evaluation report into `summary.csv`, `summary.txt` and `bars.csv`.
    pub fn report(&self) -> Result<String> {
        let dir = self.out.join("reports");
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|e| e == "csv")
                    && !matches!(
                        p.file_stem().and_then(|s| s.to_str()),
                        Some("summary" | "bars")
                    )
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Structure(format!(
                "no evaluation reports in {}",
                dir.display()
            )));
        }
        let mut manifest = self.manifest("report");
        let mut all = Vec::new();
        for f in &files {
            self.check(&f.with_extension("manifest.json"), "evaluate")?;
            all.extend(reports_from_csv(&read_file(f)?)?);
            manifest.add_input(&self.out, f)?;
        }
        let rank = |r: &CrossLingualReport| {
            let kinds = FeatureKind::all();
            let k = kinds
                .iter()
                .position(|k| k.as_str() == r.reference.variant)
                .unwrap_or(kinds.len());
            let m = ModelFamily::ALL
                .iter()
                .position(|m| m.as_str() == r.reference.model)
                .unwrap_or(ModelFamily::ALL.len());
            (k, m)
        };
        all.sort_by_key(rank);
        let table = render_increment_table(&all);
        let mut bars = String::from("variant,model,corpus,f1,accuracy\n");
        for rep in &all {
            for r in std::iter::once(&rep.reference).chain(&rep.others) {
                let _ = writeln!(
                    bars,
                    "{},{},{},{:.6},{:.6}",
                    r.variant, r.model, r.corpus_id, r.f1, r.accuracy
                );
            }
        }
        for (name, text) in [
            ("summary.csv", reports_to_csv(&all)),
            ("summary.txt", table.clone()),
            ("bars.csv", bars),
        ] {
            let p = dir.join(name);
            write_file(&p, &text)?;
            manifest.add_output(&self.out, &p)?;
        }
        manifest.write(&dir.join("summary.manifest.json"))?;
        debug_assert!(reports_to_csv(&all).starts_with(REPORT_CSV_HEADER));
        Ok(table)
    }
}

/// Landmark files keep 4 decimals, so times are compared at that precision.
fn same_landmarks(recorded: &[Landmark], derived: &[Landmark]) -> bool {
    recorded.len() == derived.len()
        && recorded
            .iter()
            .zip(derived)
            .all(|(a, b)| a.kind == b.kind && (a.time - b.time).abs() < 6e-5)
}
