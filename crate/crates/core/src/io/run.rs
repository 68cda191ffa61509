//! End-to-end execution of a run configuration.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::{DataSource, DataSplit};
use crate::error::{Error, Result};
use crate::io::config::RunConfig;
use crate::io::lock::DirLock;
use crate::io::model_file::save_model;
use crate::net::{AdaptiveModel, ArchSpec};
use crate::quant::BitWidth;
use crate::train::{evaluate_all, pretrain_fp, train_individual, train_joint, train_progressive, EpochRecord, Regime};

/// Adjust a synthetic source to the input resolution and class count of
/// `arch`. IDX sources are returned unchanged.
pub fn fit_source(source: DataSource, arch: &ArchSpec) -> DataSource {
    match source {
        DataSource::Synthetic(mut spec) => {
            spec.height = arch.input[1];
            spec.width = arch.input[2];
            spec.classes = arch.classes;
            DataSource::Synthetic(spec)
        }
        other => other,
    }
}

/// Load `source` and check that its images fit `arch`.
pub fn load_for(source: &DataSource, arch: &ArchSpec) -> Result<DataSplit> {
    let split = source.load()?;
    for (name, d) in [("train", &split.train), ("test", &split.test)] {
        if d.shape != arch.input {
            return Err(Error::Dataset(format!(
                "{name} images have shape {:?} but the architecture expects {:?}",
                d.shape, arch.input
            )));
        }
        if d.classes > arch.classes {
            return Err(Error::Dataset(format!(
                "{name} set has {} classes but the architecture outputs {}",
                d.classes, arch.classes
            )));
        }
    }
    Ok(split)
}

/// Files written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub model: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub metrics: PathBuf,
    /// Test accuracy of the final model at every registered bit-width.
    pub accuracy: Vec<(BitWidth, f64)>,
}

/// Train as configured, writing into the output directory (relative paths
/// resolve against `base`):
///
/// - `metrics.jsonl`, one JSON record per epoch;
/// - `fp.flxb` after full-precision pretraining, if any;
/// - `progressive-<k>.flxb` after every progressive phase;
/// - `model.flxb`, the final model.
///
/// `progress` sees every record as it is written.
pub fn run(cfg: &RunConfig, base: &Path, progress: &mut dyn FnMut(&EpochRecord)) -> Result<RunOutcome> {
    cfg.validate()?;
    let arch = cfg.arch(base)?;
    let out = base.join(&cfg.output);
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let _lock = DirLock::acquire(&out)?;
    let source = match &cfg.data.synthetic {
        Some(_) => cfg.data_source(),
        None => fit_source(cfg.data_source(), &arch),
    };
    let data = load_for(&source, &arch)?;

    let metrics = out.join("metrics.jsonl");
    let mut log = File::create(&metrics).map_err(|e| Error::io(&metrics, e))?;
    let mut write_err = None;
    let mut sink = |r: &EpochRecord| {
        if let Err(e) = writeln!(log, "{}", r.to_json_line()) {
            write_err.get_or_insert(e);
        }
        progress(r);
    };

    let mut model = AdaptiveModel::<f32>::new(arch, cfg.quant_config()?, cfg.seed)?;
    let mut checkpoints = Vec::new();
    if let Some(plan) = &cfg.pretrain {
        pretrain_fp(&mut model, plan, &data, &mut sink)?;
        let path = out.join("fp.flxb");
        save_model(&model, &path)?;
        checkpoints.push(path);
    }
    match &cfg.regime {
        Regime::Individual { bits, .. } => train_individual(&mut model, *bits, &cfg.train, &data, &mut sink)?,
        Regime::Joint { bits, scl } => train_joint(&mut model, bits, *scl, &cfg.train, &data, &mut sink)?,
        Regime::Progressive { bits, direction } => {
            for (k, m) in train_progressive(&mut model, bits, *direction, &cfg.train, &data, &mut sink)? {
                let path = out.join(format!("progressive-{k}.flxb"));
                save_model(&m, &path)?;
                checkpoints.push(path);
            }
        }
    }
    if let Some(e) = write_err {
        return Err(Error::io(&metrics, e));
    }
    log.flush().map_err(|e| Error::io(&metrics, e))?;
    let path = out.join("model.flxb");
    save_model(&model, &path)?;
    let accuracy = evaluate_all(&mut model, &data.test)?;
    Ok(RunOutcome {
        model: path,
        checkpoints,
        metrics,
        accuracy,
    })
}
