use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    compute_metrics, persistence_prediction, split_samples, train_on_split, Metrics, TrainConfig,
};
use crate::error::Result;
use crate::mc::mc_predict;
use crate::model::{build_model, Cg3dConfig, Cg3dModel, ModelKind};
use crate::preprocess::{Dataset, WindowSample};
use crate::seed::{derive_seed, stream};
use crate::tensor::Tensor;

pub const REPORT_SCHEMA: &str = "skytrace-compare";
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub model: String,
    pub mae: f64,
    pub rmse: f64,
    pub mse: f64,
    pub n: usize,
}

impl CompareRow {
    fn new(model: &str, m: Metrics) -> Self {
        CompareRow {
            model: model.to_string(),
            mae: m.mae,
            rmse: m.rmse,
            mse: m.mse,
            n: m.n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareSettings {
    pub model: Cg3dConfig,
    pub train: TrainConfig,
    pub mc_samples: usize,
}

/// Validation errors of the three architectures plus the MC-dropout mean
/// of the CG3D model, in standardized target units.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub schema: String,
    pub version: u32,
    pub settings: BTreeMap<String, String>,
    pub train_samples: usize,
    pub val_samples: usize,
    /// `CG3D`, `3D CNN`, `CNN-GRU`, `CG3D+MC-Dropout`, in that order.
    pub rows: Vec<CompareRow>,
    pub persistence: CompareRow,
    /// `100 * (mae(CG3D+MC) - mae(CG3D)) / mae(CG3D)`; negative means the
    /// MC mean reduced the error.
    pub mc_delta_percent: f64,
    pub mc_samples: usize,
    pub mc_trained_with_dropout: bool,
}

impl CompareReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn targets(val: &[&WindowSample<f64>]) -> Vec<Tensor<f64>> {
    val.iter().map(|s| s.target.clone()).collect()
}

/// Trains every [`ModelKind`] from the same seed on the same split and
/// evaluates on the validation side.
pub fn compare_models(dataset: &Dataset, settings: &CompareSettings) -> Result<CompareReport> {
    let tcfg = &settings.train;
    let split = split_samples(&dataset.samples, tcfg)?;
    let val: Vec<&WindowSample<f64>> = split.val.iter().map(|&i| &dataset.samples[i]).collect();
    let truth = targets(&val);

    let mut rows = Vec::new();
    let mut cg3d: Option<Cg3dModel<f64>> = None;
    for kind in ModelKind::ALL {
        let mut model = build_model(
            &settings.model,
            kind,
            dataset.spatial_dims(),
            dataset.temporal_dims(),
            tcfg.seed,
        )?;
        train_on_split(&mut model, &dataset.samples, split.clone(), tcfg)?;
        let preds = super::predict_all(&model, &val)?;
        rows.push(CompareRow::new(
            kind.label(),
            compute_metrics(&preds, &truth)?,
        ));
        if kind == ModelKind::Cg3d {
            cg3d = Some(model);
        }
    }

    let model = cg3d.expect("CG3D is trained first");
    let mc_means: Vec<Tensor<f64>> = split
        .val
        .par_iter()
        .map(|&i| {
            let seed = derive_seed(tcfg.seed, stream::MC, i as u64);
            mc_predict(&model, &dataset.samples[i].input, settings.mc_samples, seed).map(|p| p.mean)
        })
        .collect::<Result<_>>()?;
    let mc = compute_metrics(&mc_means, &truth)?;
    let base_mae = rows[0].mae;
    rows.push(CompareRow::new("CG3D+MC-Dropout", mc));

    let persist: Vec<Tensor<f64>> = val.iter().map(|s| persistence_prediction(s)).collect();
    let persistence = CompareRow::new("persistence", compute_metrics(&persist, &truth)?);

    let mut cfg_pairs: BTreeMap<String, String> = settings.model.to_pairs().into_iter().collect();
    cfg_pairs.extend(tcfg.to_pairs());
    cfg_pairs.insert("seed".into(), tcfg.seed.to_string());
    cfg_pairs.insert("mc.samples".into(), settings.mc_samples.to_string());

    Ok(CompareReport {
        schema: REPORT_SCHEMA.to_string(),
        version: REPORT_VERSION,
        settings: cfg_pairs,
        train_samples: split.train.len(),
        val_samples: split.val.len(),
        rows,
        persistence,
        mc_delta_percent: 100.0 * (mc.mae - base_mae) / base_mae,
        mc_samples: settings.mc_samples,
        mc_trained_with_dropout: tcfg.train_dropout && settings.model.dropout_rate > 0.0,
    })
}
