//! Trajectory preprocessing: de-duplication, spline resampling onto a
//! uniform grid, spatial/temporal feature split, standardization + PCA and
//! sliding-window sample construction.

mod clean;
mod features;
mod pca;
mod spline;
mod window;

pub use clean::clean;
pub use features::{split_features, FeatureSplit, SPATIAL_COLUMNS, TEMPORAL_COLUMNS};
pub use pca::{pca_fit, symmetric_eigen, PcaModel, SCALE_FLOOR};
pub use spline::{spline_resample, NaturalCubicSpline, MIN_KNOTS};
pub use window::{sliding_windows, WindowSample, WindowSpec};

use std::path::Path;

use crate::adsb::Trajectory;
use crate::container::Container;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Target columns: lead time in seconds after the last input step, then
/// position.
pub const TARGET_COLUMNS: [&str; 4] = ["lead_time", "lat", "lon", "altitude"];

const DATASET_KIND: &str = "DATASET";
const DATASET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub period_s: u32,
    pub window: WindowSpec,
    pub spatial_variance: f64,
    pub temporal_variance: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            period_s: 10,
            window: WindowSpec::default(),
            spatial_variance: 0.95,
            temporal_variance: 0.95,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.period_s == 0 {
            return Err(Error::Config("preprocess.period_s must be positive".into()));
        }
        self.window.validate()?;
        for (name, v) in [
            ("preprocess.spatial_variance", self.spatial_variance),
            ("preprocess.temporal_variance", self.temporal_variance),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} = {v} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Per-column standardization of the four target columns.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetScaler {
    pub mean: [f64; 4],
    pub scale: [f64; 4],
}

impl TargetScaler {
    fn fit(rows: &[[f64; 4]]) -> Self {
        let n = rows.len() as f64;
        let mut mean = [0.0; 4];
        for r in rows {
            for j in 0..4 {
                mean[j] += r[j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut scale = [0.0; 4];
        for r in rows {
            for j in 0..4 {
                scale[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let denom = (rows.len().max(2) - 1) as f64;
        scale
            .iter_mut()
            .for_each(|s| *s = (*s / denom).sqrt().max(SCALE_FLOOR));
        TargetScaler { mean, scale }
    }

    pub fn apply(&self, row: &mut [f64]) {
        for j in 0..4 {
            row[j] = (row[j] - self.mean[j]) / self.scale[j];
        }
    }

    /// Back to physical units (seconds, degrees, feet).
    pub fn invert(&self, row: &mut [f64]) {
        for j in 0..4 {
            row[j] = row[j] * self.scale[j] + self.mean[j];
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PreprocessReport {
    pub trajectories_in: usize,
    /// Dropped by cleaning or for having fewer than [`MIN_KNOTS`] knots.
    pub degenerate: usize,
    /// Resampled but shorter than one window.
    pub too_short: usize,
    pub samples: usize,
}

/// Windowed, PCA-reduced samples plus the models needed to interpret them.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: PreprocessConfig,
    pub spatial_pca: PcaModel<f64>,
    pub temporal_pca: PcaModel<f64>,
    pub target_scaler: TargetScaler,
    /// `icao24` of each input trajectory, indexed by `WindowSample::trajectory`.
    pub trajectory_ids: Vec<String>,
    pub samples: Vec<WindowSample<f64>>,
    pub report: PreprocessReport,
}

fn stack_rows(blocks: &[&Tensor<f64>]) -> Result<Tensor<f64>> {
    let cols = blocks[0].cols();
    let rows = blocks.iter().map(|b| b.rows()).sum();
    let data = blocks
        .iter()
        .flat_map(|b| b.data().iter().copied())
        .collect();
    Tensor::new(vec![rows, cols], data)
}

fn hstack(a: &Tensor<f64>, b: &Tensor<f64>) -> Result<Tensor<f64>> {
    let n = a.rows();
    let mut data = Vec::with_capacity(n * (a.cols() + b.cols()));
    for i in 0..n {
        data.extend_from_slice(a.row(i));
        data.extend_from_slice(b.row(i));
    }
    Tensor::new(vec![n, a.cols() + b.cols()], data)
}

/// Full preprocessing chain over grouped trajectories. PCA and target
/// scaling are fitted on every resampled step of the usable trajectories.
pub fn build_dataset(trajectories: &[Trajectory], cfg: &PreprocessConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut report = PreprocessReport {
        trajectories_in: trajectories.len(),
        ..PreprocessReport::default()
    };

    let mut usable: Vec<(usize, FeatureSplit)> = Vec::new();
    for (i, traj) in trajectories.iter().enumerate() {
        let resampled = match clean(traj).and_then(|c| spline_resample(&c, cfg.period_s)) {
            Ok(r) => r,
            Err(Error::Degenerate(_)) => {
                report.degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        usable.push((i, split_features(&resampled)?));
    }
    if usable.is_empty() {
        return Err(Error::Degenerate(format!(
            "all {} trajectories are degenerate",
            trajectories.len()
        )));
    }

    let spatial_all = stack_rows(&usable.iter().map(|(_, f)| &f.spatial).collect::<Vec<_>>())?;
    let temporal_all = stack_rows(&usable.iter().map(|(_, f)| &f.temporal).collect::<Vec<_>>())?;
    let spatial_pca = pca_fit(&spatial_all, cfg.spatial_variance)?;
    let temporal_pca = pca_fit(&temporal_all, cfg.temporal_variance)?;

    let mut samples = Vec::new();
    for (id, split) in &usable {
        if cfg.window.count(split.steps()) == 0 {
            report.too_short += 1;
            continue;
        }
        let features = hstack(
            &spatial_pca.transform(&split.spatial)?,
            &temporal_pca.transform(&split.temporal)?,
        )?;
        let t0 = split.timestamps[0];
        let mut targets = Vec::with_capacity(split.steps() * 4);
        for (i, &ts) in split.timestamps.iter().enumerate() {
            let s = split.spatial.row(i);
            targets.extend([(ts - t0) as f64, s[0], s[1], s[2]]);
        }
        let targets = Tensor::new(vec![split.steps(), 4], targets)?;
        for mut w in sliding_windows(&features, &targets, cfg.window)? {
            w.trajectory = *id;
            let anchor = w.last_observed[0];
            for row in w.target.data_mut().chunks_mut(4) {
                row[0] -= anchor;
            }
            w.last_observed[0] = 0.0;
            samples.push(w);
        }
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no trajectory spans {} resampled steps",
            cfg.window.input + cfg.window.horizon
        )));
    }

    let rows: Vec<[f64; 4]> = samples
        .iter()
        .flat_map(|s| {
            s.target
                .data()
                .chunks(4)
                .map(|r| [r[0], r[1], r[2], r[3]])
                .collect::<Vec<_>>()
        })
        .collect();
    let target_scaler = TargetScaler::fit(&rows);
    for s in &mut samples {
        s.target
            .data_mut()
            .chunks_mut(4)
            .for_each(|r| target_scaler.apply(r));
        target_scaler.apply(&mut s.last_observed);
    }
    report.samples = samples.len();

    Ok(Dataset {
        config: cfg.clone(),
        spatial_pca,
        temporal_pca,
        target_scaler,
        trajectory_ids: trajectories.iter().map(|t| t.icao24.clone()).collect(),
        samples,
        report,
    })
}

fn put_pca(c: &mut Container, prefix: &str, m: &PcaModel<f64>) {
    let (k, d) = (m.output_dim(), m.input_dim());
    c.put_array(format!("{prefix}.mean"), vec![d], m.mean.clone());
    c.put_array(format!("{prefix}.scale"), vec![d], m.scale.clone());
    c.put_array(
        format!("{prefix}.components"),
        vec![k, d],
        m.components.data().to_vec(),
    );
    c.put_array(
        format!("{prefix}.explained_variance"),
        vec![k],
        m.explained_variance.clone(),
    );
    c.put_array(
        format!("{prefix}.total_variance"),
        vec![1],
        vec![m.total_variance],
    );
}

fn get_pca(c: &Container, prefix: &str) -> Result<PcaModel<f64>> {
    let arr = |s: &str| c.array(&format!("{prefix}.{s}"));
    let comps = arr("components")?;
    Ok(PcaModel {
        mean: arr("mean")?.data.clone(),
        scale: arr("scale")?.data.clone(),
        components: Tensor::new(comps.shape.clone(), comps.data.clone())?,
        explained_variance: arr("explained_variance")?.data.clone(),
        total_variance: arr("total_variance")?.data[0],
    })
}

impl Dataset {
    pub fn spatial_dims(&self) -> usize {
        self.spatial_pca.output_dim()
    }

    pub fn temporal_dims(&self) -> usize {
        self.temporal_pca.output_dim()
    }

    pub fn input_dims(&self) -> usize {
        self.spatial_dims() + self.temporal_dims()
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(DATASET_KIND, DATASET_VERSION);
        let cfg = &self.config;
        c.put("preprocess.period_s", cfg.period_s);
        c.put("preprocess.window", cfg.window.input);
        c.put("preprocess.stride", cfg.window.stride);
        c.put("preprocess.horizon", cfg.window.horizon);
        c.put("preprocess.spatial_variance", cfg.spatial_variance);
        c.put("preprocess.temporal_variance", cfg.temporal_variance);
        c.put("spatial_dims", self.spatial_dims());
        c.put("temporal_dims", self.temporal_dims());
        c.put("target_columns", TARGET_COLUMNS.join(","));
        c.put("report.trajectories_in", self.report.trajectories_in);
        c.put("report.degenerate", self.report.degenerate);
        c.put("report.too_short", self.report.too_short);
        c.put("samples", self.samples.len());
        c.put("trajectory_ids", self.trajectory_ids.join(","));

        put_pca(&mut c, "spatial_pca", &self.spatial_pca);
        put_pca(&mut c, "temporal_pca", &self.temporal_pca);
        c.put_array(
            "target_scaler.mean",
            vec![4],
            self.target_scaler.mean.to_vec(),
        );
        c.put_array(
            "target_scaler.scale",
            vec![4],
            self.target_scaler.scale.to_vec(),
        );

        let n = self.samples.len();
        let (w, h, d) = (cfg.window.input, cfg.window.horizon, self.input_dims());
        let cat = |f: &dyn Fn(&WindowSample<f64>) -> Vec<f64>| {
            self.samples.iter().flat_map(f).collect::<Vec<f64>>()
        };
        c.put_array(
            "samples.input",
            vec![n, w, d],
            cat(&|s| s.input.data().to_vec()),
        );
        c.put_array(
            "samples.target",
            vec![n, h, 4],
            cat(&|s| s.target.data().to_vec()),
        );
        c.put_array(
            "samples.last_observed",
            vec![n, 4],
            cat(&|s| s.last_observed.clone()),
        );
        c.put_array(
            "samples.trajectory",
            vec![n],
            cat(&|s| vec![s.trajectory as f64]),
        );
        c.put_array("samples.start", vec![n], cat(&|s| vec![s.start as f64]));
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let window = WindowSpec {
            input: c.parse("preprocess.window")?,
            stride: c.parse("preprocess.stride")?,
            horizon: c.parse("preprocess.horizon")?,
        };
        let config = PreprocessConfig {
            period_s: c.parse("preprocess.period_s")?,
            window,
            spatial_variance: c.parse("preprocess.spatial_variance")?,
            temporal_variance: c.parse("preprocess.temporal_variance")?,
        };
        config.validate()?;
        let spatial_pca = get_pca(c, "spatial_pca")?;
        let temporal_pca = get_pca(c, "temporal_pca")?;
        let four = |name: &str| -> Result<[f64; 4]> {
            c.array(name)?
                .data
                .as_slice()
                .try_into()
                .map_err(|_| Error::Format(format!("{name} must have 4 entries")))
        };
        let target_scaler = TargetScaler {
            mean: four("target_scaler.mean")?,
            scale: four("target_scaler.scale")?,
        };

        let n: usize = c.parse("samples")?;
        let d = spatial_pca.output_dim() + temporal_pca.output_dim();
        let (w, h) = (window.input, window.horizon);
        let input = c.array("samples.input")?;
        let target = c.array("samples.target")?;
        let last = c.array("samples.last_observed")?;
        let traj = c.array("samples.trajectory")?;
        let start = c.array("samples.start")?;
        if input.shape != [n, w, d]
            || target.shape != [n, h, 4]
            || last.shape != [n, 4]
            || traj.shape != [n]
            || start.shape != [n]
        {
            return Err(Error::Format(
                "sample arrays disagree with the manifest".into(),
            ));
        }
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            samples.push(WindowSample {
                input: Tensor::new(vec![w, d], input.data[i * w * d..(i + 1) * w * d].to_vec())?,
                target: Tensor::new(vec![h, 4], target.data[i * h * 4..(i + 1) * h * 4].to_vec())?,
                last_observed: last.data[i * 4..(i + 1) * 4].to_vec(),
                trajectory: traj.data[i] as usize,
                start: start.data[i] as usize,
            });
        }
        let ids = c.get("trajectory_ids")?;
        Ok(Dataset {
            config,
            spatial_pca,
            temporal_pca,
            target_scaler,
            trajectory_ids: if ids.is_empty() {
                Vec::new()
            } else {
                ids.split(',').map(str::to_string).collect()
            },
            samples,
            report: PreprocessReport {
                trajectories_in: c.parse("report.trajectories_in")?,
                degenerate: c.parse("report.degenerate")?,
                too_short: c.parse("report.too_short")?,
                samples: n,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load_expect(
            path,
            DATASET_KIND,
            DATASET_VERSION,
        )?)
    }
}
