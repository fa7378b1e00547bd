use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Window geometry: `input` steps in, `horizon` steps out, advancing by
/// `stride` steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    pub input: usize,
    pub stride: usize,
    pub horizon: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            input: 100,
            stride: 5,
            horizon: 5,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.stride == 0 || self.horizon == 0 {
            return Err(Error::Config(format!(
                "window sizes must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Number of windows over `n` steps.
    pub fn count(&self, n: usize) -> usize {
        let span = self.input + self.horizon;
        if n < span {
            0
        } else {
            (n - span) / self.stride + 1
        }
    }
}

/// One (input window, horizon target) training pair.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample<T> {
    /// `[input, d_in]`
    pub input: Tensor<T>,
    /// `[horizon, 4]`
    pub target: Tensor<T>,
    /// Target-space row of the last input step.
    pub last_observed: Vec<T>,
    pub trajectory: usize,
    pub start: usize,
}

/// Cuts aligned `features` (`[n, d_in]`) and `targets` (`[n, t]`) into
/// windows starting at `0, stride, 2 * stride, ...` with
/// `start + input + horizon <= n`. Trajectory ids are left at 0.
pub fn sliding_windows<T: Scalar>(
    features: &Tensor<T>,
    targets: &Tensor<T>,
    spec: WindowSpec,
) -> Result<Vec<WindowSample<T>>> {
    spec.validate()?;
    if features.rank() != 2 || targets.rank() != 2 || features.rows() != targets.rows() {
        return Err(Error::Shape(format!(
            "features {:?} and targets {:?} are not row-aligned matrices",
            features.shape(),
            targets.shape()
        )));
    }
    let n = features.rows();
    let (d, t) = (features.cols(), targets.cols());
    let mut out = Vec::with_capacity(spec.count(n));
    let mut start = 0;
    while start + spec.input + spec.horizon <= n {
        let rows = |m: &Tensor<T>, from: usize, len: usize, width: usize| {
            Tensor::new(
                vec![len, width],
                m.data()[from * width..(from + len) * width].to_vec(),
            )
        };
        out.push(WindowSample {
            input: rows(features, start, spec.input, d)?,
            target: rows(targets, start + spec.input, spec.horizon, t)?,
            last_observed: targets.row(start + spec.input - 1).to_vec(),
            trajectory: 0,
            start,
        });
        start += spec.stride;
    }
    Ok(out)
}
