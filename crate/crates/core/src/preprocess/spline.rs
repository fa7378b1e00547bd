use crate::adsb::{hour_of, AdsbRecord, Trajectory};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Interpolating cubic spline with zero second derivative at both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct NaturalCubicSpline<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    second: Vec<T>,
}

impl<T: Scalar> NaturalCubicSpline<T> {
    /// Fits through `(xs[i], ys[i])`; `xs` must be strictly increasing.
    pub fn fit(xs: &[T], ys: &[T]) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() {
            return Err(Error::Shape(format!("{n} knots but {} values", ys.len())));
        }
        if n < 2 {
            return Err(Error::Degenerate(format!("spline needs 2 knots, got {n}")));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Contract(
                "spline knots must be strictly increasing".into(),
            ));
        }
        let mut second = vec![T::zero(); n];
        if n > 2 {
            // Tridiagonal system for the interior second derivatives (Thomas).
            let m = n - 2;
            let h = |i: usize| xs[i + 1] - xs[i];
            let six = T::lit(6.0);
            let two = T::lit(2.0);
            let mut diag = Vec::with_capacity(m);
            let mut upper = Vec::with_capacity(m);
            let mut rhs = Vec::with_capacity(m);
            for i in 1..=m {
                diag.push(two * (h(i - 1) + h(i)));
                upper.push(h(i));
                rhs.push(six * ((ys[i + 1] - ys[i]) / h(i) - (ys[i] - ys[i - 1]) / h(i - 1)));
            }
            for j in 1..m {
                let w = h(j) / diag[j - 1];
                diag[j] = diag[j] - w * upper[j - 1];
                rhs[j] = rhs[j] - w * rhs[j - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for j in (0..m - 1).rev() {
                second[j + 1] = (rhs[j] - upper[j] * second[j + 2]) / diag[j];
            }
        }
        Ok(NaturalCubicSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            second,
        })
    }

    pub fn domain(&self) -> (T, T) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Value at `x`, which must lie inside the knot range.
    pub fn eval(&self, x: T) -> Result<T> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::Contract(format!(
                "spline query {x} outside [{lo}, {hi}]"
            )));
        }
        let n = self.xs.len();
        let i = self.xs.partition_point(|&k| k <= x).clamp(1, n - 1) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let curve =
            ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / T::lit(6.0);
        Ok(a * self.ys[i] + b * self.ys[i + 1] + curve)
    }
}

/// Minimum distinct timestamps for resampling.
pub const MIN_KNOTS: usize = 4;

fn unwrap_degrees(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        if i == 0 {
            out.push(v);
        } else {
            let step = (v - values[i - 1] + 180.0).rem_euclid(360.0) - 180.0;
            out.push(out[i - 1] + step);
        }
    }
    out
}

/// Resamples every continuous feature onto `t0, t0 + period, ... <= t_end`
/// with natural cubic splines over the original timestamps. Heading is
/// interpolated on the unwrapped angle and wrapped back into `[0, 360)`.
///
/// The input must be strictly increasing in time (see `clean`).
pub fn spline_resample(traj: &Trajectory, period_s: u32) -> Result<Trajectory> {
    if period_s == 0 {
        return Err(Error::Config("resample period must be positive".into()));
    }
    let recs = &traj.records;
    if recs.len() < MIN_KNOTS {
        return Err(Error::Degenerate(format!(
            "{} has {} knots, resampling needs {MIN_KNOTS}",
            traj.icao24,
            recs.len()
        )));
    }
    let t0 = recs[0].timestamp;
    let xs: Vec<f64> = recs.iter().map(|r| (r.timestamp - t0) as f64).collect();
    let fit = |f: &dyn Fn(&AdsbRecord) -> f64| {
        let ys: Vec<f64> = recs.iter().map(f).collect();
        NaturalCubicSpline::fit(&xs, &ys)
    };
    let lat = fit(&|r| r.lat)?;
    let lon = fit(&|r| r.lon)?;
    let alt = fit(&|r| r.altitude)?;
    let vel = fit(&|r| r.velocity)?;
    let vrate = fit(&|r| r.vertical_rate)?;
    let headings: Vec<f64> = recs.iter().map(|r| r.heading).collect();
    let heading = NaturalCubicSpline::fit(&xs, &unwrap_degrees(&headings))?;

    let span = recs[recs.len() - 1].timestamp - t0;
    let steps = span / period_s as i64;
    let mut out = Vec::with_capacity(steps as usize + 1);
    for k in 0..=steps {
        let dt = k * period_s as i64;
        let x = dt as f64;
        let timestamp = t0 + dt;
        out.push(AdsbRecord {
            timestamp,
            icao24: traj.icao24.clone(),
            callsign: traj.callsign.clone(),
            lat: lat.eval(x)?.clamp(-90.0, 90.0),
            lon: lon.eval(x)?.clamp(-180.0, 180.0),
            altitude: alt.eval(x)?,
            velocity: vel.eval(x)?.max(0.0),
            heading: heading.eval(x)?.rem_euclid(360.0) % 360.0,
            vertical_rate: vrate.eval(x)?,
            hour: hour_of(timestamp),
        });
    }
    Ok(Trajectory {
        icao24: traj.icao24.clone(),
        callsign: traj.callsign.clone(),
        records: out,
    })
}
