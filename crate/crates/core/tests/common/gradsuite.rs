//! Finite-difference checks over every tape op and a tiny CG3D model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skytrace::gradcheck::{check_gradients, GradCheck};
use skytrace::model::{build_model, C3dStage, Cg3dConfig, CnnStage, ModelKind};
use skytrace::nn::{Mode, Parameterized};
use skytrace::preprocess::WindowSample;
use skytrace::train::sample_gradient;
use skytrace::{Activation, Cg3dModel, GruCell, Result, Tape, Tensor, Var};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-3;
pub const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// Values bounded away from zero, for kinked activations.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    random(rng, shape).map(|v| if v >= 0.0 { v + 0.1 } else { v - 0.1 })
}

type OpFn = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

pub fn op_checks(seed: u64) -> Result<Vec<(&'static str, GradCheck)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let cell = GruCell::init(3, 4, true, r);
    let mask: Vec<f64> = (0..6)
        .map(|i| if i % 3 == 0 { 0.0 } else { 1.25 })
        .collect();

    let cases: Vec<(&'static str, Vec<Tensor>, OpFn)> = vec![
        (
            "matmul",
            vec![random(r, &[3, 4]), random(r, &[4, 2])],
            Box::new(|t, v| t.matmul(v[0], v[1])),
        ),
        (
            "matvec",
            vec![random(r, &[3, 4]), random(r, &[4])],
            Box::new(|t, v| t.matmul(v[0], v[1])),
        ),
        (
            "add",
            vec![random(r, &[2, 3]), random(r, &[2, 3])],
            Box::new(|t, v| t.add(v[0], v[1])),
        ),
        (
            "add_row_bias",
            vec![random(r, &[3, 4]), random(r, &[3])],
            Box::new(|t, v| t.add(v[0], v[1])),
        ),
        (
            "sub",
            vec![random(r, &[5]), random(r, &[5])],
            Box::new(|t, v| t.sub(v[0], v[1])),
        ),
        (
            "hadamard",
            vec![random(r, &[2, 3]), random(r, &[2, 3])],
            Box::new(|t, v| t.hadamard(v[0], v[1])),
        ),
        (
            "scale_shift",
            vec![random(r, &[4])],
            Box::new(|t, v| Ok(t.scale_shift(v[0], 1.7, -0.3))),
        ),
        (
            "one_minus",
            vec![random(r, &[4])],
            Box::new(|t, v| Ok(t.one_minus(v[0]))),
        ),
        (
            "sigmoid",
            vec![random(r, &[6])],
            Box::new(|t, v| Ok(t.activate(v[0], Activation::Sigmoid))),
        ),
        (
            "tanh",
            vec![random(r, &[6])],
            Box::new(|t, v| Ok(t.activate(v[0], Activation::Tanh))),
        ),
        (
            "relu",
            vec![away_from_zero(r, &[6])],
            Box::new(|t, v| Ok(t.activate(v[0], Activation::Relu))),
        ),
        (
            "linear",
            vec![random(r, &[3])],
            Box::new(|t, v| Ok(t.activate(v[0], Activation::Linear))),
        ),
        (
            "conv2d",
            vec![
                random(r, &[2, 5, 4]),
                random(r, &[3, 2, 2, 3]),
                random(r, &[3]),
            ],
            Box::new(|t, v| t.conv2d(v[0], v[1], v[2])),
        ),
        (
            "conv3d",
            vec![
                random(r, &[2, 4, 4, 3]),
                random(r, &[2, 2, 2, 2, 2]),
                random(r, &[2]),
            ],
            Box::new(|t, v| t.conv3d(v[0], v[1], v[2])),
        ),
        (
            "max_pool3d",
            vec![random(r, &[2, 4, 4, 5])],
            Box::new(|t, v| t.max_pool3d(v[0])),
        ),
        (
            "concat_axis0",
            vec![random(r, &[3]), random(r, &[2])],
            Box::new(|t, v| t.concat(v[0], v[1], 0)),
        ),
        (
            "concat_axis1",
            vec![random(r, &[2, 3]), random(r, &[2, 2])],
            Box::new(|t, v| t.concat(v[0], v[1], 1)),
        ),
        (
            "reshape",
            vec![random(r, &[2, 3]), random(r, &[3, 2])],
            Box::new(|t, v| {
                let a = t.reshape(v[0], &[3, 2])?;
                t.hadamard(a, v[1])
            }),
        ),
        (
            "flatten",
            vec![random(r, &[2, 2, 2])],
            Box::new(|t, v| {
                let f = t.flatten(v[0])?;
                Ok(t.activate(f, Activation::Tanh))
            }),
        ),
        (
            "row",
            vec![random(r, &[3, 4])],
            Box::new(|t, v| t.row(v[0], 1)),
        ),
        (
            "stack",
            vec![random(r, &[3]), random(r, &[3])],
            Box::new(|t, v| {
                let s = t.stack(&[v[0], v[1], v[0]])?;
                Ok(t.activate(s, Activation::Sigmoid))
            }),
        ),
        (
            "mask",
            vec![random(r, &[2, 3])],
            Box::new(move |t, v| t.mask(v[0], mask.clone())),
        ),
        (
            "sum",
            vec![random(r, &[2, 3])],
            Box::new(|t, v| Ok(t.sum(v[0]))),
        ),
        (
            "mse",
            vec![random(r, &[2, 3]), random(r, &[2, 3])],
            Box::new(|t, v| t.mse(v[0], v[1])),
        ),
        (
            "gru_step",
            vec![random(r, &[3]), random(r, &[4])],
            Box::new(move |t, v| {
                let g = cell.bind(t);
                Ok(g.step(t, v[0], v[1])?.h)
            }),
        ),
    ];

    cases
        .into_iter()
        .map(|(name, inputs, f)| Ok((name, check_gradients(&inputs, &*f, STEP, seed)?)))
        .collect()
}

pub fn tiny_config() -> Cg3dConfig {
    Cg3dConfig {
        cnn: vec![CnnStage {
            out_channels: 2,
            kernel: (2, 2),
            activation: Activation::Tanh,
        }],
        gru_hidden: 3,
        c3d: vec![C3dStage {
            out_channels: 2,
            kernel: (1, 1, 2),
            activation: Activation::Tanh,
            pool: true,
        }],
        c3d_input: (2, 2, 4),
        dropout_rate: 0.0,
        window: 4,
        horizon: 1,
    }
}

/// Max relative error of the MSE-loss parameter gradient of a tiny CG3D
/// model against central differences.
pub fn model_check(seed: u64) -> Result<GradCheck> {
    let mut model: Cg3dModel = build_model(&tiny_config(), ModelKind::Cg3d, 2, 2, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let sample = WindowSample {
        input: random(&mut rng, &[4, 4]),
        target: random(&mut rng, &[1, 4]),
        last_observed: vec![0.0; 4],
        trajectory: 0,
        start: 0,
    };
    let (_, analytic) = sample_gradient(&model, &sample, Mode::Eval, 0)?;
    let loss = |m: &Cg3dModel| -> Result<f64> {
        let p = m.predict(&sample.input)?;
        let n = p.len() as f64;
        Ok(p.data()
            .iter()
            .zip(sample.target.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / n)
    };

    let mut report = GradCheck {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    let sizes: Vec<usize> = model.parameters().iter().map(|(_, t)| t.len()).collect();
    for (i, &len) in sizes.iter().enumerate() {
        for j in 0..len {
            let x0 = model.parameters_mut()[i].data()[j];
            model.parameters_mut()[i].data_mut()[j] = x0 + STEP;
            let up = loss(&model)?;
            model.parameters_mut()[i].data_mut()[j] = x0 - STEP;
            let down = loss(&model)?;
            model.parameters_mut()[i].data_mut()[j] = x0;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[i][j];
            let err = if a.abs() < 1e-8 && numeric.abs() < 1e-8 {
                0.0
            } else {
                (a - numeric).abs() / a.abs().max(numeric.abs())
            };
            report.checked += 1;
            if err >= report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((i, j, a, numeric));
            }
        }
    }
    Ok(report)
}
