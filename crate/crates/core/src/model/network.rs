use rand::{Rng, SeedableRng};

use super::config::{Cg3dConfig, ModelKind, OUTPUT_DIM};
use crate::error::{Error, Result};
use crate::nn::{
    Conv2dLayer, Conv3dLayer, ConvVars, DenseLayer, DenseVars, DropoutSpec, GruCell, GruVars, Mode,
    Parameterized,
};
use crate::scalar::Scalar;
use crate::seed::{rng_for, stream};
use crate::tensor::{Activation, Tape, Tensor, Var};

/// Feature-map shapes through both branches for given input widths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapePlan {
    /// `[channels, height, width]` after each CNN stage.
    pub cnn: Vec<[usize; 3]>,
    /// Kernel actually used by each CNN stage after width clamping.
    pub cnn_kernels: Vec<(usize, usize)>,
    /// `[channels, depth, height, width]` after each C3D stage (post-pool).
    pub c3d: Vec<[usize; 4]>,
    pub cnn_gru_features: usize,
    pub c3d_features: usize,
}

impl ShapePlan {
    pub fn head_inputs(&self) -> usize {
        self.cnn_gru_features + self.c3d_features
    }
}

/// Walks the configured stages over `[window, d_spatial]` and the
/// C3D cube. Fails with a configuration error naming the first stage
/// whose kernel or pooling does not fit.
pub fn plan_shapes(
    cfg: &Cg3dConfig,
    kind: ModelKind,
    d_spatial: usize,
    d_temporal: usize,
) -> Result<ShapePlan> {
    cfg.validate()?;
    if d_spatial == 0 || d_temporal == 0 {
        return Err(Error::Config(format!(
            "model needs spatial and temporal features, got {d_spatial} and {d_temporal}"
        )));
    }
    let mut plan = ShapePlan {
        cnn: Vec::new(),
        cnn_kernels: Vec::new(),
        c3d: Vec::new(),
        cnn_gru_features: 0,
        c3d_features: 0,
    };
    if kind.has_cnn_gru() {
        let (mut h, mut w) = (cfg.window, d_spatial);
        let mut c = 1;
        for (i, st) in cfg.cnn.iter().enumerate() {
            let (p, q) = st.kernel;
            if p > h {
                return Err(Error::Config(format!(
                    "cnn stage {}: kernel height {p} exceeds input height {h}",
                    i + 1
                )));
            }
            let q = q.min(w);
            h = h - p + 1;
            w = w - q + 1;
            c = st.out_channels;
            plan.cnn.push([c, h, w]);
            plan.cnn_kernels.push((p, q));
        }
        plan.cnn_gru_features = c * h * w + cfg.gru_hidden;
    }
    if kind.has_c3d() {
        let (d, h, w) = cfg.c3d_input;
        let width = d_spatial + d_temporal;
        if w < width {
            return Err(Error::Config(format!(
                "model.c3d_input width {w} is narrower than the {width} input features"
            )));
        }
        let mut dims = [1, d, h, w];
        for (i, st) in cfg.c3d.iter().enumerate() {
            let (r, p, q) = st.kernel;
            if r > dims[1] || p > dims[2] || q > dims[3] {
                return Err(Error::Config(format!(
                    "c3d stage {}: kernel {r}x{p}x{q} exceeds input {}x{}x{}",
                    i + 1,
                    dims[1],
                    dims[2],
                    dims[3]
                )));
            }
            dims = [
                st.out_channels,
                dims[1] - r + 1,
                dims[2] - p + 1,
                dims[3] - q + 1,
            ];
            if st.pool {
                if dims[1..].iter().any(|&v| v < 2) {
                    return Err(Error::Config(format!(
                        "c3d stage {}: pooling needs every dim >= 2, got {}x{}x{}",
                        i + 1,
                        dims[1],
                        dims[2],
                        dims[3]
                    )));
                }
                dims = [dims[0], dims[1] / 2, dims[2] / 2, dims[3] / 2];
            }
            plan.c3d.push(dims);
        }
        plan.c3d_features = dims.iter().product();
    }
    Ok(plan)
}

/// CG3D network or one of its single-branch baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct Cg3dModel<T> {
    pub config: Cg3dConfig,
    pub kind: ModelKind,
    pub d_spatial: usize,
    pub d_temporal: usize,
    pub cnn: Vec<Conv2dLayer<T>>,
    pub gru: Option<GruCell<T>>,
    pub c3d: Vec<Conv3dLayer<T>>,
    pub head: DenseLayer<T>,
}

/// Model parameters bound onto one tape.
#[derive(Clone, Debug)]
pub struct BoundModel {
    cnn: Vec<ConvVars>,
    gru: Option<GruVars>,
    c3d: Vec<ConvVars>,
    head: DenseVars,
}

impl BoundModel {
    /// Handles in the same order as [`Cg3dModel::named_parameters`].
    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self.cnn.iter().flat_map(ConvVars::vars).collect();
        if let Some(g) = &self.gru {
            out.extend(g.vars());
        }
        out.extend(self.c3d.iter().flat_map(ConvVars::vars));
        out.extend(self.head.vars());
        out
    }
}

/// Initializes every layer from the seeded init stream, in the fixed order
/// CNN stages, GRU, C3D stages, head.
pub fn build_model<T: Scalar>(
    cfg: &Cg3dConfig,
    kind: ModelKind,
    d_spatial: usize,
    d_temporal: usize,
    seed: u64,
) -> Result<Cg3dModel<T>> {
    let plan = plan_shapes(cfg, kind, d_spatial, d_temporal)?;
    let mut rng = rng_for(seed, stream::INIT, 0);
    let mut cnn = Vec::new();
    let mut gru = None;
    if kind.has_cnn_gru() {
        let mut in_ch = 1;
        for (st, &kernel) in cfg.cnn.iter().zip(&plan.cnn_kernels) {
            cnn.push(Conv2dLayer::init(
                in_ch,
                st.out_channels,
                kernel,
                st.activation,
                &mut rng,
            ));
            in_ch = st.out_channels;
        }
        gru = Some(GruCell::init(d_temporal, cfg.gru_hidden, false, &mut rng));
    }
    let mut c3d = Vec::new();
    if kind.has_c3d() {
        let mut in_ch = 1;
        for st in &cfg.c3d {
            c3d.push(Conv3dLayer::init(
                in_ch,
                st.out_channels,
                st.kernel,
                st.activation,
                &mut rng,
            ));
            in_ch = st.out_channels;
        }
    }
    let head = DenseLayer::init(
        plan.head_inputs(),
        cfg.horizon * OUTPUT_DIM,
        Activation::Linear,
        &mut rng,
    );
    Ok(Cg3dModel {
        config: cfg.clone(),
        kind,
        d_spatial,
        d_temporal,
        cnn,
        gru,
        c3d,
        head,
    })
}

fn columns<T: Scalar>(input: &Tensor<T>, from: usize, to: usize) -> Tensor<T> {
    let data = (0..input.rows())
        .flat_map(|i| input.row(i)[from..to].iter().copied())
        .collect();
    Tensor::new(vec![input.rows(), to - from], data).expect("non-empty column block")
}

impl<T: Scalar> Cg3dModel<T> {
    pub fn input_dims(&self) -> usize {
        self.d_spatial + self.d_temporal
    }

    pub fn plan(&self) -> ShapePlan {
        plan_shapes(&self.config, self.kind, self.d_spatial, self.d_temporal)
            .expect("model was built from this plan")
    }

    /// `(name, tensor)` for every parameter, in binding order.
    pub fn named_parameters(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, l) in self.cnn.iter().enumerate() {
            out.extend(
                l.parameters()
                    .into_iter()
                    .map(|(n, t)| (format!("cnn.{i}.{n}"), t)),
            );
        }
        if let Some(g) = &self.gru {
            out.extend(
                g.parameters()
                    .into_iter()
                    .map(|(n, t)| (format!("gru.{n}"), t)),
            );
        }
        for (i, l) in self.c3d.iter().enumerate() {
            out.extend(
                l.parameters()
                    .into_iter()
                    .map(|(n, t)| (format!("c3d.{i}.{n}"), t)),
            );
        }
        out.extend(
            self.head
                .parameters()
                .into_iter()
                .map(|(n, t)| (format!("head.{n}"), t)),
        );
        out
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> BoundModel {
        BoundModel {
            cnn: self.cnn.iter().map(|l| l.bind(tape)).collect(),
            gru: self.gru.as_ref().map(|g| g.bind(tape)),
            c3d: self.c3d.iter().map(|l| l.bind(tape)).collect(),
            head: self.head.bind(tape),
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        if input.shape() != [self.config.window, self.input_dims()] {
            return Err(Error::Shape(format!(
                "model expects a [{}, {}] window, got {:?}",
                self.config.window,
                self.input_dims(),
                input.shape()
            )));
        }
        Ok(())
    }

    /// Flattened CNN output followed by the last GRU state.
    pub fn cnn_gru_features(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundModel,
        input: &Tensor<T>,
    ) -> Result<Var> {
        self.check_input(input)?;
        let gru = bound.gru.as_ref().ok_or_else(|| {
            Error::Contract(format!("{} model has no CNN-GRU branch", self.kind.label()))
        })?;
        let (w, ds) = (self.config.window, self.d_spatial);
        let image = columns(input, 0, ds).reshaped(vec![1, w, ds])?;
        let mut x = tape.constant(image);
        for layer in &bound.cnn {
            x = layer.forward(tape, x)?;
        }
        let conv = tape.flatten(x)?;
        let xs = tape.constant(columns(input, ds, ds + self.d_temporal));
        let h0 = tape.constant(Tensor::zeros(vec![self.config.gru_hidden]));
        let seq = gru.sequence(tape, xs, h0)?;
        tape.concat(conv, seq.last, 0)
    }

    /// Input laid out as `frames` consecutive blocks of `rows` timesteps,
    /// zero-padded on the feature axis to the configured cube width.
    pub fn c3d_cube(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let (d, h, w) = self.config.c3d_input;
        let mut data = vec![T::zero(); d * h * w];
        for t in 0..self.config.window {
            data[t * w..t * w + self.input_dims()].copy_from_slice(input.row(t));
        }
        Tensor::new(vec![1, d, h, w], data)
    }

    pub fn c3d_features(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundModel,
        input: &Tensor<T>,
    ) -> Result<Var> {
        if !self.kind.has_c3d() {
            return Err(Error::Contract(format!(
                "{} model has no C3D branch",
                self.kind.label()
            )));
        }
        let mut x = tape.constant(self.c3d_cube(input)?);
        for (layer, st) in bound.c3d.iter().zip(&self.config.c3d) {
            x = layer.forward(tape, x)?;
            if st.pool {
                x = tape.max_pool3d(x)?;
            }
        }
        tape.flatten(x)
    }

    /// Prediction `[horizon, 4]` on `tape`. Dropout masks are drawn from
    /// `rng` in the order CNN-GRU branch, C3D branch, head input.
    pub fn forward_on<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundModel,
        input: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        let drop = DropoutSpec::new(T::lit(self.config.dropout_rate), mode)?;
        let mut parts = Vec::with_capacity(2);
        if self.kind.has_cnn_gru() {
            let f = self.cnn_gru_features(tape, bound, input)?;
            parts.push(drop.forward(tape, f, rng)?);
        }
        if self.kind.has_c3d() {
            let f = self.c3d_features(tape, bound, input)?;
            parts.push(drop.forward(tape, f, rng)?);
        }
        let mut features = parts[0];
        if let Some(&c) = parts.get(1) {
            features = tape.concat(features, c, 0)?;
        }
        let features = drop.forward(tape, features, rng)?;
        let out = bound.head.forward(tape, features)?;
        tape.reshape(out, &[self.config.horizon, super::OUTPUT_DIM])
    }

    /// Stand-alone forward pass on a fresh tape.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let out = self.forward_on(&mut tape, &bound, input, mode, rng)?;
        Ok(tape.value(out).clone())
    }

    /// Deterministic forward pass with dropout off.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward(
            input,
            Mode::Eval,
            &mut rand_chacha::ChaCha8Rng::seed_from_u64(0),
        )
    }
}

impl<T: Scalar> Parameterized<T> for Cg3dModel<T> {
    fn parameters(&self) -> Vec<(&'static str, &Tensor<T>)> {
        let mut out = Vec::new();
        for l in &self.cnn {
            out.extend(l.parameters());
        }
        if let Some(g) = &self.gru {
            out.extend(g.parameters());
        }
        for l in &self.c3d {
            out.extend(l.parameters());
        }
        out.extend(self.head.parameters());
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for l in &mut self.cnn {
            out.extend(l.parameters_mut());
        }
        if let Some(g) = &mut self.gru {
            out.extend(g.parameters_mut());
        }
        for l in &mut self.c3d {
            out.extend(l.parameters_mut());
        }
        out.extend(self.head.parameters_mut());
        out
    }
}
