use std::path::Path;

use super::{build_model, Cg3dConfig, Cg3dModel, ModelKind};
use crate::container::Container;
use crate::error::{Error, Result};
use crate::nn::Parameterized;
use crate::scalar::Scalar;

const KIND: &str = "CHECKPOINT";
const VERSION: u32 = 1;

impl<T: Scalar> Cg3dModel<T> {
    /// Config echo in the manifest, one array per named parameter.
    pub fn to_container(&self) -> Container {
        let mut c = Container::new(KIND, VERSION);
        c.put("kind", self.kind.key());
        c.put("d_spatial", self.d_spatial);
        c.put("d_temporal", self.d_temporal);
        for (k, v) in self.config.to_pairs() {
            c.put(k, v);
        }
        for (name, t) in self.named_parameters() {
            c.put_array(
                name,
                t.shape().to_vec(),
                t.data().iter().map(|v| v.to_f64_lossy()).collect(),
            );
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let mut config = Cg3dConfig::default();
        for (k, v) in c.meta.iter().filter(|(k, _)| k.starts_with("model.")) {
            config.set(k, v)?;
        }
        let kind: ModelKind = c.get("kind")?.parse()?;
        let mut model: Cg3dModel<T> = build_model(
            &config,
            kind,
            c.parse("d_spatial")?,
            c.parse("d_temporal")?,
            0,
        )?;
        let names: Vec<String> = model
            .named_parameters()
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        if names.len() != c.arrays.len() {
            return Err(Error::Format(format!(
                "checkpoint holds {} arrays, model has {} parameters",
                c.arrays.len(),
                names.len()
            )));
        }
        for (name, param) in names.iter().zip(model.parameters_mut()) {
            let arr = c.array(name)?;
            if arr.shape != param.shape() {
                return Err(Error::Format(format!(
                    "parameter {name}: checkpoint shape {:?}, model shape {:?}",
                    arr.shape,
                    param.shape()
                )));
            }
            for (dst, &src) in param.data_mut().iter_mut().zip(&arr.data) {
                *dst = T::lit(src);
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load_expect(path, KIND, VERSION)?)
    }
}
