use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Named parameters with same-shape gradient slots.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelParams {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
    pub values: Vec<Tensor>,
    pub grads: Vec<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct StoredTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl ModelParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<usize> {
        if self.index.contains_key(name) {
            return Err(Error::State(format!("duplicate parameter {name}")));
        }
        let id = self.values.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        self.grads.push(Tensor::zeros(&value.shape));
        self.values.push(value);
        Ok(id)
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero bias.
    pub fn insert_linear(&mut self, rng: &mut impl Rng, name: &str, fan_in: usize, fan_out: usize) -> Result<()> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
        self.insert(&format!("{name}.w"), Tensor::matrix(fan_in, fan_out, w)?)?;
        self.insert(&format!("{name}.b"), Tensor::zeros(&[1, fan_out]))?;
        Ok(())
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::State(format!("unknown parameter {name}")))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.values[self.id(name)?])
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        let id = self.id(name)?;
        Ok(&mut self.values[id])
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.grads[self.id(name)?])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.data.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn scale_grads(&mut self, s: f64) {
        for g in &mut self.grads {
            g.data.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| &g.data)
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let map: BTreeMap<&str, StoredTensor> = self
            .names
            .iter()
            .zip(&self.values)
            .map(|(n, t)| {
                (
                    n.as_str(),
                    StoredTensor {
                        shape: t.shape.clone(),
                        data: t.data.clone(),
                    },
                )
            })
            .collect();
        serde_json::to_value(map).expect("parameters serialize")
    }

    /// Loads values into an existing layout; names and shapes must match.
    pub fn load_json_value(&mut self, v: serde_json::Value) -> Result<()> {
        let map: BTreeMap<String, StoredTensor> = serde_json::from_value(v)?;
        if map.len() != self.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} parameters, model has {}",
                map.len(),
                self.len()
            )));
        }
        for (name, stored) in map {
            let id = self.id(&name).map_err(|_| Error::Format(format!("unexpected parameter {name}")))?;
            if stored.shape != self.values[id].shape {
                return Err(Error::Format(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    stored.shape, self.values[id].shape
                )));
            }
            let t = Tensor::new(stored.shape, stored.data)?;
            if !t.is_finite() {
                return Err(Error::Format(format!("parameter {name} is not finite")));
            }
            self.values[id] = t;
        }
        Ok(())
    }
}
