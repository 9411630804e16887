//! Named trainable parameters with seeded initialization.

use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ModelError, Result};

/// Parameters keyed by dotted names. Every parameter's initial value depends
/// only on the store seed and its name.
#[derive(Debug, Clone)]
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    seed: u64,
    dtype: DType,
    device: Device,
}

fn name_hash(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

impl ParamStore {
    pub fn new(seed: u64, dtype: DType, device: Device) -> Self {
        Self {
            vars: BTreeMap::new(),
            seed,
            dtype,
            device,
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    fn rng_for(&self, name: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ name_hash(name))
    }

    fn insert(&mut self, name: String, values: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        if self.vars.contains_key(&name) {
            return Err(ModelError::Contract(format!("parameter `{name}` registered twice")));
        }
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let out = var.as_tensor().clone();
        self.vars.insert(name, var);
        Ok(out)
    }

    /// He-normal weights for a layer with `fan_in` inputs.
    pub fn he(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<Tensor> {
        let std = (2.0 / fan_in.max(1) as f64).sqrt();
        self.normal(name, shape, std)
    }

    pub fn normal(&mut self, name: &str, shape: &[usize], std: f64) -> Result<Tensor> {
        let mut rng = self.rng_for(name);
        let n: usize = shape.iter().product();
        let v = (0..n).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); std * z }).collect();
        self.insert(name.to_string(), v, shape)
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> Result<Tensor> {
        let mut rng = self.rng_for(name);
        let n: usize = shape.iter().product();
        let v = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
        self.insert(name.to_string(), v, shape)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        self.insert(name.to_string(), vec![value; n], shape)
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.vars.values().map(|v| v.elem_count()).sum()
    }

    /// Overwrites every parameter from `values`; names and shapes must match.
    pub fn load(&self, values: &BTreeMap<String, Tensor>) -> Result<()> {
        for (name, var) in &self.vars {
            let t = values
                .get(name)
                .ok_or_else(|| ModelError::Contract(format!("missing parameter `{name}`")))?;
            if t.dims() != var.dims() {
                return Err(ModelError::Contract(format!(
                    "parameter `{name}` has shape {:?}, expected {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(self.dtype)?.to_device(&self.device)?)?;
        }
        if let Some(extra) = values.keys().find(|k| !self.vars.contains_key(*k)) {
            return Err(ModelError::Contract(format!("unknown parameter `{extra}`")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initialization_depends_only_on_seed_and_name() {
        let mut a = ParamStore::new(3, DType::F64, Device::Cpu);
        let mut b = ParamStore::new(3, DType::F64, Device::Cpu);
        let wa = a.he("x.w", &[4, 3], 3).unwrap();
        b.he("other", &[2], 1).unwrap();
        let wb = b.he("x.w", &[4, 3], 3).unwrap();
        assert_eq!(wa.to_vec2::<f64>().unwrap(), wb.to_vec2::<f64>().unwrap());
        assert!(a.he("x.w", &[1], 1).is_err());
    }

    #[test]
    fn set_is_visible_through_clones() {
        let mut s = ParamStore::new(0, DType::F32, Device::Cpu);
        let t = s.constant("b", &[2], 1.0).unwrap();
        s.get("b").unwrap().set(&Tensor::new(&[5f32, 6.0], &Device::Cpu).unwrap()).unwrap();
        assert_eq!(t.to_vec1::<f32>().unwrap(), vec![5.0, 6.0]);
    }
}
