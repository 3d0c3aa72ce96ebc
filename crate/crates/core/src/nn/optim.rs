use super::{Gradients, MlpModel};
use crate::error::{Error, Result};

/// SGD with classical momentum: `v ← μ·v − lr·g`, `p ← p + v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    /// One buffer per parameter slice of the model it was built for.
    pub velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, model: &MlpModel) -> Result<Self> {
        if !(lr >= 0.0) || !(0.0..1.0).contains(&momentum) {
            return Err(Error::config(format!(
                "need lr >= 0 and momentum in [0,1), got lr={lr} momentum={momentum}"
            )));
        }
        Ok(Sgd {
            lr,
            momentum,
            velocity: model
                .param_slices()
                .iter()
                .map(|s| vec![0.0; s.len()])
                .collect(),
        })
    }

    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients) -> Result<()> {
        let gs = grads.slices();
        let mut ps = model.param_slices_mut();
        if gs.len() != ps.len() || ps.len() != self.velocity.len() {
            return Err(Error::shape(format!(
                "optimizer has {} buffers, model {} parameter blocks, gradients {}",
                self.velocity.len(),
                ps.len(),
                gs.len()
            )));
        }
        for ((p, g), v) in ps.iter().zip(&gs).zip(&self.velocity) {
            if p.len() != g.len() || p.len() != v.len() {
                return Err(Error::shape("gradient block does not match its parameter"));
            }
        }
        for ((p, g), v) in ps.iter_mut().zip(gs).zip(&mut self.velocity) {
            for ((pi, gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = self.momentum * *vi - self.lr * gi;
                *pi += *vi;
            }
        }
        Ok(())
    }
}
