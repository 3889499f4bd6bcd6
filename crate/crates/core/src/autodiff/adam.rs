//! Adam optimizer with dense and lazy row-sparse update paths.

use crate::error::{Error, Result};

/// Per-parameter Adam state. The step counter is global to the parameter;
/// sparse updates advance it once per call while touching only rows whose
/// gradient is nonzero, so untouched rows keep stale moments until they next
/// participate.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(numel: usize, lr: f64) -> Self {
        AdamState { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; numel], v: vec![0.0; numel] }
    }

    /// Defaults used by the main training stage.
    pub fn with_defaults(numel: usize) -> Self {
        AdamState::new(numel, 0.001)
    }

    fn check_finite(&self, grad: &[f64], param_name: &str) -> Result<()> {
        for &g in grad {
            if g.is_nan() {
                return Err(Error::Numeric { what: "NaN gradient", param: param_name.to_string() });
            }
            if g.is_infinite() {
                return Err(Error::Numeric { what: "infinite gradient", param: param_name.to_string() });
            }
        }
        Ok(())
    }

    fn update_range(&mut self, param: &mut [f64], grad: &[f64], start: usize, end: usize) {
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in start..end {
            let g = grad[i - start];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            param[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    /// Dense step over the whole parameter.
    pub fn step(&mut self, param_name: &str, param: &mut [f64], grad: &[f64]) -> Result<()> {
        if param.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Precondition {
                op: "adam step",
                msg: format!(
                    "{param_name}: state holds {} elements, param {} / grad {}",
                    self.m.len(),
                    param.len(),
                    grad.len()
                ),
            });
        }
        self.check_finite(grad, param_name)?;
        self.t += 1;
        self.update_range(param, grad, 0, grad.len());
        Ok(())
    }

    /// Sparse step: `rows` pairs a row index with that row's gradient. The
    /// step counter advances once; rows whose gradient is entirely zero are
    /// skipped, leaving their moments and values untouched.
    pub fn step_rows(
        &mut self,
        param_name: &str,
        param: &mut [f64],
        row_len: usize,
        rows: &[(usize, Vec<f64>)],
    ) -> Result<()> {
        if param.len() != self.m.len() {
            return Err(Error::Precondition {
                op: "adam step_rows",
                msg: format!("{param_name}: state holds {} elements, param {}", self.m.len(), param.len()),
            });
        }
        self.t += 1;
        for (row, grad) in rows {
            if grad.len() != row_len {
                return Err(Error::Precondition {
                    op: "adam step_rows",
                    msg: format!("{param_name}: row gradient has {} elements, expected {row_len}", grad.len()),
                });
            }
            let start = row * row_len;
            if start + row_len > param.len() {
                return Err(Error::Precondition {
                    op: "adam step_rows",
                    msg: format!("{param_name}: row {row} out of range"),
                });
            }
            self.check_finite(grad, param_name)?;
            if grad.iter().all(|&g| g == 0.0) {
                continue;
            }
            self.update_range(param, grad, start, start + row_len);
        }
        Ok(())
    }
}
