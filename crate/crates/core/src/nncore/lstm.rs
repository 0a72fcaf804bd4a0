//! Single-layer LSTM cell without peepholes.
//!
//! Gates are stacked in the order input, forget, cell candidate, output:
//!
//! ```text
//! i, f, o = sigmoid(W x + U h + b)     g = tanh(W x + U h + b)
//! c' = f * c + i * g                   h' = o * tanh(c')
//! ```

use rand::Rng;

use super::{axpy, dot, sigmoid, Parameter, Parameterized};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    /// `4h x x`
    pub w_input: Parameter,
    /// `4h x h`
    pub w_recurrent: Parameter,
    /// `4h`
    pub bias: Parameter,
    hidden: usize,
    input: usize,
}

/// Output of one step plus everything backprop-through-time needs.
#[derive(Debug, Clone)]
pub struct LstmStep {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates, `[i | f | g | o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCellParams {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        LstmCellParams {
            w_input: Parameter::uniform(&[4 * hidden, input], rng),
            w_recurrent: Parameter::uniform(&[4 * hidden, hidden], rng),
            bias: Parameter::uniform(&[4 * hidden], rng),
            hidden,
            input,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCellParams {
            w_input: Parameter::zeros(&[4 * hidden, input]),
            w_recurrent: Parameter::zeros(&[4 * hidden, hidden]),
            bias: Parameter::zeros(&[4 * hidden]),
            hidden,
            input,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<LstmStep> {
        let hs = self.hidden;
        if x.len() != self.input || h_prev.len() != hs || c_prev.len() != hs {
            return Err(Error::dim(format!(
                "lstm step expects x={}, h={hs}, c={hs}; got x={}, h={}, c={}",
                self.input,
                x.len(),
                h_prev.len(),
                c_prev.len()
            )));
        }
        let w = &self.w_input.value;
        let u = &self.w_recurrent.value;
        let b = self.bias.value.data();
        let mut gates: Vec<f64> = (0..4 * hs)
            .map(|r| b[r] + dot(w.row(r), x) + dot(u.row(r), h_prev))
            .collect();
        for (r, z) in gates.iter_mut().enumerate() {
            *z = if (2 * hs..3 * hs).contains(&r) {
                z.tanh()
            } else {
                sigmoid(*z)
            };
        }
        let (i, rest) = gates.split_at(hs);
        let (f, rest) = rest.split_at(hs);
        let (g, o) = rest.split_at(hs);
        let c: Vec<f64> = (0..hs).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..hs).map(|j| o[j] * tanh_c[j]).collect();
        Ok(LstmStep {
            h,
            c,
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            tanh_c,
        })
    }

    /// Backpropagates one step. `dh` and `dc` are the gradients flowing into
    /// this step's outputs; returns `(dx, dh_prev, dc_prev)` and accumulates
    /// parameter gradients.
    pub fn backward(
        &mut self,
        step: &LstmStep,
        dh: &[f64],
        dc: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hs = self.hidden;
        let gates = &step.gates;
        let mut dz = vec![0.0; 4 * hs];
        let mut dc_prev = vec![0.0; hs];
        for j in 0..hs {
            let (i, f, g, o) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
            let tc = step.tanh_c[j];
            let d_o = dh[j] * tc;
            let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
            dz[j] = dct * g * i * (1.0 - i);
            dz[hs + j] = dct * step.c_prev[j] * f * (1.0 - f);
            dz[2 * hs + j] = dct * i * (1.0 - g * g);
            dz[3 * hs + j] = d_o * o * (1.0 - o);
            dc_prev[j] = dct * f;
        }
        let mut dx = vec![0.0; self.input];
        let mut dh_prev = vec![0.0; hs];
        let bg = self.bias.grad.data_mut();
        for (r, &d) in dz.iter().enumerate() {
            bg[r] += d;
        }
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            axpy(d, &step.x, self.w_input.grad.row_mut(r));
            axpy(d, &step.h_prev, self.w_recurrent.grad.row_mut(r));
            axpy(d, self.w_input.value.row(r), &mut dx);
            axpy(d, self.w_recurrent.value.row(r), &mut dh_prev);
        }
        (dx, dh_prev, dc_prev)
    }
}

impl Parameterized for LstmCellParams {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        vec![
            ("w_input".into(), &self.w_input),
            ("w_recurrent".into(), &self.w_recurrent),
            ("bias".into(), &self.bias),
        ]
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Parameter)> {
        vec![
            ("w_input".into(), &mut self.w_input),
            ("w_recurrent".into(), &mut self.w_recurrent),
            ("bias".into(), &mut self.bias),
        ]
    }
}
