use super::kernels::Matrix;

/// A named trainable tensor with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.raw_dim());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// Adds `g` into the gradient buffer.
    pub fn accumulate(&mut self, g: &Matrix) {
        assert_eq!(g.dim(), self.grad.dim(), "gradient shape for {}", self.name);
        self.grad += g;
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for one [`Param`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Matrix,
    pub v: Matrix,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(param: &Param, config: AdamConfig) -> Self {
        Self {
            m: Matrix::zeros(param.value.raw_dim()),
            v: Matrix::zeros(param.value.raw_dim()),
            step_count: 0,
            config,
        }
    }
}

/// Bias-corrected Adam update; zeroes the gradient afterwards.
pub fn adam_step(param: &mut Param, state: &mut AdamState) {
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    ndarray::Zip::from(&mut param.value)
        .and(&param.grad)
        .and(&mut state.m)
        .and(&mut state.v)
        .for_each(|w, &g, m, v| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        });
    param.zero_grad();
}

/// A group of parameters sharing one Adam configuration.
#[derive(Clone, Debug)]
pub struct Adam {
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Param>, config: AdamConfig) -> Self {
        Self {
            states: params.into_iter().map(|p| AdamState::new(p, config)).collect(),
        }
    }

    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Param>) {
        let mut n = 0;
        for (p, s) in params.into_iter().zip(self.states.iter_mut()) {
            adam_step(p, s);
            n += 1;
        }
        debug_assert_eq!(n, self.states.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_grad_leaves_value() {
        let mut p = Param::new("w", array![[1.0, -2.0]]);
        let mut s = AdamState::new(&p, AdamConfig::with_lr(0.1));
        adam_step(&mut p, &mut s);
        assert_eq!(p.value, array![[1.0, -2.0]]);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Param::new("w", array![[1.0, -2.0]]);
        p.grad = array![[0.3, -7.0]];
        let mut s = AdamState::new(&p, AdamConfig::with_lr(0.01));
        adam_step(&mut p, &mut s);
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        assert!((p.value[[0, 0]] - (1.0 - 0.01)).abs() < 1e-9);
        assert!((p.value[[0, 1]] - (-2.0 + 0.01)).abs() < 1e-9);
        assert_eq!(p.grad, Matrix::zeros((1, 2)));
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut p = Param::new("w", array![[0.5, 0.25, -1.0]]);
            let mut s = AdamState::new(&p, AdamConfig::with_lr(0.05));
            for k in 0..20 {
                p.grad = p.value.mapv(|x| (x * 3.0 + k as f64).sin());
                adam_step(&mut p, &mut s);
            }
            p.value
        };
        assert_eq!(run(), run());
    }
}
