use rand::Rng;

/// Network dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyConfig {
    pub obs_dim: usize,
    pub hidden: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            obs_dim: 30,
            hidden: 64,
        }
    }
}

/// Names of the tensors in a [`ParamSet`], in storage order.
pub const TENSOR_NAMES: [&str; 10] = [
    "ln_gain", "ln_bias", "w1", "b1", "w2", "b2", "w_mu", "b_mu", "w_var", "b_var",
];

/// One value per network parameter. Used for weights, gradients and the
/// Adam moment accumulators alike. Matrices are row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w_mu: Vec<f64>,
    pub b_mu: Vec<f64>,
    pub w_var: Vec<f64>,
    pub b_var: Vec<f64>,
}

impl ParamSet {
    /// Tensor dimensions for `cfg`, matching [`TENSOR_NAMES`].
    pub fn shapes(cfg: &PolicyConfig) -> [Vec<usize>; 10] {
        let (o, h) = (cfg.obs_dim, cfg.hidden);
        [
            vec![o],
            vec![o],
            vec![h, o],
            vec![h],
            vec![h, h],
            vec![h],
            vec![1, h],
            vec![1],
            vec![1, h],
            vec![1],
        ]
    }

    pub fn zeros(cfg: &PolicyConfig) -> Self {
        let [a, b, c, d, e, f, g, h, i, j] =
            Self::shapes(cfg).map(|dims| vec![0.0; dims.iter().product()]);
        Self {
            ln_gain: a,
            ln_bias: b,
            w1: c,
            b1: d,
            w2: e,
            b2: f,
            w_mu: g,
            b_mu: h,
            w_var: i,
            b_var: j,
        }
    }

    /// Glorot-uniform weights, zero biases, unit LayerNorm gain.
    pub fn glorot<R: Rng + ?Sized>(cfg: &PolicyConfig, rng: &mut R) -> Self {
        let mut p = Self::zeros(cfg);
        p.ln_gain.fill(1.0);
        let (o, h) = (cfg.obs_dim, cfg.hidden);
        for (w, fan_in, fan_out) in [
            (&mut p.w1, o, h),
            (&mut p.w2, h, h),
            (&mut p.w_mu, h, 1),
            (&mut p.w_var, h, 1),
        ] {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-limit..limit);
            }
        }
        p
    }

    pub fn tensors(&self) -> [&[f64]; 10] {
        [
            &self.ln_gain,
            &self.ln_bias,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
            &self.w_mu,
            &self.b_mu,
            &self.w_var,
            &self.b_var,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 10] {
        [
            &mut self.ln_gain,
            &mut self.ln_bias,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w_mu,
            &mut self.b_mu,
            &mut self.w_var,
            &mut self.b_var,
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.tensors().into_iter().flat_map(|t| t.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.tensors_mut().into_iter().flat_map(|t| t.iter_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for v in self.iter_mut() {
            *v *= factor;
        }
    }
}

/// Policy weights together with Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParameters {
    pub config: PolicyConfig,
    pub weights: ParamSet,
    pub adam_m: ParamSet,
    pub adam_v: ParamSet,
    pub step_count: u64,
}

impl PolicyParameters {
    pub fn zeros(config: PolicyConfig) -> Self {
        let z = ParamSet::zeros(&config);
        Self {
            config,
            weights: z.clone(),
            adam_m: z.clone(),
            adam_v: z,
            step_count: 0,
        }
    }

    pub fn init<R: Rng + ?Sized>(config: PolicyConfig, rng: &mut R) -> Self {
        Self {
            weights: ParamSet::glorot(&config, rng),
            ..Self::zeros(config)
        }
    }
}
