//! One row of experiment output.

/// Parameter tuple plus measured norms. Absent fields are written as empty
/// CSV cells.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExperimentRecord {
    pub nu_abs: Option<f64>,
    pub lambda: Option<f64>,
    pub l: Option<f64>,
    pub s: Option<f64>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub norm_f: Option<f64>,
    pub norm_g: Option<f64>,
    pub norm_green: Option<f64>,
    pub ratio: Option<f64>,
    pub slope: Option<f64>,
}

impl ExperimentRecord {
    pub fn params(&self) -> [Option<f64>; 6] {
        [
            self.nu_abs,
            self.lambda,
            self.l,
            self.s,
            self.sigma,
            self.epsilon,
        ]
    }

    pub fn values(&self) -> [Option<f64>; 5] {
        [
            self.norm_f,
            self.norm_g,
            self.norm_green,
            self.ratio,
            self.slope,
        ]
    }

    /// Every present number is finite.
    pub fn is_finite(&self) -> bool {
        self.params()
            .iter()
            .chain(self.values().iter())
            .flatten()
            .all(|x| x.is_finite())
    }

    /// Sets `norm_f`, `norm_g` and `ratio = norm_f / norm_g`.
    pub fn with_norms(mut self, norm_f: f64, norm_g: f64) -> Self {
        self.norm_f = Some(norm_f);
        self.norm_g = Some(norm_g);
        self.ratio = Some(norm_f / norm_g);
        self
    }
}
