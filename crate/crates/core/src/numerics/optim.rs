use super::{Matrix, NumericsError, ParamGrads, ParameterSet, Result};

/// RMSprop: a running elementwise average of squared gradients scales each
/// step, so updates tolerate the wide spread of regression-target
/// magnitudes. State persists for the lifetime of one training run.
#[derive(Debug, Clone)]
pub struct RmsProp {
    /// Step size (eta).
    pub learning_rate: f64,
    /// Accumulator decay (rho).
    pub decay: f64,
    /// Stabilizer added under the square root.
    pub epsilon: f64,
    accum: Vec<Matrix>,
}

impl RmsProp {
    pub fn new(learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        assert!(learning_rate > 0.0 && (0.0..1.0).contains(&decay) && epsilon > 0.0);
        RmsProp {
            learning_rate,
            decay,
            epsilon,
            accum: Vec::new(),
        }
    }

    /// Standard defaults: eta 1e-3, rho 0.9, epsilon 1e-8.
    pub fn default_config() -> Self {
        Self::new(1e-3, 0.9, 1e-8)
    }

    /// `acc <- rho acc + (1 - rho) g^2; p <- p - eta g / sqrt(acc + eps)`.
    ///
    /// Errors if any updated parameter is non-finite, leaving the caller to
    /// abort the run with diagnostics.
    pub fn update(&mut self, params: &mut ParameterSet, grads: &ParamGrads) -> Result<()> {
        if self.accum.is_empty() {
            self.accum = grads
                .iter()
                .map(|g| Matrix::zeros(g.rows(), g.cols()))
                .collect();
        }
        let mut ok = true;
        for (acc, ((_, p), g)) in self
            .accum
            .iter_mut()
            .zip(params.iter_mut().zip(grads.iter()))
        {
            assert!(p.same_shape(g), "rmsprop: gradient shape mismatch");
            for ((a, pv), &gv) in acc
                .as_mut_slice()
                .iter_mut()
                .zip(p.as_mut_slice().iter_mut())
                .zip(g.as_slice())
            {
                *a = self.decay * *a + (1.0 - self.decay) * gv * gv;
                *pv -= self.learning_rate * gv / (*a + self.epsilon).sqrt();
                ok &= pv.is_finite();
            }
        }
        if ok {
            Ok(())
        } else {
            Err(NumericsError::NonFinite("rmsprop update"))
        }
    }

    /// Elementwise accumulators (square-gradient averages), for inspection.
    pub fn accumulators(&self) -> &[Matrix] {
        &self.accum
    }
}
