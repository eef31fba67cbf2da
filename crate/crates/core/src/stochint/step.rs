use crate::error::{invalid, Result};

/// A pointwise-evaluable, compactly supported function.
pub trait Integrand {
    fn eval(&self, x: f64) -> f64;
    /// Closed interval outside of which the function vanishes.
    fn support(&self) -> (f64, f64);
    /// Known jump or kink abscissae.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// An [`Integrand`] with a pointwise derivative (piecewise `C^1`).
pub trait Differentiable: Integrand {
    fn derivative(&self, x: f64) -> f64;
}

/// `f = sum_i c_i 1_[x_i, x_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != levels.len() + 1 || levels.is_empty() {
            return invalid("a step function needs k levels and k + 1 breakpoints");
        }
        if breakpoints.iter().chain(&levels).any(|v| !v.is_finite()) {
            return invalid("step function breakpoints and levels must be finite (compact support)");
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("step function breakpoints must be strictly increasing");
        }
        Ok(StepFunction { breakpoints, levels })
    }

    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![1.0])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn pieces(&self) -> usize {
        self.levels.len()
    }
}

impl Integrand for StepFunction {
    fn eval(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        if x < b[0] || x >= b[b.len() - 1] {
            return 0.0;
        }
        let i = b.partition_point(|&p| p <= x) - 1;
        self.levels[i]
    }

    fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], self.breakpoints[self.breakpoints.len() - 1])
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// `height * max(0, 1 - |x - center| / half_width)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hat {
    pub center: f64,
    pub half_width: f64,
    pub height: f64,
}

impl Hat {
    pub fn unit() -> Self {
        Hat {
            center: 0.0,
            half_width: 1.0,
            height: 1.0,
        }
    }
}

impl Integrand for Hat {
    fn eval(&self, x: f64) -> f64 {
        self.height * (1.0 - (x - self.center).abs() / self.half_width).max(0.0)
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![
            self.center - self.half_width,
            self.center,
            self.center + self.half_width,
        ]
    }
}

impl Differentiable for Hat {
    fn derivative(&self, x: f64) -> f64 {
        let d = x - self.center;
        if d.abs() >= self.half_width {
            0.0
        } else if d < 0.0 {
            self.height / self.half_width
        } else {
            -self.height / self.half_width
        }
    }
}

/// An integrand from closures.
pub struct FnIntegrand<F, D = fn(f64) -> f64> {
    pub f: F,
    pub df: Option<D>,
    pub support: (f64, f64),
    pub breakpoints: Vec<f64>,
}

impl<F: Fn(f64) -> f64> FnIntegrand<F> {
    pub fn new(f: F, support: (f64, f64)) -> Self {
        FnIntegrand {
            f,
            df: None,
            support,
            breakpoints: Vec::new(),
        }
    }
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> FnIntegrand<F, D> {
    pub fn with_derivative(f: F, df: D, support: (f64, f64)) -> Self {
        FnIntegrand {
            f,
            df: Some(df),
            support,
            breakpoints: Vec::new(),
        }
    }
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> Integrand for FnIntegrand<F, D> {
    fn eval(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            0.0
        } else {
            (self.f)(x)
        }
    }

    fn support(&self) -> (f64, f64) {
        self.support
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> Differentiable for FnIntegrand<F, D> {
    fn derivative(&self, x: f64) -> f64 {
        match &self.df {
            Some(d) if x >= self.support.0 && x <= self.support.1 => d(x),
            _ => 0.0,
        }
    }
}
