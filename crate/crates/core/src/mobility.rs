use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// How cell mobilities are combined on the face between two cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaceAverage {
    #[default]
    Arithmetic,
    Harmonic,
}

impl FaceAverage {
    #[inline]
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            FaceAverage::Arithmetic => 0.5 * (a + b),
            FaceAverage::Harmonic => 2.0 * a * b / (a + b),
        }
    }
}

#[derive(Clone)]
enum Law {
    Constant(f64),
    Sine { base: f64, amplitude: f64, frequency: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// Nondegenerate mobility `b` with `α ≤ b(r) ≤ μ_upper` and a Lipschitz bound.
#[derive(Clone)]
pub struct MobilitySpec {
    law: Law,
    alpha: f64,
    mu_upper: f64,
    lipschitz: f64,
    face_average: FaceAverage,
}

impl fmt::Debug for MobilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let law = match &self.law {
            Law::Constant(c) => format!("Constant({c})"),
            Law::Sine {
                base,
                amplitude,
                frequency,
            } => format!("Sine({base} + {amplitude} sin({frequency} r))"),
            Law::Custom(_) => "Custom".to_string(),
        };
        f.debug_struct("MobilitySpec")
            .field("law", &law)
            .field("alpha", &self.alpha)
            .field("mu_upper", &self.mu_upper)
            .field("lipschitz", &self.lipschitz)
            .field("face_average", &self.face_average)
            .finish()
    }
}

impl MobilitySpec {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::invalid(format!("constant mobility must be positive, got {value}")));
        }
        Ok(Self {
            law: Law::Constant(value),
            alpha: value,
            mu_upper: value,
            lipschitz: 0.0,
            face_average: FaceAverage::Arithmetic,
        })
    }

    /// `b(r) = base + amplitude · sin(frequency · r)`.
    pub fn sine(base: f64, amplitude: f64, frequency: f64) -> Result<Self> {
        let alpha = base - amplitude.abs();
        if !(alpha > 0.0) || !base.is_finite() || !amplitude.is_finite() || !frequency.is_finite() {
            return Err(Error::invalid(format!(
                "sine mobility needs base > |amplitude|, got base {base}, amplitude {amplitude}"
            )));
        }
        Ok(Self {
            law: Law::Sine {
                base,
                amplitude,
                frequency,
            },
            alpha,
            mu_upper: base + amplitude.abs(),
            lipschitz: (amplitude * frequency).abs(),
            face_average: FaceAverage::Arithmetic,
        })
    }

    /// `b(r) = 2 + sin(r)`, with `α = 1`, `μ_upper = 3`.
    pub fn two_plus_sine() -> Self {
        Self::sine(2.0, 1.0, 1.0).expect("valid mobility")
    }

    /// A user supplied law. The declared constants are spot-checked on
    /// `r ∈ [-10, 10]`.
    pub fn custom(
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        alpha: f64,
        mu_upper: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0) || !(mu_upper >= alpha) || !(lipschitz >= 0.0) {
            return Err(Error::invalid(format!(
                "need 0 < alpha <= mu_upper and lipschitz >= 0, got {alpha}, {mu_upper}, {lipschitz}"
            )));
        }
        let spec = Self {
            law: Law::Custom(Arc::new(b)),
            alpha,
            mu_upper,
            lipschitz,
            face_average: FaceAverage::Arithmetic,
        };
        let samples: Vec<f64> = (0..=2000).map(|k| -10.0 + 0.01 * k as f64).collect();
        for &r in &samples {
            spec.check(spec.b(r))?;
        }
        for pair in samples.windows(2) {
            let slope = (spec.b(pair[1]) - spec.b(pair[0])).abs() / (pair[1] - pair[0]);
            if slope > lipschitz * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::invalid(format!(
                    "mobility slope {slope} near r = {} exceeds the declared Lipschitz constant {lipschitz}",
                    pair[0]
                )));
            }
        }
        Ok(spec)
    }

    pub fn with_face_average(mut self, face_average: FaceAverage) -> Self {
        self.face_average = face_average;
        self
    }

    #[inline]
    pub fn b(&self, r: f64) -> f64 {
        match &self.law {
            Law::Constant(c) => *c,
            Law::Sine {
                base,
                amplitude,
                frequency,
            } => base + amplitude * (frequency * r).sin(),
            Law::Custom(f) => f(r),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu_upper(&self) -> f64 {
        self.mu_upper
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn face_average(&self) -> FaceAverage {
        self.face_average
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.law, Law::Constant(_))
    }

    /// Fails with `BoundsViolation` unless `α ≤ value ≤ μ_upper` (with a
    /// relative roundoff allowance).
    pub fn check(&self, value: f64) -> Result<()> {
        let slack = 1e-12 * self.mu_upper;
        if value >= self.alpha - slack && value <= self.mu_upper + slack {
            Ok(())
        } else {
            Err(Error::BoundsViolation {
                value,
                lower: self.alpha,
                upper: self.mu_upper,
            })
        }
    }
}
