//! Configuration potentials and their Yosida regularization.
//!
//! A potential `W` is split as `W(r) = Ŵ(r) - λ r²/2` where `Ŵ` is convex
//! with derivative `β = W' + λ Id`. The regularized potential of index `n`
//! replaces `Ŵ` by its Moreau envelope with parameter `1/n`, whose
//! derivative is the Yosida approximation
//!
//! ```text
//! β_n(r) = n (r - υ_n(r)),     υ_n = (Id + β/n)^{-1}.
//! ```
//!
//! `β_n` is nondecreasing and `n`-Lipschitz on all of ℝ, even when `W` is
//! singular at ±1, so the time stepper never evaluates `W'` directly.

use crate::error::{Error, Result};

/// Largest double strictly below 1; the closure of the singular domain as
/// seen in floating point.
const INTERIOR_EDGE: f64 = 1.0 - f64::EPSILON / 2.0;

const RESOLVENT_TOL: f64 = 1e-13;
const RESOLVENT_MAX_ITER: usize = 200;

/// Open interval on which the potential is finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Real,
    /// The open interval (-1, 1).
    Unit,
}

impl Domain {
    pub fn contains(self, r: f64) -> bool {
        match self {
            Domain::Real => r.is_finite(),
            Domain::Unit => r.abs() < 1.0,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Domain::Real => "(-inf, inf)",
            Domain::Unit => "(-1, 1)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// `W(r) = (r² - 1)² / 4`.
    DoubleWell,
    /// `W(r) = η |r|^p / (p (p - 1)) - λ r² / 2`, so that
    /// `W''(r) = η |r|^{p-2} - λ` exactly and `W'' ≤ K_W (1 + |r|^{p-2})`.
    Polynomial { p: f64, k_w: f64, eta: f64 },
    /// `W(r) = (1 + r) ln(1 + r) + (1 - r) ln(1 - r) - λ_log r² / 2` on (-1, 1).
    Logarithmic { lambda_log: f64 },
}

/// A configuration potential with its semiconvexity constant `λ`
/// (`W'' ≥ -λ`) and lower-bound offset `c_W` (`W(r) ≥ 3λr² - c_W`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    kind: PotentialKind,
    lambda: f64,
    c_w: f64,
}

impl PotentialSpec {
    /// Quartic double well with `λ = 1`, the smallest admissible value.
    pub fn double_well() -> Self {
        Self::double_well_with_lambda(1.0).expect("λ = 1 is admissible")
    }

    pub fn double_well_with_lambda(lambda: f64) -> Result<Self> {
        if !(lambda >= 1.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "double well needs lambda >= 1 so that W'' >= -lambda, got {lambda}"
            )));
        }
        // min over x = r² of (x-1)²/4 - 3λx is attained at x = 1 + 6λ
        let c_w = 9.0 * lambda * lambda + 3.0 * lambda;
        Ok(Self {
            kind: PotentialKind::DoubleWell,
            lambda,
            c_w,
        })
    }

    pub fn polynomial(p: f64, k_w: f64, eta: f64, lambda: f64) -> Result<Self> {
        if !(p > 2.0 && p <= 6.0) {
            return Err(Error::invalid(format!("polynomial exponent p must lie in (2, 6], got {p}")));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid(format!("eta must be positive, got {eta}")));
        }
        if !(k_w >= eta) || !k_w.is_finite() {
            return Err(Error::invalid(format!(
                "K_W must be at least eta = {eta} for W'' <= K_W (1 + |r|^(p-2)), got {k_w}"
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
        }
        let a = eta / (p * (p - 1.0));
        let c_w = if lambda > 0.0 {
            // sup of 3.5 λ r² - a |r|^p
            let r2 = (7.0 * lambda / (a * p)).powf(2.0 / (p - 2.0));
            3.5 * lambda * r2 * (1.0 - 2.0 / p)
        } else {
            0.0
        };
        Ok(Self {
            kind: PotentialKind::Polynomial { p, k_w, eta },
            lambda,
            c_w,
        })
    }

    /// Logarithmic potential with `λ = λ_log`.
    pub fn logarithmic(lambda_log: f64) -> Result<Self> {
        Self::logarithmic_with_lambda(lambda_log, lambda_log)
    }

    pub fn logarithmic_with_lambda(lambda_log: f64, lambda: f64) -> Result<Self> {
        if !(lambda_log > 0.0) || !lambda_log.is_finite() {
            return Err(Error::invalid(format!("lambda_log must be positive, got {lambda_log}")));
        }
        if !(lambda >= 0.0 && lambda >= lambda_log - 2.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "lambda must be >= max(0, lambda_log - 2) = {} so that W'' >= -lambda, got {lambda}",
                (lambda_log - 2.0).max(0.0)
            )));
        }
        // the entropy part is nonnegative, so W >= -λ_log/2 on (-1, 1)
        let c_w = 3.0 * lambda + 0.5 * lambda_log;
        Ok(Self {
            kind: PotentialKind::Logarithmic { lambda_log },
            lambda,
            c_w,
        })
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c_w(&self) -> f64 {
        self.c_w
    }

    pub fn domain(&self) -> Domain {
        match self.kind {
            PotentialKind::Logarithmic { .. } => Domain::Unit,
            _ => Domain::Real,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.domain() == Domain::Unit
    }

    /// Growth exponent `p` of the controlled-growth condition, when one holds.
    pub fn growth_exponent(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::DoubleWell => Some(4.0),
            PotentialKind::Polynomial { p, .. } => Some(p),
            PotentialKind::Logarithmic { .. } => None,
        }
    }

    fn check(&self, r: f64) -> Result<()> {
        let domain = self.domain();
        if domain.contains(r) {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                value: r,
                domain: domain.label(),
            })
        }
    }

    /// `W(r)`.
    pub fn w(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.w_unchecked(r))
    }

    /// `W'(r)`.
    pub fn w_prime(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.w_prime_unchecked(r))
    }

    /// `W''(r)`.
    pub fn w_second(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.w_second_unchecked(r))
    }

    /// Monotone part `β(r) = W'(r) + λ r`.
    pub fn beta(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.beta_unchecked(r))
    }

    pub fn beta_prime(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.beta_prime_unchecked(r))
    }

    pub(crate) fn w_unchecked(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::DoubleWell => {
                let s = r * r - 1.0;
                0.25 * s * s
            }
            PotentialKind::Polynomial { p, eta, .. } => {
                eta * r.abs().powf(p) / (p * (p - 1.0)) - 0.5 * self.lambda * r * r
            }
            PotentialKind::Logarithmic { lambda_log } => {
                (1.0 + r) * r.ln_1p() + (1.0 - r) * (-r).ln_1p() - 0.5 * lambda_log * r * r
            }
        }
    }

    pub(crate) fn w_prime_unchecked(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::DoubleWell => r * r * r - r,
            PotentialKind::Polynomial { p, eta, .. } => {
                eta * r.abs().powf(p - 2.0) * r / (p - 1.0) - self.lambda * r
            }
            PotentialKind::Logarithmic { lambda_log } => {
                r.ln_1p() - (-r).ln_1p() - lambda_log * r
            }
        }
    }

    pub(crate) fn w_second_unchecked(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::DoubleWell => 3.0 * r * r - 1.0,
            PotentialKind::Polynomial { p, eta, .. } => {
                eta * r.abs().powf(p - 2.0) - self.lambda
            }
            PotentialKind::Logarithmic { lambda_log } => 2.0 / ((1.0 - r) * (1.0 + r)) - lambda_log,
        }
    }

    pub(crate) fn beta_unchecked(&self, r: f64) -> f64 {
        self.w_prime_unchecked(r) + self.lambda * r
    }

    pub(crate) fn beta_prime_unchecked(&self, r: f64) -> f64 {
        (self.w_second_unchecked(r) + self.lambda).max(0.0)
    }
}

/// Value of the Yosida approximation at a point together with the pieces
/// the Newton solver needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YosidaPoint {
    pub resolvent: f64,
    pub beta_n: f64,
    pub beta_n_prime: f64,
}

/// The potential `W_n` obtained from `W` by Yosida regularization of index `1/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedPotential {
    base: PotentialSpec,
    n: u64,
}

impl RegularizedPotential {
    pub fn new(base: PotentialSpec, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("Yosida index n must be a positive integer"));
        }
        Ok(Self { base, n })
    }

    pub fn base(&self) -> &PotentialSpec {
        &self.base
    }

    pub fn index(&self) -> u64 {
        self.n
    }

    fn n_f64(&self) -> f64 {
        self.n as f64
    }

    /// `υ_n(r)`: the unique solution of `υ + β(υ)/n = r`.
    ///
    /// Safeguarded Newton iteration on the bracket between 0 and `r`
    /// (β(0) = 0 and β is monotone). For singular potentials the bracket is
    /// clipped to the representable interior of (-1, 1); when the root lies
    /// closer to ±1 than one ulp the clipped endpoint is returned.
    pub fn resolvent(&self, r: f64) -> Result<f64> {
        if !r.is_finite() {
            return Err(Error::invalid(format!("resolvent argument must be finite, got {r}")));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let inv_n = 1.0 / self.n_f64();
        let g = |x: f64| x + inv_n * self.base.beta_unchecked(x) - r;
        let (mut lo, mut hi) = if r > 0.0 { (0.0, r) } else { (r, 0.0) };
        if self.base.is_singular() {
            lo = lo.max(-INTERIOR_EDGE);
            hi = hi.min(INTERIOR_EDGE);
        }
        // g(0) = -r so the sign at the origin end is known; check the far end
        if r > 0.0 && g(hi) <= 0.0 {
            return Ok(hi);
        }
        if r < 0.0 && g(lo) >= 0.0 {
            return Ok(lo);
        }

        let mut x = r.clamp(lo, hi);
        let mut residual = f64::INFINITY;
        let mut previous = f64::INFINITY;
        for _ in 0..RESOLVENT_MAX_ITER {
            let gx = g(x);
            residual = gx.abs();
            if gx == 0.0 {
                return Ok(x);
            }
            if gx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                return Ok(x);
            }
            let slope = 1.0 + inv_n * self.base.beta_prime_unchecked(x);
            let newton = x - gx / slope;
            // Newton must stay in the bracket and at least halve the residual;
            // near a singular endpoint the slope is huge and Newton creeps
            let use_newton = newton > lo && newton < hi && residual <= 0.5 * previous;
            previous = residual;
            if use_newton {
                let step = (newton - x).abs();
                x = newton;
                if step <= RESOLVENT_TOL && residual <= 1e-8 * (1.0 + r.abs()) {
                    return Ok(x);
                }
            } else {
                x = 0.5 * (lo + hi);
            }
        }
        Err(Error::ConvergenceFailure {
            what: "resolvent root-finder",
            iterations: RESOLVENT_MAX_ITER,
            residual,
        })
    }

    /// `β_n(r) = n (r - υ_n(r))`.
    pub fn yosida_beta(&self, r: f64) -> Result<f64> {
        Ok(self.eval(r)?.beta_n)
    }

    /// Derivative of `β_n`, from implicit differentiation of the resolvent:
    /// `β_n' = β'(υ) / (1 + β'(υ)/n)`.
    pub fn yosida_beta_prime(&self, r: f64) -> Result<f64> {
        Ok(self.eval(r)?.beta_n_prime)
    }

    pub fn eval(&self, r: f64) -> Result<YosidaPoint> {
        let resolvent = self.resolvent(r)?;
        let n = self.n_f64();
        let beta_n = n * (r - resolvent);
        let bp = self.base.beta_prime_unchecked(resolvent);
        let beta_n_prime = if bp.is_finite() { bp / (1.0 + bp / n) } else { n };
        Ok(YosidaPoint {
            resolvent,
            beta_n,
            beta_n_prime,
        })
    }

    /// `W_n'(r) = β_n(r) - λ r`.
    pub fn w_n_prime(&self, r: f64) -> Result<f64> {
        Ok(self.yosida_beta(r)? - self.base.lambda * r)
    }

    /// `W_n(r)` in closed form through the Moreau envelope of the convex part:
    /// `W(υ) + λυ²/2 + n(r - υ)²/2 - λr²/2` with `υ = υ_n(r)`.
    pub fn w_n(&self, r: f64) -> Result<f64> {
        let v = self.resolvent(r)?;
        let lambda = self.base.lambda;
        let d = r - v;
        Ok(self.base.w_unchecked(v) + 0.5 * lambda * (v - r) * (v + r) + 0.5 * self.n_f64() * d * d)
    }
}

/// Sample points `r_k = 1 - (1 - r_start) 2^{-k}` approaching 1 from `r_start`,
/// stopping before the gap to 1 drops below 1e-12.
pub fn separating_ladder(r_start: f64, samples: usize) -> Vec<f64> {
    let mut gap = 1.0 - r_start;
    let mut out = Vec::with_capacity(samples);
    while out.len() < samples && gap >= 1e-12 {
        out.push(1.0 - gap);
        gap *= 0.5;
    }
    out
}

/// Sampled check of the growth condition `β(r) ≥ c/(1-r)³` near 1 and
/// `-β(r) ≥ c/(1+r)³` near -1, for an arbitrary monotone part `beta`.
pub fn separating_growth_test_with(
    beta: impl Fn(f64) -> f64,
    c_probe: f64,
    r_start: f64,
    samples: usize,
) -> Result<bool> {
    if !(c_probe > 0.0) {
        return Err(Error::invalid(format!("c_probe must be positive, got {c_probe}")));
    }
    if !(r_start > 0.0 && r_start < 1.0) {
        return Err(Error::invalid(format!("r_start must lie in (0, 1), got {r_start}")));
    }
    let ladder = separating_ladder(r_start, samples.max(1));
    Ok(ladder.iter().all(|&r| {
        let gap = 1.0 - r;
        let bound = c_probe / (gap * gap * gap);
        beta(r) >= bound && -beta(-r) >= bound
    }))
}

/// Separating-growth check for a singular potential, on a 40-point ladder.
pub fn separating_growth_test(spec: &PotentialSpec, c_probe: f64, r_start: f64) -> Result<bool> {
    separating_growth_test_samples(spec, c_probe, r_start, 40)
}

pub fn separating_growth_test_samples(
    spec: &PotentialSpec,
    c_probe: f64,
    r_start: f64,
    samples: usize,
) -> Result<bool> {
    if !spec.is_singular() {
        return Err(Error::DomainViolation {
            value: f64::INFINITY,
            domain: "separating test needs a potential on (-1, 1)",
        });
    }
    separating_growth_test_with(|r| spec.beta_unchecked(r), c_probe, r_start, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn double_well_values() {
        let dw = PotentialSpec::double_well();
        assert_eq!(dw.w(1.0).unwrap(), 0.0);
        assert!(close(dw.w(0.0).unwrap(), 0.25, 1e-15));
        assert_eq!(dw.w_prime(0.0).unwrap(), 0.0);
        assert_eq!(dw.w_prime(1.0).unwrap(), 0.0);
        assert_eq!(dw.beta(0.0).unwrap(), 0.0);
        assert!(close(dw.beta(2.0).unwrap(), 8.0, 1e-14));
        assert_eq!(dw.c_w(), 12.0);
    }

    #[test]
    fn logarithmic_values() {
        let log = PotentialSpec::logarithmic(1.0).unwrap();
        assert_eq!(log.w(0.0).unwrap(), 0.0);
        let expected = 3f64.ln() - 0.5;
        assert!(close(log.w_prime(0.5).unwrap(), expected, 1e-15));
        assert!(close(expected, 0.598612, 1e-6));
        assert!(close(log.beta(0.5).unwrap(), 3f64.ln(), 1e-15));
    }

    #[test]
    fn singular_domain_is_enforced() {
        let log = PotentialSpec::logarithmic(1.0).unwrap();
        for r in [1.0, -1.0, 1.5, f64::NAN] {
            assert!(matches!(log.w(r), Err(Error::DomainViolation { .. })));
        }
        assert!(PotentialSpec::double_well().w(f64::INFINITY).is_err());
    }

    #[test]
    fn log_potential_blows_up_at_the_edges() {
        let log = PotentialSpec::logarithmic(1.0).unwrap();
        let near = 1.0 - 1e-12;
        assert!(log.w_prime(near).unwrap() * near > 20.0);
        assert!(log.w_prime(-near).unwrap() * -near > 20.0);
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(PotentialSpec::double_well_with_lambda(0.5).is_err());
        assert!(PotentialSpec::polynomial(2.0, 1.0, 1.0, 1.0).is_err());
        assert!(PotentialSpec::polynomial(7.0, 1.0, 1.0, 1.0).is_err());
        assert!(PotentialSpec::polynomial(4.0, 0.5, 1.0, 1.0).is_err());
        assert!(PotentialSpec::logarithmic(-1.0).is_err());
        assert!(PotentialSpec::logarithmic_with_lambda(3.0, 0.5).is_err());
    }

    #[test]
    fn structural_assumptions_hold_on_samples() {
        let specs = [
            PotentialSpec::double_well(),
            PotentialSpec::polynomial(4.0, 3.0, 3.0, 1.0).unwrap(),
            PotentialSpec::polynomial(2.5, 2.0, 1.0, 0.7).unwrap(),
            PotentialSpec::polynomial(6.0, 5.0, 5.0, 2.0).unwrap(),
            PotentialSpec::logarithmic(1.0).unwrap(),
            PotentialSpec::logarithmic(3.0).unwrap(),
        ];
        for spec in specs {
            assert!(spec.w_prime(0.0).unwrap().abs() <= 1e-12);
            let extent = if spec.is_singular() { 0.999 } else { 20.0 };
            for k in 0..=2000 {
                let r = -extent + 2.0 * extent * k as f64 / 2000.0;
                let lam = spec.lambda();
                assert!(spec.w_second(r).unwrap() >= -lam - 1e-12, "{spec:?} at {r}");
                assert!(spec.w(r).unwrap() >= 3.0 * lam * r * r - spec.c_w() - 1e-9, "{spec:?} at {r}");
                // centered difference of W reproduces W' to O(h²)
                // smaller step near a singular endpoint, where W''' blows up
                let h = if spec.is_singular() { 1e-5 * (1.0 - r.abs()) } else { 1e-5 };
                let fd = (spec.w(r + h).unwrap() - spec.w(r - h).unwrap()) / (2.0 * h);
                let wp = spec.w_prime(r).unwrap();
                assert!((fd - wp).abs() <= 1e-6 * (1.0 + wp.abs()), "{spec:?} at {r}");
            }
        }
    }

    #[test]
    fn polynomial_p4_matches_shifted_double_well() {
        let poly = PotentialSpec::polynomial(4.0, 3.0, 3.0, 1.0).unwrap();
        let dw = PotentialSpec::double_well();
        for r in [-2.0, -0.3, 0.0, 0.7, 1.9] {
            assert!(close(poly.w(r).unwrap() + 0.25, dw.w(r).unwrap(), 1e-13));
            assert!(close(poly.beta(r).unwrap(), dw.beta(r).unwrap(), 1e-13));
        }
    }

    #[test]
    fn resolvent_examples() {
        let dw1 = RegularizedPotential::new(PotentialSpec::double_well(), 1).unwrap();
        assert_eq!(dw1.resolvent(0.0).unwrap(), 0.0);
        assert!(close(dw1.resolvent(2.0).unwrap(), 1.0, 1e-13));
        assert!(close(dw1.yosida_beta(2.0).unwrap(), 1.0, 1e-12));

        let log10 = RegularizedPotential::new(PotentialSpec::logarithmic(1.0).unwrap(), 10).unwrap();
        let v = log10.resolvent(5.0).unwrap();
        assert!(v > -1.0 && v < 1.0);
        assert!(log10.w_n(5.0).unwrap().is_finite());
        let v = log10.resolvent(-5.0).unwrap();
        assert!(v > -1.0 && v < 1.0);

        let log1 = RegularizedPotential::new(PotentialSpec::logarithmic(1.0).unwrap(), 1).unwrap();
        assert!(log1.w_n(5.0).unwrap().is_finite());
        assert!(log1.yosida_beta(5.0).unwrap().is_finite());
    }

    #[test]
    fn singular_resolvent_solves_near_the_endpoint() {
        // huge slopes near ±1 used to stall the Newton iteration
        let spec = PotentialSpec::logarithmic(3.0).unwrap();
        let reg = RegularizedPotential::new(spec, 50).unwrap();
        let mut prev = reg.resolvent(0.8).unwrap();
        for k in 1..=400 {
            let r = 0.8 + k as f64 * 1e-3;
            let v = reg.resolvent(r).unwrap();
            let g = v + spec.beta(v).unwrap() / 50.0 - r;
            assert!(g.abs() < 1e-12, "r = {r}: residual {g}");
            assert!(v >= prev && v - prev <= 1e-3 + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn yosida_limits() {
        let dw = PotentialSpec::double_well();
        let reg = RegularizedPotential::new(dw, 1_000_000).unwrap();
        assert!(close(reg.yosida_beta(0.5).unwrap(), 0.125, 1e-6));
        assert!(close(reg.w_n(0.5).unwrap(), 0.140625, 1e-5));
        assert_eq!(reg.w_n(0.0).unwrap(), dw.w(0.0).unwrap());
        assert_eq!(reg.yosida_beta(0.0).unwrap(), 0.0);
    }

    #[test]
    fn yosida_derivative_matches_finite_differences() {
        for spec in [PotentialSpec::double_well(), PotentialSpec::logarithmic(1.0).unwrap()] {
            for n in [1, 10, 1000] {
                let reg = RegularizedPotential::new(spec, n).unwrap();
                for r in [-3.0, -0.9, -0.2, 0.1, 0.6, 2.5] {
                    let h = 1e-6;
                    let fd = (reg.yosida_beta(r + h).unwrap() - reg.yosida_beta(r - h).unwrap()) / (2.0 * h);
                    let exact = reg.yosida_beta_prime(r).unwrap();
                    assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()), "n={n} r={r}: {fd} vs {exact}");
                    assert!(exact <= n as f64 * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn separating_examples() {
        let log = PotentialSpec::logarithmic(1.0).unwrap();
        assert!(!separating_growth_test(&log, 0.01, 0.9).unwrap());

        let fast = |r: f64| r / (1.0 - r * r).powi(3);
        assert!(separating_growth_test_with(fast, 0.01, 0.5, 40).unwrap());
        assert!(separating_growth_test_with(fast, 0.01, 0.9, 40).unwrap());

        // single-sample ladder agrees with direct evaluation at r_start
        let r = 0.999999;
        let single = separating_growth_test_samples(&log, 0.01, r, 1).unwrap();
        let gap = 1.0 - r;
        let direct = log.beta(r).unwrap() >= 0.01 / gap.powi(3) && -log.beta(-r).unwrap() >= 0.01 / gap.powi(3);
        assert_eq!(single, direct);
        assert_eq!(separating_ladder(r, 1), vec![r]);

        assert!(matches!(
            separating_growth_test(&PotentialSpec::double_well(), 0.01, 0.9),
            Err(Error::DomainViolation { .. })
        ));
    }
}
