//! Closed-form moment generators for the reference measures, plus
//! quadrature oracles used to validate them.

use std::fmt;

use crate::error::{Error, Result};
use crate::moments::MomentSequence;
use crate::multi_index::MultiIndex;

/// A measure with closed-form moments.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    /// Uniform probability measure on `[a, b]`.
    UniformInterval { a: f64, b: f64 },
    /// Uniform probability measure on a box, one `(lo, hi)` per axis.
    UniformBox { bounds: Vec<(f64, f64)> },
    Dirac { point: Vec<f64> },
    /// Probability measure with density proportional to `exp(-Σ xᵢ²)` on `ℝⁿ`.
    GaussianProduct { n: usize },
    /// Normalized arc length on the unit circle of `ℝ²`.
    UniformCircle,
    Mixture(Vec<(f64, MeasureSpec)>),
    Scaled { factor: f64, inner: Box<MeasureSpec> },
}

impl MeasureSpec {
    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::UniformInterval { .. } => 1,
            MeasureSpec::UniformBox { bounds } => bounds.len(),
            MeasureSpec::Dirac { point } => point.len(),
            MeasureSpec::GaussianProduct { n } => *n,
            MeasureSpec::UniformCircle => 2,
            MeasureSpec::Mixture(parts) => parts.first().map_or(0, |(_, s)| s.dim()),
            MeasureSpec::Scaled { inner, .. } => inner.dim(),
        }
    }

    pub fn mixture(parts: Vec<(f64, MeasureSpec)>) -> Self {
        MeasureSpec::Mixture(parts)
    }

    pub fn scaled(factor: f64, inner: MeasureSpec) -> Self {
        MeasureSpec::Scaled { factor, inner: Box::new(inner) }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            MeasureSpec::UniformInterval { a, b } => {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return bad(format!("interval bounds must satisfy a < b, got [{a}, {b}]"));
                }
            }
            MeasureSpec::UniformBox { bounds } => {
                if bounds.is_empty() {
                    return bad("box needs at least one axis".into());
                }
                for (lo, hi) in bounds {
                    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                        return bad(format!("box bounds must satisfy lo < hi, got [{lo}, {hi}]"));
                    }
                }
            }
            MeasureSpec::Dirac { point } => {
                if point.is_empty() || point.iter().any(|x| !x.is_finite()) {
                    return bad("dirac point must be a finite, non-empty vector".into());
                }
            }
            MeasureSpec::GaussianProduct { n } => {
                if *n == 0 {
                    return bad("gaussian dimension must be at least 1".into());
                }
            }
            MeasureSpec::UniformCircle => {}
            MeasureSpec::Mixture(parts) => {
                if parts.is_empty() {
                    return bad("mixture needs at least one component".into());
                }
                let n = parts[0].1.dim();
                for (w, s) in parts {
                    if !(*w > 0.0) || !w.is_finite() {
                        return bad(format!("mixture weights must be positive, got {w}"));
                    }
                    if s.dim() != n {
                        return Err(Error::DimensionMismatch { expected: n, found: s.dim() });
                    }
                    s.validate()?;
                }
            }
            MeasureSpec::Scaled { factor, inner } => {
                if !(*factor > 0.0) || !factor.is_finite() {
                    return bad(format!("scaling factor must be positive, got {factor}"));
                }
                inner.validate()?;
            }
        }
        Ok(())
    }

    /// Closed-form `∫ x^α dμ`.
    pub fn moment(&self, alpha: &MultiIndex) -> f64 {
        let e = alpha.exponents();
        match self {
            MeasureSpec::UniformInterval { a, b } => interval_moment(*a, *b, e[0]),
            MeasureSpec::UniformBox { bounds } => {
                bounds.iter().zip(e).map(|(&(lo, hi), &k)| interval_moment(lo, hi, k)).product()
            }
            MeasureSpec::Dirac { point } => alpha.eval(point),
            MeasureSpec::GaussianProduct { .. } => e.iter().map(|&k| gaussian_moment(k)).product(),
            MeasureSpec::UniformCircle => circle_moment(e[0], e[1]),
            MeasureSpec::Mixture(parts) => parts.iter().map(|(w, s)| w * s.moment(alpha)).sum(),
            MeasureSpec::Scaled { factor, inner } => factor * inner.moment(alpha),
        }
    }

    /// Density with respect to Lebesgue measure, for absolutely continuous variants.
    pub fn lebesgue_density(&self, x: &[f64]) -> Option<f64> {
        match self {
            MeasureSpec::UniformInterval { a, b } => {
                Some(if x[0] >= *a && x[0] <= *b { 1.0 / (b - a) } else { 0.0 })
            }
            MeasureSpec::UniformBox { bounds } => {
                let inside = bounds.iter().zip(x).all(|(&(lo, hi), &xi)| xi >= lo && xi <= hi);
                let vol: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
                Some(if inside { 1.0 / vol } else { 0.0 })
            }
            MeasureSpec::GaussianProduct { n } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Some((-r2).exp() / std::f64::consts::PI.powf(*n as f64 / 2.0))
            }
            MeasureSpec::Mixture(parts) => parts
                .iter()
                .map(|(w, s)| s.lebesgue_density(x).map(|f| w * f))
                .sum::<Option<f64>>(),
            MeasureSpec::Scaled { factor, inner } => inner.lebesgue_density(x).map(|f| factor * f),
            MeasureSpec::Dirac { .. } | MeasureSpec::UniformCircle => None,
        }
    }
}

fn interval_moment(a: f64, b: f64, k: u32) -> f64 {
    let k1 = k as i32 + 1;
    (b.powi(k1) - a.powi(k1)) / (k1 as f64 * (b - a))
}

/// `∫ t^k e^{-t²} dt / √π`: odd moments vanish, `m_{2j} = (2j-1)/2 · m_{2j-2}`.
fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..=k / 2).fold(1.0, |m, j| m * (2 * j - 1) as f64 / 2.0)
}

/// `(1/2π) ∫ cos^a θ sin^b θ dθ = (a-1)!!(b-1)!!/(a+b)!!` for even `a, b`, else 0.
fn circle_moment(a: u32, b: u32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 {
        return 0.0;
    }
    let mut m = 1.0;
    // peel off powers of cos, then sin: c(a,b) = (a-1)/(a+b) c(a-2,b)
    let (mut a, mut b) = (a, b);
    while a > 0 {
        m *= (a - 1) as f64 / (a + b) as f64;
        a -= 2;
    }
    while b > 0 {
        m *= (b - 1) as f64 / b as f64;
        b -= 2;
    }
    m
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(":");
        match self {
            MeasureSpec::UniformInterval { a, b } => write!(f, "uniform:{a}:{b}"),
            MeasureSpec::UniformBox { bounds } => {
                let flat: Vec<f64> = bounds.iter().flat_map(|&(lo, hi)| [lo, hi]).collect();
                write!(f, "box:{}", join(&flat))
            }
            MeasureSpec::Dirac { point } => write!(f, "dirac:{}", join(point)),
            MeasureSpec::GaussianProduct { n } => write!(f, "gaussian{n}"),
            MeasureSpec::UniformCircle => write!(f, "circle"),
            MeasureSpec::Mixture(parts) => {
                write!(f, "mix:")?;
                for (i, (w, s)) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    match s {
                        MeasureSpec::Mixture(_) | MeasureSpec::Scaled { .. } => write!(f, "{w}=({s})")?,
                        _ => write!(f, "{w}={s}")?,
                    }
                }
                Ok(())
            }
            MeasureSpec::Scaled { factor, inner } => write!(f, "scale:{factor}=({inner})"),
        }
    }
}

/// All moments of `spec` up to degree `max_degree`.
pub fn exact_moments(spec: &MeasureSpec, max_degree: usize) -> Result<MomentSequence> {
    spec.validate()?;
    Ok(MomentSequence::from_fn(spec.dim(), max_degree, spec.to_string(), |a| spec.moment(a)))
}

/// A quadrature value with its error estimate and the node count used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes: usize,
}

/// Default grid resolution per axis: 10⁶ points in 1-D, 2000 per axis in 2-D.
pub fn default_resolution(dim: usize) -> usize {
    match dim {
        1 => 1_000_000,
        2 => 2000,
        _ => 200,
    }
}

fn midpoint_1d(lo: f64, hi: f64, nodes: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / nodes as f64;
    let mut acc = 0.0;
    for i in 0..nodes {
        acc += f(lo + (i as f64 + 0.5) * h);
    }
    acc * h
}

fn midpoint_box(bounds: &[(f64, f64)], nodes: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let n = bounds.len();
    let h: Vec<f64> = bounds.iter().map(|(lo, hi)| (hi - lo) / nodes as f64).collect();
    let cell: f64 = h.iter().product();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut acc = 0.0;
    'outer: loop {
        for i in 0..n {
            x[i] = bounds[i].0 + (idx[i] as f64 + 0.5) * h[i];
        }
        acc += f(&x);
        for i in 0..n {
            idx[i] += 1;
            if idx[i] < nodes {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    acc * cell
}

// Tail of e^{-t²} beyond |t| = 10 is below 1e-43.
const GAUSS_HALF_WIDTH: f64 = 10.0;

fn quadrature_at(spec: &MeasureSpec, alpha: &MultiIndex, nodes: usize) -> Result<f64> {
    let e = alpha.exponents();
    Ok(match spec {
        MeasureSpec::UniformInterval { a, b } => {
            midpoint_1d(*a, *b, nodes, |t| t.powi(e[0] as i32)) / (b - a)
        }
        MeasureSpec::UniformBox { bounds } => {
            let vol: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
            midpoint_box(bounds, nodes, &|x| alpha.eval(x)) / vol
        }
        MeasureSpec::Dirac { point } => alpha.eval(point),
        MeasureSpec::GaussianProduct { .. } => e
            .iter()
            .map(|&k| {
                midpoint_1d(-GAUSS_HALF_WIDTH, GAUSS_HALF_WIDTH, nodes, |t| {
                    t.powi(k as i32) * (-t * t).exp()
                }) / std::f64::consts::PI.sqrt()
            })
            .product(),
        MeasureSpec::UniformCircle => {
            let tau = 2.0 * std::f64::consts::PI;
            midpoint_1d(0.0, tau, nodes, |t| t.cos().powi(e[0] as i32) * t.sin().powi(e[1] as i32)) / tau
        }
        MeasureSpec::Mixture(parts) => {
            let mut acc = 0.0;
            for (w, s) in parts {
                acc += w * quadrature_at(s, alpha, nodes)?;
            }
            acc
        }
        MeasureSpec::Scaled { factor, inner } => factor * quadrature_at(inner, alpha, nodes)?,
    })
}

/// Numerical `∫ x^α d spec` by midpoint rules, with a Richardson-style error
/// estimate from a half-resolution rerun.
///
/// `resolution` is the node count per axis (θ for the circle).
pub fn quadrature_oracle(spec: &MeasureSpec, alpha: &MultiIndex, resolution: usize) -> Result<QuadratureEstimate> {
    spec.validate()?;
    if alpha.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: alpha.dim() });
    }
    let resolution = resolution.max(2);
    let fine = quadrature_at(spec, alpha, resolution)?;
    let coarse = quadrature_at(spec, alpha, resolution / 2)?;
    // midpoint rule is second order: error(fine) ≈ |fine - coarse| / 3
    Ok(QuadratureEstimate {
        value: fine,
        error_estimate: (fine - coarse).abs() / 3.0 + 1e-15 * fine.abs().max(1.0),
        nodes: resolution.pow(spec.dim() as u32),
    })
}

/// Brute-force `∫ min(γ, f(x)) x^α dλ(x)` on a uniform midpoint grid.
///
/// `λ` must be a uniform interval or box; `f` is the density with respect to `λ`.
pub fn truncated_density_moments(
    f: &dyn Fn(&[f64]) -> f64,
    lambda: &MeasureSpec,
    gamma: f64,
    alpha: &MultiIndex,
    resolution: usize,
) -> Result<f64> {
    let bounds = match lambda {
        MeasureSpec::UniformInterval { a, b } => vec![(*a, *b)],
        MeasureSpec::UniformBox { bounds } => bounds.clone(),
        other => return Err(Error::Unsupported(format!("truncation oracle needs a uniform interval or box, got {other}"))),
    };
    lambda.validate()?;
    if alpha.dim() != bounds.len() {
        return Err(Error::DimensionMismatch { expected: bounds.len(), found: alpha.dim() });
    }
    let vol: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
    Ok(midpoint_box(&bounds, resolution.max(1), &|x| f(x).min(gamma) * alpha.eval(x)) / vol)
}

/// Known decomposition `μ = p·ν + (1-p)·ψ` used by the reproduction harness.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub nu: MeasureSpec,
    pub psi: MeasureSpec,
    pub p: f64,
    pub gamma: f64,
}

impl GroundTruth {
    pub fn new(nu: MeasureSpec, psi: MeasureSpec, p: f64, gamma: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("weight p must lie in (0, 1), got {p}")));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        if nu.dim() != psi.dim() {
            return Err(Error::DimensionMismatch { expected: nu.dim(), found: psi.dim() });
        }
        Ok(GroundTruth { nu, psi, p, gamma })
    }

    pub fn mu(&self) -> MeasureSpec {
        MeasureSpec::mixture(vec![(self.p, self.nu.clone()), (1.0 - self.p, self.psi.clone())])
    }
}

/// Parses the compact measure syntax used on the command line.
///
/// ```text
/// uniform:a:b        box:lo1:hi1:lo2:hi2...   dirac:x1[:x2...]
/// gaussian<n>        circle                   scale:f=<spec>
/// mix:w1=<spec>,w2=<spec>,...                 (<spec>) groups nested specs
/// ```
pub fn parse_measure(input: &str) -> Result<MeasureSpec> {
    let mut p = Parser { src: input, pos: 0 };
    let spec = p.spec()?;
    p.skip_ws();
    if p.pos != input.len() {
        return Err(p.err("unexpected trailing input"));
    }
    spec.validate()?;
    Ok(spec)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { position: self.pos, message: msg.to_string() }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with(' ') {
            self.pos += 1;
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{s}'")))
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(self.rest().len());
        let tok = &self.rest()[..len];
        let v = tok.parse::<f64>().map_err(|_| self.err("expected a number"))?;
        self.pos += len;
        Ok(v)
    }

    fn number_list(&mut self) -> Result<Vec<f64>> {
        let mut out = vec![self.number()?];
        while self.eat(":") {
            out.push(self.number()?);
        }
        Ok(out)
    }

    fn spec(&mut self) -> Result<MeasureSpec> {
        if self.eat("(") {
            let s = self.spec()?;
            self.expect(")")?;
            return Ok(s);
        }
        if self.eat("uniform:") {
            let start = self.pos;
            let v = self.number_list()?;
            if v.len() != 2 {
                self.pos = start;
                return Err(self.err("uniform needs exactly two bounds"));
            }
            return Ok(MeasureSpec::UniformInterval { a: v[0], b: v[1] });
        }
        if self.eat("box:") {
            let start = self.pos;
            let v = self.number_list()?;
            if v.len() % 2 != 0 {
                self.pos = start;
                return Err(self.err("box needs an even number of bounds"));
            }
            return Ok(MeasureSpec::UniformBox { bounds: v.chunks(2).map(|c| (c[0], c[1])).collect() });
        }
        if self.eat("dirac:") {
            return Ok(MeasureSpec::Dirac { point: self.number_list()? });
        }
        if self.eat("gaussian") {
            self.eat(":");
            let start = self.pos;
            let n = self.number()?;
            if n < 1.0 || n.fract() != 0.0 {
                self.pos = start;
                return Err(self.err("gaussian dimension must be a positive integer"));
            }
            return Ok(MeasureSpec::GaussianProduct { n: n as usize });
        }
        if self.eat("circle") {
            return Ok(MeasureSpec::UniformCircle);
        }
        if self.eat("scale:") {
            let factor = self.number()?;
            self.expect("=")?;
            let inner = self.spec()?;
            return Ok(MeasureSpec::scaled(factor, inner));
        }
        if self.eat("mix:") {
            let mut parts = Vec::new();
            loop {
                let w = self.number()?;
                self.expect("=")?;
                parts.push((w, self.spec()?));
                if !self.eat(",") {
                    break;
                }
            }
            return Ok(MeasureSpec::Mixture(parts));
        }
        Err(self.err("unknown measure kind"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_moments(spec: &MeasureSpec, k: usize) -> Vec<f64> {
        exact_moments(spec, k).unwrap().values().to_vec()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn uniform_interval_moments() {
        let m = first_moments(&MeasureSpec::UniformInterval { a: 0.1, b: 0.7 }, 4);
        assert!(close(&m, &[1.0, 0.4, 0.19, 0.1, 0.05602], 1e-12), "{m:?}");
    }

    #[test]
    fn dirac_moments() {
        let m = first_moments(&MeasureSpec::Dirac { point: vec![0.4] }, 4);
        assert!(close(&m, &[1.0, 0.4, 0.16, 0.064, 0.0256], 1e-15));
    }

    #[test]
    fn two_dirac_mixture() {
        let s = parse_measure("mix:0.5=dirac:0.4,0.5=dirac:0.5").unwrap();
        let m = first_moments(&s, 4);
        assert!(close(&m, &[1.0, 0.45, 0.205, 0.0945, 0.04405], 1e-15), "{m:?}");
    }

    #[test]
    fn gaussian_and_circle_odd_moments_vanish() {
        for spec in [MeasureSpec::GaussianProduct { n: 2 }, MeasureSpec::UniformCircle] {
            let z = exact_moments(&spec, 9).unwrap();
            for (a, v) in z.iter() {
                if a.exponents().iter().any(|e| e % 2 == 1) {
                    assert_eq!(v, 0.0, "{spec} {a}");
                }
            }
        }
    }

    #[test]
    fn circle_closed_forms() {
        let z = exact_moments(&MeasureSpec::UniformCircle, 4).unwrap();
        assert_eq!(z.get(&MultiIndex::new(vec![2, 0])), Some(0.5));
        assert_eq!(z.get(&MultiIndex::new(vec![4, 0])), Some(0.375));
        assert_eq!(z.get(&MultiIndex::new(vec![2, 2])), Some(0.125));
    }

    #[test]
    fn quadrature_examples() {
        let c = MeasureSpec::UniformCircle;
        let q = quadrature_oracle(&c, &MultiIndex::new(vec![2, 0]), 100_000).unwrap();
        assert!((q.value - 0.5).abs() < 1e-10);
        let q = quadrature_oracle(&c, &MultiIndex::new(vec![2, 2]), 100_000).unwrap();
        assert!((q.value - 0.125).abs() < 1e-10);
        let g = MeasureSpec::GaussianProduct { n: 2 };
        let q = quadrature_oracle(&g, &MultiIndex::new(vec![4, 0]), 100_000).unwrap();
        assert!((q.value - 0.75).abs() < 1e-10);
    }

    #[test]
    fn truncation_oracle_examples() {
        let lam = MeasureSpec::UniformInterval { a: 0.0, b: 1.0 };
        let v = truncated_density_moments(&|_| 0.5, &lam, 1.0, &MultiIndex::new(vec![0]), 1000).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let v = truncated_density_moments(&|_| 2.0, &lam, 1.0, &MultiIndex::new(vec![1]), 1000).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let circle = MeasureSpec::UniformCircle;
        assert!(matches!(
            truncated_density_moments(&|_| 1.0, &circle, 1.0, &MultiIndex::new(vec![0, 0]), 10),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn parse_round_trips_display() {
        for s in [
            "uniform:0.1:0.7",
            "dirac:1:2",
            "gaussian2",
            "circle",
            "box:-1:1:-1:1",
            "mix:0.5=dirac:0.4,0.5=dirac:0.5",
            "scale:2=(gaussian2)",
            "mix:0.3=(mix:0.5=dirac:1,0.5=dirac:2),0.7=uniform:0:1",
        ] {
            let spec = parse_measure(s).unwrap();
            assert_eq!(spec.to_string(), s);
            assert_eq!(parse_measure(&spec.to_string()).unwrap(), spec);
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_measure("uniform:0.1:x") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 12),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_measure("banana"), Err(Error::Parse { position: 0, .. })));
        assert!(matches!(parse_measure("uniform:0.7:0.1"), Err(Error::InvalidArgument(_))));
        assert!(matches!(parse_measure("mix:-1=dirac:0"), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ground_truth_requires_unit_interval_weight() {
        let nu = MeasureSpec::UniformInterval { a: 0.1, b: 0.7 };
        let psi = MeasureSpec::Dirac { point: vec![0.4] };
        assert!(GroundTruth::new(nu.clone(), psi.clone(), 1.0, 1.0).is_err());
        let g = GroundTruth::new(nu, psi, 0.5, 1.0).unwrap();
        let mu = exact_moments(&g.mu(), 2).unwrap();
        assert!((mu.values()[1] - (0.5 * 0.4 + 0.5 * 0.4)).abs() < 1e-15);
    }
}
