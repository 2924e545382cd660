//! Equation coefficients `q(t, omega) = t q0(t, omega)`.
//!
//! Callers always supply the positive factor `q0`; the turning point is then
//! pinned at `t = 0`.

pub mod expr;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use expr::{eval_expr, parse_expr, ExprAst};

type Q0Fn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Number of points used by the positivity scan.
pub const POSITIVITY_SAMPLES: usize = 10_000;

#[derive(Clone)]
pub struct Coefficient {
    q0: Arc<Q0Fn>,
    label: String,
    omega_dependent: bool,
    domain: (f64, f64),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficient")
            .field("label", &self.label)
            .field("omega_dependent", &self.omega_dependent)
            .field("domain", &self.domain)
            .finish()
    }
}

impl Coefficient {
    /// Wraps `q0` without checking it. Prefer [`Coefficient::new`].
    pub fn new_unchecked<F>(label: &str, domain: (f64, f64), omega_dependent: bool, q0: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            q0: Arc::new(q0),
            label: label.to_string(),
            omega_dependent,
            domain,
        }
    }

    /// Wraps `q0` and checks positivity on `domain`. Coefficients that
    /// depend on `omega` are checked at `omega = 1` here and again, at the
    /// working frequency, when a phase is built.
    pub fn new<F>(label: &str, domain: (f64, f64), omega_dependent: bool, q0: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(domain.0 < domain.1) {
            return Err(Error::InvalidArgument(format!(
                "empty coefficient domain [{}, {}]",
                domain.0, domain.1
            )));
        }
        let c = Self::new_unchecked(label, domain, omega_dependent, q0);
        c.check_positive(domain, 1.0)?;
        Ok(c)
    }

    /// Coefficient from a user expression for `q0`.
    pub fn from_expr(src: &str, domain: (f64, f64)) -> Result<Self> {
        let ast = parse_expr(src)?;
        Self::from_ast(src, ast, domain)
    }

    pub fn from_ast(label: &str, ast: ExprAst, domain: (f64, f64)) -> Result<Self> {
        let omega_dependent = ast.uses_omega();
        // surface evaluation errors with their node location
        let probe = (domain.0 + domain.1) / 2.0;
        eval_expr(&ast, probe, 1.0)?;
        let c = Self::new(label, domain, omega_dependent, move |t, w| {
            eval_expr(&ast, t, w).unwrap_or(f64::NAN)
        })?;
        Ok(c)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn omega_dependent(&self) -> bool {
        self.omega_dependent
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn q0(&self, t: f64, omega: f64) -> f64 {
        (self.q0)(t, omega)
    }

    pub fn q(&self, t: f64, omega: f64) -> f64 {
        t * (self.q0)(t, omega)
    }

    /// Dense scan of `q0 > 0` over `[a, b]`, endpoints included.
    pub fn check_positive(&self, (a, b): (f64, f64), omega: f64) -> Result<()> {
        let n = POSITIVITY_SAMPLES;
        for i in 0..n {
            let t = a + (b - a) * i as f64 / (n - 1) as f64;
            let v = self.q0(t, omega);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveCoefficient { t, value: v });
            }
        }
        Ok(())
    }
}

/// `sin(x)/x` with the removable singularity at 0 handled by its series.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        x.sin() / x
    }
}

/// `sinh(x)/x`, series near 0.
fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        1.0 + x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0))
    } else {
        x.sinh() / x
    }
}

/// `(1 - cos(x)) / x`, odd and regular at 0.
fn versinc(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x / 2.0 * (1.0 - x2 / 12.0 * (1.0 - x2 / 30.0))
    } else {
        // 1 - cos x = 2 sin^2(x/2) avoids cancellation
        2.0 * (x / 2.0).sin().powi(2) / x
    }
}

/// `(-1 + (1 - t) e^t) / t`, the factor of the first-experiment `q2` as
/// printed. It is not positive anywhere near 0.
fn q2_as_printed(t: f64) -> f64 {
    if t.abs() < 1e-3 {
        // sum_{n>=2} (1 - n) t^{n-1} / n!
        -t / 2.0 - t * t / 3.0 - t.powi(3) / 8.0 - t.powi(4) / 30.0
    } else {
        (-1.0 + (1.0 - t) * t.exp()) / t
    }
}

/// Names accepted by [`builtin`], excluding the parameterized `legendre(nu,mu)`.
pub const BUILTIN_NAMES: [&str; 8] = [
    "airy",
    "ivp-q1",
    "ivp-q2-as-printed",
    "ivp-q3",
    "bvp-q1",
    "bvp-q2",
    "bvp-q3",
    "legendre(nu,mu)",
];

const IVP_DOMAIN: (f64, f64) = (-5.0, 5.0);
const BVP_DOMAIN: (f64, f64) = (-1.0, 3.0);

pub fn builtin(name: &str) -> Result<Coefficient> {
    let name = name.trim();
    if let Some(args) = name
        .strip_prefix("legendre(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad legendre parameter `{s}`")))
        };
        if parts.len() != 2 {
            return Err(Error::InvalidArgument(
                "legendre takes two parameters: legendre(nu,mu)".into(),
            ));
        }
        return legendre(parse(parts[0])?, parse(parts[1])?);
    }
    match name {
        "airy" => Coefficient::new("airy", IVP_DOMAIN, false, |_, _| 1.0),
        "ivp-q1" | "bvp-q1" => Coefficient::new(
            name,
            if name == "ivp-q1" {
                IVP_DOMAIN
            } else {
                BVP_DOMAIN
            },
            false,
            |t, _| 1.0 + t * t,
        ),
        "ivp-q2-as-printed" | "ivp-q2" => Ok(Coefficient::new_unchecked(
            "ivp-q2-as-printed",
            IVP_DOMAIN,
            false,
            |t, _| q2_as_printed(t),
        )),
        "ivp-q3" => Coefficient::new("ivp-q3", IVP_DOMAIN, false, |t, _| 1.0 + sinc(3.0 * t)),
        // sin t + 2 sin^2(t/4) = t (sinc t + versinc(t/2) / 2)
        "bvp-q2" => Coefficient::new("bvp-q2", BVP_DOMAIN, false, |t, _| {
            sinc(t) + 0.5 * versinc(t / 2.0)
        }),
        "bvp-q3" => Coefficient::new("bvp-q3", BVP_DOMAIN, true, |t, w| {
            let (s, c) = w.sin_cos();
            ((3.0 * t).cos().powi(2) * s * s + 2.0) / (t * t * c * c + 1.0)
        }),
        _ => Err(Error::InvalidArgument(format!(
            "unknown builtin coefficient `{name}` (known: {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// Associated Legendre equation after the change of variables
/// `t = tanh(x + xi)`, divided through by `mu^2` so that it is to be solved
/// with `omega = mu`:
/// `q(x) = -1 + nu(nu+1)/mu^2 sech^2(x - xi)`, `xi = arccosh(sqrt(nu(nu+1))/mu)`.
/// The domain is `[-xi, xi]`, which excludes the second turning point at `2 xi`.
pub fn legendre(nu: f64, mu: f64) -> Result<Coefficient> {
    if !(mu > 0.0) || !(nu > mu) || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "legendre needs nu > mu > 0 for a turning point, got nu = {nu}, mu = {mu}"
        )));
    }
    let ratio = (nu * (nu + 1.0)).sqrt() / mu;
    let xi = ratio.acosh();
    // q(x) = sinh(x) sinh(2 xi - x) / cosh^2(x - xi), free of cancellation
    let q0 = move |x: f64, _| sinhc(x) * (2.0 * xi - x).sinh() / (x - xi).cosh().powi(2);
    Coefficient::new(&format!("legendre({nu},{mu})"), (-xi, xi), false, q0)
}
