use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type KernelFn = dyn Fn([f64; 2], [f64; 2]) -> f64 + Send + Sync;
pub type ModulusFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Real kernel `K(x, y)`, evaluated only off the diagonal, with optional
/// regularity metadata.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    dim: Option<usize>,
    eval: Arc<KernelFn>,
    modulus: Option<Arc<ModulusFn>>,
    hormander_r: Option<f64>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("has_modulus", &self.modulus.is_some())
            .field("hormander_r", &self.hormander_r)
            .finish()
    }
}

impl Kernel {
    /// `dim = None` accepts grids of either dimension.
    pub fn new(
        name: impl Into<String>,
        dim: Option<usize>,
        eval: impl Fn([f64; 2], [f64; 2]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Kernel {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            modulus: None,
            hormander_r: None,
        }
    }

    pub fn with_modulus(mut self, omega: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.modulus = Some(Arc::new(omega));
        self
    }

    pub fn with_hormander_r(mut self, r: f64) -> Self {
        self.hormander_r = Some(r);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    #[inline]
    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        (self.eval)(x, y)
    }

    pub fn modulus(&self) -> Option<&ModulusFn> {
        self.modulus.as_deref()
    }

    pub fn hormander_r(&self) -> Option<f64> {
        self.hormander_r
    }

    /// `K*(x, y) = K(y, x)`. Regularity metadata does not carry over.
    pub fn transpose(&self) -> Kernel {
        let inner = Arc::clone(&self.eval);
        Kernel {
            name: format!("{}*", self.name),
            dim: self.dim,
            eval: Arc::new(move |x, y| inner(y, x)),
            modulus: None,
            hormander_r: None,
        }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        match self.dim {
            Some(d) if d != dim => Err(Error::param(format!(
                "kernel `{}` is {d}-dimensional but the grid is {dim}-dimensional",
                self.name
            ))),
            _ => Ok(()),
        }
    }

    /// `1/(x - y)` on the line, `ω(t) = 2t`.
    pub fn hilbert() -> Kernel {
        Kernel::new("hilbert", Some(1), |x, y| 1.0 / (x[0] - y[0]))
            .with_modulus(|t| 2.0 * t)
            .with_hormander_r(f64::INFINITY)
    }

    /// Odd kernel whose radial profile oscillates with a `t^δ` cusp at every
    /// dyadic scale, so it is Hölder-δ regular but no better. Reported modulus `t^δ`.
    pub fn holder(delta: f64) -> Result<Kernel> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::param(format!("Hölder exponent must lie in (0, 1], got {delta}")));
        }
        Ok(Kernel::new(format!("holder-{delta}"), Some(1), move |x, y| {
            scale_profile_kernel(x[0] - y[0], |t| t.powf(delta))
        })
        .with_modulus(move |t| t.powf(delta))
        .with_hormander_r(f64::INFINITY))
    }

    /// Same construction with the Dini modulus `ω(t) = (1 + log(1/t))^{-2}`,
    /// which is not Hölder for any exponent.
    pub fn dini_stress() -> Kernel {
        Kernel::new("dini-stress", Some(1), |x, y| {
            scale_profile_kernel(x[0] - y[0], dini_log_modulus)
        })
        .with_modulus(dini_log_modulus)
        .with_hormander_r(f64::INFINITY)
    }

    /// First Riesz-type kernel `(x - y)_1 / |x - y|^3` in the plane, Lipschitz modulus `32t`.
    pub fn riesz2d() -> Kernel {
        Kernel::new("riesz2d", Some(2), |x, y| {
            let u0 = x[0] - y[0];
            let u1 = x[1] - y[1];
            let r2 = u0 * u0 + u1 * u1;
            u0 / (r2 * r2.sqrt())
        })
        .with_modulus(|t| 32.0 * t)
        .with_hormander_r(f64::INFINITY)
    }

    pub fn zero() -> Kernel {
        Kernel::new("zero", None, |_, _| 0.0)
            .with_modulus(|_| 0.0)
            .with_hormander_r(f64::INFINITY)
    }

    pub fn from_spec(spec: &KernelSpec) -> Result<Kernel> {
        Ok(match spec {
            KernelSpec::Hilbert {} => Kernel::hilbert(),
            KernelSpec::Holder { delta } => Kernel::holder(*delta)?,
            KernelSpec::DiniStress {} => Kernel::dini_stress(),
            KernelSpec::Riesz2d {} => Kernel::riesz2d(),
            KernelSpec::Zero {} => Kernel::zero(),
        })
    }
}

/// `(1 + log(1/t))^{-2}` on `(0, 1]`, extended by 0 at the origin.
pub fn dini_log_modulus(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        let l = 1.0 + (1.0 / t).ln();
        1.0 / (l * l)
    }
}

/// `sgn(u)/|u| * (1 + g(2 dist(log2|u|, Z)) / 2)` for a modulus shape `g` on `[0, 1]`.
#[inline]
fn scale_profile_kernel(u: f64, g: impl Fn(f64) -> f64) -> f64 {
    let a = u.abs();
    let l = a.log2();
    let d = 2.0 * (l - l.round()).abs();
    u.signum() / a * (1.0 + 0.5 * g(d.min(1.0)))
}

/// Catalog entry as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Hilbert {},
    Holder { delta: f64 },
    DiniStress {},
    Riesz2d {},
    Zero {},
}
