use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lorentz::Curvature;

/// Default negative slope of [`ActivationBase::LeakyRelu`].
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Scalar nonlinearity `h`. All variants are monotone nondecreasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationBase {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl ActivationBase {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationBase::Identity => x,
            ActivationBase::Relu => x.max(0.0),
            ActivationBase::LeakyRelu(alpha) => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
            ActivationBase::Tanh => x.tanh(),
        }
    }

    /// Derivative, with subgradient 0 for relu at 0 and `alpha` for leaky relu at 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationBase::Identity => 1.0,
            ActivationBase::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationBase::LeakyRelu(alpha) => {
                if x > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            ActivationBase::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

impl fmt::Display for ActivationBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationBase::Identity => write!(f, "identity"),
            ActivationBase::Relu => write!(f, "relu"),
            ActivationBase::LeakyRelu(a) => write!(f, "leaky_relu({a:?})"),
            ActivationBase::Tanh => write!(f, "tanh"),
        }
    }
}

impl FromStr for ActivationBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "identity" => return Ok(ActivationBase::Identity),
            "relu" => return Ok(ActivationBase::Relu),
            "tanh" => return Ok(ActivationBase::Tanh),
            "leaky_relu" => return Ok(ActivationBase::LeakyRelu(DEFAULT_LEAKY_SLOPE)),
            _ => {}
        }
        if let Some(arg) = s.strip_prefix("leaky_relu(").and_then(|r| r.strip_suffix(')')) {
            let alpha: f64 = arg
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad leaky_relu slope `{arg}`")))?;
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(Error::InvalidConfig(format!("leaky_relu slope must be >= 0, got {alpha}")));
            }
            return Ok(ActivationBase::LeakyRelu(alpha));
        }
        Err(Error::InvalidConfig(format!("unknown activation `{s}`")))
    }
}

/// Whether `h` is applied directly or conjugated by `sinh`/`asinh`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationMode {
    Plain,
    Lorentzian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    pub base: ActivationBase,
    pub mode: ActivationMode,
}

impl Default for Activation {
    fn default() -> Self {
        Activation { base: ActivationBase::Relu, mode: ActivationMode::Lorentzian }
    }
}

impl Activation {
    pub fn new(base: ActivationBase, mode: ActivationMode) -> Self {
        Activation { base, mode }
    }

    pub fn lorentzian(base: ActivationBase) -> Self {
        Activation { base, mode: ActivationMode::Lorentzian }
    }

    pub fn plain(base: ActivationBase) -> Self {
        Activation { base, mode: ActivationMode::Plain }
    }

    pub fn identity() -> Self {
        Activation::lorentzian(ActivationBase::Identity)
    }

    /// Applies the activation to a pre-activation (a signed distance).
    pub fn apply(&self, k: Curvature, z: f64) -> f64 {
        match self.mode {
            ActivationMode::Plain => self.base.apply(z),
            ActivationMode::Lorentzian => lorentzian_activation(self.base, k, z),
        }
    }

    /// Spatial output coordinate as a function of the Minkowski product `s = x∘v`.
    ///
    /// In Lorentzian mode the `asinh` of the pre-activation cancels against the
    /// `sinh` of the output construction and this is just `h(s)`.
    #[inline]
    pub fn spatial_from_product(&self, k: Curvature, s: f64) -> f64 {
        match self.mode {
            ActivationMode::Lorentzian => self.base.apply(s),
            ActivationMode::Plain => {
                let sk = k.sqrt();
                let z = (sk * s).asinh() / sk;
                (sk * self.base.apply(z)).sinh() / sk
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.mode {
            ActivationMode::Plain => "plain",
            ActivationMode::Lorentzian => "lorentzian",
        };
        write!(f, "{}/{}", self.base, mode)
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Parses `base[/mode]`; the mode defaults to lorentzian.
    fn from_str(s: &str) -> Result<Self> {
        let (base, mode) = match s.rsplit_once('/') {
            Some((b, m)) => (b, m.trim()),
            None => (s, "lorentzian"),
        };
        let mode = match mode {
            "plain" => ActivationMode::Plain,
            "lorentzian" => ActivationMode::Lorentzian,
            other => return Err(Error::InvalidConfig(format!("unknown activation mode `{other}`"))),
        };
        Ok(Activation { base: base.parse()?, mode })
    }
}

/// `asinh(sqrt(k) h(sinh(sqrt(k) x) / sqrt(k))) / sqrt(k)`.
pub fn lorentzian_activation(h: ActivationBase, k: Curvature, x: f64) -> f64 {
    let sk = k.sqrt();
    (sk * h.apply((sk * x).sinh() / sk)).asinh() / sk
}
