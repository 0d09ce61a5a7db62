use crate::dynamics::QuadraticMethod;
use crate::error::{Error, Result};
use crate::expsum::ExpSumModel;
use crate::kernels::{ExpSum, MemoryKernel};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LossCheck,
    Flow,
    EscapeSweep,
    #[serde(rename = "plateau-2d")]
    Plateau2d,
    LandscapeEnum,
    RateSweep,
    MinWidth,
    QuadraticEscape,
    RnnTrain,
    ItoCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::LossCheck,
        Experiment::Flow,
        Experiment::EscapeSweep,
        Experiment::Plateau2d,
        Experiment::LandscapeEnum,
        Experiment::RateSweep,
        Experiment::MinWidth,
        Experiment::QuadraticEscape,
        Experiment::RnnTrain,
        Experiment::ItoCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::LossCheck => "loss-check",
            Experiment::Flow => "flow",
            Experiment::EscapeSweep => "escape-sweep",
            Experiment::Plateau2d => "plateau-2d",
            Experiment::LandscapeEnum => "landscape-enum",
            Experiment::RateSweep => "rate-sweep",
            Experiment::MinWidth => "min-width",
            Experiment::QuadraticEscape => "quadratic-escape",
            Experiment::RnnTrain => "rnn-train",
            Experiment::ItoCheck => "ito-check",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Experiment::LossCheck => "closed-form loss, gradient and Hessian at one point (regression value 1/6)",
            Experiment::Flow => "one gradient-flow trajectory with hitting times (memory plateau curve)",
            Experiment::EscapeSweep => "escape time vs memory 1/omega from a point of M*, log tau ~ linear in 1/omega",
            Experiment::Plateau2d => "two-mode plateau length vs ln(1/delta), the Theta(ln 1/delta) law",
            Experiment::LandscapeEnum => "all critical affine spaces up to width m, Hessian rank <= m+d",
            Experiment::RateSweep => "L1 error of the rate construction vs width m, error ~ m^-alpha",
            Experiment::MinWidth => "smallest width reaching eps for power-law memory, width grows as omega falls",
            Experiment::QuadraticEscape => "escape from the quadratic saddle, GD ~ 1/eps vs momentum ~ 1/sqrt(eps)",
            Experiment::RnnTrain => "full-matrix linear RNN trained by GD and heavy ball, plateau detection",
            Experiment::ItoCheck => "white-noise Monte Carlo loss against the closed-form finite-horizon loss",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub a: Vec<f64>,
    pub w: Vec<f64>,
}

impl ModelSpec {
    pub fn model(&self) -> Result<ExpSumModel> {
        ExpSumModel::new(self.a.clone(), self.w.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Gd,
    HeavyBall,
}

/// Numeric knobs. Unset fields receive experiment-specific defaults and the
/// resolved values are echoed to the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numeric {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    /// Hitting threshold for flows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_rates: Option<[f64; 2]>,
    /// Initial position `xi = xi_factor * delta` for the two-mode flow.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_sep: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    /// Quadratic saddle: initial displacement, also the escape gap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_diag: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_offdiag: Option<f64>,
    /// Write every k-th training step to the per-run record.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Vec<QuadraticMethod>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Vec<OptimizerKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<MemoryKernel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub numeric: Numeric,
    #[serde(default)]
    pub sweep: Sweep,
}

fn fill<T: Clone>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

fn composite(a: f64, w: f64, omega: f64, sigma: f64) -> MemoryKernel {
    MemoryKernel::composite(ExpSum { coeffs: vec![a], rates: vec![w] }, 1.0, omega, sigma).expect("valid default kernel")
}

fn split_point(m: usize, a: f64, w: f64) -> ModelSpec {
    ModelSpec { a: vec![a / m as f64; m], w: vec![w; m] }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    /// Fills every unset field this experiment reads and validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        let n = &mut self.numeric;
        let s = &mut self.sweep;
        match self.experiment {
            Experiment::LossCheck => {
                fill(&mut self.kernel, MemoryKernel::expsum(vec![2.0], vec![2.0])?);
                fill(&mut self.model, ModelSpec { a: vec![1.0], w: vec![1.0] });
            }
            Experiment::Flow => {
                fill(&mut self.kernel, composite(1.0, 0.4, 1.0 / 20.0, 2.0));
                fill(&mut self.model, split_point(10, 1.0, 0.4));
                fill(&mut n.tau_max, 1e3);
                fill(&mut n.delta, 1e-3);
            }
            Experiment::EscapeSweep => {
                fill(&mut self.kernel, composite(1.0, 0.4, 1.0 / 20.0, 2.0));
                fill(&mut self.model, split_point(10, 1.0, 0.4));
                fill(&mut n.tau_max, 1e9);
                fill(&mut n.delta, 1e-3);
                fill(&mut s.omega, [5.0, 8.0, 11.0, 14.0, 17.0, 20.0].iter().map(|mu| 1.0 / mu).collect());
                fill(&mut s.seeds, vec![0]);
            }
            Experiment::Plateau2d => {
                fill(&mut n.target_rates, [1.0, 2.0]);
                fill(&mut n.xi_factor, 10.0);
                fill(&mut n.tau_max, 1e5);
                fill(&mut n.eps_sep, 1e-2);
                fill(&mut n.eps_loss, 1e-4);
                fill(&mut s.delta, vec![1e-4, 1e-5, 1e-6, 1e-7, 1e-8]);
            }
            Experiment::LandscapeEnum => {
                fill(&mut self.kernel, MemoryKernel::expsum(vec![1.0, 0.5, 0.25], vec![0.5, 1.5, 4.0])?);
                fill(&mut n.starts, 24);
                fill(&mut s.m, vec![1, 2, 3, 4, 5]);
            }
            Experiment::RateSweep => {
                fill(&mut self.kernel, MemoryKernel::expsum(vec![1.0, 1.0], vec![1.0, 3.0])?);
                fill(&mut n.alpha, 1);
                fill(&mut s.beta, vec![1.0]);
                fill(&mut s.m, vec![8, 16, 32, 64]);
            }
            Experiment::MinWidth => {
                fill(&mut self.kernel, MemoryKernel::power_law(2.0, 1.0)?);
                fill(&mut n.alpha, 1);
                fill(&mut n.m_cap, 64);
                fill(&mut s.omega, vec![1.0, 0.75, 0.5]);
                fill(&mut s.eps, vec![0.1]);
            }
            Experiment::QuadraticEscape => {
                fill(&mut n.delta0, 0.01);
                fill(&mut s.eps, vec![1e-2, 1e-3, 1e-4]);
                fill(&mut s.method, vec![QuadraticMethod::Gd, QuadraticMethod::Momentum]);
            }
            Experiment::RnnTrain => {
                fill(&mut self.kernel, composite(2.0, 1.0, 1.0 / 20.0, 2.0));
                fill(&mut n.dt, 0.1);
                fill(&mut n.horizon, 32.0);
                fill(&mut n.width, 16);
                fill(&mut n.lr, 0.01);
                fill(&mut n.steps, 40_000);
                fill(&mut n.momentum, 0.5);
                fill(&mut n.clip, 1.0);
                fill(&mut n.init_diag, [0.5, 2.0]);
                fill(&mut n.init_offdiag, 0.05);
                fill(&mut n.record_every, 100);
                fill(&mut s.seeds, (0..10).collect());
                fill(&mut s.optimizer, vec![OptimizerKind::Gd, OptimizerKind::HeavyBall]);
            }
            Experiment::ItoCheck => {
                fill(&mut n.dt, 0.01);
                fill(&mut n.horizon, 6.4);
                fill(&mut n.n_paths, 10_000);
                fill(&mut n.width, 4);
                fill(&mut s.seeds, (0..5).collect());
            }
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        let axes: [(&str, Option<usize>); 8] = [
            ("omega", s.omega.as_ref().map(Vec::len)),
            ("delta", s.delta.as_ref().map(Vec::len)),
            ("m", s.m.as_ref().map(Vec::len)),
            ("beta", s.beta.as_ref().map(Vec::len)),
            ("eps", s.eps.as_ref().map(Vec::len)),
            ("method", s.method.as_ref().map(Vec::len)),
            ("optimizer", s.optimizer.as_ref().map(Vec::len)),
            ("seeds", s.seeds.as_ref().map(Vec::len)),
        ];
        for (name, len) in axes {
            if len == Some(0) {
                return Err(Error::Config(format!("sweep.{name}: axis is empty")));
            }
        }
        let positive = |name: &str, v: &Option<Vec<f64>>| -> Result<()> {
            match v {
                Some(xs) if xs.iter().any(|x| !(*x > 0.0 && x.is_finite())) => {
                    Err(Error::Config(format!("sweep.{name}: values must be positive and finite")))
                }
                _ => Ok(()),
            }
        };
        positive("omega", &s.omega)?;
        positive("delta", &s.delta)?;
        positive("beta", &s.beta)?;
        positive("eps", &s.eps)?;
        if let Some(k) = &self.kernel {
            k.validate().map_err(|e| Error::Config(format!("kernel: {e}")))?;
        }
        if let Some(m) = &self.model {
            m.model().map_err(|e| Error::Config(format!("model: {e}")))?;
        }
        if matches!(self.experiment, Experiment::EscapeSweep | Experiment::Flow)
            && !matches!(self.kernel, Some(MemoryKernel::Composite { .. })) && self.experiment == Experiment::EscapeSweep {
                return Err(Error::Config("kernel: escape-sweep needs kind = \"composite\"".into()));
            }
        if self.experiment == Experiment::MinWidth && !matches!(self.kernel, Some(MemoryKernel::PowerLaw { .. })) {
            return Err(Error::Config("kernel: min-width sweeps the exponent of kind = \"power_law\"".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_fills_defaults() {
        let c = ExperimentConfig::parse("experiment = \"escape-sweep\"\n").unwrap().resolve().unwrap();
        assert_eq!(c.sweep.omega.as_ref().unwrap().len(), 6);
        let again = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn empty_axis_is_rejected() {
        let e = ExperimentConfig::parse("experiment = \"plateau-2d\"\n[sweep]\ndelta = []\n").unwrap().resolve().unwrap_err();
        assert!(e.to_string().contains("sweep.delta"));
    }

    #[test]
    fn unknown_field_reports_location() {
        let e = ExperimentConfig::parse("experiment = \"flow\"\n[numeric]\ntau = 3\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 3") && msg.contains("tau"), "{msg}");
    }

    #[test]
    fn kernel_tables_round_trip() {
        let text = "experiment = \"rate-sweep\"\n[kernel]\nkind = \"expsum\"\ncoeffs = [1.0]\nrates = [2.0]\n";
        let c = ExperimentConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(c.kernel, Some(MemoryKernel::expsum(vec![1.0], vec![2.0]).unwrap()));
    }
}
