//! System JSON configs and the short delay/history syntax used on the command line.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use delaygauge::linalg::Matrix;
use delaygauge::stability::BoundMatrices;
use delaygauge::system::catalog::{linear_system, sin_delay_system};
use delaygauge::system::{
    catalog, CatalogParams, DelayComponent, DelaySignal, HistoryFunction, Rhs, Sinusoid, SystemSpec,
};
use serde::Deserialize;

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: Option<String>,
    pub rhs: Option<RhsConfig>,
    pub dim: Option<usize>,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    pub delays: Option<Vec<DelayConfig>>,
    #[serde(rename = "T")]
    pub delay_bound: Option<f64>,
    pub bounds: Option<BoundsConfig>,
    pub history: Option<HistoryConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Matrix(Rows),
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhsConfig {
    /// `x' = Ax + Σ Bᵢ yᵢ`.
    Linear {
        #[serde(rename = "A")]
        a: Rows,
        #[serde(rename = "B")]
        b: Vec<Rows>,
    },
    /// `x' = Ax + sin(By)`.
    SinDelay {
        #[serde(rename = "A")]
        a: Rows,
        #[serde(rename = "B")]
        b: Rows,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayConfig {
    Constant { value: f64 },
    Mod { period: f64 },
    SinusoidSum { offset: f64, terms: Vec<TermConfig> },
    LiTau { tau: f64, anchors: Vec<usize> },
    Samples { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(rename = "M0")]
    pub m0: Rows,
    #[serde(rename = "Mi")]
    pub mi: Vec<Rows>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HistoryConfig {
    Constant {
        values: Vec<f64>,
    },
    /// Per component `[offset, amplitude, omega, phase]`.
    Sinusoid {
        terms: Vec<[f64; 4]>,
    },
    /// Times covering `[−T, 0]` and one row of values per time.
    Samples {
        times: Vec<f64>,
        values: Rows,
    },
}

pub fn matrix(rows: &Rows, what: &str) -> Result<Matrix> {
    Matrix::from_rows(rows)
        .with_context(|| format!("{what}: rows must be non-empty and of equal length"))
}

impl SystemConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("schema error at `{path}`: {}", e.into_inner())
        })
    }

    pub fn named(name: &str) -> Self {
        Self {
            name: Some(name.to_string()),
            ..Self::default()
        }
    }

    /// Builds the system; `extra` parameters override those in the file.
    pub fn build(&self, extra: &[(String, f64)]) -> Result<SystemSpec> {
        let mut sys = match (&self.name, &self.rhs) {
            (Some(_), Some(_)) => bail!("config gives both `name` and `rhs`; use one"),
            (None, None) => bail!("config needs a catalog `name` or an `rhs`"),
            (Some(name), None) => {
                let mut params = CatalogParams::new();
                if let Some(t) = self.delay_bound {
                    params = params.set("T", t);
                }
                for (k, v) in &self.params {
                    params = match v {
                        ParamValue::Number(x) => params.set(k, *x),
                        ParamValue::Matrix(rows) => params.set_matrix(k, matrix(rows, k)?),
                    };
                }
                for (k, v) in extra {
                    params = params.set(k, *v);
                }
                catalog(name, &params)?
            }
            (None, Some(rhs)) => {
                if !self.params.is_empty() || !extra.is_empty() {
                    bail!("`params` only apply to catalog systems");
                }
                let t = self
                    .delay_bound
                    .context("an `rhs` system needs the delay bound `T`")?;
                match rhs {
                    RhsConfig::Linear { a, b } => {
                        let b = b
                            .iter()
                            .map(|m| matrix(m, "B"))
                            .collect::<Result<Vec<_>>>()?;
                        linear_system("linear", &matrix(a, "A")?, &b, t)?
                    }
                    RhsConfig::SinDelay { a, b } => {
                        sin_delay_system("sin-delay", &matrix(a, "A")?, &matrix(b, "B")?, t)?
                    }
                }
            }
        };
        if let Some(d) = self.dim {
            if d != sys.dim() {
                bail!("`dim` is {d} but the system has dimension {}", sys.dim());
            }
        }
        if let Some(b) = &self.bounds {
            let mi =
                b.mi.iter()
                    .map(|m| matrix(m, "Mi"))
                    .collect::<Result<Vec<_>>>()?;
            sys = sys.with_bounds(BoundMatrices::new(matrix(&b.m0, "M0")?, mi)?)?;
        }
        Ok(sys)
    }

    pub fn delay(&self, bound: f64) -> Result<Option<DelaySignal>> {
        let Some(list) = &self.delays else {
            return Ok(None);
        };
        let comps = list
            .iter()
            .map(|c| match c {
                DelayConfig::Constant { value } => DelayComponent::Constant(*value),
                DelayConfig::Mod { period } => DelayComponent::Mod { period: *period },
                DelayConfig::SinusoidSum { offset, terms } => DelayComponent::SinusoidSum {
                    offset: *offset,
                    terms: terms
                        .iter()
                        .map(|t| Sinusoid {
                            amplitude: t.amplitude,
                            omega: t.omega,
                            phase: t.phase,
                        })
                        .collect(),
                },
                DelayConfig::LiTau { tau, anchors } => DelayComponent::LiTau {
                    tau: *tau,
                    anchors: anchors.clone(),
                },
                DelayConfig::Samples { times, values } => DelayComponent::Sampled {
                    times: times.clone(),
                    values: values.clone(),
                },
            })
            .collect();
        Ok(Some(DelaySignal::new(comps, bound)?))
    }

    pub fn history(&self, span: f64) -> Result<Option<HistoryFunction>> {
        let Some(h) = &self.history else {
            return Ok(None);
        };
        Ok(Some(match h {
            HistoryConfig::Constant { values } => HistoryFunction::constant(values, span)?,
            HistoryConfig::Sinusoid { terms } => HistoryFunction::sinusoid(terms.clone(), span)?,
            HistoryConfig::Samples { times, values } => {
                let dim = values.first().map(Vec::len).unwrap_or(0);
                if values.iter().any(|r| r.len() != dim) {
                    bail!("history samples: every row needs {dim} values");
                }
                HistoryFunction::sampled(times.clone(), values.concat(), dim)?
            }
        }))
    }
}

fn number(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .with_context(|| format!("{what}: `{s}` is not a number"))?;
    if !v.is_finite() {
        bail!("{what}: `{s}` is not finite");
    }
    Ok(v)
}

pub fn numbers(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',').map(|p| number(p, what)).collect()
}

/// `const:V[,V…]`, `mod:P`, `sinsum:OFFSET,A@W[@PHASE],…`, joined by `;`.
pub fn parse_delay(spec: &str, bound: f64) -> Result<DelaySignal> {
    let mut comps = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (kind, body) = part.split_once(':').with_context(|| {
            format!("delay `{part}`: expected KIND:ARGS (const:, mod:, sinsum:)")
        })?;
        match kind.trim() {
            "const" => comps.extend(
                numbers(body, "const delay")?
                    .into_iter()
                    .map(DelayComponent::Constant),
            ),
            "mod" => comps.push(DelayComponent::Mod {
                period: number(body, "mod period")?,
            }),
            "sinsum" => {
                let mut fields = body.split(',');
                let offset = number(fields.next().unwrap_or(""), "sinsum offset")?;
                let terms = fields
                    .map(|t| {
                        let v: Vec<f64> = t
                            .split('@')
                            .map(|x| number(x, "sinsum term"))
                            .collect::<Result<_>>()?;
                        match v[..] {
                            [a, w] => Ok(Sinusoid::sin(a, w)),
                            [a, w, p] => Ok(Sinusoid {
                                amplitude: a,
                                omega: w,
                                phase: p,
                            }),
                            _ => bail!("sinsum term `{t}`: expected AMPLITUDE@OMEGA[@PHASE]"),
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                comps.push(DelayComponent::SinusoidSum { offset, terms });
            }
            other => bail!("unknown delay kind `{other}` (expected const, mod or sinsum)"),
        }
    }
    if comps.is_empty() {
        bail!("empty delay specification");
    }
    Ok(DelaySignal::new(comps, bound)?)
}
