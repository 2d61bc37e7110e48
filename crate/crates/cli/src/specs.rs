//! Compact text forms of weights and operators, accepted on the command
//! line and as strings inside configs.

use ma_lab_core::operators::{OperatorConfig, OperatorSpec};
use ma_lab_core::weights::{WeightFamily, WeightSpec};
use serde::{Deserialize, Serialize};

/// `family[:p=<p>][:n=<n>]`, e.g. `logp:p=2:n=1`, or the config object form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightArg {
    Text(String),
    Spec(WeightSpec),
}

/// `kind[:k=<k>][:n=<n>][:delta=<d>]`, e.g. `sigma-k-root:k=2:n=3`, or the config object form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorArg {
    Text(String),
    Config(OperatorConfig),
}

fn split_pairs(text: &str) -> Result<(String, Vec<(String, String)>), String> {
    let mut parts = text.split(':');
    let head = parts.next().unwrap_or_default().trim().to_string();
    if head.is_empty() {
        return Err(format!("empty specification '{text}'"));
    }
    let pairs = parts
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| format!("expected key=value in '{text}', got '{p}'"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((head, pairs))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("bad value '{v}' for {key}"))
}

pub fn parse_weight_text(text: &str) -> Result<WeightSpec, String> {
    let (head, pairs) = split_pairs(text)?;
    let family: WeightFamily = head
        .parse()
        .map_err(|e: ma_lab_core::error::LabError| e.to_string())?;
    if family == WeightFamily::Tabulated {
        return Err("tabulated weights need a table file (--table)".into());
    }
    let (mut p, mut n) = (1.0, 1);
    for (k, v) in pairs {
        match k.as_str() {
            "p" => p = num(&k, &v)?,
            "n" => n = num(&k, &v)?,
            _ => return Err(format!("unknown weight key '{k}'")),
        }
    }
    Ok(WeightSpec::named(family, p, n))
}

pub fn parse_operator_text(text: &str) -> Result<OperatorConfig, String> {
    let (kind, pairs) = split_pairs(text)?;
    let mut cfg = OperatorConfig {
        kind,
        k: None,
        n: 1,
        delta: None,
        table: None,
    };
    for (k, v) in pairs {
        match k.as_str() {
            "k" => cfg.k = Some(num(&k, &v)?),
            "n" => cfg.n = num(&k, &v)?,
            "delta" => cfg.delta = Some(num(&k, &v)?),
            _ => return Err(format!("unknown operator key '{k}'")),
        }
    }
    Ok(cfg)
}

pub fn weight_arg(text: &str) -> Result<WeightArg, String> {
    parse_weight_text(text).map(|_| WeightArg::Text(text.to_string()))
}

pub fn operator_arg(text: &str) -> Result<OperatorArg, String> {
    parse_operator_text(text).map(|_| OperatorArg::Text(text.to_string()))
}

impl WeightArg {
    pub fn resolve(&self) -> Result<WeightSpec, String> {
        match self {
            WeightArg::Text(t) => parse_weight_text(t),
            WeightArg::Spec(s) => Ok(s.clone()),
        }
    }
}

impl OperatorArg {
    pub fn config(&self) -> Result<OperatorConfig, String> {
        match self {
            OperatorArg::Text(t) => parse_operator_text(t),
            OperatorArg::Config(c) => Ok(c.clone()),
        }
    }

    pub fn spec(&self) -> Result<OperatorSpec, String> {
        self.config()?.into_spec().map_err(|e| e.to_string())
    }
}
