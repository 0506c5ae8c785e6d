use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizer::Constraint;
use crate::replica::{AssetUniverse, Penalty, RegularizerParams};

/// Grid points are rounded to this many decimals so `0.1:1.0:0.1` hits 1.0 exactly.
const GRID_DECIMALS: i32 = 12;

/// Parse `start:stop:step` (stop included) or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Spec(format!("invalid r grid '{text}': {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0 && stop >= start) {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| round_grid(start + k as f64 * step)).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() {
        return Err(bad("no points"));
    }
    if let Some(r) = grid.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(bad(&format!("ratio {r} is not positive")));
    }
    Ok(grid)
}

fn round_grid(x: f64) -> f64 {
    let scale = 10f64.powi(GRID_DECIMALS);
    (x * scale).round() / scale
}

/// Source of the per-asset standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSpec {
    Constant(f64),
    File(String),
    LogNormal { mu: f64, s: f64, seed: u64 },
}

impl SigmaSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::Spec(format!("invalid sigma spec '{text}': {why}"));
        let (kind, arg) = text.split_once(':').ok_or_else(|| bad("expected const:, file: or lognormal:"))?;
        match kind {
            "const" => {
                let v: f64 = arg.trim().parse().map_err(|_| bad("not a number"))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(bad("must be positive"));
                }
                Ok(SigmaSpec::Constant(v))
            }
            "file" if !arg.is_empty() => Ok(SigmaSpec::File(arg.to_string())),
            "lognormal" => {
                let parts: Vec<&str> = arg.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(bad("expected lognormal:<mu>,<s>,<seed>"));
                }
                let mu: f64 = parts[0].parse().map_err(|_| bad("mu is not a number"))?;
                let s: f64 = parts[1].parse().map_err(|_| bad("s is not a number"))?;
                let seed: u64 = parts[2].parse().map_err(|_| bad("seed is not an unsigned integer"))?;
                if !(mu.is_finite() && s.is_finite() && s >= 0.0) {
                    return Err(bad("need finite mu and s >= 0"));
                }
                Ok(SigmaSpec::LogNormal { mu, s, seed })
            }
            _ => Err(bad("unknown kind")),
        }
    }

    /// The σ values; `n` is required except for files, where it must match if given.
    pub fn resolve(&self, n: Option<usize>) -> Result<Vec<f64>> {
        let need_n = || n.ok_or_else(|| Error::Spec("--n is required unless sigmas come from a file".into()));
        match self {
            SigmaSpec::Constant(v) => Ok(vec![*v; need_n()?]),
            SigmaSpec::LogNormal { mu, s, seed } => {
                let dist = LogNormal::new(*mu, *s).map_err(|e| Error::Spec(format!("lognormal sigma: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..need_n()?).map(|_| dist.sample(&mut rng)).collect())
            }
            SigmaSpec::File(path) => {
                let values = read_sigma_file(Path::new(path))?;
                if let Some(n) = n {
                    if n != values.len() {
                        return Err(Error::Spec(format!("--n {n} does not match the {} sigmas in {path}", values.len())));
                    }
                }
                Ok(values)
            }
        }
    }
}

/// One positive decimal per line; blank lines and `#` comments are skipped.
pub fn read_sigma_file(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Spec(format!("cannot read sigma file {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v: f64 = body
            .parse()
            .map_err(|_| Error::Spec(format!("{}:{}: '{body}' is not a number", path.display(), lineno + 1)))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Spec(format!("{}:{}: sigma must be positive, got {v}", path.display(), lineno + 1)));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Spec(format!("sigma file {} holds no values", path.display())));
    }
    Ok(out)
}

/// `inf` (any case) or a nonnegative number.
pub fn parse_penalty(text: &str) -> std::result::Result<Penalty, String> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(Penalty::Infinite);
    }
    match t.parse::<f64>() {
        Ok(v) if v == f64::INFINITY => Ok(Penalty::Infinite),
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(Penalty::Finite(v)),
        _ => Err(format!("expected a nonnegative number or 'inf', got '{text}'")),
    }
}

/// Fully resolved run description embedded in every output file.
///
/// The worker count and the output path are left out: neither may change the
/// contents of a file. Fields a command does not use are null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub command: String,
    pub version: String,
    pub r_grid: Vec<f64>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub sigma: Option<String>,
    pub sigmas: Vec<f64>,
    pub constraint: Option<Constraint>,
    pub eta1: Option<f64>,
    /// A number, the string `"inf"`, or null when the command has no penalties.
    pub eta2: serde_json::Value,
    pub seed: Option<u64>,
    pub bin_width: Option<f64>,
    pub inputs: Vec<String>,
    /// Set when `simulate` also reports the susceptibility proxy.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub experimental_delta: bool,
}

impl RunSpec {
    pub fn universe(&self) -> Result<AssetUniverse> {
        AssetUniverse::new(self.sigmas.clone()).map_err(|e| Error::Spec(e.to_string()))
    }
}

pub fn penalty_json(p: Penalty) -> serde_json::Value {
    match p {
        Penalty::Infinite => serde_json::Value::String("inf".into()),
        Penalty::Finite(v) => serde_json::json!(v),
    }
}

/// Penalties implied by a constraint, overridden by explicit values.
pub fn regularizer(constraint: Constraint, eta1: Option<f64>, eta2: Option<Penalty>) -> Result<RegularizerParams> {
    let base = match constraint {
        Constraint::Equality => RegularizerParams::unconstrained(),
        Constraint::NoShort => RegularizerParams::no_short(),
    };
    RegularizerParams::new(eta1.unwrap_or(base.eta1), eta2.unwrap_or(base.eta2)).map_err(|e| Error::Spec(e.to_string()))
}
