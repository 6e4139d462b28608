use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use supersde::besov::Mollifier;
use supersde::drift::{AntisymmetricField, DriftSpec};
use supersde::spectral::{read_field, ScalarField, TorusGrid, TrigPolynomial};

use crate::DriftArgs;

pub fn drift_spec(path: &Path) -> Result<DriftSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing drift spec {}", path.display()))
}

/// Drift spec, its grid and the (optionally mollified) potential.
pub fn potential(args: &DriftArgs) -> Result<(DriftSpec, TorusGrid, AntisymmetricField)> {
    let spec = drift_spec(&args.drift)?;
    let grid = spec.grid.build()?;
    let mut a = spec.build_on(&grid)?;
    if let Some(n) = args.n {
        let m = Mollifier::new(grid.dim(), n)?;
        if let Some(w) = m.resolution_warning(&grid) {
            eprintln!("warning: {w}");
        }
        a = a.mollify(&m);
    }
    Ok((spec, grid, a))
}

/// An SSL1 snapshot, or a trigonometric polynomial given inline (`{...}`)
/// or as a `.json` file, sampled on `grid`.
pub fn field(arg: &str, grid: &TorusGrid) -> Result<ScalarField> {
    let text = if arg.trim_start().starts_with('{') {
        Some(arg.to_string())
    } else if arg.ends_with(".json") {
        Some(fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?)
    } else {
        None
    };
    let f = match text {
        Some(t) => {
            let p: TrigPolynomial = serde_json::from_str(&t).context("parsing mode spec")?;
            p.validate(grid)?;
            p.sample(grid)?
        }
        None => read_field(arg).with_context(|| format!("reading field {arg}"))?,
    };
    if f.grid() != grid {
        bail!("field {arg} lives on a different grid than the drift");
    }
    Ok(f)
}

/// Accepts `inf` for an infinite exponent.
pub fn exponent(s: &str) -> std::result::Result<f64, String> {
    match s {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| e.to_string()),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
