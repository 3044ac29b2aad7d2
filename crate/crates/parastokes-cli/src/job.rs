//! Job files: a TOML document with `[system]`, `[grid]`, `[options]` and
//! `[commands]` sections.

use num_complex::Complex64 as C64;
use parastokes::{ParamSystem, ParameterGrid};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct JobError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, JobError> {
    Err(JobError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Analyze,
    Stokes,
    Monodromy,
    Report,
    Integrability,
    Isomonodromy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Stokes => "stokes",
            Command::Monodromy => "monodromy",
            Command::Report => "report",
            Command::Integrability => "integrability",
            Command::Isomonodromy => "isomonodromy",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJob {
    system: RawSystem,
    grid: RawGrid,
    #[serde(default)]
    options: RawOptions,
    #[serde(default)]
    commands: RawCommands,
    witnesses: Option<RawWitnesses>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(default)]
    params: Vec<String>,
    /// Row-major entries.
    matrix: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    samples: Vec<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    order: Option<i64>,
    tol: Option<f64>,
    offset: Option<f64>,
    clearance: Option<f64>,
    radii: Option<Vec<f64>>,
    base: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCommands {
    #[serde(default)]
    run: Vec<Command>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWitnesses {
    matrices: Vec<Vec<String>>,
}

#[derive(Clone, Debug)]
pub struct Options {
    pub order: i64,
    pub tol: f64,
    /// Side-ray offset for the Stokes matrices.
    pub offset: Option<f64>,
    pub clearance: Option<f64>,
    /// Sample radii along each Stokes direction.
    pub radii: Option<Vec<f64>>,
    pub base: Option<C64>,
}

#[derive(Clone, Debug)]
pub struct Job {
    pub system: ParamSystem,
    pub matrix: Vec<String>,
    pub grid: ParameterGrid,
    pub options: Options,
    pub commands: Vec<Command>,
    pub witnesses: Option<Vec<ParamSystem>>,
}

/// Parses `a`, `bi`, `a+bi`, `a-bi`, `i` and `-i` with optional exponents.
pub fn parse_complex(s: &str) -> Result<C64, JobError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || JobError(format!("'{s}' is not a complex literal"));
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|x| C64::new(x, 0.0)).map_err(|_| bad());
    };
    // split before the sign that starts the imaginary part
    let b = body.as_bytes();
    let split = (1..b.len()).rev().find(|&k| (b[k] == b'+' || b[k] == b'-') && !matches!(b[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().map_err(|_| bad())?,
    };
    let re = re.parse::<f64>().map_err(|_| bad())?;
    Ok(C64::new(re, im))
}

fn check_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<(), JobError> {
    if !(v > lo && v <= hi) || !v.is_finite() {
        return err(format!("option {name} = {v} outside ({lo}, {hi}]"));
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Job, JobError> {
    let text = std::fs::read_to_string(path).map_err(|e| JobError(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Job, JobError> {
    let raw: RawJob = toml::from_str(text).map_err(|e| JobError(format!("job file: {e}")))?;
    let params: Vec<&str> = raw.system.params.iter().map(|s| s.as_str()).collect();
    let entries: Vec<&str> = raw.system.matrix.iter().map(|s| s.as_str()).collect();
    let system = ParamSystem::parse(&entries, &params).map_err(|e| JobError(format!("system: {e}")))?;
    let mut samples = Vec::with_capacity(raw.grid.samples.len());
    for (k, row) in raw.grid.samples.iter().enumerate() {
        if row.len() != params.len() {
            return err(format!("grid sample {k} has {} values for {} parameters", row.len(), params.len()));
        }
        samples.push(row.iter().map(|x| parse_complex(x)).collect::<Result<Vec<_>, _>>()?);
    }
    let grid = ParameterGrid::new(raw.system.params.clone(), samples).map_err(|e| JobError(e.to_string()))?;
    let o = raw.options;
    let order = o.order.unwrap_or(60);
    if !(4..=400).contains(&order) {
        return err(format!("option order = {order} outside [4, 400]"));
    }
    let tol = o.tol.unwrap_or(1e-5);
    check_range("tol", tol, 0.0, 0.1)?;
    if let Some(x) = o.offset {
        check_range("offset", x, 0.0, std::f64::consts::PI)?;
    }
    if let Some(x) = o.clearance {
        check_range("clearance", x, 0.0, 0.5)?;
    }
    if let Some(r) = &o.radii {
        if r.is_empty() {
            return err("option radii is empty");
        }
        for &x in r {
            check_range("radii", x, 0.0, 1e6)?;
        }
    }
    let base = o.base.as_deref().map(parse_complex).transpose()?;
    let witnesses = match raw.witnesses {
        None => None,
        Some(w) => Some(
            w.matrices
                .iter()
                .map(|m| {
                    let e: Vec<&str> = m.iter().map(|s| s.as_str()).collect();
                    ParamSystem::parse(&e, &params).map_err(|e| JobError(format!("witness: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    Ok(Job {
        system,
        matrix: raw.system.matrix,
        grid,
        options: Options { order, tol, offset: o.offset, clearance: o.clearance, radii: o.radii, base },
        commands: raw.commands.run,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        let cases = [
            ("1", C64::new(1.0, 0.0)),
            ("1+1i", C64::new(1.0, 1.0)),
            ("-0.5-2i", C64::new(-0.5, -2.0)),
            ("i", C64::new(0.0, 1.0)),
            ("-i", C64::new(0.0, -1.0)),
            ("2.5i", C64::new(0.0, 2.5)),
            ("1e-3+2E+1i", C64::new(1e-3, 20.0)),
            (" 1 + i ", C64::new(1.0, 1.0)),
        ];
        for (s, want) in cases {
            assert_eq!(parse_complex(s).unwrap(), want, "{s}");
        }
        for s in ["", "abc", "1+", "1+2j"] {
            assert!(parse_complex(s).is_err(), "{s}");
        }
    }

    #[test]
    fn job_validation() {
        let ok = r#"
            [system]
            params = ["t"]
            matrix = ["t/z"]
            [grid]
            samples = [["0.2"], ["0.3+0.1i"]]
            [commands]
            run = ["isomonodromy"]
        "#;
        let job = parse(ok).unwrap();
        assert_eq!(job.grid.len(), 2);
        assert_eq!(job.commands, vec![Command::Isomonodromy]);
        let arity = ok.replace(r#"["0.2"]"#, r#"["0.2", "1"]"#);
        assert!(parse(&arity).is_err());
        let square = ok.replace(r#"["t/z"]"#, r#"["t/z", "0"]"#);
        assert!(parse(&square).is_err());
        let order = format!("{ok}\n[options]\norder = 1\n");
        assert!(parse(&order).is_err());
    }
}
