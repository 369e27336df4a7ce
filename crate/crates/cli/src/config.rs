//! Run configuration: a flat `key = value` file with `[section]` headers.
//!
//! ```text
//! # whole-line comments start with '#'
//! [model]
//! a = 0.5
//! D = 1
//! [initial]
//! u0 = gaussian(center = 0, width = 2, amplitude = 0.5)
//! [output]
//! dir = "runs/demo"
//! ```
//!
//! Every key is optional; missing keys take the values printed by
//! `RunConfig::default().emit()`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fhr_core::params::validate;
use fhr_core::{FdmOptions, Grid, ModelParams, PicardSpec, Profile, QuadratureSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] fhr_core::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        message: message.into(),
    }
}

/// Generators for the three initial profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub u0: Profile,
    pub w0: Profile,
    pub y0: Profile,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            u0: Profile::Gaussian {
                center: 0.0,
                width: 2.0,
                amplitude: 0.5,
            },
            w0: Profile::Zero,
            y0: Profile::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: Grid,
    pub initial: InitialSpec,
    pub picard: PicardSpec,
    pub quad: QuadratureSpec,
    /// Also run the finite-difference solver and compare.
    pub oracle: bool,
    pub fdm: FdmOptions,
    pub output_dir: PathBuf,
    pub seed_label: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::demo(),
            grid: Grid::default(),
            initial: InitialSpec::default(),
            picard: PicardSpec::default(),
            quad: QuadratureSpec::default(),
            oracle: false,
            fdm: FdmOptions::default(),
            output_dir: PathBuf::from("runs/fhr"),
            seed_label: String::new(),
        }
    }
}

/// How strictly the model constants are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// Every model invariant.
    Full,
    /// Also admits `eps = 0` and/or `delta = 0`, the memoryless limits in
    /// which the kernel is still defined, and any positive `a`.
    Kernel,
}

impl RunConfig {
    pub fn validate(&self, strictness: Strictness) -> Result<(), ConfigError> {
        let mut params = self.params;
        if strictness == Strictness::Kernel {
            if params.eps == 0.0 {
                params.eps = 1.0;
            }
            if params.delta == 0.0 {
                params.delta = 1.0;
            }
            if params.a >= 1.0 {
                params.a = 0.5;
            }
        }
        for (name, prof) in [("u0", self.initial.u0), ("w0", self.initial.w0), ("y0", self.initial.y0)] {
            prof.validate(name)?;
        }
        validate(params, self.initial.u0.sup(), self.initial.w0.sup(), self.initial.y0.sup())?;
        self.grid.validate()?;
        self.picard.validate()?;
        self.quad.validate()?;
        if self.fdm.substeps == Some(0) {
            return Err(fhr_core::Error::Configuration("fdm_substeps must be positive".into()).into());
        }
        Ok(())
    }

    /// Whether the model constants are the shipped demonstration set.
    pub fn uses_demo_params(&self) -> bool {
        self.params == ModelParams::demo()
    }

    /// Canonical text form; `parse_str(&c.emit())` reproduces `c`.
    pub fn emit(&self) -> String {
        let p = &self.params;
        let g = &self.grid;
        let mut s = String::new();
        let _ = writeln!(s, "[model]");
        for (k, v) in [
            ("a", p.a),
            ("D", p.diffusion),
            ("eps", p.eps),
            ("beta", p.beta),
            ("delta", p.delta),
            ("d", p.d),
            ("c", p.c),
            ("h", p.h),
        ] {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "x_min = {:?}", g.x_min);
        let _ = writeln!(s, "x_max = {:?}", g.x_max);
        let _ = writeln!(s, "nx = {}", g.nx);
        let _ = writeln!(s, "t_max = {:?}", g.t_max);
        let _ = writeln!(s, "nt = {}", g.nt);
        let _ = writeln!(s, "\n[initial]");
        for (k, prof) in [("u0", self.initial.u0), ("w0", self.initial.w0), ("y0", self.initial.y0)] {
            let _ = writeln!(s, "{k} = {}", emit_profile(&prof));
        }
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "tol = {:?}", self.picard.tol);
        let _ = writeln!(s, "max_iter = {}", self.picard.max_iter);
        let _ = writeln!(s, "oracle = {}", self.oracle);
        match self.fdm.substeps {
            Some(n) => {
                let _ = writeln!(s, "fdm_substeps = {n}");
            }
            None => {
                let _ = writeln!(s, "fdm_substeps = auto");
            }
        }
        let _ = writeln!(s, "quad_rel_tol = {:?}", self.quad.rel_tol);
        let _ = writeln!(s, "quad_abs_tol = {:?}", self.quad.abs_tol);
        let _ = writeln!(s, "quad_max_subdivisions = {}", self.quad.max_subdivisions);
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", quote(&self.output_dir.to_string_lossy()));
        let _ = writeln!(s, "label = {}", quote(&self.seed_label));
        s
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn emit_profile(p: &Profile) -> String {
    match *p {
        Profile::Zero => "zero".into(),
        Profile::Constant { value } => format!("constant(value = {value:?})"),
        Profile::Gaussian {
            center,
            width,
            amplitude,
        } => format!("gaussian(center = {center:?}, width = {width:?}, amplitude = {amplitude:?})"),
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path, strictness: Strictness) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config = parse_str(&text)?;
    config.validate(strictness)?;
    Ok(config)
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("model", &["a", "D", "eps", "beta", "delta", "d", "c", "h"]),
    ("grid", &["x_min", "x_max", "nx", "t_max", "nt"]),
    ("initial", &["u0", "w0", "y0"]),
    (
        "solver",
        &[
            "tol",
            "max_iter",
            "oracle",
            "fdm_substeps",
            "quad_rel_tol",
            "quad_abs_tol",
            "quad_max_subdivisions",
        ],
    ),
    ("output", &["dir", "label"]),
];

/// Parses configuration text without range validation.
pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    let mut section: Option<&'static str> = None;
    let mut seen: HashMap<(&'static str, &'static str), usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, "unterminated section header"))?
                .trim();
            let (known, _) = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| parse_err(line, format!("unknown section [{name}]")))?;
            section = Some(known);
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected `key = value`, got `{trimmed}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.ok_or_else(|| parse_err(line, format!("key `{key}` before any [section]")))?;
        let keys = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        let key: &'static str = keys
            .iter()
            .find(|k| **k == key)
            .copied()
            .ok_or_else(|| parse_err(line, format!("unknown key `{key}` in [{sec}]")))?;
        if let Some(first) = seen.insert((sec, key), line) {
            return Err(parse_err(line, format!("duplicate key `{key}` in [{sec}] (first set on line {first})")));
        }
        assign(&mut config, sec, key, value).map_err(|m| parse_err(line, m))?;
    }
    Ok(config)
}

fn num(value: &str) -> Result<f64, String> {
    value.parse::<f64>().map_err(|_| format!("`{value}` is not a number"))
}

fn count(value: &str) -> Result<usize, String> {
    value.parse::<usize>().map_err(|_| format!("`{value}` is not a non-negative integer"))
}

fn text(value: &str) -> Result<String, String> {
    if value.starts_with('"') {
        serde_json::from_str::<String>(value).map_err(|e| format!("bad quoted string: {e}"))
    } else {
        Ok(value.to_string())
    }
}

fn assign(c: &mut RunConfig, section: &str, key: &str, value: &str) -> Result<(), String> {
    let p = &mut c.params;
    match (section, key) {
        ("model", "a") => p.a = num(value)?,
        ("model", "D") => p.diffusion = num(value)?,
        ("model", "eps") => p.eps = num(value)?,
        ("model", "beta") => p.beta = num(value)?,
        ("model", "delta") => p.delta = num(value)?,
        ("model", "d") => p.d = num(value)?,
        ("model", "c") => p.c = num(value)?,
        ("model", "h") => p.h = num(value)?,
        ("grid", "x_min") => c.grid.x_min = num(value)?,
        ("grid", "x_max") => c.grid.x_max = num(value)?,
        ("grid", "nx") => c.grid.nx = count(value)?,
        ("grid", "t_max") => c.grid.t_max = num(value)?,
        ("grid", "nt") => c.grid.nt = count(value)?,
        ("initial", "u0") => c.initial.u0 = parse_profile(value)?,
        ("initial", "w0") => c.initial.w0 = parse_profile(value)?,
        ("initial", "y0") => c.initial.y0 = parse_profile(value)?,
        ("solver", "tol") => c.picard.tol = num(value)?,
        ("solver", "max_iter") => c.picard.max_iter = count(value)?,
        ("solver", "oracle") => {
            c.oracle = match value {
                "true" => true,
                "false" => false,
                other => return Err(format!("`{other}` is not true or false")),
            }
        }
        ("solver", "fdm_substeps") => {
            c.fdm.substeps = if value == "auto" { None } else { Some(count(value)?) }
        }
        ("solver", "quad_rel_tol") => c.quad.rel_tol = num(value)?,
        ("solver", "quad_abs_tol") => c.quad.abs_tol = num(value)?,
        ("solver", "quad_max_subdivisions") => c.quad.max_subdivisions = count(value)?,
        ("output", "dir") => c.output_dir = PathBuf::from(text(value)?),
        ("output", "label") => c.seed_label = text(value)?,
        _ => unreachable!("keys are checked against SECTIONS"),
    }
    Ok(())
}

/// `zero`, `constant(value = v)` or `gaussian(center = c, width = w, amplitude = A)`.
pub fn parse_profile(value: &str) -> Result<Profile, String> {
    let (name, args) = match value.split_once('(') {
        Some((name, rest)) => {
            let inner = rest
                .trim_end()
                .strip_suffix(')')
                .ok_or_else(|| format!("missing `)` in `{value}`"))?;
            (name.trim(), inner)
        }
        None => (value.trim(), ""),
    };
    let mut fields: HashMap<&str, f64> = HashMap::new();
    for part in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected `name = value` in `{part}`"))?;
        if fields.insert(k.trim(), num(v.trim())?).is_some() {
            return Err(format!("argument `{}` given twice", k.trim()));
        }
    }
    let mut take = |k: &str| fields.remove(k).ok_or_else(|| format!("{name} needs `{k}`"));
    let profile = match name {
        "zero" => Profile::Zero,
        "constant" => Profile::Constant { value: take("value")? },
        "gaussian" => Profile::Gaussian {
            center: take("center")?,
            width: take("width")?,
            amplitude: take("amplitude")?,
        },
        other => return Err(format!("unknown profile `{other}` (zero, constant, gaussian)")),
    };
    if let Some(k) = fields.keys().next() {
        return Err(format!("{name} takes no argument `{k}`"));
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_model_section_uses_defaults() {
        let c = parse_str("[model]\na=0.5\nD=1\neps=0.08\nbeta=0.8\ndelta=0.04\nd=1\n").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate(Strictness::Full).unwrap();
    }

    #[test]
    fn duplicate_key_names_line() {
        let err = parse_str("[model]\na = 0.5\n\na = 0.4\n").unwrap_err();
        match err {
            ConfigError::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("line 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        assert!(matches!(parse_str("[model]\nalpha = 1\n"), Err(ConfigError::Parse { line: 2, .. })));
        assert!(matches!(parse_str("[extras]\n"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_str("a = 1\n"), Err(ConfigError::Parse { line: 1, .. })));
    }

    #[test]
    fn out_of_range_constant_fails_validation() {
        let c = parse_str("[model]\na = 1.5\n").unwrap();
        match c.validate(Strictness::Full) {
            Err(ConfigError::Invalid(fhr_core::Error::Validation { name, .. })) => assert_eq!(name, "a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn memoryless_limits_only_for_kernel_use() {
        let c = parse_str("[model]\neps = 0\ndelta = 0\n").unwrap();
        assert!(c.validate(Strictness::Full).is_err());
        c.validate(Strictness::Kernel).unwrap();
    }

    #[test]
    fn profiles() {
        assert_eq!(parse_profile("zero").unwrap(), Profile::Zero);
        assert_eq!(parse_profile("constant(value=2)").unwrap(), Profile::Constant { value: 2.0 });
        assert!(parse_profile("gaussian(center = 0, width = 1)").is_err());
        assert!(parse_profile("constant(value = 1, extra = 2)").is_err());
        assert!(parse_profile("step(value = 1)").is_err());
    }

    #[test]
    fn default_round_trips() {
        let c = RunConfig {
            seed_label: "run #1 \"quoted\"".into(),
            ..RunConfig::default()
        };
        assert_eq!(parse_str(&c.emit()).unwrap(), c);
    }

    fn profile() -> impl Strategy<Value = Profile> {
        prop_oneof![
            Just(Profile::Zero),
            any::<f64>().prop_map(|value| Profile::Constant { value }),
            (any::<f64>(), any::<f64>(), any::<f64>())
                .prop_map(|(center, width, amplitude)| Profile::Gaussian { center, width, amplitude }),
        ]
    }

    proptest! {
        #[test]
        fn emitted_text_parses_back(
            a in any::<f64>(),
            eps in any::<f64>(),
            c in any::<f64>(),
            nx in 2usize..100_000,
            t_max in any::<f64>(),
            u0 in profile(),
            y0 in profile(),
            max_iter in 1usize..10_000,
            oracle in any::<bool>(),
            substeps in proptest::option::of(1usize..1000),
            label in "[ -~]{0,20}",
        ) {
            let mut cfg = RunConfig::default();
            cfg.params.a = a;
            cfg.params.eps = eps;
            cfg.params.c = c;
            cfg.grid.nx = nx;
            cfg.grid.t_max = t_max;
            cfg.initial.u0 = u0;
            cfg.initial.y0 = y0;
            cfg.picard.max_iter = max_iter;
            cfg.oracle = oracle;
            cfg.fdm.substeps = substeps;
            cfg.seed_label = label;
            let back = parse_str(&cfg.emit()).unwrap();
            // NaN never equals itself, so compare the canonical text instead.
            prop_assert_eq!(back.emit(), cfg.emit());
        }
    }
}
