//! Plain-text environment files.
//!
//! ```text
//! # comment lines start with '#'
//! <d> <rho> <sigma> <c_b> <c_w> <offset_c>
//! w_star <w_1> ... <w_d>
//! <index> <x_1> ... <x_d> <f0>
//! ...
//! ```
//!
//! Reals are written with 17 significant digits so a file round-trips
//! bit-for-bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;

use super::actions::ActionSet;
use super::env::{BanditEnvironment, EnvKind, NoiseModel};
use super::spec::GamSpec;
use crate::error::{Error, Result};

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn env_to_string(env: &BanditEnvironment) -> String {
    let spec = env.spec();
    let mut out = String::new();
    out.push_str("# gapband environment: d rho sigma c_b c_w offset_c\n");
    let _ = writeln!(
        out,
        "{} {} {} {} {} {}",
        spec.dim(),
        real(spec.rho()),
        real(env.noise_sigma()),
        real(spec.c_b()),
        real(spec.c_w()),
        real(env.offset_c())
    );
    out.push_str("w_star");
    for v in spec.w_star().iter() {
        let _ = write!(out, " {}", real(*v));
    }
    out.push('\n');
    for (i, (x, f0)) in spec
        .actions()
        .points()
        .iter()
        .zip(env.f0_values())
        .enumerate()
    {
        let _ = write!(out, "{i}");
        for v in x.iter() {
            let _ = write!(out, " {}", real(*v));
        }
        let _ = writeln!(out, " {}", real(*f0));
    }
    out
}

pub fn env_from_str(text: &str) -> Result<BanditEnvironment> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines
        .next()
        .ok_or_else(|| format_err(1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(format_err(
            hline,
            "header needs d rho sigma c_b c_w offset_c",
        ));
    }
    let d: usize = fields[0]
        .parse()
        .map_err(|_| format_err(hline, "d is not an integer"))?;
    let nums: Vec<f64> = fields[1..]
        .iter()
        .map(|f| parse_real(hline, f))
        .collect::<Result<_>>()?;
    let (rho, sigma, c_b, c_w, offset) = (nums[0], nums[1], nums[2], nums[3], nums[4]);

    let (wline, wtext) = lines
        .next()
        .ok_or_else(|| format_err(hline + 1, "missing w_star line"))?;
    let mut wfields = wtext.split_whitespace();
    if wfields.next() != Some("w_star") {
        return Err(format_err(wline, "expected 'w_star'"));
    }
    let w: Vec<f64> = wfields
        .map(|f| parse_real(wline, f))
        .collect::<Result<_>>()?;
    if w.len() != d {
        return Err(format_err(wline, "w_star length differs from d"));
    }

    let mut points = Vec::new();
    let mut f0 = Vec::new();
    for (ln, row) in lines {
        let fields: Vec<&str> = row.split_whitespace().collect();
        if fields.len() != d + 2 {
            return Err(format_err(ln, &format!("expected {} fields", d + 2)));
        }
        let idx: usize = fields[0]
            .parse()
            .map_err(|_| format_err(ln, "index is not an integer"))?;
        if idx != points.len() {
            return Err(format_err(ln, "action indices must be consecutive from 0"));
        }
        let x: Vec<f64> = fields[1..=d]
            .iter()
            .map(|f| parse_real(ln, f))
            .collect::<Result<_>>()?;
        points.push(DVector::from_vec(x));
        f0.push(parse_real(ln, fields[d + 1])?);
    }

    let actions = ActionSet::from_points(points, c_b)?;
    let spec = GamSpec::new(DVector::from_vec(w), c_w, rho, actions)?;
    let kind = if offset == 0.0 {
        EnvKind::Strict
    } else {
        EnvKind::Weak
    };
    if !(sigma >= 0.0) {
        return Err(format_err(hline, "sigma must be non-negative"));
    }
    BanditEnvironment::from_parts(spec, kind, f0, NoiseModel::gaussian(sigma), offset)
}

pub fn write_env(env: &BanditEnvironment, path: &Path) -> Result<()> {
    fs::write(path, env_to_string(env)).map_err(|e| Error::io(path, e))
}

pub fn read_env(path: &Path) -> Result<BanditEnvironment> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    env_from_str(&text)
}

fn parse_real(line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| format_err(line, &format!("'{s}' is not a number")))
}

fn format_err(line: usize, message: &str) -> Error {
    Error::EnvFormat {
        line,
        message: message.to_string(),
    }
}
