//! Plain-text tabular format.
//!
//! ```text
//! # optional comment lines
//! spec <free text>                      (optional, describes a delay construction)
//! mdp <n_states> <n_actions> <discount> <r_max> <signed|unsigned>
//! init <d0(0)> ... <d0(n-1)>
//! coords <dim>                          (optional)
//! <x_0> ... <x_dim-1>                   (one line per state)
//! <s> <a> <reward> <p(0|s,a)> ... <p(n-1|s,a)>   (one line per pair)
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a write/read
//! cycle reproduces every value bit for bit.

use super::FiniteMdp;
use crate::error::{Error, Result};
use std::fmt::Write as _;

fn push_floats(out: &mut String, xs: &[f64]) {
    for x in xs {
        let _ = write!(out, " {x:?}");
    }
}

/// Serializes an MDP; `spec` adds a header line recording a delay construction.
pub fn write_mdp(mdp: &FiniteMdp, spec: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(spec) = spec {
        let _ = writeln!(out, "spec {}", spec.replace('\n', " "));
    }
    let _ = writeln!(
        out,
        "mdp {} {} {:?} {:?} {}",
        mdp.n_states(),
        mdp.n_actions(),
        mdp.discount(),
        mdp.r_max(),
        if mdp.signed_rewards() {
            "signed"
        } else {
            "unsigned"
        }
    );
    out.push_str("init");
    push_floats(&mut out, mdp.initial_dist());
    out.push('\n');
    if let Some(coords) = mdp.state_coords() {
        let _ = writeln!(out, "coords {}", coords[0].len());
        for c in coords {
            let mut line = String::new();
            push_floats(&mut line, c);
            out.push_str(line.trim_start());
            out.push('\n');
        }
    }
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let _ = write!(out, "{s} {a} {:?}", mdp.r(s, a));
            push_floats(&mut out, mdp.p(s, a));
            out.push('\n');
        }
    }
    out
}

/// Parsed file: the MDP plus the optional spec header.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMdp {
    pub mdp: FiniteMdp,
    pub spec: Option<String>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn floats(line: usize, toks: &[&str]) -> Result<Vec<f64>> {
    toks.iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| parse_err(line, format!("bad number {t:?}: {e}")))
        })
        .collect()
}

/// Parses the format produced by [`write_mdp`].
pub fn read_mdp(text: &str) -> Result<ParsedMdp> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut spec = None;
    let (mut ln, mut line) = lines.next().ok_or_else(|| parse_err(0, "empty input"))?;
    if let Some(rest) = line.strip_prefix("spec ") {
        spec = Some(rest.to_string());
        (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(ln, "missing header"))?;
    }
    let head: Vec<&str> = line.split_whitespace().collect();
    if head.len() != 6 || head[0] != "mdp" {
        return Err(parse_err(
            ln,
            "expected `mdp <S> <A> <discount> <r_max> <signed|unsigned>`",
        ));
    }
    let ns: usize = head[1]
        .parse()
        .map_err(|_| parse_err(ln, "bad state count"))?;
    let na: usize = head[2]
        .parse()
        .map_err(|_| parse_err(ln, "bad action count"))?;
    let hdr = floats(ln, &head[3..5])?;
    let signed = match head[5] {
        "signed" => true,
        "unsigned" => false,
        other => return Err(parse_err(ln, format!("unknown reward mode {other:?}"))),
    };
    let (ln, line) = lines
        .next()
        .ok_or_else(|| parse_err(ln, "missing init line"))?;
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.first() != Some(&"init") || toks.len() != ns + 1 {
        return Err(parse_err(
            ln,
            format!("expected `init` with {ns} probabilities"),
        ));
    }
    let init = floats(ln, &toks[1..])?;

    let mut coords = None;
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    let mut seen = vec![false; ns * na];
    let mut pending: Vec<(usize, &str)> = Vec::new();
    let mut first = lines.next();
    if let Some((ln, line)) = first {
        if let Some(dim) = line.strip_prefix("coords ") {
            let dim: usize = dim
                .trim()
                .parse()
                .map_err(|_| parse_err(ln, "bad coords dim"))?;
            let mut cs = Vec::with_capacity(ns);
            for _ in 0..ns {
                let (ln, line) = lines
                    .next()
                    .ok_or_else(|| parse_err(ln, "truncated coords"))?;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != dim {
                    return Err(parse_err(ln, format!("expected {dim} coordinates")));
                }
                cs.push(floats(ln, &toks)?);
            }
            coords = Some(cs);
            first = lines.next();
        }
    }
    pending.extend(first);
    pending.extend(lines);
    for (ln, line) in pending {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != ns + 3 {
            return Err(parse_err(
                ln,
                format!("expected `s a r` and {ns} probabilities"),
            ));
        }
        let s: usize = toks[0]
            .parse()
            .map_err(|_| parse_err(ln, "bad state index"))?;
        let a: usize = toks[1]
            .parse()
            .map_err(|_| parse_err(ln, "bad action index"))?;
        if s >= ns || a >= na {
            return Err(parse_err(ln, "index out of range"));
        }
        if std::mem::replace(&mut seen[s * na + a], true) {
            return Err(parse_err(ln, format!("duplicate row ({s},{a})")));
        }
        let vals = floats(ln, &toks[2..])?;
        reward[s * na + a] = vals[0];
        transition[(s * na + a) * ns..(s * na + a + 1) * ns].copy_from_slice(&vals[1..]);
    }
    if let Some(missing) = seen.iter().position(|&b| !b) {
        return Err(parse_err(
            0,
            format!("missing row ({},{})", missing / na, missing % na),
        ));
    }
    let mdp = if signed {
        FiniteMdp::new_signed(ns, na, transition, reward, init, hdr[0])?
    } else {
        FiniteMdp::new(ns, na, transition, reward, init, hdr[0])?
    };
    let mut mdp = mdp.with_r_max(hdr[1])?;
    if let Some(c) = coords {
        mdp = mdp.with_coords(c)?;
    }
    Ok(ParsedMdp { mdp, spec })
}
