//! Plain-text instance files.
//!
//! ```text
//! locomotion 10 42
//! occupied: 3,4 5,5
//! legs: 0,0,1 2,0,1 0,2,1 2,2,1
//! cm: 1,1
//! goal: 7,7
//! params: reach=2.5
//! ```
//!
//! ```text
//! manipulation 10 7
//! occupied: 4,4
//! bases: -1,5 10,5
//! payloads: 1,1,3,1
//! goal: 5,1,7,1
//! params: link_len=6
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Leg triples are
//! `x,y,attached` with `attached` being 0 or 1.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use super::locomotion::{Leg, LocomotionInstance, DEFAULT_REACH, LEGS};
use super::manipulation::{ManipulationInstance, Pose, DEFAULT_LINK_LEN};
use super::{DomainError, Instance};

fn err(line: usize, message: impl Into<String>) -> DomainError {
    DomainError::Parse {
        line,
        message: message.into(),
    }
}

fn join<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> String) -> String {
    items.into_iter().map(f).collect::<Vec<_>>().join(" ")
}

pub fn print_instance(inst: &Instance) -> String {
    let mut s = String::new();
    match inst {
        Instance::Locomotion(i) => {
            let _ = writeln!(s, "locomotion {} {}", i.grid, i.seed);
            let _ = writeln!(s, "occupied: {}", join(&i.occupied, |c| format!("{},{}", c.0, c.1)));
            let _ = writeln!(
                s,
                "legs: {}",
                join(&i.legs, |l| format!("{},{},{}", l.pos.0, l.pos.1, l.attached as u8))
            );
            let _ = writeln!(s, "cm: {},{}", i.cm.0, i.cm.1);
            let _ = writeln!(s, "goal: {},{}", i.goal.0, i.goal.1);
            let _ = writeln!(s, "params: reach={}", i.reach);
        }
        Instance::Manipulation(i) => {
            let pose = |p: &Pose| format!("{},{},{},{}", p[0].0, p[0].1, p[1].0, p[1].1);
            let _ = writeln!(s, "manipulation {} {}", i.grid, i.seed);
            let _ = writeln!(s, "occupied: {}", join(&i.obstacles, |c| format!("{},{}", c.0, c.1)));
            let _ = writeln!(s, "bases: {}", join(&i.bases, |c| format!("{},{}", c.0, c.1)));
            let _ = writeln!(s, "payloads: {}", join(&i.payloads, pose));
            let _ = writeln!(s, "goal: {}", join(&i.goal, pose));
            let _ = writeln!(s, "params: link_len={}", i.link_len);
        }
    }
    s
}

struct Section<'a> {
    line: usize,
    body: &'a str,
}

fn tuples(sec: &Section<'_>, arity: usize) -> Result<Vec<Vec<i32>>, DomainError> {
    sec.body
        .split_whitespace()
        .map(|tok| {
            let vals: Result<Vec<i32>, _> = tok.split(',').map(str::parse::<i32>).collect();
            match vals {
                Ok(v) if v.len() == arity => Ok(v),
                Ok(v) => Err(err(sec.line, format!("`{tok}` has {} values, expected {arity}", v.len()))),
                Err(_) => Err(err(sec.line, format!("`{tok}` is not a comma-separated integer tuple"))),
            }
        })
        .collect()
}

fn cell(sec: &Section<'_>) -> Result<(i32, i32), DomainError> {
    match tuples(sec, 2)?.as_slice() {
        [v] => Ok((v[0], v[1])),
        other => Err(err(sec.line, format!("expected one cell, found {}", other.len()))),
    }
}

fn params(sec: Option<&Section<'_>>, allowed: &[&str]) -> Result<HashMap<String, f64>, DomainError> {
    let mut out = HashMap::new();
    let Some(sec) = sec else { return Ok(out) };
    for tok in sec.body.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| err(sec.line, format!("parameter `{tok}` is not key=value")))?;
        if !allowed.contains(&k) {
            return Err(err(sec.line, format!("unknown parameter `{k}`")));
        }
        let v: f64 = v
            .parse()
            .map_err(|_| err(sec.line, format!("parameter `{k}` has non-numeric value `{v}`")))?;
        if out.insert(k.to_string(), v).is_some() {
            return Err(err(sec.line, format!("parameter `{k}` given twice")));
        }
    }
    Ok(out)
}

/// Parses an instance file. Structural errors carry their 1-based line.
/// Semantic validity is not checked here; see [`Instance::validate`].
pub fn parse_instance(text: &str) -> Result<Instance, DomainError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let last_line = text.lines().count().max(1);

    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty instance file"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    let [kind, grid, seed] = head.as_slice() else {
        return Err(err(hline, "header must be `<domain> <grid> <seed>`"));
    };
    let grid: i32 = grid.parse().map_err(|_| err(hline, format!("bad grid size `{grid}`")))?;
    let seed: u64 = seed.parse().map_err(|_| err(hline, format!("bad seed `{seed}`")))?;

    let allowed: &[&str] = match *kind {
        "locomotion" => &["occupied", "legs", "cm", "goal", "params"],
        "manipulation" => &["occupied", "bases", "payloads", "goal", "params"],
        other => return Err(err(hline, format!("unknown domain `{other}`"))),
    };

    let mut sections: HashMap<&str, Section<'_>> = HashMap::new();
    for (n, l) in lines {
        let (name, body) = l
            .split_once(':')
            .ok_or_else(|| err(n, format!("expected `section: values`, got `{l}`")))?;
        let name = name.trim();
        if !allowed.contains(&name) {
            return Err(err(n, format!("unknown section `{name}` for {kind}")));
        }
        if sections.insert(name, Section { line: n, body: body.trim() }).is_some() {
            return Err(err(n, format!("section `{name}` repeated")));
        }
    }
    let need = |name: &str| {
        sections
            .get(name)
            .ok_or_else(|| err(last_line, format!("missing section `{name}`")))
    };
    let cells_of = |name: &str| -> Result<BTreeSet<(i32, i32)>, DomainError> {
        match sections.get(name) {
            Some(sec) => Ok(tuples(sec, 2)?.into_iter().map(|v| (v[0], v[1])).collect()),
            None => Ok(BTreeSet::new()),
        }
    };

    if *kind == "locomotion" {
        let legs_sec = need("legs")?;
        let raw = tuples(legs_sec, 3)?;
        if raw.len() != LEGS {
            return Err(err(legs_sec.line, format!("expected {LEGS} legs, found {}", raw.len())));
        }
        let mut legs = [Leg {
            pos: (0, 0),
            attached: true,
        }; LEGS];
        for (slot, v) in legs.iter_mut().zip(&raw) {
            if !matches!(v[2], 0 | 1) {
                return Err(err(legs_sec.line, format!("attached flag must be 0 or 1, got {}", v[2])));
            }
            *slot = Leg {
                pos: (v[0], v[1]),
                attached: v[2] == 1,
            };
        }
        let p = params(sections.get("params"), &["reach"])?;
        Ok(Instance::Locomotion(LocomotionInstance {
            grid,
            seed,
            occupied: cells_of("occupied")?,
            legs,
            cm: cell(need("cm")?)?,
            goal: cell(need("goal")?)?,
            reach: p.get("reach").copied().unwrap_or(DEFAULT_REACH),
        }))
    } else {
        let bases_sec = need("bases")?;
        let bases = tuples(bases_sec, 2)?;
        if bases.len() != 2 {
            return Err(err(bases_sec.line, format!("expected 2 bases, found {}", bases.len())));
        }
        let poses = |name: &str| -> Result<Vec<Pose>, DomainError> {
            Ok(tuples(need(name)?, 4)?
                .into_iter()
                .map(|v| [(v[0], v[1]), (v[2], v[3])])
                .collect())
        };
        let p = params(sections.get("params"), &["link_len"])?;
        Ok(Instance::Manipulation(ManipulationInstance {
            grid,
            seed,
            obstacles: cells_of("occupied")?,
            bases: [(bases[0][0], bases[0][1]), (bases[1][0], bases[1][1])],
            payloads: poses("payloads")?,
            goal: poses("goal")?,
            link_len: p.get("link_len").copied().unwrap_or(DEFAULT_LINK_LEN),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOCO: &str = "locomotion 6 3\noccupied: 4,4\nlegs: 0,0,1 2,0,1 0,2,1 2,2,1\ncm: 1,1\ngoal: 3,1\nparams: reach=2.5\n";

    #[test]
    fn print_parse_fixed_point() {
        let inst = parse_instance(LOCO).unwrap();
        assert_eq!(print_instance(&inst), LOCO);
        let m = "manipulation 8 1\noccupied: \nbases: -1,4 8,4\npayloads: 1,1,3,1\ngoal: 4,1,6,1\nparams: link_len=4.5\n";
        let inst = parse_instance(m).unwrap();
        assert_eq!(parse_instance(&print_instance(&inst)).unwrap(), inst);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = LOCO.replace("cm: 1,1", "cm: 1;1");
        assert!(matches!(parse_instance(&bad), Err(DomainError::Parse { line: 4, .. })));
        let bad = LOCO.replace("legs: 0,0,1 2,0,1 0,2,1 2,2,1", "legs: 0,0,1");
        assert!(matches!(parse_instance(&bad), Err(DomainError::Parse { line: 3, .. })));
        let bad = format!("# comment\n{}", LOCO.replace("goal:", "gaol:"));
        assert!(matches!(parse_instance(&bad), Err(DomainError::Parse { line: 6, .. })));
        assert!(matches!(parse_instance("walking 3 3\n"), Err(DomainError::Parse { line: 1, .. })));
        assert!(matches!(parse_instance(""), Err(DomainError::Parse { line: 1, .. })));
    }

    #[test]
    fn missing_params_use_defaults() {
        let inst = parse_instance(&LOCO.replace("params: reach=2.5\n", "")).unwrap();
        let Instance::Locomotion(l) = inst else { panic!() };
        assert_eq!(l.reach, DEFAULT_REACH);
    }
}
