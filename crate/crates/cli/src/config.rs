//! Config files merged under explicit flags.
//!
//! A config is a JSON object. Top-level scalar keys apply to any subcommand
//! that has a flag of that name; an object under `"<group>"` or
//! `"<group>.<command>"` applies only there, the more specific one winning.
//! Keys are long flag names, with `_` accepted for `-`. A value is injected
//! only when the flag is absent from the command line.

use clap::CommandFactory;
use serde_json::{Map, Value};

use crate::Cli;

fn flag_present(argv: &[String], name: &str) -> bool {
    let long = format!("--{name}");
    argv.iter().any(|a| a == &long || a.starts_with(&format!("{long}=")))
}

fn find_config(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn render(v: &Value) -> Option<Vec<String>> {
    match v {
        Value::Null => None,
        Value::Bool(_) => Some(vec![]),
        Value::Number(n) => Some(vec![n.to_string()]),
        Value::String(s) => Some(vec![s.clone()]),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().filter_map(|x| match x {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            }).collect();
            Some(vec![parts.join(",")])
        }
        Value::Object(_) => Some(vec![v.to_string()]),
    }
}

/// Return `argv` with config values appended for absent flags.
pub fn merge(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = find_config(&argv) else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let root: Value = serde_json::from_str(&text).map_err(|e| format!("config {path}: {e}"))?;
    let Value::Object(root) = root else { return Err(format!("config {path} must be a JSON object")) };

    // subcommand path: the first word naming a group, then the first naming one of its commands
    let cmd = Cli::command();
    let Some(gi) = argv.iter().skip(1).position(|a| cmd.find_subcommand(a.as_str()).is_some()) else { return Ok(argv) };
    let group = cmd.find_subcommand(argv[gi + 1].as_str()).expect("found above");
    let Some(leaf) = argv.iter().skip(gi + 2).find_map(|a| group.find_subcommand(a.as_str())) else { return Ok(argv) };
    let leaf_name = format!("{}.{}", group.get_name(), leaf.get_name());
    let accepted: Vec<(String, bool)> = leaf
        .get_arguments()
        .filter_map(|a| a.get_long().map(|l| (l.to_string(), !a.get_action().takes_values())))
        .collect();

    let mut layers: Vec<&Map<String, Value>> = vec![&root];
    if let Some(Value::Object(g)) = root.get(group.get_name()) {
        layers.push(g);
    }
    if let Some(Value::Object(l)) = root.get(&leaf_name) {
        layers.push(l);
    }
    let mut chosen: Vec<(String, Value)> = Vec::new();
    for layer in layers {
        for (k, v) in layer {
            if v.is_object() && (k == group.get_name() || k.contains('.')) {
                continue;
            }
            let name = k.replace('_', "-");
            if name == "config" || !accepted.iter().any(|(a, _)| *a == name) {
                continue;
            }
            chosen.retain(|(n, _)| *n != name);
            chosen.push((name, v.clone()));
        }
    }
    let mut out = argv.clone();
    for (name, v) in chosen {
        if flag_present(&argv, &name) {
            continue;
        }
        let is_switch = accepted.iter().any(|(a, s)| *a == name && *s);
        if is_switch {
            if v == Value::Bool(true) {
                out.push(format!("--{name}"));
            }
            continue;
        }
        if let Some(vals) = render(&v) {
            for val in vals {
                out.push(format!("--{name}={val}"));
            }
        }
    }
    Ok(out)
}
