//! The `n`-rule grammar: `const:k`, `power:p`, `powerlog:p`, `table:path`.

use std::collections::BTreeMap;
use std::path::Path;

use mmconc::bounds::NRule;

use crate::error::ConfigError;

pub fn parse_rule(text: &str, base_dir: &Path) -> Result<NRule, ConfigError> {
    let bad = |msg: String| ConfigError::invalid("n", msg);
    let (kind, arg) = text
        .split_once(':')
        .ok_or_else(|| bad(format!("`{text}` is not of the form kind:argument")))?;
    let arg = arg.trim();
    match kind.trim() {
        "const" => {
            let k: u64 = arg.parse().map_err(|_| bad(format!("const needs an integer, got `{arg}`")))?;
            if k == 0 {
                return Err(bad("const must be at least 1".into()));
            }
            Ok(NRule::Const(k))
        }
        "power" | "powerlog" => {
            let p: f64 = arg.parse().map_err(|_| bad(format!("exponent `{arg}` is not a number")))?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(bad(format!("exponent {p} must lie in (0, 1]")));
            }
            Ok(if kind.trim() == "power" {
                NRule::Power(p)
            } else {
                NRule::PowerLog(p)
            })
        }
        "table" => {
            let path = base_dir.join(arg);
            let body = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read {
                path: path.display().to_string(),
                source,
            })?;
            parse_table(&body).map(NRule::Table)
        }
        other => Err(bad(format!("unknown rule kind `{other}`; expected const, power, powerlog or table"))),
    }
}

/// Lines of `N n` pairs, separated by whitespace or a comma; `#` starts a
/// comment.
pub fn parse_table(body: &str) -> Result<BTreeMap<u64, u64>, ConfigError> {
    let mut table = BTreeMap::new();
    for (i, raw) in body.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed = match parts.as_slice() {
            [a, b] => a.parse::<u64>().ok().zip(b.parse::<u64>().ok()),
            _ => None,
        };
        let (big_n, n) = parsed.ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            column: raw.len() - raw.trim_start().len() + 1,
            message: format!("expected `N n`, got `{line}`"),
        })?;
        table.insert(big_n, n.max(1));
    }
    if table.is_empty() {
        return Err(ConfigError::invalid("n", "table is empty"));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        let here = Path::new(".");
        assert_eq!(parse_rule("const:2", here).unwrap(), NRule::Const(2));
        assert_eq!(parse_rule("power: 0.25", here).unwrap(), NRule::Power(0.25));
        assert_eq!(parse_rule("powerlog:0.5", here).unwrap(), NRule::PowerLog(0.5));
        assert!(parse_rule("const:0", here).is_err());
        assert!(parse_rule("power:2", here).is_err());
        assert!(parse_rule("linear:1", here).is_err());
        assert!(parse_rule("2", here).is_err());
    }

    #[test]
    fn tables() {
        let t = parse_table("# N n\n10 2\n100, 5\n").unwrap();
        assert_eq!(t, BTreeMap::from([(10, 2), (100, 5)]));
        match parse_table("10 2\n  oops\n") {
            Err(ConfigError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
    }
}
