//! Time-grid syntax for flags: `a:b:log:n`, `a:b:lin:n`, or a comma list.

use serde::{Deserialize, Serialize};

/// A list of reals given either explicitly or as a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_grid(s).map(Grid)
    }
}

fn num(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

/// Parses `a:b:log:n` (geometric, `a, b > 0`), `a:b:lin:n` (arithmetic) or
/// `x1,x2,...`. Sweeps run from `a` to `b` inclusive, so `a > b` gives a
/// decreasing grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => single.split(',').map(num).collect(),
        [a, b, kind, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| format!("`{n}` is not a point count"))?;
            if n == 0 {
                return Err("a sweep needs at least one point".into());
            }
            if n == 1 {
                return Ok(vec![a]);
            }
            let step = |k: usize| k as f64 / (n - 1) as f64;
            match kind.trim() {
                "lin" => Ok((0..n).map(|k| if k == n - 1 { b } else { a + (b - a) * step(k) }).collect()),
                "log" => {
                    if !(a > 0.0 && b > 0.0) {
                        return Err("log sweeps need positive endpoints".into());
                    }
                    let (la, lb) = (a.ln(), b.ln());
                    Ok((0..n)
                        .map(|k| match k {
                            0 => a,
                            k if k == n - 1 => b,
                            k => (la + (lb - la) * step(k)).exp(),
                        })
                        .collect())
                }
                other => Err(format!("unknown sweep kind `{other}`; use lin or log")),
            }
        }
        _ => Err(format!("cannot parse grid `{s}`; use a:b:log:n, a:b:lin:n or a comma list")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps_and_lists() {
        let g = parse_grid("1e-6:1e-1:log:20").unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 1e-6);
        assert_eq!(g[19], 1e-1);
        assert!((g[1] / g[0] - 10f64.powf(5.0 / 19.0)).abs() < 1e-12);
        assert_eq!(parse_grid("0:1:lin:5").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("1e-1:1e-4:log:4").unwrap().len(), 4);
        assert!(parse_grid("1e-1:1e-4:log:4").unwrap().windows(2).all(|w| w[1] < w[0]));
        assert_eq!(parse_grid("0.1, 0.01").unwrap(), vec![0.1, 0.01]);
        assert!(parse_grid("0:1:log:3").is_err());
        assert!(parse_grid("1:2:cubic:3").is_err());
        assert!(parse_grid("a,b").is_err());
    }
}
