//! Parameter grids: `0.1`, `0.08, 0.04, 0.02`, `linspace(a, b, n)`,
//! `geomspace(a, b, n)`.

/// Parses a grid expression into its points, in the written order.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty grid".into());
    }
    for (name, geometric) in [("linspace", false), ("geomspace", true)] {
        if let Some(rest) = s.strip_prefix(name) {
            let inner = rest
                .trim()
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| format!("malformed {name}: {s:?}"))?;
            let args: Vec<&str> = inner.split(',').map(str::trim).collect();
            if args.len() != 3 {
                return Err(format!("{name} takes (start, stop, count), got {s:?}"));
            }
            let a = parse_number(args[0])?;
            let b = parse_number(args[1])?;
            let n: usize = args[2]
                .parse()
                .map_err(|_| format!("{name} count {:?} is not a positive integer", args[2]))?;
            return if geometric {
                geomspace(a, b, n)
            } else {
                linspace(a, b, n)
            };
        }
    }
    s.split(',').map(|x| parse_number(x.trim())).collect()
}

fn parse_number(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !x.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(x)
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Result<Vec<f64>, String> {
    match n {
        0 => Err("linspace needs at least one point".into()),
        1 => Ok(vec![a]),
        _ => {
            let h = (b - a) / (n - 1) as f64;
            Ok((0..n).map(|i| if i == n - 1 { b } else { a + h * i as f64 }).collect())
        }
    }
}

/// `n` geometrically spaced points from `a` to `b` inclusive.
pub fn geomspace(a: f64, b: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(a > 0.0 && b > 0.0) {
        return Err(format!("geomspace endpoints must be positive, got {a}, {b}"));
    }
    let logs = linspace(a.ln(), b.ln(), n)?;
    let last = logs.len() - 1;
    Ok(logs
        .iter()
        .enumerate()
        .map(|(i, l)| match i {
            0 => a,
            i if i == last => b,
            _ => l.exp(),
        })
        .collect())
}
