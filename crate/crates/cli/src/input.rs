//! Input files and flag values.

use std::path::Path;

use serde_json::Value;
use skewdirac::corpus::ExampleCase;
use skewdirac::quadruple::Quadruple;
use skewdirac::{Convention, Error, Realization, C64};

use crate::Failure;

/// What a JSON input file holds.
pub enum Input {
    Realization(Realization),
    Quadruple { q: Quadruple, mode: Option<Convention> },
}

pub fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::schema(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::schema(format!("{}: {e}", path.display())))
}

fn decode<T: serde::de::DeserializeOwned>(v: Value, path: &Path) -> Result<T, Failure> {
    serde_json::from_value(v).map_err(|e| Failure::schema(format!("{}: {e}", path.display())))
}

/// A realization, a quadruple, or a corpus case (whose input part is used).
pub fn load(path: &Path) -> Result<Input, Failure> {
    let v = read_json(path)?;
    if v.get("expected").is_some() {
        let case: ExampleCase = decode(v, path)?;
        return match (case.realization, case.quadruple) {
            (Some(r), _) => Ok(Input::Realization(r)),
            (None, Some(q)) => Ok(Input::Quadruple { q, mode: case.mode }),
            _ => Err(Failure::schema(format!("{}: case has no input", path.display()))),
        };
    }
    if v.get("alpha").is_some() {
        let mode = match v.get("mode") {
            Some(m) => Some(decode(m.clone(), path)?),
            None => None,
        };
        return Ok(Input::Quadruple {
            q: decode(v, path)?,
            mode,
        });
    }
    if v.get("convention").is_some() {
        return Ok(Input::Realization(decode(v, path)?));
    }
    Err(Failure::schema(format!(
        "{}: neither a realization (convention, A, B, C) nor a quadruple (alpha, S0, theta1, theta2)",
        path.display()
    )))
}

/// `a:b:N`.
pub fn parse_grid(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(format!("grid '{s}' is not a:b:N"));
    };
    let a: f64 = a.trim().parse().map_err(|e| format!("grid start: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("grid end: {e}"))?;
    let n: usize = n.trim().parse().map_err(|e| format!("grid size: {e}"))?;
    if !(a.is_finite() && b.is_finite()) || a < 0.0 || b < a {
        return Err(format!("grid needs 0 ≤ a ≤ b, got {a}:{b}"));
    }
    Ok((a, b, n))
}

/// `3`, `2i`, `-i`, `0.5+2i`, `1e-3-4.5i`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("'{s}' is not a complex number");
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|x| C64::new(x, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
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

/// Exit code for a library error raised past the input stage.
pub fn solver_failure(e: Error) -> Failure {
    match e {
        Error::NotMinimal { .. } => Failure::new(crate::NOT_MINIMAL, e.to_string()),
        Error::SpectralCondition(ref m) if m == "i ∈ σ(α)" => Failure::new(
            crate::SPECTRAL_I,
            format!("{e}; the recovered α has the eigenvalue i, so the discrete asymptotics do not apply"),
        ),
        _ => Failure::new(crate::SOLVER, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        let cases = [
            ("3", (3.0, 0.0)),
            ("2i", (0.0, 2.0)),
            ("i", (0.0, 1.0)),
            ("-i", (0.0, -1.0)),
            ("0.5+2i", (0.5, 2.0)),
            ("1e-3-4.5i", (1e-3, -4.5)),
            ("-1e+2+1e-1i", (-100.0, 0.1)),
            (" 1 - i ", (1.0, -1.0)),
        ];
        for (s, (re, im)) in cases {
            assert_eq!(parse_complex(s).unwrap(), C64::new(re, im), "{s}");
        }
        assert!(parse_complex("2j").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("0:5:400").unwrap(), (0.0, 5.0, 400));
        assert!(parse_grid("0:5").is_err());
        assert!(parse_grid("5:0:10").is_err());
        assert!(parse_grid("0:5:-1").is_err());
    }
}
