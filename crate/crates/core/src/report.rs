//! Formatting helpers shared by the JSON and text reports.

/// Serde adapter for `Option<f64>` that writes non-finite values as the
/// strings `"inf"`, `"-inf"` and `"nan"` instead of failing.
pub mod opt_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if x.is_finite() => s.serialize_some(x),
            Some(x) if x.is_nan() => s.serialize_some("nan"),
            Some(x) if *x > 0.0 => s.serialize_some("inf"),
            Some(_) => s.serialize_some("-inf"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let repr = Option::<Repr>::deserialize(d)?;
        Ok(match repr {
            None => None,
            Some(Repr::Num(x)) => Some(x),
            Some(Repr::Text(t)) => Some(match t.as_str() {
                "inf" => f64::INFINITY,
                "-inf" => f64::NEG_INFINITY,
                "nan" => f64::NAN,
                other => return Err(serde::de::Error::custom(format!("bad float {other:?}"))),
            }),
        })
    }
}

/// Serde adapter for `f64` with the same non-finite encoding as [`opt_f64`].
pub mod f64_lossy {
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::opt_f64::serialize(&Some(*v), s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        super::opt_f64::deserialize(d)?.ok_or_else(|| serde::de::Error::custom("missing float"))
    }
}

/// Writes `x` as `p/q` when it lies within 1e-9 of a fraction with
/// denominator at most 120, otherwise as a decimal.
pub fn ratio_string(x: f64) -> String {
    for q in 1..=120u32 {
        let p = (x * q as f64).round();
        if (x - p / q as f64).abs() < 1e-9 {
            return if q == 1 {
                format!("{}", p as i64)
            } else {
                format!("{}/{}", p as i64, q)
            };
        }
    }
    format!("{x:.6}")
}

/// Renders a row-major matrix with right-aligned columns.
pub fn matrix_text(rows: usize, cols: usize, cell: impl Fn(usize, usize) -> String) -> String {
    let cells: Vec<Vec<String>> = (0..rows)
        .map(|i| (0..cols).map(|j| cell(i, j)).collect())
        .collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(0);
    let mut out = String::new();
    for row in cells {
        let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        out.push_str(&line.join("  "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Wrap {
        #[serde(with = "opt_f64")]
        v: Option<f64>,
    }

    #[test]
    fn non_finite_values_round_trip() {
        for v in [
            None,
            Some(1.5),
            Some(f64::INFINITY),
            Some(f64::NEG_INFINITY),
        ] {
            let json = serde_json::to_string(&Wrap { v }).unwrap();
            assert_eq!(serde_json::from_str::<Wrap>(&json).unwrap(), Wrap { v });
        }
        assert_eq!(
            serde_json::to_string(&Wrap {
                v: Some(f64::INFINITY)
            })
            .unwrap(),
            r#"{"v":"inf"}"#
        );
    }

    #[test]
    fn small_rationals_are_recognized() {
        assert_eq!(ratio_string(3.0), "3");
        assert_eq!(ratio_string(8.0 / 3.0), "8/3");
        assert_eq!(ratio_string(29.0 / 15.0), "29/15");
        assert_eq!(ratio_string(0.123456789), "0.123457");
    }
}
