//! Parsers for the compact value syntaxes used on the command line.

use polytope_core::density::linspace;
use polytope_core::oracle::Bounds;
use polytope_core::{Error, LayerSpan, PwlNetwork, Result};

/// `"0.1,-2,3e-4"` → vector.
pub fn vector(s: &str) -> Result<Vec<f64>> {
    let v = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("not a number: {x:?} in {s:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parse(format!("non-finite value in {s:?}")));
    }
    Ok(v)
}

/// `"2,16,3"` → layer sizes.
pub fn sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("not a layer size: {x:?}")))
        })
        .collect()
}

/// `lo:hi:n` (inclusive, evenly spaced) or a comma list.
pub fn alphas(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, n] => {
            let lo = vector(lo)?[0];
            let hi = vector(hi)?[0];
            let n = n
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad count in {s:?}")))?;
            Ok(linspace(lo, hi, n))
        }
        [_] => vector(s),
        _ => Err(Error::Parse(format!("alphas must be lo:hi:n or a list, got {s:?}"))),
    }
}

/// `lo:hi` for every axis, or `lo:hi,lo:hi,...` per axis.
pub fn bounds(s: &str, dim: usize) -> Result<Bounds> {
    let ranges = s
        .split(',')
        .map(|r| {
            let (lo, hi) = r
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("range must be lo:hi, got {r:?}")))?;
            Ok((vector(lo)?[0], vector(hi)?[0]))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let ranges = match ranges.len() {
        1 => vec![ranges[0]; dim],
        n if n == dim => ranges,
        n => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: n,
            })
        }
    };
    Bounds::new(
        ranges.iter().map(|r| r.0).collect(),
        ranges.iter().map(|r| r.1).collect(),
    )
}

/// Explicit `L K`, or layer 0 through the output.
pub fn span(arg: &Option<Vec<usize>>, net: &PwlNetwork) -> Result<LayerSpan> {
    let span = match arg.as_deref() {
        Some([l, k]) => LayerSpan::new(*l, *k),
        Some(_) => return Err(Error::InvalidArgument("--span takes two values".into())),
        None => LayerSpan::to_output(net, 0)?,
    };
    span.validate(net)?;
    Ok(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_compact_values() {
        assert_eq!(vector("0.1, -2").unwrap(), vec![0.1, -2.0]);
        assert!(vector("1,x").is_err());
        assert!(vector("nan").is_err());
        assert_eq!(sizes("2,8,3").unwrap(), vec![2, 8, 3]);
        assert_eq!(alphas("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(alphas("0.5,1").unwrap(), vec![0.5, 1.0]);
        assert!(alphas("0:1").is_err());
        let b = bounds("-1:2", 2).unwrap();
        assert_eq!((b.lo.clone(), b.hi.clone()), (vec![-1.0, -1.0], vec![2.0, 2.0]));
        assert_eq!(bounds("-1:1,0:3", 2).unwrap().hi, vec![1.0, 3.0]);
        assert!(bounds("-1:1,0:3", 3).is_err());
        assert!(bounds("1:-1", 1).is_err());
    }
}
