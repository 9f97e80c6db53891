//! Exact rationals and small dense linear algebra over them.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn half() -> Q {
    qf(1, 2)
}

/// Parses `"p"`, `"-p/q"` or a short decimal like `"0.25"`.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().ok()?;
        let d: BigInt = b.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Q::new(n, d));
    }
    if let Some((a, b)) = s.split_once('.') {
        let neg = a.starts_with('-');
        let ip: BigInt = if a == "-" || a.is_empty() { BigInt::zero() } else { a.parse().ok()? };
        if !b.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let fp: BigInt = if b.is_empty() { BigInt::zero() } else { b.parse().ok()? };
        let den = num::pow(BigInt::from(10), b.len());
        let frac = Q::new(fp, den);
        let base = Q::from_integer(ip.clone());
        return Some(if neg || ip.is_negative() { base - frac } else { base + frac });
    }
    s.parse::<BigInt>().ok().map(Q::from_integer)
}

pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn ser_q<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(x))
}

pub fn de_q<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
    let v = serde_json::Value::deserialize(d)?;
    match &v {
        serde_json::Value::String(s) => parse_q(s).ok_or_else(|| serde::de::Error::custom(format!("bad rational {s}"))),
        serde_json::Value::Number(n) => parse_q(&n.to_string()).ok_or_else(|| serde::de::Error::custom("bad rational")),
        _ => Err(serde::de::Error::custom("expected rational")),
    }
}

pub fn ser_qvec<S: Serializer>(x: &[Q], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(x.len()))?;
    for v in x {
        seq.serialize_element(&fmt_q(v))?;
    }
    seq.end()
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

pub fn scale(a: &[Q], c: &Q) -> Vec<Q> {
    a.iter().map(|x| x * c).collect()
}

pub fn add(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn zeros(n: usize) -> Vec<Q> {
    vec![Q::zero(); n]
}

/// Reduced row echelon form. Returns the nonzero rows and their pivot columns.
pub fn rref(mut m: Vec<Vec<Q>>, ncols: usize) -> (Vec<Vec<Q>>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r >= m.len() {
            break;
        }
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                let row = m[r].clone();
                for (x, y) in m[i].iter_mut().zip(row.iter()) {
                    *x = &*x - &f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank(m: &[Vec<Q>], ncols: usize) -> usize {
    rref(m.to_vec(), ncols).1.len()
}

pub fn det(m: &[Vec<Q>]) -> Q {
    let n = m.len();
    let mut a = m.to_vec();
    let mut d = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else { return Q::zero() };
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d = &d * &a[c][c];
        for i in c + 1..n {
            if !a[i][c].is_zero() {
                let f = &a[i][c] / &a[c][c];
                let row = a[c].clone();
                for (x, y) in a[i].iter_mut().zip(row.iter()) {
                    *x = &*x - &f * y;
                }
            }
        }
    }
    d
}

pub fn inverse(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let aug: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    let (red, piv) = rref(aug, 2 * n);
    if piv.len() < n || piv[n - 1] != n - 1 {
        return None;
    }
    Some(red.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn transpose(m: &[Vec<Q>], ncols: usize) -> Vec<Vec<Q>> {
    (0..ncols).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn gram(vs: &[Vec<Q>]) -> Vec<Vec<Q>> {
    vs.iter().map(|a| vs.iter().map(|b| dot(a, b)).collect()).collect()
}

/// Orthogonal projection onto span(basis) under the standard inner product.
pub fn project(v: &[Q], basis: &[Vec<Q>]) -> Vec<Q> {
    if basis.is_empty() {
        return zeros(v.len());
    }
    let g = gram(basis);
    let gi = inverse(&g).expect("projection basis must be independent");
    let rhs: Vec<Q> = basis.iter().map(|b| dot(b, v)).collect();
    let mut out = zeros(v.len());
    for (i, b) in basis.iter().enumerate() {
        let c = dot(&gi[i], &rhs);
        out = add(&out, &scale(b, &c));
    }
    out
}

/// Basis of the null space of the rows of `m`.
pub fn null_space(m: &[Vec<Q>], ncols: usize) -> Vec<Vec<Q>> {
    let (red, piv) = rref(m.to_vec(), ncols);
    let mut out = Vec::new();
    for f in (0..ncols).filter(|c| !piv.contains(c)) {
        let mut v = zeros(ncols);
        v[f] = Q::one();
        for (r, &p) in red.iter().zip(&piv) {
            v[p] = -r[f].clone();
        }
        out.push(v);
    }
    out
}

pub fn is_zero_vec(v: &[Q]) -> bool {
    v.iter().all(|x| x.is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("3/6"), Some(qf(1, 2)));
        assert_eq!(parse_q("-0.25"), Some(qf(-1, 4)));
        assert_eq!(parse_q("7"), Some(q(7)));
        assert_eq!(parse_q("1/0"), None);
        assert_eq!(fmt_q(&qf(-3, 6)), "-1/2");
    }

    #[test]
    fn inverse_and_det() {
        let m = vec![vec![q(2), q(1)], vec![q(1), q(1)]];
        assert_eq!(det(&m), q(1));
        let inv = inverse(&m).unwrap();
        assert_eq!(inv, vec![vec![q(1), q(-1)], vec![q(-1), q(2)]]);
        assert!(inverse(&[vec![q(1), q(2)], vec![q(2), q(4)]]).is_none());
    }

    #[test]
    fn null_space_is_orthogonal_to_rows() {
        let m = vec![vec![q(1), q(2), q(3)]];
        let ns = null_space(&m, 3);
        assert_eq!(ns.len(), 2);
        for v in ns {
            assert!(dot(&m[0], &v).is_zero());
        }
    }
}
