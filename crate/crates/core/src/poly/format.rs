//! `{"vars": [...], "terms": [{"c": "num/den", "e": [...]}, ...]}`

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::rational::{parse_fraction, to_fraction_string};
use super::{PolyError, Polynomial};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyDoc {
    pub vars: Vec<String>,
    pub terms: Vec<TermDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub c: String,
    pub e: Vec<u32>,
}

impl PolyDoc {
    pub fn into_polynomial(self) -> Result<Polynomial, PolyError> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (i, t) in self.terms.into_iter().enumerate() {
            let c = parse_fraction(&t.c).map_err(|m| PolyError::Structure(format!("term {i}: {m}")))?;
            terms.push((t.e, c));
        }
        Polynomial::from_terms(self.vars, terms)
    }

    pub fn from_polynomial(p: &Polynomial) -> Self {
        PolyDoc {
            vars: p.vars().to_vec(),
            terms: p
                .terms()
                .map(|(m, c)| TermDoc {
                    c: to_fraction_string(c),
                    e: m.exps().to_vec(),
                })
                .collect(),
        }
    }
}

/// Parses the polynomial text format. Repeated exponent vectors are summed.
pub fn parse_poly(text: &str) -> Result<Polynomial, PolyError> {
    let doc: PolyDoc = serde_json::from_str(text).map_err(|e| PolyError::Parse {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    doc.into_polynomial()
}

impl Polynomial {
    /// Canonical compact serialization: graded-order terms, reduced fractions.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&PolyDoc::from_polynomial(self)).expect("plain data serializes")
    }
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolyDoc::from_polynomial(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        PolyDoc::deserialize(d)?
            .into_polynomial()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::super::rational::{int, rat};
    use super::super::var_names;
    use super::*;

    #[test]
    fn single_term() {
        let p = parse_poly(r#"{"vars":["x1"],"terms":[{"c":"1/1","e":[2]}]}"#).unwrap();
        assert_eq!(p, Polynomial::var("x1").pow(2));
    }

    #[test]
    fn direct_reading() {
        let p = parse_poly(
            r#"{"vars":["x1","x2"],"terms":[{"c":"2/3","e":[4,0]},{"c":"-1/1","e":[0,0]}]}"#,
        )
        .unwrap();
        let x1 = Polynomial::variable(var_names("x", 2), 0);
        let expect = &x1.pow(4).scale(&rat(2, 3)) - &Polynomial::one(var_names("x", 2));
        assert_eq!(p, expect);
        assert_eq!(
            p.to_json(),
            r#"{"vars":["x1","x2"],"terms":[{"c":"-1/1","e":[0,0]},{"c":"2/3","e":[4,0]}]}"#
        );
    }

    #[test]
    fn repeated_exponents_are_summed() {
        let p = parse_poly(
            r#"{"vars":["x1"],"terms":[{"c":"1/2","e":[1]},{"c":"1/3","e":[1]},{"c":"2/1","e":[0]},{"c":"-2/1","e":[0]}]}"#,
        )
        .unwrap();
        assert_eq!(p, Polynomial::var("x1").scale(&rat(5, 6)));
        assert_eq!(p.num_terms(), 1);
    }

    #[test]
    fn errors() {
        let e = parse_poly(r#"{"vars":["x1"],"terms":[{"c":"1/1","e":[2,1]}]}"#).unwrap_err();
        assert!(matches!(e, PolyError::Structure(_)), "{e}");
        let e = parse_poly("{\"vars\":[\"x1\"],\n \"terms\": [ {\"c\": 1}]}").unwrap_err();
        match e {
            PolyError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other}"),
        }
        let e = parse_poly(r#"{"vars":["x1"],"terms":[{"c":"1/0","e":[1]}]}"#).unwrap_err();
        assert!(matches!(e, PolyError::Structure(_)));
        let e = parse_poly(r#"{"vars":["x1","x1"],"terms":[]}"#).unwrap_err();
        assert!(matches!(e, PolyError::Structure(_)));
        assert!(parse_poly(r#"{"vars":["x1"],"terms":[{"c":"1/1","e":[-1]}]}"#).is_err());
    }

    #[test]
    fn zero_and_constant_round_trip() {
        let z = Polynomial::zero(var_names("x", 2));
        assert_eq!(parse_poly(&z.to_json()).unwrap(), z);
        let c = Polynomial::constant(vec![], int(-3));
        assert_eq!(c.to_json(), r#"{"vars":[],"terms":[{"c":"-3/1","e":[]}]}"#);
    }
}
