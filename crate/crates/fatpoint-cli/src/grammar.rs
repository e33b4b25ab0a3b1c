//! Grammar for linear systems: `d` alone or `d; e1, e2, ...` where each
//! entry is an integer multiplicity `m`, a repeated `m^k`, a two-point
//! cluster `[m1, m2]` whose second point is infinitely near the first, or a
//! repeated cluster `[m1, m2]^k`. Whitespace is insignificant everywhere.
//! Points are labelled `p1, p2, ...` in reading order; the near point of
//! cluster `pj` is `pj.1`.

use std::str::FromStr;

use fatpoint::lattice::{Configuration, DivisorClass, Label};
use fatpoint::Int;
use num_traits::ToPrimitive;
use thiserror::Error;

/// Largest accepted `^k` repeat count.
const MAX_REPEAT: u64 = 100_000;

/// A syntax error with the byte offset where parsing stopped.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("parse error at byte {pos}: {message}")]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

/// A parsed system: the divisor class over its point configuration.
#[derive(Clone, Debug)]
pub struct ParsedSystem {
    pub class: DivisorClass<Int>,
    pub cfg: Configuration,
}

enum Entry {
    Free(Int),
    Cluster(Int, Int),
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            pos: self.pos,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: u8) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", want as char)))
        }
    }

    fn integer(&mut self) -> Result<Int, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let digits = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits {
            return Err(self.err("expected an integer"));
        }
        Int::from_str(&self.src[start..self.pos]).map_err(|e| ParseError {
            pos: start,
            message: e.to_string(),
        })
    }

    fn repeat(&mut self) -> Result<u64, ParseError> {
        self.skip_ws();
        if self.peek() != Some(b'^') {
            return Ok(1);
        }
        self.pos += 1;
        self.skip_ws();
        let at = self.pos;
        let count = self.integer()?;
        match count.to_u64() {
            Some(n) if (1..=MAX_REPEAT).contains(&n) => Ok(n),
            Some(0) => Err(ParseError {
                pos: at,
                message: "repeat count must be positive".into(),
            }),
            _ => Err(ParseError {
                pos: at,
                message: format!("repeat count exceeds {MAX_REPEAT}"),
            }),
        }
    }

    fn entry(&mut self) -> Result<(Entry, u64), ParseError> {
        self.skip_ws();
        if self.peek() == Some(b'[') {
            self.pos += 1;
            let first = self.integer()?;
            self.expect(b',')?;
            let second = self.integer()?;
            self.expect(b']')?;
            Ok((Entry::Cluster(first, second), self.repeat()?))
        } else {
            let m = self.integer()?;
            Ok((Entry::Free(m), self.repeat()?))
        }
    }
}

/// Parses a system description, e.g. `174; 55^10`, `24; 11^4, [4,4]^2`,
/// `10; -1, 3^2`, or a bare degree `6`.
pub fn parse_system(input: &str) -> Result<ParsedSystem, ParseError> {
    let mut cur = Cursor { src: input, pos: 0 };
    let degree = cur.integer()?;
    let mut cfg = Configuration::free(0);
    let mut mults: Vec<(Label, Int)> = Vec::new();
    cur.skip_ws();
    if cur.peek() == Some(b';') {
        cur.pos += 1;
        let mut index = 0usize;
        loop {
            let (entry, repeat) = cur.entry()?;
            for _ in 0..repeat {
                index += 1;
                let parent = Label::new(format!("p{index}"));
                cfg.push_free(parent.clone())
                    .expect("reading-order labels are fresh");
                match &entry {
                    Entry::Free(m) => mults.push((parent, m.clone())),
                    Entry::Cluster(m1, m2) => {
                        let child = Label::new(format!("p{index}.1"));
                        cfg.push_near(child.clone(), parent.clone())
                            .expect("reading-order labels are fresh");
                        mults.push((parent, m1.clone()));
                        mults.push((child, m2.clone()));
                    }
                }
            }
            cur.skip_ws();
            if cur.peek() == Some(b',') {
                cur.pos += 1;
            } else {
                break;
            }
        }
    }
    cur.skip_ws();
    if cur.pos < input.len() {
        return Err(cur.err("unexpected trailing input"));
    }
    Ok(ParsedSystem {
        class: DivisorClass::new(degree, mults),
        cfg,
    })
}

/// Renders a class over its configuration in the grammar, compressing equal
/// consecutive entries with `^k`: the inverse of [`parse_system`] up to
/// whitespace.
pub fn render_system(class: &DivisorClass<Int>, cfg: &Configuration) -> String {
    let points = cfg.points();
    let mut entries: Vec<String> = Vec::new();
    let mut i = 0;
    while i < points.len() {
        let label = &points[i].label;
        match cfg.child_of(label) {
            Some(child) if points.get(i + 1).map(|n| &n.label) == Some(child) => {
                entries.push(format!("[{},{}]", class.mult(label), class.mult(child)));
                i += 2;
            }
            _ => {
                entries.push(class.mult(label).to_string());
                i += 1;
            }
        }
    }
    let mut out = class.degree().to_string();
    let mut first = true;
    let mut i = 0;
    while i < entries.len() {
        let mut run = 1;
        while i + run < entries.len() && entries[i + run] == entries[i] {
            run += 1;
        }
        out.push_str(if first { "; " } else { ", " });
        first = false;
        out.push_str(&entries[i]);
        if run > 1 {
            out.push_str(&format!("^{run}"));
        }
        i += run;
    }
    out
}

/// Parses a rational bound `N/D`, or a bare integer `N` with denominator 1.
pub fn parse_ratio(input: &str) -> Result<(i64, i64), ParseError> {
    let text = input.trim();
    let (num_text, den_text) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let part = |s: &str, what: &str| {
        s.parse::<i64>().map_err(|_| ParseError {
            pos: 0,
            message: format!("invalid {what} in ratio `{input}`"),
        })
    };
    let num = part(num_text, "numerator")?;
    let den = part(den_text, "denominator")?;
    if den <= 0 {
        return Err(ParseError {
            pos: 0,
            message: format!("ratio `{input}` needs a positive denominator"),
        });
    }
    Ok((num, den))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mult_at(sys: &ParsedSystem, label: &str) -> i64 {
        sys.class.mult(&Label::from(label)).to_i64().unwrap()
    }

    #[test]
    fn parses_homogeneous_systems() {
        let sys = parse_system("174; 55^10").unwrap();
        assert_eq!(sys.class.degree().to_i64(), Some(174));
        assert_eq!(sys.cfg.len(), 10);
        assert!(sys.cfg.labels().all(|l| sys.cfg.is_free(l)));
        assert_eq!(mult_at(&sys, "p1"), 55);
        assert_eq!(mult_at(&sys, "p10"), 55);
    }

    #[test]
    fn parses_clusters_in_reading_order() {
        let sys = parse_system("24; 11^4, [4,5]^2").unwrap();
        assert_eq!(sys.cfg.len(), 8);
        assert_eq!(mult_at(&sys, "p4"), 11);
        assert_eq!(mult_at(&sys, "p5"), 4);
        assert_eq!(mult_at(&sys, "p5.1"), 5);
        assert_eq!(
            sys.cfg.parent_of(&Label::from("p6.1")),
            Some(&Label::from("p6"))
        );
        assert!(sys.cfg.is_free(&Label::from("p5")));
    }

    #[test]
    fn ignores_whitespace_and_accepts_negatives() {
        let sys = parse_system(" 10 ;  -1 , 3 ^ 2 , [ 2 , -4 ] ").unwrap();
        assert_eq!(mult_at(&sys, "p1"), -1);
        assert_eq!(mult_at(&sys, "p3"), 3);
        assert_eq!(mult_at(&sys, "p4.1"), -4);
    }

    #[test]
    fn parses_bare_degree() {
        let sys = parse_system("6").unwrap();
        assert_eq!(sys.class.degree().to_i64(), Some(6));
        assert!(sys.cfg.is_empty());
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "", ";", "24;", "24; 3,", "24; 3^0", "24; 3^-1", "24; [4]", "24; [4,]", "24; 3 4",
            "24; 3 x", "24 3",
        ] {
            assert!(parse_system(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn reports_error_positions_in_bytes() {
        let err = parse_system("24; 3^0").unwrap_err();
        assert_eq!(err.pos, 6);
        let err = parse_system("24; 3, x").unwrap_err();
        assert_eq!(err.pos, 7);
    }

    #[test]
    fn render_round_trips() {
        for src in [
            "174; 55^10",
            "24; 11^4, [4,5]^2",
            "10; -1, 3^2, [2,-4]",
            "6",
            "0; 0^3",
            "54; 36, 15^6",
        ] {
            let sys = parse_system(src).unwrap();
            let rendered = render_system(&sys.class, &sys.cfg);
            let again = parse_system(&rendered).unwrap();
            assert_eq!(again.class, sys.class, "render of {src:?} was {rendered:?}");
            assert_eq!(
                again.cfg.points(),
                sys.cfg.points(),
                "render of {src:?} was {rendered:?}"
            );
        }
    }

    #[test]
    fn render_compresses_runs() {
        let sys = parse_system("19; 6,6,6, 6^7").unwrap();
        assert_eq!(render_system(&sys.class, &sys.cfg), "19; 6^10");
    }

    #[test]
    fn parses_ratios() {
        assert_eq!(parse_ratio("174/55").unwrap(), (174, 55));
        assert_eq!(parse_ratio(" 19 / 6 ").unwrap(), (19, 6));
        assert_eq!(parse_ratio("4").unwrap(), (4, 1));
        assert!(parse_ratio("3/0").is_err());
        assert!(parse_ratio("3/-2").is_err());
        assert!(parse_ratio("a/2").is_err());
    }
}
