//! Defect nomenclature: `Ge_NV_N`, `P_BV_B^{-1}`, `C_BC_NC_BC_N-2`, `C-V_NV_B`.
//!
//! ```text
//! Label       := Constituent+ Charge? Conformer?
//! Constituent := Species "_"? Site
//! Species     := Element | "V" | Element "-" Species
//! Site        := "B" | "N"
//! Charge      := "^{" ("+"|"-") n "}" | "^" ("+"|"-") n | "+" n
//! Conformer   := "-" k
//! ```
//!
//! Whitespace and underscores between tokens are ignored. A bare `-k` after
//! the constituents is a conformer index; negative charges need the `^` form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const ELEMENTS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",
    "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce",
    "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir",
    "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc",
    "Lv", "Ts", "Og",
];

fn is_element(symbol: &str) -> bool {
    ELEMENTS.contains(&symbol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelErrorKind {
    Empty,
    UnknownElement,
    InvalidSite,
    MalformedCharge,
    MalformedConformer,
    UnexpectedToken,
}

impl fmt::Display for LabelErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelErrorKind::Empty => "empty label",
            LabelErrorKind::UnknownElement => "unknown element",
            LabelErrorKind::InvalidSite => "invalid site",
            LabelErrorKind::MalformedCharge => "malformed charge",
            LabelErrorKind::MalformedConformer => "malformed conformer",
            LabelErrorKind::UnexpectedToken => "unexpected token",
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{kind} {token:?} at byte {offset}")]
pub struct LabelError {
    pub kind: LabelErrorKind,
    pub token: String,
    pub offset: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Site {
    B,
    N,
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Site::B => "B",
            Site::N => "N",
        })
    }
}

/// Occupant of a lattice site: an element, a vacancy `V`, or a literal
/// hyphenated cluster such as `C-V`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Species {
    parts: Vec<String>,
}

impl Species {
    pub fn element(symbol: &str) -> Option<Self> {
        is_element(symbol).then(|| Self { parts: vec![symbol.to_string()] })
    }

    pub fn vacancy() -> Self {
        Self { parts: vec!["V".into()] }
    }

    /// Only unambiguous in context: `V` is also vanadium, but on an hBN
    /// lattice site it always denotes a vacancy.
    pub fn is_vacancy(&self) -> bool {
        self.parts.len() == 1 && self.parts[0] == "V"
    }

    pub fn is_cluster(&self) -> bool {
        self.parts.len() > 1
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.parts.join("-"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constituent {
    pub species: Species,
    pub site: Site,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DefectLabel {
    constituents: Vec<Constituent>,
    charge: i32,
    conformer: Option<u32>,
}

impl DefectLabel {
    pub fn new(constituents: Vec<Constituent>, charge: i32, conformer: Option<u32>) -> Option<Self> {
        if constituents.is_empty() || conformer == Some(0) {
            return None;
        }
        Some(Self { constituents, charge, conformer })
    }

    pub fn constituents(&self) -> &[Constituent] {
        &self.constituents
    }

    pub fn charge(&self) -> i32 {
        self.charge
    }

    pub fn conformer(&self) -> Option<u32> {
        self.conformer
    }
}

impl fmt::Display for DefectLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constituents {
            write!(f, "{}_{}", c.species, c.site)?;
        }
        if self.charge != 0 {
            write!(f, "^{{{:+}}}", self.charge)?;
        }
        if let Some(k) = self.conformer {
            write!(f, "-{k}")?;
        }
        Ok(())
    }
}

impl FromStr for DefectLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_defect_label(s)
    }
}

impl Serialize for DefectLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DefectLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn peek_at(&self, ahead: usize) -> Option<u8> {
        self.src.as_bytes().get(self.pos + ahead).copied()
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek(), Some(b) if b == b'_' || b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn skip_whitespace(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn digits(&mut self) -> &'a str {
        let start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    /// Rest of the current token, for error messages.
    fn token_from(&self, start: usize) -> String {
        let rest = &self.src[start..];
        let end = rest
            .char_indices()
            .skip(1)
            .find(|(_, c)| *c == '_' || c.is_whitespace() || *c == '^' || c.is_ascii_uppercase())
            .map_or(rest.len(), |(i, _)| i);
        rest[..end].to_string()
    }

    fn error(&self, kind: LabelErrorKind, start: usize) -> LabelError {
        LabelError { kind, token: self.token_from(start), offset: start }
    }
}

/// One capital letter plus an optional lowercase letter.
fn symbol(cur: &mut Cursor<'_>) -> Option<(usize, String)> {
    let start = cur.pos;
    let first = cur.peek().filter(u8::is_ascii_uppercase)?;
    cur.pos += 1;
    let mut sym = String::from(first as char);
    if let Some(b) = cur.peek().filter(u8::is_ascii_lowercase) {
        sym.push(b as char);
        cur.pos += 1;
    }
    Some((start, sym))
}

pub fn parse_defect_label(text: &str) -> Result<DefectLabel, LabelError> {
    let mut cur = Cursor { src: text, pos: 0 };
    let mut constituents = Vec::new();

    loop {
        cur.skip_separators();
        match cur.peek() {
            Some(b) if b.is_ascii_uppercase() => {}
            _ => break,
        }
        // Species: symbols joined by '-' while another capital follows.
        let mut parts = Vec::new();
        loop {
            let (start, sym) = symbol(&mut cur).expect("capital checked");
            parts.push((start, sym));
            if cur.peek() == Some(b'-') && cur.peek_at(1).is_some_and(|b| b.is_ascii_uppercase()) {
                cur.pos += 1;
            } else {
                break;
            }
        }
        cur.skip_separators();
        let site_start = cur.pos;
        let site = match symbol(&mut cur) {
            Some((_, s)) if s == "B" => Site::B,
            Some((_, s)) if s == "N" => Site::N,
            _ => return Err(cur.error(LabelErrorKind::InvalidSite, site_start)),
        };
        for (start, sym) in &parts {
            if sym != "V" && !is_element(sym) {
                return Err(LabelError { kind: LabelErrorKind::UnknownElement, token: sym.clone(), offset: *start });
            }
        }
        let species = Species { parts: parts.into_iter().map(|(_, s)| s).collect() };
        constituents.push(Constituent { species, site });
    }

    if constituents.is_empty() {
        return Err(match cur.peek() {
            None => LabelError { kind: LabelErrorKind::Empty, token: String::new(), offset: cur.pos },
            Some(_) => cur.error(LabelErrorKind::UnexpectedToken, cur.pos),
        });
    }

    let mut charge = 0;
    match cur.peek() {
        Some(b'^') => {
            let start = cur.pos;
            cur.pos += 1;
            let braced = cur.peek() == Some(b'{');
            if braced {
                cur.pos += 1;
            }
            charge = signed(&mut cur).ok_or_else(|| cur.error(LabelErrorKind::MalformedCharge, start))?;
            if braced {
                if cur.peek() != Some(b'}') {
                    return Err(cur.error(LabelErrorKind::MalformedCharge, start));
                }
                cur.pos += 1;
            }
        }
        Some(b'+') => {
            let start = cur.pos;
            charge = signed(&mut cur).ok_or_else(|| cur.error(LabelErrorKind::MalformedCharge, start))?;
        }
        _ => {}
    }

    cur.skip_whitespace();
    let mut conformer = None;
    if cur.peek() == Some(b'-') {
        let start = cur.pos;
        cur.pos += 1;
        let k: u32 = cur
            .digits()
            .parse()
            .ok()
            .filter(|k| *k > 0)
            .ok_or_else(|| cur.error(LabelErrorKind::MalformedConformer, start))?;
        conformer = Some(k);
    }

    cur.skip_whitespace();
    if cur.pos < text.len() {
        return Err(cur.error(LabelErrorKind::UnexpectedToken, cur.pos));
    }
    Ok(DefectLabel { constituents, charge, conformer })
}

/// `+n` / `-n`; a bare sign means one unit.
fn signed(cur: &mut Cursor<'_>) -> Option<i32> {
    let sign = match cur.peek()? {
        b'+' => 1,
        b'-' => -1,
        _ => return None,
    };
    cur.pos += 1;
    let digits = cur.digits();
    let n: i32 = if digits.is_empty() { 1 } else { digits.parse().ok()? };
    Some(sign * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parts(label: &DefectLabel) -> Vec<(String, Site)> {
        label.constituents().iter().map(|c| (c.species.to_string(), c.site)).collect()
    }

    #[test]
    fn simple_pair() {
        let l = parse_defect_label("Ge_NV_N").unwrap();
        assert_eq!(parts(&l), vec![("Ge".into(), Site::N), ("V".into(), Site::N)]);
        assert_eq!(l.charge(), 0);
        assert_eq!(l.conformer(), None);
        assert!(l.constituents()[1].species.is_vacancy());
    }

    #[test]
    fn braced_negative_charge() {
        let l = parse_defect_label("P_BV_B^{-1}").unwrap();
        assert_eq!(parts(&l), vec![("P".into(), Site::B), ("V".into(), Site::B)]);
        assert_eq!(l.charge(), -1);
    }

    #[test]
    fn conformer_index() {
        let l = parse_defect_label("C_BC_NC_BC_N-2").unwrap();
        assert_eq!(l.constituents().len(), 4);
        assert!(l.constituents().iter().all(|c| c.species.to_string() == "C"));
        assert_eq!(l.conformer(), Some(2));
        assert_eq!(l.charge(), 0);
    }

    #[test]
    fn invalid_site_reported_at_site_token() {
        let err = parse_defect_label("X_Q").unwrap_err();
        assert_eq!(err.kind, LabelErrorKind::InvalidSite);
        assert_eq!(err.offset, 2);
        assert_eq!(err.token, "Q");
    }

    #[test]
    fn unknown_element() {
        let err = parse_defect_label("Xx_B").unwrap_err();
        assert_eq!(err.kind, LabelErrorKind::UnknownElement);
        assert_eq!((err.token.as_str(), err.offset), ("Xx", 0));
    }

    #[test]
    fn site_with_lowercase_tail_is_invalid() {
        let err = parse_defect_label("Ge_Na").unwrap_err();
        assert_eq!(err.kind, LabelErrorKind::InvalidSite);
        assert_eq!(err.offset, 3);
    }

    #[test]
    fn malformed_charges() {
        for (text, offset) in [("Ga_N^{-1", 4), ("Ga_N^{x}", 4), ("Ga_N^", 4)] {
            let err = parse_defect_label(text).unwrap_err();
            assert_eq!(err.kind, LabelErrorKind::MalformedCharge, "{text}");
            assert_eq!(err.offset, offset, "{text}");
        }
        assert_eq!(parse_defect_label("Ga_N-0").unwrap_err().kind, LabelErrorKind::MalformedConformer);
        assert_eq!(parse_defect_label("Ga_N-").unwrap_err().kind, LabelErrorKind::MalformedConformer);
    }

    #[test]
    fn charge_spellings_agree() {
        let canonical = parse_defect_label("Al_BV_N^{+1}").unwrap();
        for alt in ["Al_BV_N^+1", "Al_BV_N+1", "Al_B V_N ^{+1}", "AlBVN^+", "Al__B_V_N^{+1}"] {
            assert_eq!(parse_defect_label(alt).unwrap(), canonical, "{alt}");
        }
        assert_eq!(canonical.to_string(), "Al_BV_N^{+1}");
    }

    #[test]
    fn charge_and_conformer_together() {
        let l = parse_defect_label("C_BC_N^{-2}-3").unwrap();
        assert_eq!((l.charge(), l.conformer()), (-2, Some(3)));
        assert_eq!(l.to_string(), "C_BC_N^{-2}-3");
    }

    #[test]
    fn hyphenated_cluster_is_literal() {
        let l = parse_defect_label("C-V_NV_B").unwrap();
        assert_eq!(parts(&l), vec![("C-V".into(), Site::N), ("V".into(), Site::B)]);
        assert!(l.constituents()[0].species.is_cluster());
        assert_eq!(l.to_string(), "C-V_NV_B");
    }

    #[test]
    fn empty_and_garbage() {
        assert_eq!(parse_defect_label("").unwrap_err().kind, LabelErrorKind::Empty);
        assert_eq!(parse_defect_label("  ").unwrap_err().kind, LabelErrorKind::Empty);
        let err = parse_defect_label("ge_N").unwrap_err();
        assert_eq!((err.kind, err.offset), (LabelErrorKind::UnexpectedToken, 0));
        let err = parse_defect_label("Ga_N?").unwrap_err();
        assert_eq!((err.kind, err.offset), (LabelErrorKind::UnexpectedToken, 4));
    }

    #[test]
    fn serde_roundtrip_as_string() {
        let l = parse_defect_label("O_NO_BV_B^{-1}").unwrap();
        let json = serde_json::to_string(&l).unwrap();
        assert_eq!(json, "\"O_NO_BV_B^{-1}\"");
        assert_eq!(serde_json::from_str::<DefectLabel>(&json).unwrap(), l);
        assert!(serde_json::from_str::<DefectLabel>("\"X_Q\"").is_err());
    }

    fn species_strategy() -> impl Strategy<Value = Species> {
        let single = prop::sample::select(ELEMENTS.to_vec()).prop_map(|s| Species { parts: vec![s.to_string()] });
        prop_oneof![
            4 => single,
            1 => prop::collection::vec(prop::sample::select(vec!["C", "V", "N", "B", "Si"]), 2..4)
                .prop_map(|p| Species { parts: p.into_iter().map(String::from).collect() }),
        ]
    }

    prop_compose! {
        fn label_strategy()(
            constituents in prop::collection::vec(
                (species_strategy(), prop::bool::ANY)
                    .prop_map(|(species, b)| Constituent { species, site: if b { Site::B } else { Site::N } }),
                1..6,
            ),
            charge in -4i32..=4,
            conformer in prop::option::of(1u32..20),
        ) -> DefectLabel {
            DefectLabel { constituents, charge, conformer }
        }
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(label in label_strategy()) {
            let text = label.to_string();
            prop_assert_eq!(parse_defect_label(&text).unwrap(), label);
        }

        #[test]
        fn parser_never_panics(text in "\\PC{0,24}") {
            let _ = parse_defect_label(&text);
        }
    }
}
