use serde::{Deserialize, Serialize};

use super::record::{DefectRecord, SpinMultiplicity};
use crate::fom::{FigureOfMeritReport, FomFlag, QualityCap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectReason {
    #[serde(rename = "Q_unreachable")]
    QUnreachable,
    #[serde(rename = "no_radiative_channel")]
    NoRadiativeChannel,
    #[serde(rename = "non_triplet")]
    NonTriplet,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::QUnreachable => "Q_unreachable",
            RejectReason::NoRadiativeChannel => "no_radiative_channel",
            RejectReason::NonTriplet => "non_triplet",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rejection {
    pub report: FigureOfMeritReport,
    pub reasons: Vec<RejectReason>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Screening {
    pub cap: Option<QualityCap>,
    pub candidates: Vec<FigureOfMeritReport>,
    pub rejected: Vec<Rejection>,
}

/// Splits evaluated records into memory candidates and rejections. Every
/// input lands in exactly one list, in input order.
pub fn screen(items: &[(DefectRecord, FigureOfMeritReport)], cap: &QualityCap) -> Screening {
    let mut out = Screening { cap: Some(*cap), ..Screening::default() };
    for (record, report) in items {
        let mut reasons = Vec::new();
        if record.spin_multiplicity != SpinMultiplicity::Triplet {
            reasons.push(RejectReason::NonTriplet);
        }
        let radiative = report.gamma_r_per_s > 0.0 && !report.has_flag(FomFlag::NoLambdaStructure);
        if !radiative {
            reasons.push(RejectReason::NoRadiativeChannel);
        }
        if let Some(q) = report.q {
            if !cap.reachable(q) {
                reasons.push(RejectReason::QUnreachable);
            }
        }
        if reasons.is_empty() {
            out.candidates.push(report.clone());
        } else {
            out.rejected.push(Rejection { report: report.clone(), reasons });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defectdb::TransitionSpin;
    use crate::fom::{full_report, CapPolicy, FomContext};

    fn item(label: &str, zpl: f64, tau: f64, mult: SpinMultiplicity) -> (DefectRecord, FigureOfMeritReport) {
        let r = DefectRecord {
            host: "hBN".into(),
            label: label.parse().unwrap(),
            spin_multiplicity: mult,
            transition_spin: TransitionSpin::Up,
            zpl_nm: zpl,
            dipole: None,
            lifetime_ns: Some(tau),
            source: String::new(),
        };
        let rep = full_report(&r, &FomContext::default()).unwrap();
        (r, rep)
    }

    #[test]
    fn empty_input() {
        let s = screen(&[], &QualityCap::default());
        assert!(s.candidates.is_empty() && s.rejected.is_empty());
    }

    #[test]
    fn reasons_are_collected() {
        let items = vec![
            item("Ga_N", 735.1, 87.8, SpinMultiplicity::Triplet),
            item("In_BV_N^{+1}", 894.4, 6.2e9, SpinMultiplicity::Triplet),
            item("Sb_B", 638.7, 359.6, SpinMultiplicity::Singlet),
            item("Ga_N", 735.1, f64::INFINITY, SpinMultiplicity::Triplet),
        ];
        let s = screen(&items, &QualityCap::default());
        assert_eq!(s.candidates.len(), 1);
        let reasons: Vec<_> = s.rejected.iter().map(|r| r.reasons.clone()).collect();
        assert_eq!(
            reasons,
            vec![
                vec![RejectReason::QUnreachable],
                vec![RejectReason::NonTriplet],
                vec![RejectReason::NoRadiativeChannel],
            ]
        );
        assert_eq!(serde_json::to_string(&RejectReason::QUnreachable).unwrap(), "\"Q_unreachable\"");
    }

    #[test]
    fn infinite_cap_never_rejects_on_q() {
        let items = vec![item("In_BV_N^{+1}", 894.4, 6.2e9, SpinMultiplicity::Triplet)];
        let s = screen(&items, &QualityCap::new(None, CapPolicy::Strict));
        assert_eq!(s.candidates.len(), 1);
    }
}
