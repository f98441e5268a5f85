//! Shared domain types for the single-cell full-duplex scheduling problem.
//!
//! Everything in here is stored in linear units (watts, linear gains). The
//! dB/dBm conversions at the bottom are for config and report boundaries only.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("UL user {ul} paired with DL user {dl}, but there are only {num_dl} DL users")]
    PartnerOutOfRange { ul: usize, dl: usize, num_dl: usize },
    #[error("DL user {dl} is claimed by more than one UL user")]
    DuplicatePartner { dl: usize },
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("gain {what}[{index}] = {value} is not strictly positive and finite")]
    BadGain {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("power {what}[{index}] = {value} outside [0, {max}]")]
    PowerOutOfRange {
        what: &'static str,
        index: usize,
        value: f64,
        max: f64,
    },
}

/// How the per-user weights of the weighted-sum term are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WeightMode {
    /// All weights equal to one.
    #[serde(rename = "sr", alias = "sum-rate", alias = "SumRate")]
    SumRate,
    /// Weights equal to the inverse direct-link gain of each user.
    #[serde(rename = "pl", alias = "path-loss", alias = "PathLossCompensation")]
    PathLossCompensation,
}

impl WeightMode {
    pub fn short_name(self) -> &'static str {
        match self {
            WeightMode::SumRate => "sr",
            WeightMode::PathLossCompensation => "pl",
        }
    }
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Rule deciding whether a link is line-of-sight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LosRule {
    /// Urban-micro distance-dependent LOS probability, drawn per link.
    #[default]
    Umi,
    ForceLos,
    ForceNlos,
}

/// Physical and system constants of one scenario. Linear units throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub cell_radius_m: f64,
    pub num_ul: usize,
    pub num_dl: usize,
    pub num_channels: usize,
    pub carrier_hz: f64,
    /// Thermal noise per channel, watts.
    pub noise_power_w: f64,
    /// Residual self-interference factor applied to the BS transmit power.
    pub si_cancellation: f64,
    pub p_max_ul_w: f64,
    pub p_max_dl_w: f64,
    /// Weight of the minimum-SE term; `1 - mu` weighs the weighted sum.
    pub mu: f64,
    pub weight_mode: WeightMode,
    pub min_bs_ue_distance_m: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub los_rule: LosRule,
    /// LOS rule for UE-to-UE links; `None` reuses `los_rule`.
    #[serde(default)]
    pub ue_los_rule: Option<LosRule>,
    #[serde(default = "default_true")]
    pub shadowing: bool,
}

fn default_true() -> bool {
    true
}

impl ScenarioParams {
    /// Urban-micro defaults: 100 m cell, 2.5 GHz, -116.4 dBm noise per
    /// channel, -100 dB SI cancellation, 24 dBm max power on both links.
    pub fn urban_micro(num_ul: usize, num_dl: usize, num_channels: usize) -> Self {
        ScenarioParams {
            cell_radius_m: 100.0,
            num_ul,
            num_dl,
            num_channels,
            carrier_hz: 2.5e9,
            noise_power_w: dbm_to_watts(-116.4),
            si_cancellation: db_to_linear(-100.0),
            p_max_ul_w: dbm_to_watts(24.0),
            p_max_dl_w: dbm_to_watts(24.0),
            mu: 0.5,
            weight_mode: WeightMode::SumRate,
            min_bs_ue_distance_m: 3.0,
            rng_seed: 0,
            los_rule: LosRule::Umi,
            ue_los_rule: None,
            shadowing: true,
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_weight_mode(mut self, mode: WeightMode) -> Self {
        self.weight_mode = mode;
        self
    }

    pub fn num_users(&self) -> usize {
        self.num_ul + self.num_dl
    }
}

/// One violated constraint on a [`ScenarioParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("OK");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_params(p: &ScenarioParams) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut check = |ok: bool, rule: &'static str, detail: String| {
        if !ok {
            report.violations.push(Violation { rule, detail });
        }
    };
    check(
        p.num_ul <= p.num_channels,
        "I ≤ F",
        format!("{} UL users but {} channels", p.num_ul, p.num_channels),
    );
    check(
        p.num_dl <= p.num_channels,
        "J ≤ F",
        format!("{} DL users but {} channels", p.num_dl, p.num_channels),
    );
    check(
        (0.0..=1.0).contains(&p.mu),
        "μ ∈ [0,1]",
        format!("mu = {}", p.mu),
    );
    let positive = |x: f64| x.is_finite() && x > 0.0;
    check(
        positive(p.cell_radius_m),
        "radius > 0",
        format!("cell_radius_m = {}", p.cell_radius_m),
    );
    check(
        positive(p.p_max_ul_w),
        "P_max^u > 0",
        format!("p_max_ul_w = {}", p.p_max_ul_w),
    );
    check(
        positive(p.p_max_dl_w),
        "P_max^d > 0",
        format!("p_max_dl_w = {}", p.p_max_dl_w),
    );
    check(
        positive(p.noise_power_w),
        "σ² > 0",
        format!("noise_power_w = {}", p.noise_power_w),
    );
    check(
        positive(p.si_cancellation) && p.si_cancellation <= 1.0,
        "0 < β ≤ 1",
        format!("si_cancellation = {}", p.si_cancellation),
    );
    check(
        p.min_bs_ue_distance_m.is_finite()
            && p.min_bs_ue_distance_m >= 0.0
            && p.min_bs_ue_distance_m < p.cell_radius_m,
        "0 ≤ d_min < radius",
        format!(
            "min_bs_ue_distance_m = {} with radius {}",
            p.min_bs_ue_distance_m, p.cell_radius_m
        ),
    );
    report
}

/// Planar coordinates in metres.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub bs: Point,
    pub ul: Vec<Point>,
    pub dl: Vec<Point>,
}

/// Linear path gains of one network drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    /// UL user to BS, length I.
    pub g_ul: Vec<f64>,
    /// BS to DL user, length J.
    pub g_dl: Vec<f64>,
    /// UL user i to DL user j, I rows of length J.
    pub g_cross: Vec<Vec<f64>>,
    pub positions: Positions,
}

impl GainTable {
    pub fn num_ul(&self) -> usize {
        self.g_ul.len()
    }

    pub fn num_dl(&self) -> usize {
        self.g_dl.len()
    }

    /// Checks shapes against `(num_ul, num_dl)` and that every gain is
    /// strictly positive and finite.
    pub fn validate(&self, num_ul: usize, num_dl: usize) -> Result<(), ModelError> {
        let dim = |what, got, expected| {
            if got == expected {
                Ok(())
            } else {
                Err(ModelError::Dimension {
                    what,
                    got,
                    expected,
                })
            }
        };
        dim("g_ul", self.g_ul.len(), num_ul)?;
        dim("g_dl", self.g_dl.len(), num_dl)?;
        dim("g_cross", self.g_cross.len(), num_ul)?;
        for row in &self.g_cross {
            dim("g_cross row", row.len(), num_dl)?;
        }
        let gain_ok = |what, gains: &[f64], offset: usize| {
            for (k, &g) in gains.iter().enumerate() {
                if !(g.is_finite() && g > 0.0) {
                    return Err(ModelError::BadGain {
                        what,
                        index: offset + k,
                        value: g,
                    });
                }
            }
            Ok(())
        };
        gain_ok("g_ul", &self.g_ul, 0)?;
        gain_ok("g_dl", &self.g_dl, 0)?;
        for (i, row) in self.g_cross.iter().enumerate() {
            gain_ok("g_cross", row, i * num_dl)?;
        }
        Ok(())
    }

    /// Copy of the table with every UE-to-UE gain set to zero.
    ///
    /// The result intentionally fails [`GainTable::validate`]; it is only
    /// used as a planning view that ignores UE-to-UE interference.
    pub fn without_cross(&self) -> GainTable {
        GainTable {
            g_cross: self
                .g_cross
                .iter()
                .map(|row| vec![0.0; row.len()])
                .collect(),
            ..self.clone()
        }
    }
}

/// Binary UL/DL pairing with at most one partner per user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pairing {
    partner_of_ul: Vec<Option<usize>>,
    partner_of_dl: Vec<Option<usize>>,
}

impl Pairing {
    /// Nobody paired.
    pub fn empty(num_ul: usize, num_dl: usize) -> Self {
        Pairing {
            partner_of_ul: vec![None; num_ul],
            partner_of_dl: vec![None; num_dl],
        }
    }

    /// Builds a pairing from the UL-side partner vector.
    pub fn from_ul_partners(
        partner_of_ul: Vec<Option<usize>>,
        num_dl: usize,
    ) -> Result<Self, ModelError> {
        let mut partner_of_dl = vec![None; num_dl];
        for (ul, partner) in partner_of_ul.iter().enumerate() {
            if let Some(dl) = *partner {
                let slot = partner_of_dl
                    .get_mut(dl)
                    .ok_or(ModelError::PartnerOutOfRange { ul, dl, num_dl })?;
                if slot.is_some() {
                    return Err(ModelError::DuplicatePartner { dl });
                }
                *slot = Some(ul);
            }
        }
        Ok(Pairing {
            partner_of_ul,
            partner_of_dl,
        })
    }

    pub fn from_pairs(
        num_ul: usize,
        num_dl: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ModelError> {
        let mut partner_of_ul = vec![None; num_ul];
        for (ul, dl) in pairs {
            if ul >= num_ul {
                return Err(ModelError::Dimension {
                    what: "UL index",
                    got: ul,
                    expected: num_ul,
                });
            }
            if partner_of_ul[ul].is_some() {
                // a UL user listed twice is as invalid as a shared DL user
                return Err(ModelError::DuplicatePartner { dl });
            }
            partner_of_ul[ul] = Some(dl);
        }
        Self::from_ul_partners(partner_of_ul, num_dl)
    }

    pub fn num_ul(&self) -> usize {
        self.partner_of_ul.len()
    }

    pub fn num_dl(&self) -> usize {
        self.partner_of_dl.len()
    }

    pub fn partner_of_ul(&self, ul: usize) -> Option<usize> {
        self.partner_of_ul[ul]
    }

    pub fn partner_of_dl(&self, dl: usize) -> Option<usize> {
        self.partner_of_dl[dl]
    }

    pub fn ul_partners(&self) -> &[Option<usize>] {
        &self.partner_of_ul
    }

    pub fn dl_partners(&self) -> &[Option<usize>] {
        &self.partner_of_dl
    }

    /// `(ul, dl)` pairs in UL index order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.partner_of_ul
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|j| (i, j)))
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs().count()
    }

    /// Channels occupied: one per pair plus one per unpaired user.
    pub fn channels_used(&self) -> usize {
        self.num_ul() + self.num_dl() - self.num_pairs()
    }

    /// The 0/1 pairing matrix, I rows by J columns.
    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        let mut x = vec![vec![0u8; self.num_dl()]; self.num_ul()];
        for (i, j) in self.pairs() {
            x[i][j] = 1;
        }
        x
    }
}

/// Transmit powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p_ul: Vec<f64>,
    pub p_dl: Vec<f64>,
}

impl PowerAllocation {
    /// Every user at its maximum power.
    pub fn full(params: &ScenarioParams) -> Self {
        PowerAllocation {
            p_ul: vec![params.p_max_ul_w; params.num_ul],
            p_dl: vec![params.p_max_dl_w; params.num_dl],
        }
    }

    pub fn validate(&self, params: &ScenarioParams) -> Result<(), ModelError> {
        let check = |what, powers: &[f64], max: f64| {
            for (index, &value) in powers.iter().enumerate() {
                // relative slack so a max-power value survives a dBm round trip
                if !(value >= 0.0 && value <= max * (1.0 + 1e-12)) {
                    return Err(ModelError::PowerOutOfRange {
                        what,
                        index,
                        value,
                        max,
                    });
                }
            }
            Ok(())
        };
        check("p_ul", &self.p_ul, params.p_max_ul_w)?;
        check("p_dl", &self.p_dl, params.p_max_dl_w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub alpha_ul: Vec<f64>,
    pub alpha_dl: Vec<f64>,
}

impl WeightVector {
    pub fn ones(num_ul: usize, num_dl: usize) -> Self {
        WeightVector {
            alpha_ul: vec![1.0; num_ul],
            alpha_dl: vec![1.0; num_dl],
        }
    }
}

/// Scalarized objective: `(1 - mu) * sum(alpha * C) + mu * min(C)`.
///
/// The minimum ranges over every UL and DL user. With no users at all the
/// minimum term is taken as zero.
pub fn scalarized_objective(se_ul: &[f64], se_dl: &[f64], weights: &WeightVector, mu: f64) -> f64 {
    let weighted: f64 = se_ul
        .iter()
        .zip(&weights.alpha_ul)
        .chain(se_dl.iter().zip(&weights.alpha_dl))
        .map(|(c, a)| a * c)
        .sum();
    (1.0 - mu) * weighted + mu * min_se(se_ul, se_dl)
}

pub fn min_se(se_ul: &[f64], se_dl: &[f64]) -> f64 {
    let m = se_ul
        .iter()
        .chain(se_dl)
        .copied()
        .fold(f64::INFINITY, f64::min);
    if m.is_finite() {
        m
    } else {
        0.0
    }
}

/// Result of scheduling one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    pub pairing: Pairing,
    pub powers: PowerAllocation,
    pub se_ul: Vec<f64>,
    pub se_dl: Vec<f64>,
    pub objective: f64,
    pub sum_se: f64,
    pub min_se: f64,
    pub jain: f64,
}

impl ScheduleOutcome {
    /// All I+J spectral efficiencies, UL first.
    pub fn all_se(&self) -> Vec<f64> {
        self.se_ul.iter().chain(&self.se_dl).copied().collect()
    }

    pub fn recompute_objective(&self, weights: &WeightVector, mu: f64) -> f64 {
        scalarized_objective(&self.se_ul, &self.se_dl, weights, mu)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn validate_accepts_square_instance() {
        let p = ScenarioParams::urban_micro(4, 4, 4).with_mu(0.5);
        assert!(validate_params(&p).is_ok());
    }

    #[test]
    fn validate_flags_too_many_ul_users() {
        let p = ScenarioParams::urban_micro(5, 4, 4);
        let report = validate_params(&p);
        assert!(report.violates("I ≤ F"), "{report}");
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn validate_flags_mu_out_of_range() {
        let p = ScenarioParams::urban_micro(4, 4, 4).with_mu(1.2);
        let report = validate_params(&p);
        assert!(report.violates("μ ∈ [0,1]"), "{report}");
    }

    #[test]
    fn validate_flags_beta_above_one_and_nonpositive_power() {
        let mut p = ScenarioParams::urban_micro(2, 2, 2);
        p.si_cancellation = 2.0;
        p.p_max_dl_w = 0.0;
        let report = validate_params(&p);
        assert!(report.violates("0 < β ≤ 1"));
        assert!(report.violates("P_max^d > 0"));
    }

    #[test]
    fn dbm_conversions() {
        assert_eq!(dbm_to_watts(30.0), 1.0);
        assert!((dbm_to_watts(24.0) - 0.2512).abs() < 1e-4);
        assert!((dbm_to_watts(-116.4) - 2.291e-15).abs() < 1e-18);
    }

    #[test]
    fn pairing_rejects_shared_dl_user() {
        let err = Pairing::from_ul_partners(vec![Some(1), Some(1)], 2).unwrap_err();
        assert_eq!(err, ModelError::DuplicatePartner { dl: 1 });
        let err = Pairing::from_ul_partners(vec![Some(3)], 2).unwrap_err();
        assert!(matches!(err, ModelError::PartnerOutOfRange { .. }));
    }

    #[test]
    fn pairing_views_agree() {
        let x = Pairing::from_pairs(3, 2, [(2, 0), (0, 1)]).unwrap();
        assert_eq!(x.partner_of_dl(0), Some(2));
        assert_eq!(x.partner_of_dl(1), Some(0));
        assert_eq!(x.partner_of_ul(1), None);
        assert_eq!(x.num_pairs(), 2);
        assert_eq!(x.channels_used(), 3);
        assert_eq!(x.to_matrix(), vec![vec![0, 1], vec![0, 0], vec![1, 0]]);
    }

    #[test]
    fn objective_with_unit_weights() {
        let w = WeightVector::ones(2, 1);
        let obj = scalarized_objective(&[1.0, 3.0], &[2.0], &w, 0.25);
        assert_relative_eq!(obj, 0.75 * 6.0 + 0.25 * 1.0);
    }

    #[test]
    fn gain_table_validation() {
        let g = GainTable {
            g_ul: vec![1e-8],
            g_dl: vec![1e-9],
            g_cross: vec![vec![1e-10]],
            positions: Positions {
                bs: [0.0, 0.0],
                ul: vec![[1.0, 0.0]],
                dl: vec![[0.0, 1.0]],
            },
        };
        assert!(g.validate(1, 1).is_ok());
        assert!(matches!(
            g.validate(2, 1),
            Err(ModelError::Dimension { what: "g_ul", .. })
        ));
        assert!(matches!(
            g.without_cross().validate(1, 1),
            Err(ModelError::BadGain { .. })
        ));
    }

    proptest! {
        #[test]
        fn dbm_round_trip(x in -150.0f64..50.0) {
            prop_assert!((watts_to_dbm(dbm_to_watts(x)) - x).abs() < 1e-9);
        }

        #[test]
        fn pairing_matrix_has_unit_row_and_column_sums(
            perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(),
            keep in proptest::collection::vec(any::<bool>(), 6),
            num_ul in 0usize..=6,
        ) {
            let partners: Vec<Option<usize>> = (0..num_ul)
                .map(|i| keep[i].then_some(perm[i]))
                .collect();
            let x = Pairing::from_ul_partners(partners, 6).unwrap();
            let m = x.to_matrix();
            for row in &m {
                prop_assert!(row.iter().map(|&v| v as u32).sum::<u32>() <= 1);
            }
            for j in 0..6 {
                prop_assert!(m.iter().map(|r| r[j] as u32).sum::<u32>() <= 1);
            }
            for (i, j) in x.pairs() {
                prop_assert_eq!(x.partner_of_dl(j), Some(i));
            }
        }
    }
}
