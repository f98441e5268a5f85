//! Link-level math: SINRs, spectral efficiencies, weights, and the
//! corner-point power choice for a co-scheduled UL/DL pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::jain_index;
use crate::model::{
    min_se, scalarized_objective, GainTable, ModelError, Pairing, PowerAllocation,
    ScenarioParams, ScheduleOutcome, WeightMode, WeightVector,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("path-loss compensation needs a positive finite {link} gain, user {index} has {value}")]
    ZeroGain {
        link: &'static str,
        index: usize,
        value: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// SINR at the BS for a UL user. `p_d_paired` is zero when the user has no
/// DL partner; the partner's transmit power leaks in through `beta`.
pub fn sinr_ul(p_u: f64, g_ib: f64, p_d_paired: f64, beta: f64, noise: f64) -> f64 {
    p_u * g_ib / (noise + p_d_paired * beta)
}

/// SINR at a DL user, interfered by its UL partner through `g_ij`.
pub fn sinr_dl(p_d: f64, g_bj: f64, p_u_paired: f64, g_ij: f64, noise: f64) -> f64 {
    p_d * g_bj / (noise + p_u_paired * g_ij)
}

/// Shannon spectral efficiency in bit/s/Hz.
pub fn spectral_efficiency(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

pub fn make_weights(mode: WeightMode, gains: &GainTable) -> Result<WeightVector, RadioError> {
    match mode {
        WeightMode::SumRate => Ok(WeightVector::ones(gains.num_ul(), gains.num_dl())),
        WeightMode::PathLossCompensation => {
            let invert = |link: &'static str, g: &[f64]| {
                g.iter()
                    .enumerate()
                    .map(|(index, &value)| {
                        if value > 0.0 && value.is_finite() {
                            Ok(1.0 / value)
                        } else {
                            Err(RadioError::ZeroGain { link, index, value })
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
            };
            Ok(WeightVector {
                alpha_ul: invert("UL", &gains.g_ul)?,
                alpha_dl: invert("DL", &gains.g_dl)?,
            })
        }
    }
}

/// Candidate power setting for a pair, listed in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corner {
    /// `(P_max^u, P_max^d)`
    Both,
    /// `(P_max^u, 0)`
    UlOnly,
    /// `(0, P_max^d)`
    DlOnly,
}

impl Corner {
    /// Preference order when benefits tie.
    pub const ALL: [Corner; 3] = [Corner::Both, Corner::UlOnly, Corner::DlOnly];

    pub fn powers(self, params: &ScenarioParams) -> (f64, f64) {
        match self {
            Corner::Both => (params.p_max_ul_w, params.p_max_dl_w),
            Corner::UlOnly => (params.p_max_ul_w, 0.0),
            Corner::DlOnly => (0.0, params.p_max_dl_w),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub ul_index: usize,
    pub dl_index: usize,
    pub corner: Corner,
    /// `(P_i^u, P_j^d)` in watts.
    pub best_powers: (f64, f64),
    pub se_ul: f64,
    pub se_dl: f64,
    pub benefit: f64,
}

/// Spectral efficiencies of UL user `i` and DL user `j` sharing a channel.
pub fn pair_se(
    i: usize,
    j: usize,
    p_u: f64,
    p_d: f64,
    gains: &GainTable,
    params: &ScenarioParams,
) -> (f64, f64) {
    let n = params.noise_power_w;
    let c_u = spectral_efficiency(sinr_ul(p_u, gains.g_ul[i], p_d, params.si_cancellation, n));
    let c_d = spectral_efficiency(sinr_dl(p_d, gains.g_dl[j], p_u, gains.g_cross[i][j], n));
    (c_u, c_d)
}

/// Pair benefit `(1-mu)(a_u C_u + a_d C_d) + mu min(C_u, C_d)`.
///
/// The min only looks at the two members of the pair.
pub fn pair_benefit(se_ul: f64, se_dl: f64, alpha_ul: f64, alpha_dl: f64, mu: f64) -> f64 {
    (1.0 - mu) * (alpha_ul * se_ul + alpha_dl * se_dl) + mu * se_ul.min(se_dl)
}

/// Benefit of pairing `i` with `j` at an arbitrary power point.
pub fn pair_benefit_at(
    i: usize,
    j: usize,
    p_u: f64,
    p_d: f64,
    gains: &GainTable,
    params: &ScenarioParams,
    weights: &WeightVector,
) -> f64 {
    let (c_u, c_d) = pair_se(i, j, p_u, p_d, gains, params);
    pair_benefit(c_u, c_d, weights.alpha_ul[i], weights.alpha_dl[j], params.mu)
}

/// Best of the three corner points for pair `(i, j)`.
pub fn evaluate_pair(
    i: usize,
    j: usize,
    gains: &GainTable,
    params: &ScenarioParams,
    weights: &WeightVector,
) -> PairEvaluation {
    let mut best: Option<PairEvaluation> = None;
    for corner in Corner::ALL {
        let (p_u, p_d) = corner.powers(params);
        let (se_ul, se_dl) = pair_se(i, j, p_u, p_d, gains, params);
        let benefit = pair_benefit(se_ul, se_dl, weights.alpha_ul[i], weights.alpha_dl[j], params.mu);
        // strict comparison keeps the earlier corner on ties
        if best.as_ref().is_none_or(|b| benefit > b.benefit) {
            best = Some(PairEvaluation {
                ul_index: i,
                dl_index: j,
                corner,
                best_powers: (p_u, p_d),
                se_ul,
                se_dl,
                benefit,
            });
        }
    }
    best.expect("three corners evaluated")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoloEvaluation {
    pub se: f64,
    /// `(1 - mu) * alpha * se`; a lone user adds nothing to the pair-min term.
    pub contribution: f64,
}

pub fn evaluate_solo_ul(
    i: usize,
    gains: &GainTable,
    params: &ScenarioParams,
    weights: &WeightVector,
) -> SoloEvaluation {
    let se = spectral_efficiency(sinr_ul(
        params.p_max_ul_w,
        gains.g_ul[i],
        0.0,
        params.si_cancellation,
        params.noise_power_w,
    ));
    SoloEvaluation {
        se,
        contribution: (1.0 - params.mu) * weights.alpha_ul[i] * se,
    }
}

pub fn evaluate_solo_dl(
    j: usize,
    gains: &GainTable,
    params: &ScenarioParams,
    weights: &WeightVector,
) -> SoloEvaluation {
    let se = spectral_efficiency(sinr_dl(
        params.p_max_dl_w,
        gains.g_dl[j],
        0.0,
        0.0,
        params.noise_power_w,
    ));
    SoloEvaluation {
        se,
        contribution: (1.0 - params.mu) * weights.alpha_dl[j] * se,
    }
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<(), ModelError> {
    if got == expected {
        Ok(())
    } else {
        Err(ModelError::Dimension {
            what,
            got,
            expected,
        })
    }
}

/// Per-user spectral efficiencies for a full pairing/power state.
pub fn user_spectral_efficiencies(
    pairing: &Pairing,
    powers: &PowerAllocation,
    gains: &GainTable,
    params: &ScenarioParams,
) -> Result<(Vec<f64>, Vec<f64>), RadioError> {
    let (ni, nj) = (gains.num_ul(), gains.num_dl());
    check_len("pairing UL side", pairing.num_ul(), ni)?;
    check_len("pairing DL side", pairing.num_dl(), nj)?;
    check_len("p_ul", powers.p_ul.len(), ni)?;
    check_len("p_dl", powers.p_dl.len(), nj)?;
    check_len("g_cross", gains.g_cross.len(), ni)?;
    let n = params.noise_power_w;
    let se_ul = (0..ni)
        .map(|i| {
            let p_d = pairing.partner_of_ul(i).map_or(0.0, |j| powers.p_dl[j]);
            spectral_efficiency(sinr_ul(
                powers.p_ul[i],
                gains.g_ul[i],
                p_d,
                params.si_cancellation,
                n,
            ))
        })
        .collect();
    let se_dl = (0..nj)
        .map(|j| {
            let (p_u, g_ij) = pairing
                .partner_of_dl(j)
                .map_or((0.0, 0.0), |i| (powers.p_ul[i], gains.g_cross[i][j]));
            spectral_efficiency(sinr_dl(powers.p_dl[j], gains.g_dl[j], p_u, g_ij, n))
        })
        .collect();
    Ok((se_ul, se_dl))
}

/// Evaluates the true scalarized objective of a complete schedule.
pub fn outcome_metrics(
    pairing: &Pairing,
    powers: &PowerAllocation,
    gains: &GainTable,
    params: &ScenarioParams,
    weights: &WeightVector,
) -> Result<ScheduleOutcome, RadioError> {
    check_len("alpha_ul", weights.alpha_ul.len(), gains.num_ul())?;
    check_len("alpha_dl", weights.alpha_dl.len(), gains.num_dl())?;
    let (se_ul, se_dl) = user_spectral_efficiencies(pairing, powers, gains, params)?;
    let objective = scalarized_objective(&se_ul, &se_dl, weights, params.mu);
    let sum_se = se_ul.iter().chain(&se_dl).sum();
    let min = min_se(&se_ul, &se_dl);
    let all: Vec<f64> = se_ul.iter().chain(&se_dl).copied().collect();
    let jain = if all.is_empty() { 1.0 } else { jain_index(&all) };
    Ok(ScheduleOutcome {
        pairing: pairing.clone(),
        powers: powers.clone(),
        se_ul,
        se_dl,
        objective,
        sum_se,
        min_se: min,
        jain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dbm_to_watts, Positions};
    use crate::scenario::{build_gain_table, substream};
    use approx::assert_relative_eq;

    fn table(g_ul: Vec<f64>, g_dl: Vec<f64>, g_cross: Vec<Vec<f64>>) -> GainTable {
        let positions = Positions {
            bs: [0.0, 0.0],
            ul: vec![[0.0, 0.0]; g_ul.len()],
            dl: vec![[0.0, 0.0]; g_dl.len()],
        };
        GainTable {
            g_ul,
            g_dl,
            g_cross,
            positions,
        }
    }

    #[test]
    fn unpaired_ul_is_noise_limited() {
        assert_eq!(sinr_ul(2.0, 3.0, 0.0, 0.5, 1.5), 4.0);
    }

    #[test]
    fn ul_sinr_with_self_interference() {
        let p = dbm_to_watts(24.0);
        let noise = dbm_to_watts(-116.4);
        let s = sinr_ul(p, 1e-8, p, 1e-10, noise);
        // hand evaluation of p g / (noise + p beta)
        let expected = 0.251_188_643_150_958 * 1e-8 / (2.290_867_652_767_77e-15 + 0.251_188_643_150_958e-10);
        assert_relative_eq!(s, expected, max_relative = 1e-12);
        assert!((s - 99.991).abs() < 1e-3);
        assert!(sinr_ul(p, 1e-8, p, 2e-10, noise) < s);
    }

    #[test]
    fn dl_sinr_cases() {
        assert_eq!(sinr_dl(1.0, 2.0, 0.0, 5.0, 0.5), 4.0);
        assert_eq!(sinr_dl(1.0, 2.0, 3.0, 0.0, 0.5), 4.0);
        assert_eq!(sinr_dl(0.0, 2.0, 3.0, 1.0, 0.5), 0.0);
    }

    #[test]
    fn shannon_values() {
        assert_eq!(spectral_efficiency(0.0), 0.0);
        assert_eq!(spectral_efficiency(1.0), 1.0);
        assert!((spectral_efficiency(99.1) - 6.646).abs() < 1e-3);
    }

    #[test]
    fn weights() {
        let g = table(vec![1e-8, 1e-9], vec![1e-7], vec![vec![1e-10], vec![1e-11]]);
        let sr = make_weights(WeightMode::SumRate, &g).unwrap();
        assert_eq!(sr, WeightVector::ones(2, 1));
        let pl = make_weights(WeightMode::PathLossCompensation, &g).unwrap();
        assert_relative_eq!(pl.alpha_ul[0], 1e8, max_relative = 1e-15);
        assert!(pl.alpha_ul.iter().chain(&pl.alpha_dl).all(|a| a.is_finite() && *a > 0.0));
        let zero = table(vec![0.0], vec![1e-7], vec![vec![1e-10]]);
        assert!(matches!(
            make_weights(WeightMode::PathLossCompensation, &zero),
            Err(RadioError::ZeroGain { link: "UL", index: 0, .. })
        ));
    }

    fn interference_free(mu: f64) -> (GainTable, ScenarioParams) {
        let g = table(vec![1e-8], vec![2e-9], vec![vec![0.0]]);
        let mut p = ScenarioParams::urban_micro(1, 1, 1).with_mu(mu);
        // beta = 0 is outside the validated range but isolates the corner logic
        p.si_cancellation = 0.0;
        (g, p)
    }

    #[test]
    fn interference_free_pair_prefers_both_on() {
        for mu in [0.0, 1.0] {
            let (g, p) = interference_free(mu);
            let w = WeightVector::ones(1, 1);
            let e = evaluate_pair(0, 0, &g, &p, &w);
            assert_eq!(e.corner, Corner::Both);
            assert_eq!(e.best_powers, (p.p_max_ul_w, p.p_max_dl_w));
        }
        let (g, p) = interference_free(1.0);
        let e = evaluate_pair(0, 0, &g, &p, &WeightVector::ones(1, 1));
        assert_relative_eq!(e.benefit, e.se_ul.min(e.se_dl));
    }

    #[test]
    fn huge_cross_gain_with_pure_fairness() {
        let g = table(vec![1e-8], vec![2e-9], vec![vec![1e3]]);
        let p = ScenarioParams::urban_micro(1, 1, 1).with_mu(1.0);
        let w = WeightVector::ones(1, 1);
        let e = evaluate_pair(0, 0, &g, &p, &w);
        // single-link corners score exactly zero, both-on scores a tiny positive min
        for corner in [Corner::UlOnly, Corner::DlOnly] {
            let (pu, pd) = corner.powers(&p);
            assert_eq!(pair_benefit_at(0, 0, pu, pd, &g, &p, &w), 0.0);
        }
        assert_eq!(e.corner, Corner::Both);
        assert!(e.benefit >= 0.0 && e.benefit < 1e-6);
    }

    #[test]
    fn equal_corners_resolve_in_preference_order() {
        // mu = 1 and a silenced pair: every corner has min = 0
        let g = table(vec![1e-8], vec![0.0], vec![vec![1e-9]]);
        let p = ScenarioParams::urban_micro(1, 1, 1).with_mu(1.0);
        let e = evaluate_pair(0, 0, &g, &p, &WeightVector::ones(1, 1));
        assert_eq!(e.benefit, 0.0);
        assert_eq!(e.corner, Corner::Both);
    }

    #[test]
    fn solo_evaluations() {
        let g = table(vec![1e-8], vec![0.0], vec![vec![1e-9]]);
        let p = ScenarioParams::urban_micro(1, 1, 1).with_mu(0.3);
        let w = WeightVector::ones(1, 1);
        let ul = evaluate_solo_ul(0, &g, &p, &w);
        assert_relative_eq!(ul.se, (1.0 + p.p_max_ul_w * 1e-8 / p.noise_power_w).log2());
        assert_relative_eq!(ul.contribution, 0.7 * ul.se);
        assert_eq!(evaluate_solo_dl(0, &g, &p, &w).se, 0.0);
        let p1 = p.clone().with_mu(1.0);
        assert_eq!(evaluate_solo_ul(0, &g, &p1, &w).contribution, 0.0);
    }

    #[test]
    fn all_solo_outcome_is_decoupled() {
        let p = ScenarioParams::urban_micro(3, 2, 5).with_mu(0.4);
        let g = build_gain_table(&p, &mut substream(11, 0)).unwrap();
        let w = WeightVector::ones(3, 2);
        let out = outcome_metrics(&Pairing::empty(3, 2), &PowerAllocation::full(&p), &g, &p, &w).unwrap();
        let ses: Vec<f64> = (0..3)
            .map(|i| evaluate_solo_ul(i, &g, &p, &w).se)
            .chain((0..2).map(|j| evaluate_solo_dl(j, &g, &p, &w).se))
            .collect();
        assert_eq!(out.all_se(), ses);
        let min = ses.iter().copied().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(out.objective, 0.6 * ses.iter().sum::<f64>() + 0.4 * min, max_relative = 1e-12);
        assert_eq!(out.min_se, min);
    }

    #[test]
    fn pure_fairness_objective_is_min() {
        let p = ScenarioParams::urban_micro(2, 2, 2).with_mu(1.0);
        let g = build_gain_table(&p, &mut substream(12, 0)).unwrap();
        let x = Pairing::from_pairs(2, 2, [(0, 1), (1, 0)]).unwrap();
        let out = outcome_metrics(&x, &PowerAllocation::full(&p), &g, &p, &WeightVector::ones(2, 2)).unwrap();
        assert_eq!(out.objective, out.min_se);
    }

    #[test]
    fn single_pair_outcome_matches_pair_benefit() {
        for seed in 0..50 {
            let p = ScenarioParams::urban_micro(1, 1, 1).with_mu(seed as f64 / 49.0);
            let g = build_gain_table(&p, &mut substream(seed, 0)).unwrap();
            let w = make_weights(WeightMode::SumRate, &g).unwrap();
            let e = evaluate_pair(0, 0, &g, &p, &w);
            let powers = PowerAllocation {
                p_ul: vec![e.best_powers.0],
                p_dl: vec![e.best_powers.1],
            };
            let x = Pairing::from_pairs(1, 1, [(0, 0)]).unwrap();
            let out = outcome_metrics(&x, &powers, &g, &p, &w).unwrap();
            assert_relative_eq!(out.objective, e.benefit, max_relative = 1e-12);
        }
    }

    #[test]
    fn outcome_rejects_bad_shapes() {
        let p = ScenarioParams::urban_micro(2, 2, 2);
        let g = build_gain_table(&p, &mut substream(1, 0)).unwrap();
        let powers = PowerAllocation {
            p_ul: vec![0.1],
            p_dl: vec![0.1, 0.1],
        };
        let err = outcome_metrics(&Pairing::empty(2, 2), &powers, &g, &p, &WeightVector::ones(2, 2));
        assert!(matches!(err, Err(RadioError::Model(ModelError::Dimension { what: "p_ul", .. }))));
    }
}
