//! Scheduling strategies: exhaustive optimum (P-OPT), the Hungarian
//! heuristic (C-HUN), its interference-blind variant (C-NINT), and random
//! pairing at full power (R-EPA).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{assign_with_solo, AssignmentError, BenefitMatrix};
use crate::model::{
    scalarized_objective, GainTable, Pairing, PowerAllocation, ScenarioParams, ScheduleOutcome,
    WeightVector,
};
use crate::radio::{
    evaluate_pair, evaluate_solo_dl, evaluate_solo_ul, make_weights, outcome_metrics,
    pair_benefit_at, user_spectral_efficiencies, Corner, PairEvaluation, RadioError,
};
use crate::scenario::RandomStream;

/// Largest `I + J` the exhaustive solver accepts.
pub const P_OPT_MAX_USERS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("exhaustive search limited to I + J ≤ {max}, got {got}")]
    SizeGuard { got: usize, max: usize },
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("empty spectral-efficiency vector")]
    Empty,
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyId {
    #[serde(rename = "p-opt")]
    POpt,
    #[serde(rename = "c-hun")]
    CHun,
    #[serde(rename = "c-nint")]
    CNInt,
    #[serde(rename = "r-epa")]
    REpa,
}

impl StrategyId {
    pub const ALL: [StrategyId; 4] = [
        StrategyId::POpt,
        StrategyId::CHun,
        StrategyId::CNInt,
        StrategyId::REpa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyId::POpt => "p-opt",
            StrategyId::CHun => "c-hun",
            StrategyId::CNInt => "c-nint",
            StrategyId::REpa => "r-epa",
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyId {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        StrategyId::ALL
            .into_iter()
            .find(|id| id.name() == key || id.name().replace('-', "") == key)
            .ok_or_else(|| SolverError::UnknownStrategy(s.to_string()))
    }
}

/// Knobs for the exhaustive solver.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct POptOptions {
    /// After the corner search, refine each pair's powers over an
    /// `n × n` grid of `[0, P_max^u] × [0, P_max^d]`.
    pub power_grid: Option<usize>,
}

fn powers_for(
    pairing: &Pairing,
    corners: &[(usize, usize, Corner)],
    params: &ScenarioParams,
) -> PowerAllocation {
    let mut powers = PowerAllocation::full(params);
    debug_assert_eq!(pairing.num_pairs(), corners.len());
    for &(i, j, corner) in corners {
        let (p_u, p_d) = corner.powers(params);
        powers.p_ul[i] = p_u;
        powers.p_dl[j] = p_d;
    }
    powers
}

fn objective_of(
    pairing: &Pairing,
    powers: &PowerAllocation,
    gains: &GainTable,
    params: &ScenarioParams,
    weights: &WeightVector,
) -> Result<f64, RadioError> {
    let (se_ul, se_dl) = user_spectral_efficiencies(pairing, powers, gains, params)?;
    Ok(scalarized_objective(&se_ul, &se_dl, weights, params.mu))
}

struct Incumbent {
    objective: f64,
    pairing: Pairing,
    powers: PowerAllocation,
}

/// Every partial matching that fits on the channels, crossed with every
/// corner choice per pair, scored by the true objective.
pub fn solve_p_opt(gains: &GainTable, params: &ScenarioParams) -> Result<ScheduleOutcome, SolverError> {
    solve_p_opt_with(gains, params, &POptOptions::default())
}

pub fn solve_p_opt_with(
    gains: &GainTable,
    params: &ScenarioParams,
    options: &POptOptions,
) -> Result<ScheduleOutcome, SolverError> {
    let (ni, nj) = (gains.num_ul(), gains.num_dl());
    if ni + nj > P_OPT_MAX_USERS {
        return Err(SolverError::SizeGuard {
            got: ni + nj,
            max: P_OPT_MAX_USERS,
        });
    }
    let weights = make_weights(params.weight_mode, gains)?;

    let mut matchings = Vec::new();
    enumerate_matchings(0, ni, nj, &mut vec![None; ni], &mut vec![false; nj], &mut matchings);

    let mut best: Option<Incumbent> = None;
    for partners in matchings {
        let pairing = Pairing::from_ul_partners(partners, nj).expect("enumerated matching is valid");
        if pairing.channels_used() > params.num_channels {
            continue;
        }
        let pairs: Vec<(usize, usize)> = pairing.pairs().collect();
        let combos = 3usize.pow(pairs.len() as u32);
        for code in 0..combos {
            let mut rest = code;
            let corners: Vec<(usize, usize, Corner)> = pairs
                .iter()
                .map(|&(i, j)| {
                    let c = Corner::ALL[rest % 3];
                    rest /= 3;
                    (i, j, c)
                })
                .collect();
            let powers = powers_for(&pairing, &corners, params);
            let objective = objective_of(&pairing, &powers, gains, params, &weights)?;
            if best.as_ref().is_none_or(|b| objective > b.objective) {
                best = Some(Incumbent {
                    objective,
                    pairing: pairing.clone(),
                    powers,
                });
            }
        }
    }
    let mut best = best.expect("the empty matching is always enumerated");
    if let Some(n) = options.power_grid {
        refine_on_grid(&mut best, gains, params, &weights, n)?;
    }
    Ok(outcome_metrics(&best.pairing, &best.powers, gains, params, &weights)?)
}

fn enumerate_matchings(
    i: usize,
    ni: usize,
    nj: usize,
    partners: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    out: &mut Vec<Vec<Option<usize>>>,
) {
    if i == ni {
        out.push(partners.clone());
        return;
    }
    partners[i] = None;
    enumerate_matchings(i + 1, ni, nj, partners, used, out);
    for j in 0..nj {
        if !used[j] {
            used[j] = true;
            partners[i] = Some(j);
            enumerate_matchings(i + 1, ni, nj, partners, used, out);
            used[j] = false;
        }
    }
    partners[i] = None;
}

/// Coordinate ascent over each pair's power grid, holding the other pairs
/// fixed, until a sweep makes no improvement.
fn refine_on_grid(
    best: &mut Incumbent,
    gains: &GainTable,
    params: &ScenarioParams,
    weights: &WeightVector,
    n: usize,
) -> Result<(), RadioError> {
    let n = n.max(2);
    let grid = |max: f64| -> Vec<f64> { (0..n).map(|k| max * k as f64 / (n - 1) as f64).collect() };
    let (gu, gd) = (grid(params.p_max_ul_w), grid(params.p_max_dl_w));
    let pairs: Vec<(usize, usize)> = best.pairing.pairs().collect();
    for _sweep in 0..20 {
        let mut improved = false;
        for &(i, j) in &pairs {
            for &p_u in &gu {
                for &p_d in &gd {
                    let mut powers = best.powers.clone();
                    powers.p_ul[i] = p_u;
                    powers.p_dl[j] = p_d;
                    let obj = objective_of(&best.pairing, &powers, gains, params, weights)?;
                    if obj > best.objective {
                        best.objective = obj;
                        best.powers = powers;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(())
}

/// Everything the Hungarian pipeline produced before the final evaluation.
#[derive(Debug, Clone)]
pub struct HungarianPlan {
    pub evaluations: Vec<Vec<PairEvaluation>>,
    pub benefits: BenefitMatrix,
    pub pairing: Pairing,
    pub powers: PowerAllocation,
    /// Value of the assignment problem: chosen benefits plus solo terms.
    pub planned_total: f64,
}

/// Corner evaluation for every pair, then the assignment with solo options.
pub fn plan_hungarian(
    planning_gains: &GainTable,
    params: &ScenarioParams,
    weights: &WeightVector,
) -> Result<HungarianPlan, SolverError> {
    let (ni, nj) = (planning_gains.num_ul(), planning_gains.num_dl());
    let evaluations: Vec<Vec<PairEvaluation>> = (0..ni)
        .map(|i| {
            (0..nj)
                .map(|j| evaluate_pair(i, j, planning_gains, params, weights))
                .collect()
        })
        .collect();
    let benefits = BenefitMatrix {
        values: evaluations
            .iter()
            .map(|row| row.iter().map(|e| e.benefit).collect())
            .collect(),
        solo_ul: (0..ni)
            .map(|i| evaluate_solo_ul(i, planning_gains, params, weights).contribution)
            .collect(),
        solo_dl: (0..nj)
            .map(|j| evaluate_solo_dl(j, planning_gains, params, weights).contribution)
            .collect(),
    };
    let solved = assign_with_solo(&benefits, params.num_channels)?;
    let mut powers = PowerAllocation::full(params);
    for (i, j) in solved.pairing.pairs() {
        let (p_u, p_d) = evaluations[i][j].best_powers;
        powers.p_ul[i] = p_u;
        powers.p_dl[j] = p_d;
    }
    Ok(HungarianPlan {
        evaluations,
        benefits,
        pairing: solved.pairing,
        powers,
        planned_total: solved.total,
    })
}

pub fn solve_c_hun(gains: &GainTable, params: &ScenarioParams) -> Result<ScheduleOutcome, SolverError> {
    let weights = make_weights(params.weight_mode, gains)?;
    let plan = plan_hungarian(gains, params, &weights)?;
    Ok(outcome_metrics(&plan.pairing, &plan.powers, gains, params, &weights)?)
}

/// C-NINT schedule as planned (UE-to-UE gains zeroed) and as realized
/// under the true gains.
#[derive(Debug, Clone)]
pub struct NintOutcome {
    pub planned: ScheduleOutcome,
    pub realized: ScheduleOutcome,
}

pub fn solve_c_nint_detailed(
    gains: &GainTable,
    params: &ScenarioParams,
) -> Result<NintOutcome, SolverError> {
    let blind = gains.without_cross();
    let weights = make_weights(params.weight_mode, gains)?;
    let plan = plan_hungarian(&blind, params, &weights)?;
    Ok(NintOutcome {
        planned: outcome_metrics(&plan.pairing, &plan.powers, &blind, params, &weights)?,
        realized: outcome_metrics(&plan.pairing, &plan.powers, gains, params, &weights)?,
    })
}

/// Plans without UE-to-UE interference, reports the realized outcome.
pub fn solve_c_nint(gains: &GainTable, params: &ScenarioParams) -> Result<ScheduleOutcome, SolverError> {
    Ok(solve_c_nint_detailed(gains, params)?.realized)
}

/// Uniformly random maximum matching, everyone at full power.
pub fn solve_r_epa(
    gains: &GainTable,
    params: &ScenarioParams,
    rng: &mut RandomStream,
) -> Result<ScheduleOutcome, SolverError> {
    let (ni, nj) = (gains.num_ul(), gains.num_dl());
    let pairs: Vec<(usize, usize)> = if ni >= nj {
        let mut ul: Vec<usize> = (0..ni).collect();
        ul.shuffle(rng);
        ul.into_iter().take(nj).zip(0..nj).collect()
    } else {
        let mut dl: Vec<usize> = (0..nj).collect();
        dl.shuffle(rng);
        (0..ni).zip(dl).collect()
    };
    let pairing = Pairing::from_pairs(ni, nj, pairs).expect("random matching is valid");
    let weights = make_weights(params.weight_mode, gains)?;
    Ok(outcome_metrics(
        &pairing,
        &PowerAllocation::full(params),
        gains,
        params,
        &weights,
    )?)
}

/// Optimal multipliers of `min c·λ  s.t.  Σλ = mu, λ ≥ 0`: all mass on the
/// first user with the smallest spectral efficiency.
pub fn dual_multipliers(c: &[f64], mu: f64) -> Result<Vec<f64>, SolverError> {
    let (argmin, _) = c
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, f64)>, (k, &v)| match acc {
            Some((_, best)) if best <= v => acc,
            _ => Some((k, v)),
        })
        .ok_or(SolverError::Empty)?;
    let mut lambda = vec![0.0; c.len()];
    lambda[argmin] = mu;
    Ok(lambda)
}

/// A scheduling strategy selectable by name.
pub trait Scheduler: Send + Sync {
    fn name(&self) -> &str;

    fn schedule(
        &self,
        gains: &GainTable,
        params: &ScenarioParams,
        rng: &mut RandomStream,
    ) -> Result<ScheduleOutcome, SolverError>;
}

impl Scheduler for StrategyId {
    fn name(&self) -> &str {
        StrategyId::name(*self)
    }

    fn schedule(
        &self,
        gains: &GainTable,
        params: &ScenarioParams,
        rng: &mut RandomStream,
    ) -> Result<ScheduleOutcome, SolverError> {
        match self {
            StrategyId::POpt => solve_p_opt(gains, params),
            StrategyId::CHun => solve_c_hun(gains, params),
            StrategyId::CNInt => solve_c_nint(gains, params),
            StrategyId::REpa => solve_r_epa(gains, params, rng),
        }
    }
}

/// Strategies keyed by name.
pub struct Registry {
    entries: BTreeMap<String, Box<dyn Scheduler>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        for id in StrategyId::ALL {
            r.register(Box::new(id));
        }
        r
    }

    pub fn register(&mut self, scheduler: Box<dyn Scheduler>) {
        self.entries.insert(scheduler.name().to_string(), scheduler);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Scheduler, SolverError> {
        if let Some(s) = self.entries.get(name) {
            return Ok(s.as_ref());
        }
        let canonical = StrategyId::from_str(name)?;
        self.entries
            .get(canonical.name())
            .map(|s| s.as_ref())
            .ok_or_else(|| SolverError::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

/// Grid check of one pair: how far the best point of an `n × n` power grid
/// lies above the best corner. Nonpositive means the corner dominates.
pub fn corner_grid_excess(
    i: usize,
    j: usize,
    gains: &GainTable,
    params: &ScenarioParams,
    weights: &WeightVector,
    n: usize,
) -> f64 {
    let best_corner = evaluate_pair(i, j, gains, params, weights).benefit;
    let n = n.max(2);
    let mut best_grid = f64::NEG_INFINITY;
    for a in 0..n {
        let p_u = params.p_max_ul_w * a as f64 / (n - 1) as f64;
        for b in 0..n {
            let p_d = params.p_max_dl_w * b as f64 / (n - 1) as f64;
            best_grid = best_grid.max(pair_benefit_at(i, j, p_u, p_d, gains, params, weights));
        }
    }
    best_grid - best_corner
}
