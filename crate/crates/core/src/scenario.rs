//! Random network drops for an urban-micro single cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GainTable, LosRule, Point, Positions, ScenarioParams};

/// Random number stream owned by a single drop or strategy call.
pub type RandomStream = ChaCha12Rng;

/// Stream `index` of `master_seed`.
///
/// Streams are addressed by counter, not drawn in sequence, so the stream
/// a drop receives never depends on how many other drops ran before it.
pub fn substream(master_seed: u64, index: u64) -> RandomStream {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Rejection attempts per user before giving up on the geometry.
pub const MAX_DROP_ATTEMPTS: usize = 10_000;

/// Path-loss distances are clamped to this many metres.
pub const MIN_PATHLOSS_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error(
        "could not place user {user} at least {min_distance_m} m from the BS \
         after {attempts} attempts (cell radius {radius_m} m)"
    )]
    Placement {
        user: usize,
        attempts: usize,
        min_distance_m: f64,
        radius_m: f64,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario json: {0}")]
    Json(String),
}

/// Log-distance path loss with log-normal shadowing, one law for LOS and
/// one for NLOS links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationModel {
    pub los_intercept_db: f64,
    pub los_slope: f64,
    pub nlos_intercept_db: f64,
    pub nlos_slope: f64,
    pub shadow_std_los_db: f64,
    pub shadow_std_nlos_db: f64,
}

impl Default for PropagationModel {
    fn default() -> Self {
        PropagationModel {
            los_intercept_db: 34.96,
            los_slope: 22.7,
            nlos_intercept_db: 33.36,
            nlos_slope: 38.35,
            shadow_std_los_db: 3.0,
            shadow_std_nlos_db: 4.0,
        }
    }
}

impl PropagationModel {
    /// Path loss in dB, with the distance clamped at 1 m.
    pub fn path_loss_db(&self, distance_m: f64, los: bool) -> f64 {
        let d = distance_m.max(MIN_PATHLOSS_DISTANCE_M);
        if los {
            self.los_intercept_db + self.los_slope * d.log10()
        } else {
            self.nlos_intercept_db + self.nlos_slope * d.log10()
        }
    }

    pub fn shadow_std_db(&self, los: bool) -> f64 {
        if los {
            self.shadow_std_los_db
        } else {
            self.shadow_std_nlos_db
        }
    }
}

/// Linear gain `10^(-(PL(d) + shadow)/10)`.
pub fn link_gain(model: &PropagationModel, distance_m: f64, los: bool, shadow_db: f64) -> f64 {
    10f64.powf(-(model.path_loss_db(distance_m, los) + shadow_db) / 10.0)
}

/// Urban-micro LOS probability `min(18/d, 1)(1 - e^{-d/36}) + e^{-d/36}`.
pub fn los_probability(distance_m: f64) -> f64 {
    let d = distance_m.max(MIN_PATHLOSS_DISTANCE_M);
    let tail = (-d / 36.0).exp();
    (18.0 / d).min(1.0) * (1.0 - tail) + tail
}

/// Whether `pt` lies in the flat-topped hexagon of circumradius `radius`
/// centred at the origin.
pub fn in_hexagon(pt: Point, radius: f64) -> bool {
    let (x, y) = (pt[0].abs(), pt[1].abs());
    let s3 = 3f64.sqrt();
    y <= radius * s3 / 2.0 && s3 * x + y <= s3 * radius
}

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Drops I UL users then J DL users uniformly over the hexagonal cell,
/// rejecting points closer than `min_bs_ue_distance_m` to the BS.
pub fn drop_users(p: &ScenarioParams, rng: &mut RandomStream) -> Result<Positions, ScenarioError> {
    let r = p.cell_radius_m;
    let half_height = r * 3f64.sqrt() / 2.0;
    let bs = [0.0, 0.0];
    let mut sample = |user: usize| -> Result<Point, ScenarioError> {
        for _ in 0..MAX_DROP_ATTEMPTS {
            let pt = [
                rng.random_range(-r..=r),
                rng.random_range(-half_height..=half_height),
            ];
            if in_hexagon(pt, r) && distance(pt, bs) >= p.min_bs_ue_distance_m {
                return Ok(pt);
            }
        }
        Err(ScenarioError::Placement {
            user,
            attempts: MAX_DROP_ATTEMPTS,
            min_distance_m: p.min_bs_ue_distance_m,
            radius_m: r,
        })
    };
    let ul = (0..p.num_ul).map(&mut sample).collect::<Result<Vec<_>, _>>()?;
    let dl = (p.num_ul..p.num_users())
        .map(&mut sample)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Positions { bs, ul, dl })
}

/// Draws LOS state and shadowing for one link and returns its gain.
fn draw_link(
    model: &PropagationModel,
    p: &ScenarioParams,
    rule: LosRule,
    d: f64,
    rng: &mut RandomStream,
) -> f64 {
    // one uniform and one normal per link regardless of settings keeps the
    // stream layout identical across LOS rules
    let u: f64 = rng.random();
    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    let los = match rule {
        LosRule::Umi => u < los_probability(d),
        LosRule::ForceLos => true,
        LosRule::ForceNlos => false,
    };
    let shadow = if p.shadowing {
        z * model.shadow_std_db(los)
    } else {
        0.0
    };
    link_gain(model, d, los, shadow)
}

/// Gains for one drop, from the given positions.
pub fn gain_table_from_positions(
    p: &ScenarioParams,
    model: &PropagationModel,
    positions: Positions,
    rng: &mut RandomStream,
) -> GainTable {
    let bs = positions.bs;
    let ue_rule = p.ue_los_rule.unwrap_or(p.los_rule);
    let g_ul = positions
        .ul
        .iter()
        .map(|&u| draw_link(model, p, p.los_rule, distance(u, bs), rng))
        .collect();
    let g_dl = positions
        .dl
        .iter()
        .map(|&v| draw_link(model, p, p.los_rule, distance(bs, v), rng))
        .collect();
    let g_cross = positions
        .ul
        .iter()
        .map(|&u| {
            positions
                .dl
                .iter()
                .map(|&v| draw_link(model, p, ue_rule, distance(u, v), rng))
                .collect()
        })
        .collect();
    GainTable {
        g_ul,
        g_dl,
        g_cross,
        positions,
    }
}

/// Drops users and draws every link gain, using the default propagation model.
pub fn build_gain_table(p: &ScenarioParams, rng: &mut RandomStream) -> Result<GainTable, ScenarioError> {
    build_gain_table_with(p, &PropagationModel::default(), rng)
}

pub fn build_gain_table_with(
    p: &ScenarioParams,
    model: &PropagationModel,
    rng: &mut RandomStream,
) -> Result<GainTable, ScenarioError> {
    let positions = drop_users(p, rng)?;
    Ok(gain_table_from_positions(p, model, positions, rng))
}

/// Serialized drop, for golden-scenario regression tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDump {
    pub params: ScenarioParams,
    pub gains: GainTable,
}

impl ScenarioDump {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario dump serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let dump: ScenarioDump =
            serde_json::from_str(text).map_err(|e| ScenarioError::Json(e.to_string()))?;
        dump.gains
            .validate(dump.params.num_ul, dump.params.num_dl)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        Ok(dump)
    }
}
