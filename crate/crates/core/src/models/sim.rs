//! Path simulation shared by every model family.
//!
//! Each path owns a ChaCha8 stream selected by its index, so a path's draws
//! never depend on which worker thread simulated it.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::garch::{GarchJumpParams, JumpParams};
use super::ou::{OUParams, OuStep};
use super::regime::{sample_cumulative, RegimeModel};
use super::ModelSpec;

/// RNG for path `path` under root `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct JumpStep {
    prob: f64,
    mu: f64,
    sd: f64,
}

impl JumpStep {
    fn new(j: &JumpParams, dt: f64) -> Result<Option<Self>> {
        j.validate()?;
        if j.lambda == 0.0 {
            return Ok(None);
        }
        let prob = j.lambda * dt;
        if prob > 0.1 {
            return Err(Error::StepTooCoarse(prob));
        }
        Ok(Some(Self {
            prob,
            mu: j.mu_y,
            sd: j.sigma_y,
        }))
    }

    #[inline]
    fn draw<R: Rng>(&self, rng: &mut R) -> (bool, f64) {
        let u: f64 = rng.gen();
        if u < self.prob {
            let z: f64 = rng.sample(StandardNormal);
            (true, self.mu + self.sd * z)
        } else {
            (false, 0.0)
        }
    }
}

/// Mutable per-path simulation state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub price: f64,
    pub regime: usize,
    pub jumps: u64,
    h: f64,
    eps2: f64,
}

/// A model discretised at a fixed step `dt`.
#[derive(Debug, Clone)]
pub(crate) enum Stepper {
    Ou {
        step: OuStep,
        jump: Option<JumpStep>,
    },
    Garch {
        p: GarchJumpParams,
        jump: Option<JumpStep>,
    },
    Regime {
        steps: Vec<OuStep>,
        cum: Vec<Vec<f64>>,
    },
}

impl Stepper {
    pub(crate) fn new(model: &ModelSpec, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt must be > 0"));
        }
        Ok(match model {
            ModelSpec::Ou { ou } => Stepper::Ou {
                step: OuStep::new(ou, dt),
                jump: None,
            },
            ModelSpec::OuJump { ou, jumps } => Stepper::Ou {
                step: OuStep::new(ou, dt),
                jump: JumpStep::new(jumps, dt)?,
            },
            ModelSpec::GarchJump { garch } => Stepper::Garch {
                p: *garch,
                jump: JumpStep::new(&garch.jumps, dt)?,
            },
            ModelSpec::MrsmOu { regimes } => {
                let transition = regimes.transition.rescaled(dt / regimes.transition_dt)?;
                Stepper::Regime {
                    steps: regimes.per_regime.iter().map(|p| OuStep::new(p, dt)).collect(),
                    cum: transition.cumulative(),
                }
            }
        })
    }

    pub(crate) fn initial_state(&self, model: &ModelSpec, s0: f64, r0: Option<usize>) -> Result<SimState> {
        let regime = match self {
            Stepper::Regime { steps, .. } => {
                let r = r0.ok_or(Error::RegimeRequired)?;
                if r >= steps.len() {
                    return Err(Error::invalid(format!("initial regime {r} out of range")));
                }
                r
            }
            _ => 0,
        };
        let h = match model {
            ModelSpec::GarchJump { garch } => garch.unconditional_variance(),
            _ => 0.0,
        };
        Ok(SimState {
            price: s0,
            regime,
            jumps: 0,
            h,
            eps2: h,
        })
    }

    /// Advance one step; returns the new price.
    #[inline]
    pub(crate) fn advance<R: Rng>(&self, st: &mut SimState, rng: &mut R) -> f64 {
        match self {
            Stepper::Ou { step, jump } => {
                let z: f64 = rng.sample(StandardNormal);
                let mut s = step.apply(st.price, z);
                if let Some(j) = jump {
                    let (hit, y) = j.draw(rng);
                    if hit {
                        st.jumps += 1;
                        s += y;
                    }
                }
                st.price = s;
            }
            Stepper::Garch { p, jump } => {
                let h = p.omega + p.alpha1 * st.eps2 + p.beta1 * st.h;
                let z: f64 = rng.sample(StandardNormal);
                let eps = h.sqrt() * z;
                let mut s = p.mu + p.rho * (st.price - p.mu) + eps;
                if let Some(j) = jump {
                    let (hit, y) = j.draw(rng);
                    if hit {
                        st.jumps += 1;
                        s += y;
                    }
                }
                st.h = h;
                st.eps2 = eps * eps;
                st.price = s;
            }
            Stepper::Regime { steps, cum } => {
                let u: f64 = rng.gen();
                st.regime = sample_cumulative(&cum[st.regime], u);
                let z: f64 = rng.sample(StandardNormal);
                st.price = steps[st.regime].apply(st.price, z);
            }
        }
        st.price
    }
}

/// Simulated price paths, row-major `n_paths x (n_steps + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathBatch {
    pub n_paths: usize,
    pub n_steps: usize,
    /// Step in years.
    pub dt: f64,
    pub values: Vec<f64>,
    pub regimes: Option<Vec<u8>>,
    /// Jump events per path (all zero for jump-free models).
    pub jump_counts: Vec<u64>,
    pub seed: u64,
}

impl PathBatch {
    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.n_steps + 1;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn regime_path(&self, i: usize) -> Option<&[u8]> {
        let w = self.n_steps + 1;
        self.regimes.as_ref().map(|r| &r[i * w..(i + 1) * w])
    }

    /// Values at the final step, one per path.
    pub fn terminal(&self) -> Vec<f64> {
        (0..self.n_paths).map(|i| self.path(i)[self.n_steps]).collect()
    }

    /// One row per path per step: `path,step,time,price[,regime]`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path", "step", "time_years", "price"];
        if self.regimes.is_some() {
            header.push("regime");
        }
        w.write_record(&header)?;
        for p in 0..self.n_paths {
            for (k, v) in self.path(p).iter().enumerate() {
                let mut rec = vec![
                    p.to_string(),
                    k.to_string(),
                    format!("{}", k as f64 * self.dt),
                    format!("{v}"),
                ];
                if let Some(r) = self.regime_path(p) {
                    rec.push(r[k].to_string());
                }
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn n_steps_for(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= dt) {
        return Err(Error::invalid("need dt > 0 and t_end >= dt"));
    }
    Ok((t_end / dt).round() as usize)
}

/// Simulate `n_paths` paths of any model; paths come back in index order.
pub fn simulate(
    model: &ModelSpec,
    s0: f64,
    r0: Option<usize>,
    t_end: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<PathBatch> {
    model.validate()?;
    let n_steps = n_steps_for(t_end, dt)?;
    let stepper = Stepper::new(model, dt)?;
    let init = stepper.initial_state(model, s0, r0)?;
    let record_regimes = matches!(model, ModelSpec::MrsmOu { .. });
    let paths: Vec<(Vec<f64>, Vec<u8>, u64)> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let mut st = init;
            let mut vals = Vec::with_capacity(n_steps + 1);
            let mut regs = Vec::new();
            vals.push(st.price);
            if record_regimes {
                regs.reserve(n_steps + 1);
                regs.push(st.regime as u8);
            }
            for _ in 0..n_steps {
                vals.push(stepper.advance(&mut st, &mut rng));
                if record_regimes {
                    regs.push(st.regime as u8);
                }
            }
            (vals, regs, st.jumps)
        })
        .collect();
    let mut values = Vec::with_capacity(n_paths * (n_steps + 1));
    let mut regimes = Vec::new();
    let mut jump_counts = Vec::with_capacity(n_paths);
    for (v, r, j) in paths {
        values.extend(v);
        regimes.extend(r);
        jump_counts.push(j);
    }
    Ok(PathBatch {
        n_paths,
        n_steps,
        dt,
        values,
        regimes: record_regimes.then_some(regimes),
        jump_counts,
        seed,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_ou_jump(
    ou: &OUParams,
    jumps: &JumpParams,
    s0: f64,
    t_end: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<PathBatch> {
    let model = ModelSpec::OuJump { ou: *ou, jumps: *jumps };
    simulate(&model, s0, None, t_end, dt, n_paths, seed)
}

pub fn simulate_garch_jump(
    p: &GarchJumpParams,
    s0: f64,
    t_end: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<PathBatch> {
    simulate(&ModelSpec::GarchJump { garch: *p }, s0, None, t_end, dt, n_paths, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_mrsm_ou(
    m: &RegimeModel,
    s0: f64,
    r0: usize,
    t_end: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<PathBatch> {
    simulate(
        &ModelSpec::MrsmOu { regimes: m.clone() },
        s0,
        Some(r0),
        t_end,
        dt,
        n_paths,
        seed,
    )
}
