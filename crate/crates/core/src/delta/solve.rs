use serde::{Deserialize, Serialize};

use crate::delta::bb::{bb_minimize, BbOptions, BbStop};
use crate::delta::cost::DeltaProblem;
use crate::delta::lbfgsb::{rigid_minimize, LbfgsbOptions, LbfgsbStop};
use crate::error::Result;
use crate::volume::{ScalarVolume, VectorField};
use crate::warp::{warp_apply, RigidParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOptions {
    /// Number of (rigid block, DVF block) sweeps.
    pub cycles: usize,
    pub rigid: LbfgsbOptions,
    pub bb: BbOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            cycles: 1,
            rigid: LbfgsbOptions::default(),
            bb: BbOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Rigid,
    Dvf,
}

/// Objective before and after one block update.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockReport {
    pub cycle: usize,
    pub block: Block,
    pub cost_before: f64,
    pub cost_after: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: String,
}

/// Output of [`solve_delta`].
#[derive(Clone, Debug)]
pub struct DeltaSolution {
    pub v_hat: VectorField,
    pub p_hat: RigidParams,
    /// `(iteration, cost)` over all blocks, numbered consecutively.
    pub cost_trace: Vec<(usize, f64)>,
    pub blocks: Vec<BlockReport>,
    /// `W(r1_hat, p_hat, v_hat)`.
    pub r2_hat: ScalarVolume,
}

/// Cyclic block coordinate descent from `theta = t = 0`, `v = 0`: each cycle
/// fits the rigid parameters with the field frozen, then the field with the
/// rigid parameters frozen.
pub fn solve_delta(problem: &DeltaProblem, opts: &SolveOptions) -> Result<DeltaSolution> {
    let shape = problem.r1_hat().shape().clone();
    let mut p = problem.initial_rigid();
    let mut v = VectorField::zeros(shape.clone());
    let mut trace: Vec<(usize, f64)> = Vec::new();
    let mut blocks = Vec::new();
    let mut offset = 0;

    let mut push_trace = |t: &[(usize, f64)], offset: &mut usize| {
        let skip = usize::from(!trace.is_empty());
        for &(k, c) in &t[skip..] {
            trace.push((*offset + k, c));
        }
        *offset += t.last().map_or(0, |&(k, _)| k);
    };

    // The rigid block works on angles times half the largest grid side, so a
    // unit change of any variable moves the outermost voxels by about one
    // voxel. Raw radians are ~30x stiffer than voxel translations.
    let scale = rigid_scales(problem);
    let to_scaled = |x: &[f64]| -> Vec<f64> { x.iter().zip(&scale).map(|(x, s)| x * s).collect() };
    let from_scaled = |y: &[f64]| -> Vec<f64> { y.iter().zip(&scale).map(|(y, s)| y / s).collect() };

    for cycle in 0..opts.cycles {
        // Rigid block.
        let v_fixed = v.clone();
        let rigid = rigid_minimize(
            |y| {
                let cg = problem.cost_grad_parts(&p.with_values(&from_scaled(y)), &v_fixed, true, false)?;
                let g = cg.grad_p.unwrap().iter().zip(&scale).map(|(g, s)| g / s).collect();
                Ok((cg.cost, g))
            },
            &to_scaled(&p.to_vec()),
            &to_scaled(problem.lower()),
            &to_scaled(problem.upper()),
            &opts.rigid,
        )?;
        let before = rigid.trace[0].1;
        if rigid.f <= before {
            p = p.with_values(&from_scaled(&rigid.x));
        }
        blocks.push(BlockReport {
            cycle,
            block: Block::Rigid,
            cost_before: before,
            cost_after: rigid.f.min(before),
            iterations: rigid.iterations,
            evaluations: rigid.evaluations,
            stop: stop_name(rigid.stop),
        });
        push_trace(&rigid.trace, &mut offset);

        // DVF block.
        let p_fixed = p.clone();
        let dvf = bb_minimize(
            |x| {
                let field = VectorField::from_parts_unchecked(shape.clone(), x.to_vec());
                let cg = problem.cost_grad_parts(&p_fixed, &field, false, true)?;
                Ok((cg.cost, cg.grad_v.unwrap().into_data()))
            },
            v.clone().into_data(),
            &opts.bb,
        )?;
        blocks.push(BlockReport {
            cycle,
            block: Block::Dvf,
            cost_before: dvf.trace[0].1,
            cost_after: dvf.cost,
            iterations: dvf.iterations,
            evaluations: dvf.evaluations,
            stop: bb_stop_name(dvf.stop),
        });
        push_trace(&dvf.trace, &mut offset);
        v = VectorField::from_parts_unchecked(shape.clone(), dvf.x);
    }

    let r2_hat = warp_apply(problem.r1_hat(), &p, &v)?;
    Ok(DeltaSolution {
        v_hat: v,
        p_hat: p,
        cost_trace: trace,
        blocks,
        r2_hat,
    })
}

/// Per-parameter scale of the rigid block: half the largest grid side for
/// angles, 1 for translations.
fn rigid_scales(problem: &DeltaProblem) -> Vec<f64> {
    let shape = problem.r1_hat().shape();
    let arm = 0.5 * shape.dims().iter().copied().max().unwrap_or(1) as f64;
    let n_angles = RigidParams::n_angles(shape.rank());
    (0..RigidParams::n_params(shape.rank()))
        .map(|i| if i < n_angles { arm.max(1.0) } else { 1.0 })
        .collect()
}

fn stop_name(s: LbfgsbStop) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn bb_stop_name(s: BbStop) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}
