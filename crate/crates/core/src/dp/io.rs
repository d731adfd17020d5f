//! Policy files and CSV output.
//!
//! A policy file is `MAGIC`, a little-endian `u32` format version, a `u64`
//! header length, a JSON header, then for each policy in header order its
//! value table followed by its action table, all little-endian `f64` in
//! row-major cell order (last state axis fastest, inputs innermost).

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::interp::Lattice;
use super::{Axis, BasinField, GridSpec, PolicyAssembly, SolveStats, TabularPolicy, Trajectory};
use crate::error::{Error, Result};
use crate::input_tree::InputTree;
use crate::systems::SystemModel;

pub const MAGIC: &[u8; 8] = b"PDPOLICY";
pub const FORMAT_VERSION: u32 = 1;

/// Provenance stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub node: usize,
    pub states: Vec<usize>,
    pub inputs: Vec<usize>,
    pub axes: Vec<Axis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHeader {
    #[serde(flatten)]
    pub artifact: ArtifactHeader,
    pub model: String,
    pub tree: String,
    pub grid: GridSpec,
    pub goal_input: Vec<f64>,
    pub input_lower: Vec<f64>,
    pub input_upper: Vec<f64>,
    pub parameter_count: u128,
    pub policies: Vec<PolicyMeta>,
    pub stats: Vec<SolveStats>,
}

pub fn write_policy<W: Write>(
    out: &mut W,
    artifact: &ArtifactHeader,
    model: &SystemModel,
    grid: &GridSpec,
    assembly: &PolicyAssembly,
) -> Result<()> {
    let header = PolicyHeader {
        artifact: artifact.clone(),
        model: model.name.clone(),
        tree: assembly.tree.to_string(),
        grid: grid.clone(),
        goal_input: assembly.goal_input.clone(),
        input_lower: assembly.input_lower.clone(),
        input_upper: assembly.input_upper.clone(),
        parameter_count: assembly.parameter_count(),
        policies: assembly
            .policies
            .iter()
            .map(|p| PolicyMeta {
                node: p.node,
                states: p.states.clone(),
                inputs: p.inputs.clone(),
                axes: p.lattice.axes.clone(),
            })
            .collect(),
        stats: assembly.stats.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::PolicyFormat(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    out.write_u64::<LittleEndian>(json.len() as u64)?;
    out.write_all(&json)?;
    for p in &assembly.policies {
        for &v in p.value.iter().chain(&p.actions) {
            out.write_f64::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

pub fn read_policy<R: Read>(input: &mut R) -> Result<(PolicyHeader, PolicyAssembly)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::PolicyFormat("not a policy file".into()));
    }
    let version = input.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::PolicyFormat(format!("unsupported format version {version}")));
    }
    let len = input.read_u64::<LittleEndian>()?;
    if len > 1 << 30 {
        return Err(Error::PolicyFormat("header too large".into()));
    }
    let mut json = vec![0u8; len as usize];
    input.read_exact(&mut json)?;
    let header: PolicyHeader = serde_json::from_slice(&json).map_err(|e| Error::PolicyFormat(e.to_string()))?;
    let tree: InputTree = header.tree.parse()?;
    let mut policies = Vec::with_capacity(header.policies.len());
    for meta in &header.policies {
        if meta.axes.len() != meta.states.len() {
            return Err(Error::PolicyFormat(format!("node {}: axis count mismatch", meta.node)));
        }
        let lattice = Lattice::new(meta.axes.clone());
        let cells = lattice.len();
        let mut read = |count: usize| -> Result<Vec<f64>> {
            let mut v = vec![0.0; count];
            input.read_f64_into::<LittleEndian>(&mut v)?;
            Ok(v)
        };
        let value = read(cells)?;
        let actions = read(cells * meta.inputs.len())?;
        policies.push(TabularPolicy {
            node: meta.node,
            states: meta.states.clone(),
            inputs: meta.inputs.clone(),
            lattice,
            value,
            actions,
        });
    }
    let assembly = PolicyAssembly {
        tree,
        policies,
        stats: header.stats.clone(),
        goal_input: header.goal_input.clone(),
        input_lower: header.input_lower.clone(),
        input_upper: header.input_upper.clone(),
    };
    Ok((header, assembly))
}

fn write_comment<W: Write>(out: &mut W, artifact: &ArtifactHeader, model: &str) -> Result<()> {
    let seed = artifact.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    writeln!(
        out,
        "# pdecomp {} model={model} seed={seed} config={}",
        artifact.tool_version, artifact.config_digest
    )?;
    Ok(())
}

/// Columns: `t`, one per state name, one per input name.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    artifact: &ArtifactHeader,
    model: &SystemModel,
    traj: &Trajectory,
) -> Result<()> {
    write_comment(out, artifact, &model.name)?;
    let status = match &traj.diverged {
        Some(d) => format!("diverged at t={} ({})", d.time, d.reason),
        None if traj.converged => "converged".to_string(),
        None => "not converged".to_string(),
    };
    writeln!(out, "# {status}; final weighted error {}", traj.final_error)?;
    let names: Vec<&str> = std::iter::once("t")
        .chain(model.state_names.iter().map(String::as_str))
        .chain(model.input_names.iter().map(String::as_str))
        .collect();
    writeln!(out, "{}", names.join(","))?;
    for k in 0..traj.times.len() {
        let row: Vec<String> = std::iter::once(traj.times[k])
            .chain(traj.states[k].iter().copied())
            .chain(traj.inputs[k].iter().copied())
            .map(|v| v.to_string())
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Columns: the two varied state names, then `converged` as 0/1.
pub fn write_basin_csv<W: Write>(
    out: &mut W,
    artifact: &ArtifactHeader,
    model: &SystemModel,
    field: &BasinField,
) -> Result<()> {
    write_comment(out, artifact, &model.name)?;
    let s = &field.slice;
    writeln!(out, "{},{},converged", model.state_name(s.dims.0), model.state_name(s.dims.1))?;
    let (xa, xb) = (s.axes.0.points(), s.axes.1.points());
    for (i, a) in xa.iter().enumerate() {
        for (j, b) in xb.iter().enumerate() {
            writeln!(out, "{a},{b},{}", u8::from(field.at(i, j)))?;
        }
    }
    Ok(())
}
