//! Policy and cost-to-go tables and their CSV form.

use crate::error::{Error, Result};
use crate::grid::{Overflow, StateGrid};
use crate::io::{CsvDoc, ParsedCsv};
use crate::method::Method;

/// Optimal control index per (step, state).
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub grid: StateGrid,
    pub method: Method,
    pub config_hash: String,
    controls: Vec<u16>,
}

/// Outcome of a policy lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub control: f64,
    pub state: usize,
    /// The temperature lay outside the grid and was clamped to a boundary state.
    pub clamped: bool,
}

impl Policy {
    pub fn new(grid: StateGrid, method: Method, controls: Vec<u16>) -> Result<Self> {
        if controls.len() != grid.horizon * grid.n_states() {
            return Err(Error::Config(format!(
                "policy table has {} entries, grid needs {}",
                controls.len(),
                grid.horizon * grid.n_states()
            )));
        }
        if let Some(bad) = controls.iter().find(|&&c| c as usize >= grid.n_controls()) {
            return Err(Error::Config(format!(
                "control index {bad} outside the control grid"
            )));
        }
        Ok(Policy {
            grid,
            method,
            config_hash: String::new(),
            controls,
        })
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = hash.into();
        self
    }

    pub fn control_index(&self, k: usize, state: usize) -> usize {
        self.controls[k * self.grid.n_states() + state] as usize
    }

    pub fn control(&self, k: usize, state: usize) -> f64 {
        self.grid.control(self.control_index(k, state))
    }

    /// Raw control indices, step-major.
    pub fn table(&self) -> &[u16] {
        &self.controls
    }

    /// Write the table rows only (no metadata), used for table comparisons.
    pub fn table_csv(&self) -> String {
        let mut doc = CsvDoc::new();
        self.write_rows(&mut doc);
        doc.finish()
    }

    fn write_rows(&self, doc: &mut CsvDoc) {
        doc.row(["k", "state_idx", "temp_c", "control"]);
        let n = self.grid.n_states();
        for k in 0..self.grid.horizon {
            for s in 0..n {
                doc.row([
                    k.to_string(),
                    s.to_string(),
                    self.grid.temp(s).to_string(),
                    self.control(k, s).to_string(),
                ]);
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut doc = CsvDoc::new();
        doc.meta("kind", "policy").meta("method", self.method);
        write_grid_meta(&mut doc, &self.grid);
        doc.meta("config_hash", &self.config_hash);
        self.write_rows(&mut doc);
        doc.finish()
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let csv = ParsedCsv::parse(text, "policy csv")?;
        let grid = read_grid_meta(&csv)?;
        let method: Method = csv
            .meta
            .get("method")
            .ok_or_else(|| Error::parse("policy csv", "missing metadata `method`"))?
            .parse()?;
        let cols = csv.require_columns(&["k", "state_idx", "temp_c", "control"])?;
        let n = grid.n_states();
        if csv.rows.len() != grid.horizon * n {
            return Err(Error::parse(
                "policy csv",
                format!(
                    "expected {} rows, found {}",
                    grid.horizon * n,
                    csv.rows.len()
                ),
            ));
        }
        let mut controls = vec![0u16; grid.horizon * n];
        for r in 0..csv.rows.len() {
            let k: usize = csv.field(r, cols[0])?;
            let s: usize = csv.field(r, cols[1])?;
            let u: f64 = csv.field(r, cols[3])?;
            if k >= grid.horizon || s >= n {
                return Err(Error::parse("policy csv", format!("row {r} out of range")));
            }
            controls[k * n + s] = grid.control_index(u) as u16;
        }
        let hash = csv.meta.get("config_hash").cloned().unwrap_or_default();
        Ok(Policy::new(grid, method, controls)?.with_config_hash(hash))
    }
}

/// Look up the stored control for step `k` at a (possibly off-grid) temperature.
pub fn policy_lookup(policy: &Policy, k: usize, temp: f64) -> Result<Lookup> {
    if k >= policy.grid.horizon {
        return Err(Error::Domain(format!(
            "step {k} outside the policy horizon {}",
            policy.grid.horizon
        )));
    }
    if !temp.is_finite() {
        return Err(Error::Numerical(format!("non-finite temperature {temp}")));
    }
    let (state, overflow) = policy.grid.locate(temp);
    Ok(Lookup {
        control: policy.control(k, state),
        state,
        clamped: overflow != Overflow::None,
    })
}

/// Expected cost-to-go per (step, state); layer `horizon` holds the terminal cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostToGo {
    n_states: usize,
    values: Vec<f64>,
}

impl CostToGo {
    pub(crate) fn new(n_states: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len() % n_states, 0);
        CostToGo { n_states, values }
    }

    pub fn layers(&self) -> usize {
        self.values.len() / self.n_states
    }

    pub fn layer(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_states..(k + 1) * self.n_states]
    }

    pub fn get(&self, k: usize, state: usize) -> f64 {
        self.values[k * self.n_states + state]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_csv(&self, grid: &StateGrid, config_hash: &str) -> String {
        let mut doc = CsvDoc::new();
        doc.meta("kind", "cost_to_go");
        write_grid_meta(&mut doc, grid);
        doc.meta("config_hash", config_hash);
        doc.row(["k", "state_idx", "temp_c", "cost"]);
        for k in 0..self.layers() {
            for s in 0..self.n_states {
                doc.row([
                    k.to_string(),
                    s.to_string(),
                    grid.temp(s).to_string(),
                    self.get(k, s).to_string(),
                ]);
            }
        }
        doc.finish()
    }
}

fn write_grid_meta(doc: &mut CsvDoc, grid: &StateGrid) {
    doc.meta("grid.t_min_c", grid.t_min)
        .meta("grid.t_max_c", grid.t_max)
        .meta("grid.dx_c", grid.dx)
        .meta("grid.du", grid.du)
        .meta("grid.comfort_min_c", grid.comfort_min)
        .meta("grid.comfort_max_c", grid.comfort_max)
        .meta("grid.horizon", grid.horizon)
        .meta("grid.dt_s", grid.dt);
}

fn read_grid_meta(csv: &ParsedCsv) -> Result<StateGrid> {
    StateGrid::new(
        csv.meta_value("grid.t_min_c")?,
        csv.meta_value("grid.t_max_c")?,
        csv.meta_value("grid.dx_c")?,
        csv.meta_value("grid.du")?,
        csv.meta_value("grid.comfort_min_c")?,
        csv.meta_value("grid.comfort_max_c")?,
        csv.meta_value("grid.horizon")?,
        csv.meta_value("grid.dt_s")?,
    )
}
