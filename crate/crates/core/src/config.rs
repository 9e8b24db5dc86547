//! Run configuration: a flat `section.key = value` text format.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are rejected. The
//! canonical rendering lists every key in a fixed order with Rust's shortest
//! round-trip number formatting; its SHA-256 is the config hash embedded in
//! every output file. Path keys are left out of the hash so that moving files
//! around does not change it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::baselines::PiConfig;
use crate::error::{Error, Result};
use crate::forecast::{NoiseRatios, PriceCurve, ProfileConfig};
use crate::grid::StateGrid;
use crate::method::{ControllerKind, Method};
use crate::models::{PvParams, TankParams};
use crate::solver::PriceScheme;

/// Which corrective settings to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectiveMode {
    On,
    Off,
    Both,
}

impl CorrectiveMode {
    pub fn settings(self) -> &'static [bool] {
        match self {
            CorrectiveMode::On => &[true],
            CorrectiveMode::Off => &[false],
            CorrectiveMode::Both => &[false, true],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CorrectiveMode::On => "on",
            CorrectiveMode::Off => "off",
            CorrectiveMode::Both => "both",
        }
    }
}

impl FromStr for CorrectiveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "on" => Ok(CorrectiveMode::On),
            "off" => Ok(CorrectiveMode::Off),
            "both" => Ok(CorrectiveMode::Both),
            _ => Err(Error::Config(format!(
                "corrective must be on, off or both, got `{s}`"
            ))),
        }
    }
}

/// Which price schemes to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeSelection {
    Fixed,
    Dynamic,
    Both,
}

impl SchemeSelection {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeSelection::Fixed => "fixed",
            SchemeSelection::Dynamic => "dynamic",
            SchemeSelection::Both => "both",
        }
    }
}

impl FromStr for SchemeSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(SchemeSelection::Fixed),
            "dynamic" => Ok(SchemeSelection::Dynamic),
            "both" => Ok(SchemeSelection::Both),
            _ => Err(Error::Config(format!(
                "price scheme must be fixed, dynamic or both, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tank: TankParams,
    /// Tank values in the units written to the file.
    pub tank_table: TankTable,
    pub pv: PvParams,
    pub grid: GridAxes,
    pub profile: ProfileConfig,
    pub buy: f64,
    pub sell: f64,
    pub currency: String,
    pub comfort_penalty: f64,
    pub pi: PiConfig,
    pub initial_temp: f64,
    pub seed_base: u64,
    pub seeds: usize,
    pub controllers: Vec<Method>,
    pub corrective: CorrectiveMode,
    pub price_scheme: SchemeSelection,
    /// Forecast series to solve on; relative paths resolve against the output directory.
    pub series_path: String,
}

/// Tank parameters as written in the config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankTable {
    pub a_j_per_min_c: f64,
    pub c_w_j_per_g_c: f64,
    pub m_w_kg: f64,
    pub t_in_c: f64,
    pub t_out_c: f64,
    pub t_room_c: f64,
    pub p_max_kw: f64,
}

impl Default for TankTable {
    fn default() -> Self {
        TankTable {
            a_j_per_min_c: 128.38,
            c_w_j_per_g_c: 4.1813,
            m_w_kg: 196.82,
            t_in_c: 10.0,
            t_out_c: 60.0,
            t_room_c: 22.0,
            p_max_kw: 4.5,
        }
    }
}

impl TankTable {
    pub fn params(&self) -> Result<TankParams> {
        TankParams::from_table_units(
            self.a_j_per_min_c,
            self.c_w_j_per_g_c,
            self.m_w_kg,
            self.t_in_c,
            self.t_out_c,
            self.t_room_c,
            self.p_max_kw,
        )
    }
}

/// Grid settings without horizon and step, which come from the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxes {
    pub t_min: f64,
    pub t_max: f64,
    pub dx: f64,
    pub du: f64,
    pub comfort_min: f64,
    pub comfort_max: f64,
}

impl Default for GridAxes {
    fn default() -> Self {
        GridAxes {
            t_min: 40.0,
            t_max: 95.0,
            dx: 0.1,
            du: 0.05,
            comfort_min: 60.0,
            comfort_max: 80.0,
        }
    }
}

impl GridAxes {
    pub fn grid(&self, horizon: usize, dt: f64) -> Result<StateGrid> {
        StateGrid::new(
            self.t_min,
            self.t_max,
            self.dx,
            self.du,
            self.comfort_min,
            self.comfort_max,
            horizon,
            dt,
        )
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let tank_table = TankTable::default();
        RunConfig {
            tank: tank_table
                .params()
                .expect("built-in tank parameters are valid"),
            tank_table,
            pv: PvParams::default(),
            grid: GridAxes::default(),
            profile: ProfileConfig::default(),
            buy: 0.30,
            sell: 0.10,
            currency: "EUR".into(),
            comfort_penalty: 10.0,
            pi: PiConfig::default(),
            initial_temp: 60.0,
            seed_base: 0,
            seeds: 20,
            controllers: Method::ALL.to_vec(),
            corrective: CorrectiveMode::Both,
            price_scheme: SchemeSelection::Both,
            series_path: "forecast.csv".into(),
        }
    }
}

/// Keys excluded from the hash.
const PATH_KEYS: [&str; 1] = ["paths.series"];

fn fmt_list<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

impl RunConfig {
    pub fn fixed_scheme(&self) -> PriceScheme {
        PriceScheme::Fixed {
            buy: self.buy,
            sell: self.sell,
        }
    }

    /// Price schemes selected for this run, fixed first.
    pub fn schemes(&self) -> Vec<PriceScheme> {
        match self.price_scheme {
            SchemeSelection::Fixed => vec![self.fixed_scheme()],
            SchemeSelection::Dynamic => vec![PriceScheme::Dynamic],
            SchemeSelection::Both => vec![self.fixed_scheme(), PriceScheme::Dynamic],
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed_base + i).collect()
    }

    pub fn controller_kinds(&self) -> Vec<ControllerKind> {
        let mut kinds: Vec<ControllerKind> = self
            .controllers
            .iter()
            .flat_map(|&m| {
                self.corrective
                    .settings()
                    .iter()
                    .map(move |&c| ControllerKind::new(m, c))
            })
            .collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }

    /// Ordered `(key, value)` pairs of the full configuration.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.tank_table;
        let pv = &self.pv;
        let g = &self.grid;
        let p = &self.profile;
        let (day, night, start, end) = match p.price {
            PriceCurve::Flat(v) => (v, v, 7.0, 22.0),
            PriceCurve::DayNight {
                day,
                night,
                day_start_h,
                day_end_h,
            } => (day, night, day_start_h, day_end_h),
        };
        vec![
            ("tank.a_j_per_min_c", t.a_j_per_min_c.to_string()),
            ("tank.c_w_j_per_g_c", t.c_w_j_per_g_c.to_string()),
            ("tank.m_w_kg", t.m_w_kg.to_string()),
            ("tank.t_in_c", t.t_in_c.to_string()),
            ("tank.t_out_c", t.t_out_c.to_string()),
            ("tank.t_room_c", t.t_room_c.to_string()),
            ("tank.p_max_kw", t.p_max_kw.to_string()),
            ("pv.p_stc_w", pv.p_stc.to_string()),
            ("pv.i_stc_w_m2", pv.i_stc.to_string()),
            ("pv.i_noct_w_m2", pv.i_noct.to_string()),
            ("pv.noct_c", pv.noct.to_string()),
            ("pv.t_amb_noct_c", pv.t_amb_noct.to_string()),
            ("pv.t_j_stc_c", pv.t_j_stc.to_string()),
            ("pv.gamma_per_c", pv.gamma.to_string()),
            ("pv.n_series", pv.n_series.to_string()),
            ("pv.n_parallel", pv.n_parallel.to_string()),
            ("grid.t_min_c", g.t_min.to_string()),
            ("grid.t_max_c", g.t_max.to_string()),
            ("grid.dx_c", g.dx.to_string()),
            ("grid.du", g.du.to_string()),
            ("grid.comfort_min_c", g.comfort_min.to_string()),
            ("grid.comfort_max_c", g.comfort_max.to_string()),
            ("profile.days", p.days.to_string()),
            ("profile.dt_s", p.dt.to_string()),
            (
                "profile.peak_irradiance_w_m2",
                p.peak_irradiance.to_string(),
            ),
            ("profile.weather", fmt_list(&p.weather, " ")),
            ("profile.water_daily_kg", p.water_daily_kg.to_string()),
            ("profile.el_scale", p.el_scale.to_string()),
            ("profile.price_day_per_kwh", day.to_string()),
            ("profile.price_night_per_kwh", night.to_string()),
            ("profile.day_start_h", start.to_string()),
            ("profile.day_end_h", end.to_string()),
            ("noise.water_ratio", p.noise.water.to_string()),
            ("noise.pv_ratio", p.noise.pv.to_string()),
            ("noise.el_ratio", p.noise.el.to_string()),
            ("noise.price_ratio", p.noise.price.to_string()),
            ("price.buy_per_kwh", self.buy.to_string()),
            ("price.sell_per_kwh", self.sell.to_string()),
            ("price.currency", self.currency.clone()),
            ("price.scheme", self.price_scheme.as_str().to_string()),
            ("solver.comfort_penalty", self.comfort_penalty.to_string()),
            ("pi.setpoint_c", self.pi.setpoint.to_string()),
            ("pi.kp", self.pi.kp.to_string()),
            ("pi.ki", self.pi.ki.to_string()),
            ("sim.initial_temp_c", self.initial_temp.to_string()),
            ("sim.seed_base", self.seed_base.to_string()),
            ("sim.seeds", self.seeds.to_string()),
            ("sim.controllers", fmt_list(&self.controllers, ",")),
            ("sim.corrective", self.corrective.as_str().to_string()),
            ("paths.series", self.series_path.clone()),
        ]
    }

    /// Canonical text of the hashed keys.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            if !PATH_KEYS.contains(&k) {
                let _ = writeln!(out, "{k}={v}");
            }
        }
        out
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Config file text with section comments.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# heatdp run configuration\n");
        let mut section = "";
        for (k, v) in self.entries() {
            let sec = k.split('.').next().unwrap_or("");
            if sec != section {
                section = sec;
                let _ = writeln!(out, "\n# {section}");
            }
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Parse a config file; keys that are absent keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    i + 1
                ))
            })?;
            let k = k.trim().to_string();
            if map.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{k}`",
                    i + 1
                )));
            }
        }
        let mut cfg = RunConfig::default();
        let known: Vec<&str> = cfg.entries().iter().map(|e| e.0).collect();
        if let Some(bad) = map.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown config key `{bad}`")));
        }
        let r = Reader { map: &map };
        let t = &mut cfg.tank_table;
        r.num("tank.a_j_per_min_c", &mut t.a_j_per_min_c)?;
        r.num("tank.c_w_j_per_g_c", &mut t.c_w_j_per_g_c)?;
        r.num("tank.m_w_kg", &mut t.m_w_kg)?;
        r.num("tank.t_in_c", &mut t.t_in_c)?;
        r.num("tank.t_out_c", &mut t.t_out_c)?;
        r.num("tank.t_room_c", &mut t.t_room_c)?;
        r.num("tank.p_max_kw", &mut t.p_max_kw)?;
        let pv = &mut cfg.pv;
        r.num("pv.p_stc_w", &mut pv.p_stc)?;
        r.num("pv.i_stc_w_m2", &mut pv.i_stc)?;
        r.num("pv.i_noct_w_m2", &mut pv.i_noct)?;
        r.num("pv.noct_c", &mut pv.noct)?;
        r.num("pv.t_amb_noct_c", &mut pv.t_amb_noct)?;
        r.num("pv.t_j_stc_c", &mut pv.t_j_stc)?;
        r.num("pv.gamma_per_c", &mut pv.gamma)?;
        r.num("pv.n_series", &mut pv.n_series)?;
        r.num("pv.n_parallel", &mut pv.n_parallel)?;
        let g = &mut cfg.grid;
        r.num("grid.t_min_c", &mut g.t_min)?;
        r.num("grid.t_max_c", &mut g.t_max)?;
        r.num("grid.dx_c", &mut g.dx)?;
        r.num("grid.du", &mut g.du)?;
        r.num("grid.comfort_min_c", &mut g.comfort_min)?;
        r.num("grid.comfort_max_c", &mut g.comfort_max)?;
        let p = &mut cfg.profile;
        r.num("profile.days", &mut p.days)?;
        r.num("profile.dt_s", &mut p.dt)?;
        r.num("profile.peak_irradiance_w_m2", &mut p.peak_irradiance)?;
        if let Some(w) = map.get("profile.weather") {
            p.weather = w
                .split_whitespace()
                .map(|x| parse_value::<f64>("profile.weather", x))
                .collect::<Result<_>>()?;
        }
        r.num("profile.water_daily_kg", &mut p.water_daily_kg)?;
        r.num("profile.el_scale", &mut p.el_scale)?;
        let (mut day, mut night, mut start, mut end) = (0.30, 0.30, 7.0, 22.0);
        r.num("profile.price_day_per_kwh", &mut day)?;
        r.num("profile.price_night_per_kwh", &mut night)?;
        r.num("profile.day_start_h", &mut start)?;
        r.num("profile.day_end_h", &mut end)?;
        p.price = if day == night {
            PriceCurve::Flat(day)
        } else {
            PriceCurve::DayNight {
                day,
                night,
                day_start_h: start,
                day_end_h: end,
            }
        };
        let n: &mut NoiseRatios = &mut p.noise;
        r.num("noise.water_ratio", &mut n.water)?;
        r.num("noise.pv_ratio", &mut n.pv)?;
        r.num("noise.el_ratio", &mut n.el)?;
        r.num("noise.price_ratio", &mut n.price)?;
        r.num("price.buy_per_kwh", &mut cfg.buy)?;
        r.num("price.sell_per_kwh", &mut cfg.sell)?;
        if let Some(c) = map.get("price.currency") {
            cfg.currency = c.clone();
        }
        r.num("price.scheme", &mut cfg.price_scheme)?;
        r.num("solver.comfort_penalty", &mut cfg.comfort_penalty)?;
        r.num("pi.setpoint_c", &mut cfg.pi.setpoint)?;
        r.num("pi.kp", &mut cfg.pi.kp)?;
        r.num("pi.ki", &mut cfg.pi.ki)?;
        r.num("sim.initial_temp_c", &mut cfg.initial_temp)?;
        r.num("sim.seed_base", &mut cfg.seed_base)?;
        r.num("sim.seeds", &mut cfg.seeds)?;
        if let Some(list) = map.get("sim.controllers") {
            cfg.controllers = list
                .split(',')
                .map(|m| m.trim().parse())
                .collect::<Result<_>>()?;
        }
        r.num("sim.corrective", &mut cfg.corrective)?;
        if let Some(path) = map.get("paths.series") {
            cfg.series_path = path.clone();
        }
        cfg.refresh()?;
        Ok(cfg)
    }

    /// Rebuild derived parameters and check every invariant.
    pub fn refresh(&mut self) -> Result<()> {
        self.tank = self.tank_table.params()?;
        self.profile.pv = self.pv.clone();
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.pv.validate()?;
        self.profile.validate()?;
        self.grid.grid(1, self.profile.dt)?;
        PiConfig::validate(&self.pi)?;
        let g = &self.grid;
        if !(g.t_min..=g.t_max).contains(&self.pi.setpoint) {
            return Err(Error::Config(format!(
                "PI setpoint {} outside the grid range",
                self.pi.setpoint
            )));
        }
        if !self.initial_temp.is_finite() {
            return Err(Error::Config("initial temperature must be finite".into()));
        }
        if !(self.comfort_penalty >= 0.0) || !self.comfort_penalty.is_finite() {
            return Err(Error::Config(
                "comfort penalty must be finite and >= 0".into(),
            ));
        }
        if !self.buy.is_finite() || !self.sell.is_finite() {
            return Err(Error::Config("buy and sell prices must be finite".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.controllers.is_empty() {
            return Err(Error::Config("at least one controller is required".into()));
        }
        if self.currency.is_empty() || self.currency.contains(['\n', '#', '=']) {
            return Err(Error::Config("currency label must be a plain word".into()));
        }
        Ok(())
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("bad value for `{key}`: `{raw}`")))
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Reader<'_> {
    fn num<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(raw) = self.map.get(key) {
            *slot = parse_value(key, raw)?;
        }
        Ok(())
    }
}
