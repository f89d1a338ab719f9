//! Config file handling: TOML in, validated [`SimConfig`] out.
//!
//! Every field is optional in the file; omitted values take the documented
//! defaults, so an empty file is a valid experiment definition. Unknown keys
//! are rejected rather than silently ignored.

use std::path::Path;

use chrono::NaiveDate;

use crate::error::Error;
use crate::sim::{SimConfig, SweepGrid};
use crate::sun::Site;
use crate::Result;

/// Parse and validate a config document.
pub fn parse_config_str(input: &str) -> Result<SimConfig> {
    let config: SimConfig =
        toml::from_str(input).map_err(|e| Error::config(e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Load and validate a config file.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Serialize a config with every field spelled out, for `validate-config`
/// echoes and reproducibility records. Round-trips through
/// [`parse_config_str`] to an equal [`SimConfig`].
pub fn config_to_toml(config: &SimConfig) -> Result<String> {
    toml::to_string_pretty(config).map_err(|e| Error::config(format!("serialize: {e}")))
}

/// Parse a sweep grid document: `[[runs]]` tables of config overrides.
pub fn parse_grid_str(input: &str) -> Result<SweepGrid> {
    let grid: SweepGrid =
        toml::from_str(input).map_err(|e| Error::config(e.message().to_string()))?;
    if grid.runs.is_empty() {
        return Err(Error::config("grid must contain at least one [[runs]] table"));
    }
    Ok(grid)
}

pub fn load_grid(path: &Path) -> Result<SweepGrid> {
    let text = std::fs::read_to_string(path)?;
    parse_grid_str(&text)
}

/// Parse a `lat,lon,utc_offset` site triple, as given on the command line.
pub fn parse_site(input: &str) -> Result<Site> {
    let parts: Vec<&str> = input.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::config(format!(
            "site must be 'lat,lon,utc_offset', got '{input}'"
        )));
    }
    let mut values = [0.0f64; 3];
    for (slot, (name, raw)) in values
        .iter_mut()
        .zip(["latitude", "longitude", "utc offset"].iter().zip(&parts))
    {
        *slot = raw
            .parse()
            .map_err(|_| Error::config(format!("site {name} '{raw}' is not a number")))?;
    }
    let site = Site::new(values[0], values[1], values[2]);
    site.validate()?;
    Ok(site)
}

/// Parse a `YYYY-MM-DD` date.
pub fn parse_date(input: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(input.trim(), "%Y-%m-%d")
        .map_err(|e| Error::config(format!("date '{input}': {e}")))
}
