//! TOML defaults for flags: `--config-file` values fill in whatever the
//! command line left unset.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use toml::Table;

pub struct FileConfig {
    table: Table,
}

impl FileConfig {
    /// Loads the file, or returns an empty config when no path was given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let table = match path {
            None => Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config file {}", p.display()))?;
                text.parse::<Table>()
                    .with_context(|| format!("parsing config file {}", p.display()))?
            }
        };
        Ok(Self { table })
    }

    /// Fills `slot` from key `name` when the command line left it empty.
    pub fn fill_u64(&self, slot: &mut Option<u64>, name: &str) -> Result<()> {
        if slot.is_none() {
            if let Some(v) = self.table.get(name) {
                let i = v
                    .as_integer()
                    .with_context(|| format!("config key `{name}` must be an integer"))?;
                if i < 0 {
                    bail!("config key `{name}` must be non-negative");
                }
                *slot = Some(i as u64);
            }
        }
        Ok(())
    }

    pub fn fill_usize(&self, slot: &mut Option<usize>, name: &str) -> Result<()> {
        let mut v = slot.map(|x| x as u64);
        self.fill_u64(&mut v, name)?;
        *slot = v.map(|x| x as usize);
        Ok(())
    }

    pub fn fill_f64(&self, slot: &mut Option<f64>, name: &str) -> Result<()> {
        if slot.is_none() {
            if let Some(v) = self.table.get(name) {
                *slot = Some(match v {
                    toml::Value::Float(f) => *f,
                    toml::Value::Integer(i) => *i as f64,
                    _ => bail!("config key `{name}` must be a number"),
                });
            }
        }
        Ok(())
    }

    pub fn fill_string(&self, slot: &mut Option<String>, name: &str) -> Result<()> {
        if slot.is_none() {
            if let Some(v) = self.table.get(name) {
                let s = v
                    .as_str()
                    .with_context(|| format!("config key `{name}` must be a string"))?;
                *slot = Some(s.to_string());
            }
        }
        Ok(())
    }

    pub fn fill_path(&self, slot: &mut Option<PathBuf>, name: &str) -> Result<()> {
        let mut s = slot.as_ref().map(|p| p.display().to_string());
        self.fill_string(&mut s, name)?;
        *slot = s.map(PathBuf::from);
        Ok(())
    }

    /// Appends paths from an array key when the command line gave none.
    pub fn fill_paths(&self, slot: &mut Vec<PathBuf>, name: &str) -> Result<()> {
        if slot.is_empty() {
            if let Some(v) = self.table.get(name) {
                let arr = v
                    .as_array()
                    .with_context(|| format!("config key `{name}` must be an array"))?;
                for item in arr {
                    let s = item
                        .as_str()
                        .with_context(|| format!("config key `{name}` must hold strings"))?;
                    slot.push(PathBuf::from(s));
                }
            }
        }
        Ok(())
    }
}
