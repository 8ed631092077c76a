use std::fs;
use std::path::{Path, PathBuf};

use inkmorph::pgm::{self, Polarity};
use inkmorph::ImageGrid;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// File access for one run. Records inputs and every file or directory
/// it creates so a failed run can be rolled back.
#[derive(Debug)]
pub struct RunContext {
    pub polarity: Polarity,
    inputs: Vec<PathBuf>,
    created_files: Vec<PathBuf>,
    created_dirs: Vec<PathBuf>,
}

impl RunContext {
    pub fn new(polarity: Polarity) -> Self {
        Self {
            polarity,
            inputs: Vec::new(),
            created_files: Vec::new(),
            created_dirs: Vec::new(),
        }
    }

    pub fn inputs(&self) -> &[PathBuf] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[PathBuf] {
        &self.created_files
    }

    pub fn read_pgm(&mut self, path: &Path) -> CliResult<ImageGrid> {
        let img = pgm::read(path, self.polarity).map_err(|e| CliError::at(path, e))?;
        self.inputs.push(path.to_path_buf());
        Ok(img)
    }

    pub fn ensure_dir(&mut self, dir: &Path) -> CliResult<()> {
        if dir.as_os_str().is_empty() || dir.is_dir() {
            return Ok(());
        }
        if let Some(parent) = dir.parent() {
            self.ensure_dir(parent)?;
        }
        fs::create_dir(dir).map_err(|e| CliError::io(dir, e))?;
        self.created_dirs.push(dir.to_path_buf());
        Ok(())
    }

    fn prepare(&mut self, path: &Path) -> CliResult<()> {
        if let Some(parent) = path.parent() {
            self.ensure_dir(parent)?;
        }
        if !self.created_files.iter().any(|p| p == path) {
            self.created_files.push(path.to_path_buf());
        }
        Ok(())
    }

    pub fn write_pgm(&mut self, path: &Path, image: &ImageGrid) -> CliResult<()> {
        self.prepare(path)?;
        pgm::write(path, image, self.polarity).map_err(|e| CliError::at(path, e))
    }

    pub fn write_text(&mut self, path: &Path, text: &str) -> CliResult<()> {
        self.prepare(path)?;
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> CliResult<()> {
        self.write_text(path, &to_json(value))
    }

    /// Removes everything this run created, newest first.
    pub fn roll_back(&mut self) {
        for f in self.created_files.drain(..).rev() {
            let _ = fs::remove_file(f);
        }
        for d in self.created_dirs.drain(..).rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}
