use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::metrics::{AgentTag, RunTrace};

/// Sample cloud in `replica,iter,agent,dim0,…` layout.
#[derive(Debug, Clone)]
pub struct SampleDump {
    dim: usize,
    text: String,
    rows: usize,
}

impl SampleDump {
    pub fn new(dim: usize) -> Self {
        let mut text = String::from("replica,iter,agent");
        for k in 0..dim {
            let _ = write!(text, ",dim{k}");
        }
        text.push('\n');
        Self { dim, text, rows: 0 }
    }

    pub fn push(&mut self, replica: usize, iter: usize, agent: &AgentTag, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        let _ = write!(self.text, "{replica},{iter},{agent}");
        for v in x {
            let _ = write!(self.text, ",{v}");
        }
        self.text.push('\n');
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Everything written for one topology run.
pub struct RunFiles<'a> {
    pub config_echo: &'a str,
    pub trace: &'a RunTrace,
    pub samples: &'a SampleDump,
    pub seed: u64,
    pub topology: &'a str,
    pub threads: Option<usize>,
    pub wall_time: Duration,
}

pub fn write_run(dir: &Path, files: &RunFiles<'_>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("config.txt");
    fs::write(&path, files.config_echo).map_err(|e| Error::io(&path, e))?;

    let path = dir.join("trace.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    files
        .trace
        .write_csv(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&path, e))?;

    let path = dir.join("samples.csv");
    fs::write(&path, files.samples.as_str()).map_err(|e| Error::io(&path, e))?;

    let path = dir.join("manifest.txt");
    let manifest = format!(
        "seed={} topology={} threads={} wall_time_s={:.3} depsgld-core={} rand_chacha=0.9 rayon=1\n",
        files.seed,
        files.topology,
        files.threads.map_or_else(|| "auto".to_string(), |t| t.to_string()),
        files.wall_time.as_secs_f64(),
        env!("CARGO_PKG_VERSION"),
    );
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(())
}
