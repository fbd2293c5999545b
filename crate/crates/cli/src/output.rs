use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::commands::CliError;

/// Everything needed to rerun an invocation and get the same files back.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub args: Vec<String>,
    pub seed: u64,
    /// Parsed copy of the config file, if one was read.
    pub config: Option<serde_json::Value>,
    /// Resolved parameters after defaults were applied.
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
}

pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn writer(&mut self, name: &str) -> Result<BufWriter<fs::File>, CliError> {
        let path = self.root.join(name);
        let f = fs::File::create(&path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    /// Writes `manifest.json` listing every file produced so far.
    pub fn finish(
        mut self,
        command: &'static str,
        seed: u64,
        config: Option<&str>,
        parameters: serde_json::Value,
    ) -> Result<(), CliError> {
        let mut outputs = self.written.clone();
        outputs.push("manifest.json".into());
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            args: std::env::args().skip(1).collect(),
            seed,
            config: config.and_then(|t| serde_json::from_str(t).ok()),
            parameters,
            outputs,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest is serializable");
        self.write("manifest.json", &text)
    }
}

/// gnuplot script plotting per-component minima from `timeseries.csv`.
pub fn timeseries_script(ncomp: usize) -> String {
    let mut s = String::from(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't'\n\
         set ylabel 'min u_k'\n\
         set grid\n",
    );
    let plots: Vec<String> = (1..=ncomp)
        .map(|k| format!("'timeseries.csv' using 1:($2=={k} ? $3 : 1/0) with linespoints title 'u_{k}'"))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

/// Log–log plot of |rate| against ε.
pub fn scaling_script(csv: &str, column: usize, ylabel: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set logscale xy\n\
         set xlabel 'eps'\n\
         set ylabel '{ylabel}'\n\
         set grid\n\
         plot '{csv}' using 1:(abs(${column})) skip 1 with linespoints title '{ylabel}'\n"
    )
}
